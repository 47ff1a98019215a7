"""Convergence studies: build meshes, assemble, solve, measure errors.

A study is described by a :class:`StudyConfig`, read from a flat
``key = value`` file (``#`` starts a comment). Recognised keys::

    scheme       BDM1-P0 | BDM1-L1 | RT1-L1 | RT1-P1
    dim          2 | 3
    ell          one | varpi | zero
    levels       comma separated mesh parameters n (strictly increasing)
    formulation  MFE | MS-MFE | both
    tol          relative tolerance of the reduced (Schur) solve
    full_tol     relative tolerance of the full GMRES solve
    mesh_files   optional comma separated msh files, one per level
    output_dir   directory for the reports
    name         file stem of the reports
    formats      comma separated subset of csv, markdown
    mu_sigma, muc_sigma, lam_sigma, mu_omega, muc_omega, lam_omega
"""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .assembly import SaddleSystem, assemble_system, get_scheme
from .mesh import (
    barycentric_subdivide,
    build_structured_cube,
    build_structured_square,
    import_simplicial,
)
from .model import LengthScale, ManufacturedCase, MaterialParams
from .quadrature import gauss_rule
from .solve import full_saddle_solve, solve_reduced

log = logging.getLogger(__name__)

OUTPUT_ENV = "COSSERAT_MSMFE_OUTPUT"
CSV_HEADER = [
    "scheme", "formulation", "dim", "ell", "level", "h",
    "err_sigma", "ord_sigma", "err_omega", "ord_omega",
    "err_u", "ord_u", "err_r", "ord_r",
    "dof_full", "dof_schur", "iters", "seconds",
]
FIELDS = ("sigma", "omega", "u", "r")
FORMULATIONS = ("MFE", "MS-MFE")


def default_levels(scheme: str, dim: int) -> list[int]:
    rt = get_scheme(scheme).stress == "RT1"
    if dim == 2:
        return [6, 12, 24] if rt else [6, 12, 24, 48]
    return [3, 6] if rt else [3, 6, 9]


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "results"))


@dataclass
class StudyConfig:
    scheme: str = "BDM1-P0"
    dim: int = 2
    ell: str = "one"
    levels: list = field(default_factory=list)
    formulation: str = "MS-MFE"
    tol: float = 1e-10
    full_tol: float = 1e-8
    mesh_files: list = field(default_factory=list)
    output_dir: str | None = None
    name: str | None = None
    formats: list = field(default_factory=lambda: ["csv", "markdown"])
    params: MaterialParams = field(default_factory=MaterialParams)

    def __post_init__(self):
        self.scheme = get_scheme(self.scheme).name
        self.dim = int(self.dim)
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        LengthScale.from_name(self.ell)
        if self.formulation not in FORMULATIONS + ("both",):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.mesh_files:
            if not self.levels:
                self.levels = list(range(1, len(self.mesh_files) + 1))
            if len(self.mesh_files) != len(self.levels):
                raise ValueError("need one mesh file per level")
        if not self.levels:
            self.levels = default_levels(self.scheme, self.dim)
        self.levels = [int(n) for n in self.levels]
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if not self.mesh_files and any(n < 3 or n % 3 for n in self.levels):
            raise ValueError("structured levels must be positive multiples of 3")
        bad = set(self.formats) - {"csv", "markdown"}
        if bad:
            raise ValueError(f"unknown report formats {sorted(bad)}")

    @property
    def formulations(self) -> tuple[str, ...]:
        return FORMULATIONS if self.formulation == "both" else (self.formulation,)

    @property
    def stem(self) -> str:
        return self.name or f"{self.scheme}_{self.dim}d_{self.ell}"

    def case(self) -> ManufacturedCase:
        return ManufacturedCase(self.dim, LengthScale.from_name(self.ell), self.params)

    def output_path(self) -> Path:
        return Path(self.output_dir) if self.output_dir else default_output_dir()


_PARAM_KEYS = {f.name for f in fields(MaterialParams)}
_LIST_KEYS = {"levels", "mesh_files", "formats"}


def _coerce(key: str, value: str):
    if key in _LIST_KEYS:
        items = [s.strip() for s in value.split(",") if s.strip()]
        return [int(s) for s in items] if key == "levels" else items
    if key in ("tol", "full_tol") or key in _PARAM_KEYS:
        return float(value)
    if key == "dim":
        return int(value)
    return value


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` pairs; unknown keys are rejected."""
    allowed = {f.name for f in fields(StudyConfig)} - {"params"} | _PARAM_KEYS
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def make_config(values: dict) -> StudyConfig:
    values = dict(values)
    pvals = {k: values.pop(k) for k in list(values) if k in _PARAM_KEYS}
    return StudyConfig(params=replace(MaterialParams(), **pvals), **values)


def load_config(path, overrides: dict | None = None) -> StudyConfig:
    values = parse_config_text(Path(path).read_text()) if path else {}
    values.update(overrides or {})
    return make_config(values)


# ------------------------------------------------------------------ errors


def compute_errors(spaces, eta, v, case: ManufacturedCase, degree: int = 6) -> dict:
    """L2 errors of the four fields plus the error of the cell means of u."""
    mesh = spaces.mesh
    rule = gauss_rule(mesh.dim, degree)
    w = rule.physical_weights(mesh)
    xq = mesh.map_points(rule.points)
    nc, nq, d = xq.shape
    u, r, sigma, omega = case.exact_fields(xq.reshape(-1, d))
    es, ew = spaces.split_eta(eta)
    eu, er = spaces.split_v(v)
    exact = {"sigma": sigma, "omega": omega, "u": u, "r": r}
    coeffs = {"sigma": es, "omega": ew, "u": eu, "r": er}
    space = {"sigma": spaces.sigma, "omega": spaces.omega, "u": spaces.u, "r": spaces.r}
    out = {}
    disc_u = None
    for name in FIELDS:
        approx = space[name].evaluate(coeffs[name], rule.points).reshape(nc, nq, -1)
        diff = approx - exact[name].reshape(nc, nq, -1)
        out[name] = math.sqrt(float(np.einsum("cq,cqk->", w, diff**2)))
        if name == "u":
            disc_u = diff
    vol = w.sum(axis=1)
    mean_diff = np.einsum("cq,cqk->ck", w, disc_u) / vol[:, None]
    out["u_mean"] = math.sqrt(float(np.sum(vol[:, None] * mean_diff**2)))
    return out


def compute_orders(hs, errors) -> list[float]:
    """Observed orders ``log(e_i/e_{i+1}) / log(h_i/h_{i+1})``; first entry nan.

    An order involving a zero error is undefined and reported as nan.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    orders = [math.nan]
    for i in range(1, len(errors)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 <= 0 or e1 <= 0:
            orders.append(math.nan)
        else:
            orders.append(float(np.log(e0 / e1) / np.log(hs[i - 1] / hs[i])))
    return orders


# ------------------------------------------------------------------ reports


@dataclass
class ReportRow:
    level: int
    h: float
    errors: dict
    dof_full: int
    dof_schur: int
    iters: int
    seconds: float
    residual: float
    momentum_residual: float
    omega_norm: float
    converged: bool
    orders: dict = field(default_factory=dict)


@dataclass
class ConvergenceReport:
    scheme: str
    formulation: str
    dim: int
    ell: str
    rows: list = field(default_factory=list)
    failed: bool = False
    message: str = ""

    def update_orders(self):
        hs = [row.h for row in self.rows]
        for name in FIELDS + ("u_mean",):
            orders = compute_orders(hs, [row.errors[name] for row in self.rows])
            for row, o in zip(self.rows, orders):
                row.orders[name] = o

    def column(self, name: str) -> list[float]:
        return [row.errors[name] for row in self.rows]

    def order_column(self, name: str) -> list[float]:
        return [row.orders[name] for row in self.rows]


def build_mesh(config: StudyConfig, index: int):
    if config.mesh_files:
        mesh = import_simplicial(config.mesh_files[index], dim=config.dim)
    elif config.dim == 2:
        mesh = build_structured_square(config.levels[index])
    else:
        mesh = build_structured_cube(config.levels[index])
    if get_scheme(config.scheme).barycentric and not mesh.barycentric:
        mesh = barycentric_subdivide(mesh)
    return mesh


def momentum_residual(system: SaddleSystem, eta) -> float:
    """``||B eta - f||_inf / ||f||_inf``."""
    fnorm = np.abs(system.f).max()
    res = np.abs(system.B @ eta - system.f).max()
    return float(res / fnorm) if fnorm > 0 else float(res)


def solve_system(system: SaddleSystem, config: StudyConfig):
    if system.formulation == "MS-MFE":
        return solve_reduced(system, tol=config.tol)
    return full_saddle_solve(system, system.extra["A_h"], tol=config.full_tol)


def run_level(config: StudyConfig, index: int, formulation: str, mesh=None):
    """Assemble and solve one level; returns ``(row, system, eta, v)``."""
    mesh = build_mesh(config, index) if mesh is None else mesh
    case = config.case()
    t0 = time.perf_counter()
    system = assemble_system(mesh, config.scheme, case, formulation)
    eta, v, report = solve_system(system, config)
    seconds = time.perf_counter() - t0
    errors = compute_errors(system.spaces, eta, v, case)
    _, omega_h = system.spaces.split_eta(eta)
    omega_norm = math.sqrt(float(omega_h @ (system.spaces.omega.mass_matrix() @ omega_h)))
    row = ReportRow(
        level=config.levels[index],
        h=mesh.h,
        errors=errors,
        dof_full=system.spaces.dof_full,
        dof_schur=system.spaces.dof_schur,
        iters=report.iterations,
        seconds=seconds,
        residual=report.residual,
        momentum_residual=momentum_residual(system, eta),
        omega_norm=omega_norm,
        converged=report.converged,
    )
    return row, system, eta, v


def run_case(config: StudyConfig) -> dict:
    """Run every level for every requested formulation.

    Returns ``{formulation: ConvergenceReport}``. A level whose solver does
    not converge stops that formulation with ``failed = True``.
    """
    reports = {
        f: ConvergenceReport(config.scheme, f, config.dim, config.ell)
        for f in config.formulations
    }
    for index in range(len(config.levels)):
        mesh = build_mesh(config, index)
        for f, rep in reports.items():
            if rep.failed:
                continue
            row, *_ = run_level(config, index, f, mesh)
            rep.rows.append(row)
            log.info(
                "%s %s n=%d h=%.3e iters=%d %.2fs", config.scheme, f, row.level, row.h,
                row.iters, row.seconds,
            )
            if not row.converged:
                rep.failed = True
                rep.message = f"solver did not converge at level {row.level}"
    for rep in reports.values():
        rep.update_orders()
    return reports


def _fmt(x: float, spec: str) -> str:
    return "nan" if math.isnan(x) else format(x, spec)


def report_rows(report: ConvergenceReport) -> list[list[str]]:
    out = []
    for i, row in enumerate(report.rows):
        line = [report.scheme, report.formulation, str(report.dim), report.ell, str(row.level),
                _fmt(row.h, ".6e")]
        for name in FIELDS:
            line.append(_fmt(row.errors[name], ".6e"))
            line.append("" if i == 0 else _fmt(row.orders[name], ".4f"))
        line += [str(row.dof_full), str(row.dof_schur), str(row.iters), f"{row.seconds:.3f}"]
        out.append(line)
    return out


def write_csv(reports, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rep in reports:
            writer.writerows(report_rows(rep))
    return path


_GREEK = {"sigma": "σ", "omega": "ω", "u": "u", "r": "r"}


def markdown_table(report: ConvergenceReport) -> str:
    head = ["h"]
    for name in FIELDS:
        head += [f"Error({_GREEK[name]})", "Order"]
    head.append("DoF")
    lines = [
        f"### {report.scheme} {report.formulation} ({report.dim}D, ell = {report.ell})",
        "",
        "| " + " | ".join(head) + " |",
        "|" + "---|" * len(head),
    ]
    for i, row in enumerate(report.rows):
        cells = [f"{row.h:.2e}"]
        for name in FIELDS:
            cells.append(f"{row.errors[name]:.2e}")
            cells.append("-" if i == 0 else _fmt(row.orders[name], ".2f"))
        dof = row.dof_schur if report.formulation == "MS-MFE" else row.dof_full
        cells.append(f"{dof:.2e}")
        lines.append("| " + " | ".join(cells) + " |")
    if report.failed:
        lines += ["", f"FAILED: {report.message}"]
    return "\n".join(lines) + "\n"


def write_markdown(reports, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(markdown_table(rep) for rep in reports))
    return path


def emit_report(reports, path, fmt: str = "csv") -> Path:
    """Write reports as ``csv`` or ``markdown``; raises ``OSError`` if unwritable."""
    reports = list(reports.values()) if isinstance(reports, dict) else list(reports)
    if fmt == "csv":
        return write_csv(reports, path)
    if fmt == "markdown":
        return write_markdown(reports, path)
    raise ValueError(f"unknown format {fmt!r}")


def run_study(config: StudyConfig) -> tuple[dict, list[Path]]:
    """Run and write every requested report format."""
    reports = run_case(config)
    out_dir = config.output_path()
    written = []
    suffix = {"csv": ".csv", "markdown": ".md"}
    for fmt in config.formats:
        written.append(emit_report(reports, out_dir / (config.stem + suffix[fmt]), fmt))
    return reports, written
