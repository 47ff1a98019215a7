"""Acceptance suite: twelve criteria, each reported as one pass/fail line.

Study runs are cached per configuration so criteria that inspect the same
runs (momentum balance, formulation agreement, DOF accounting) reuse them.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .assembly import assemble_system
from .diagnostics import inf_sup_constant
from .mesh import barycentric_subdivide, build_structured_cube, build_structured_square, compute_topology
from .model import LengthScale, ManufacturedCase
from .quadrature import gauss_rule, q1_rule, q2_rule
from .solve import factor_block_diagonal, postprocess_stress, schur_solve
from .study import StudyConfig, run_case


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f}s)"


@lru_cache(maxsize=None)
def study(scheme: str, dim: int, ell: str, levels: tuple, formulation: str = "both"):
    """Cached :func:`run_case` returning ``{formulation: report}``."""
    t0 = time.perf_counter()
    reports = run_case(StudyConfig(scheme=scheme, dim=dim, ell=ell, levels=list(levels),
                                   formulation=formulation, formats=[]))
    _elapsed[(scheme, dim, ell, levels, formulation)] = time.perf_counter() - t0
    return reports


_elapsed: dict = {}


def _timed_studies(keys):
    t0 = time.perf_counter()
    out = [study(*k) for k in keys]
    return out, time.perf_counter() - t0


def _check_orders(report, bands: dict, last: int | None = None):
    """Return a list of violations ``field n=..: order`` for order bands."""
    bad = []
    idx = range(1, len(report.rows))
    if last is not None:
        idx = list(idx)[-last:]
    for name, (lo, hi) in bands.items():
        for i in idx:
            o = report.rows[i].orders[name]
            if math.isnan(o) or o < lo or o > hi:
                bad.append(f"{report.formulation}/{report.ell} {name}@n={report.rows[i].level}:{o:.2f}")
    return bad


def _summary(reports, names):
    parts = []
    for rep in reports:
        last = rep.rows[-1]
        ords = ",".join(f"{n}={last.orders[n]:.2f}" for n in names)
        parts.append(f"{rep.formulation}/{rep.ell}[{ords}]")
    return " ".join(parts)


# --------------------------------------------------------------- criterion 1


def _random_piecewise(rng, mesh, degree, count):
    """Per-cell random polynomials as callables of barycentric points."""
    d = mesh.dim
    if degree == 1:
        coef = rng.standard_normal((count, mesh.num_cells, d + 1))

        def ev(bary):
            return np.einsum("fca,qa->fcq", coef, bary)
    else:
        pairs = [(i, j) for i in range(d + 1) for j in range(i, d + 1)]
        coef = rng.standard_normal((count, mesh.num_cells, len(pairs)))

        def ev(bary):
            basis = np.stack([bary[:, i] * bary[:, j] for i, j in pairs], axis=1)
            return np.einsum("fca,qa->fcq", coef, basis)
    return ev


def quadrature_check(samples: int = 500, levels=(3, 6, 12), seed: int = 1):
    """Exactness errors and norm-ratio statistics of the lumping rules."""
    rng = np.random.default_rng(seed)
    worst_exact = 0.0
    stats = {}
    for dim in (2, 3):
        for degree, rule in ((1, q1_rule(dim)), (2, q2_rule(dim))):
            means, lows, highs = [], [], []
            for n in levels if dim == 2 else levels[:2]:
                mesh = build_structured_square(n) if dim == 2 else build_structured_cube(n)
                ev = _random_piecewise(rng, mesh, degree, samples)
                g = gauss_rule(dim, 4)
                wg, wq = g.physical_weights(mesh), rule.physical_weights(mesh)
                fg, fq = ev(g.points), ev(rule.points)
                exact = np.einsum("cq,fcq->f", wg, fg)
                approx = np.einsum("cq,fcq->f", wq, fq)
                scale = np.einsum("cq,fcq->f", wg, np.abs(fg))
                worst_exact = max(worst_exact, float(np.max(np.abs(exact - approx) / scale)))
                ratio = np.sqrt(np.einsum("cq,fcq->f", wq, fq**2) / np.einsum("cq,fcq->f", wg, fg**2))
                means.append(ratio.mean())
                lows.append(ratio.min())
                highs.append(ratio.max())
            stats[(dim, degree)] = (np.array(means), np.array(lows), np.array(highs))
    return worst_exact, stats


def criterion_1() -> CriterionResult:
    t0 = time.perf_counter()
    worst, stats = quadrature_check()
    ok = worst <= 1e-12
    notes = [f"exactness {worst:.1e}"]
    for (dim, deg), (means, lows, highs) in stats.items():
        drift = float(np.max(np.abs(means - means[0]) / means[0]))
        inside = bool(np.all(lows[1:] >= lows[0]) and np.all(highs[1:] <= highs[0]))
        finite = bool(np.all(np.isfinite(highs / lows)) and np.all(lows > 0))
        ok &= drift <= 0.05 and inside and finite
        notes.append(f"Q{deg}/{dim}D bracket [{lows[0]:.3f},{highs[0]:.3f}] drift {drift:.3f}")
    secs = time.perf_counter() - t0
    ok &= secs < 10
    return CriterionResult(1, "quadrature exactness and equivalence", bool(ok), "; ".join(notes), secs)


# ------------------------------------------------------------ criteria 2-6

C2 = [("BDM1-P0", 2, ell, (6, 12, 24, 48), "both") for ell in ("one", "varpi")]
C3 = [("BDM1-L1", 2, ell, (6, 12, 24, 48), "both") for ell in ("one", "varpi")]
C4 = [("RT1-L1", 2, ell, (6, 12, 24), "both") for ell in ("one", "zero")]
C5 = [("RT1-P1", 2, ell, (6, 12, 24), "both") for ell in ("one", "varpi")]
C6 = [("BDM1-P0", 3, "one", (3, 6, 9), "MS-MFE")]


def _reports(keys):
    runs, secs = _timed_studies(keys)
    reps = [rep for r in runs for rep in r.values()]
    return reps, secs


def criterion_2() -> CriterionResult:
    reps, secs = _reports(C2)
    band = {n: (0.8, 1.4) for n in ("sigma", "omega", "u", "r")}
    bad = [b for rep in reps for b in _check_orders(rep, band, last=2)]
    bad += [f"{r.formulation} failed" for r in reps if r.failed]
    ok = not bad and secs < 180
    detail = _summary(reps, band) + ("" if not bad else " | out of band: " + " ".join(bad))
    return CriterionResult(2, "BDM1-P0 convergence", ok, detail, secs)


def criterion_3() -> CriterionResult:
    reps, secs = _reports(C3)
    band = {n: (0.8, 1.4) for n in ("sigma", "omega", "u")}
    band["r"] = (0.9, math.inf)
    bad = [b for rep in reps for b in _check_orders(rep, band, last=2)]
    bad += [f"{r.formulation} failed" for r in reps if r.failed]
    ok = not bad and secs < 180
    detail = _summary(reps, band) + ("" if not bad else " | out of band: " + " ".join(bad))
    return CriterionResult(3, "BDM1-L1 convergence", ok, detail, secs)


def criterion_4() -> CriterionResult:
    reps, secs = _reports(C4)
    bad = []
    for rep in reps:
        if rep.ell == "one":
            band = {"sigma": (1.7, 2.3), "u": (1.7, 2.3), "omega": (0.85, math.inf), "r": (0.9, math.inf)}
        else:
            band = {"sigma": (1.7, 2.3), "r": (1.7, 2.3), "u_mean": (1.7, 2.3)}
        bad += _check_orders(rep, band)
        bad += [f"{rep.formulation} failed"] if rep.failed else []
    ok = not bad and secs < 300
    detail = _summary(reps, ("sigma", "omega", "u", "r", "u_mean"))
    detail += "" if not bad else " | out of band: " + " ".join(bad)
    return CriterionResult(4, "RT1-L1 convergence", ok, detail, secs)


def criterion_5() -> CriterionResult:
    reps, secs = _reports(C5)
    band = {"sigma": (1.7, 2.3), "r": (1.7, 2.3), "omega": (0.9, math.inf), "u": (0.9, math.inf)}
    bad = [b for rep in reps for b in _check_orders(rep, band)]
    bad += [f"{r.formulation} failed" for r in reps if r.failed]
    ok = not bad and secs < 480
    detail = _summary(reps, band) + ("" if not bad else " | out of band: " + " ".join(bad))
    return CriterionResult(5, "RT1-P1 convergence (barycentric)", ok, detail, secs)


def criterion_6() -> CriterionResult:
    reps, secs = _reports(C6)
    band = {"u": (0.7, 1.4), "r": (0.7, 1.4)}
    bad = [b for rep in reps for b in _check_orders(rep, band)]
    bad += [f"{r.formulation} failed" for r in reps if r.failed]
    ok = not bad and secs < 600
    detail = _summary(reps, band) + ("" if not bad else " | out of band: " + " ".join(bad))
    return CriterionResult(6, "3D BDM1-P0 sanity", ok, detail, secs)


# -------------------------------------------------------------- criteria 7+


def criterion_7() -> CriterionResult:
    t0 = time.perf_counter()
    reps, _ = _reports(C2 + C3 + C4 + C5 + C6)
    worst = max(row.momentum_residual for rep in reps if rep.formulation == "MS-MFE" for row in rep.rows)
    ok = worst <= 1e-8
    return CriterionResult(7, "momentum conservation", ok, f"max ||B eta - f||/||f|| = {worst:.2e}",
                           time.perf_counter() - t0)


C8 = [(s, 2, "zero", (6, 12), "both") for s in ("BDM1-P0", "BDM1-L1", "RT1-P1")]


def criterion_8() -> CriterionResult:
    t0 = time.perf_counter()
    reps, _ = _reports(C8 + C4[1:])
    worst = max(row.errors["omega"] for rep in reps for row in rep.rows)
    worst_norm = max(row.omega_norm for rep in reps for row in rep.rows)
    failed = [f"{rep.scheme}/{rep.formulation}" for rep in reps if rep.failed]
    ok = worst_norm <= 1e-9 and not failed
    detail = f"max ||omega_h|| = {worst_norm:.1e}, max Error(omega) = {worst:.1e} over {len(reps)} runs"
    if failed:
        detail += " | failed: " + " ".join(failed)
    return CriterionResult(8, "elasticity degeneration", ok, detail, time.perf_counter() - t0)


def criterion_9() -> CriterionResult:
    t0 = time.perf_counter()
    runs, _ = _timed_studies(C2[:1])
    mfe, ms = runs[0]["MFE"], runs[0]["MS-MFE"]
    worst = 0.0
    for a, b in zip(mfe.rows, ms.rows):
        for name in ("u", "r"):
            worst = max(worst, abs(b.errors[name] - a.errors[name]) / a.errors[name])
    ok = worst <= 0.10
    return CriterionResult(9, "MFE/MS-MFE agreement", ok, f"max relative gap in Error(u), Error(r) = {worst:.3f}",
                           time.perf_counter() - t0)


def criterion_10() -> CriterionResult:
    t0 = time.perf_counter()
    r2, _ = _timed_studies(C2[:1])
    r3, _ = _timed_studies(C6)
    q2 = [row.dof_schur / row.dof_full for row in r2[0]["MS-MFE"].rows]
    q3 = [row.dof_schur / row.dof_full for row in r3[0]["MS-MFE"].rows]
    ok = all(0.15 <= q <= 0.40 for q in q2) and all(0.08 <= q <= 0.25 for q in q3)
    detail = f"2D {min(q2):.3f}-{max(q2):.3f}, 3D {min(q3):.3f}-{max(q3):.3f}"
    return CriterionResult(10, "reduction accounting", ok, detail, time.perf_counter() - t0)


def two_triangle_mesh():
    return compute_topology(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
                            np.array([[0, 1, 2], [0, 2, 3]]))


def tiny_oracle_gap(scheme: str, ell: str = "one") -> float:
    """Relative gap between the reduced solve and a dense monolithic solve."""
    mesh = two_triangle_mesh()
    if scheme == "RT1-P1":
        mesh = barycentric_subdivide(mesh)
    case = ManufacturedCase(2, LengthScale.from_name(ell))
    system = assemble_system(mesh, scheme, case, "MS-MFE")
    factor = factor_block_diagonal(system.A)
    v, _ = schur_solve(system, factor, tol=1e-13)
    eta = postprocess_stress(system, factor, v)
    K = system.matrix().toarray()
    x = np.linalg.solve(K, system.rhs())
    y = np.concatenate([eta, v])
    return float(np.linalg.norm(y - x) / np.linalg.norm(x))


def criterion_11() -> CriterionResult:
    t0 = time.perf_counter()
    gaps = {s: tiny_oracle_gap(s) for s in ("BDM1-P0", "BDM1-L1", "RT1-L1", "RT1-P1")}
    ok = max(gaps.values()) <= 1e-9
    detail = ", ".join(f"{k} {v:.1e}" for k, v in gaps.items())
    return CriterionResult(11, "tiny-scale oracle equivalence", ok, detail, time.perf_counter() - t0)


def inf_sup_series(scheme: str, levels=(3, 6, 9)) -> list[float]:
    out = []
    for n in levels:
        mesh = build_structured_square(n)
        if scheme == "RT1-P1":
            mesh = barycentric_subdivide(mesh)
        out.append(inf_sup_constant(mesh, scheme))
    return out


def criterion_12() -> CriterionResult:
    t0 = time.perf_counter()
    notes, ok = [], True
    for s in ("BDM1-P0", "BDM1-L1", "RT1-L1", "RT1-P1"):
        betas = inf_sup_series(s)
        var = (max(betas) - min(betas)) / max(betas)
        ok &= var <= 0.20
        notes.append(f"{s} " + "/".join(f"{b:.3f}" for b in betas) + f" ({100 * var:.0f}%)")
    secs = time.perf_counter() - t0
    ok &= secs < 120
    return CriterionResult(12, "discrete inf-sup probe", bool(ok), "; ".join(notes), secs)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
}


def run_criteria(numbers=None, echo=print) -> list[CriterionResult]:
    results = []
    for k in numbers or sorted(CRITERIA):
        res = CRITERIA[k]()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
