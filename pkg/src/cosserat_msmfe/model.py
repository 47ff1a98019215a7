"""Material laws, algebraic operators and manufactured solutions.

Matrix fields are arrays with trailing shape (d, d); rotation-type fields
have trailing shape (k,) with ``k = 1`` in 2D and ``k = 3`` in 3D, and
couple stresses trailing shape (k, d). The gradient convention is
``(grad u)[i, j] = d u_i / d x_j`` and divergences act row-wise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .jets import Jet


def rotation_dim(dim: int) -> int:
    """Number of rotation components ``k_d``."""
    if dim == 2:
        return 1
    if dim == 3:
        return 3
    raise ValueError(f"unsupported dimension {dim}")


# ---------------------------------------------------------------- operators


def tr(t):
    return np.trace(t, axis1=-2, axis2=-1)


def sym(t):
    return 0.5 * (t + np.swapaxes(t, -1, -2))


def skw(t):
    return 0.5 * (t - np.swapaxes(t, -1, -2))


def asym(t) -> np.ndarray:
    """Asymmetry vector of a (..., d, d) array, returned with shape (..., k)."""
    t = np.asarray(t, dtype=float)
    d = t.shape[-1]
    if d == 2:
        return (t[..., 1, 0] - t[..., 0, 1])[..., None]
    if d == 3:
        return np.stack(
            [t[..., 2, 1] - t[..., 1, 2], t[..., 0, 2] - t[..., 2, 0], t[..., 1, 0] - t[..., 0, 1]],
            axis=-1,
        )
    raise ValueError(f"unsupported dimension {d}")


def asym_star(r) -> np.ndarray:
    """Adjoint of :func:`asym`; ``r`` has shape (..., k)."""
    r = np.asarray(r, dtype=float)
    k = r.shape[-1]
    if k == 1:
        out = np.zeros(r.shape[:-1] + (2, 2))
        out[..., 0, 1] = -r[..., 0]
        out[..., 1, 0] = r[..., 0]
        return out
    if k == 3:
        out = np.zeros(r.shape[:-1] + (3, 3))
        out[..., 0, 1], out[..., 0, 2] = -r[..., 2], r[..., 1]
        out[..., 1, 0], out[..., 1, 2] = r[..., 2], -r[..., 0]
        out[..., 2, 0], out[..., 2, 1] = -r[..., 1], r[..., 0]
        return out
    raise ValueError("rotation vectors must have 1 or 3 components")


@dataclass(frozen=True)
class MaterialParams:
    """Lamé-type parameters of the stress and couple-stress laws."""

    mu_sigma: float = 1.0
    muc_sigma: float = 0.1
    lam_sigma: float = 1.0
    mu_omega: float = 1.0
    muc_omega: float = 0.1
    lam_omega: float = 1.0

    def __post_init__(self):
        for name in ("mu_sigma", "muc_sigma", "mu_omega", "muc_omega"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("lam_sigma", "lam_omega"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")

    def alpha(self, dim: int) -> float:
        return self.lam_sigma / (2 * self.mu_sigma + dim * self.lam_sigma)

    def beta(self) -> float:
        return (self.mu_sigma - self.muc_sigma) / (2 * self.mu_sigma * self.muc_sigma)


def _apply_A(mu, muc, lam, t):
    d = t.shape[-1]
    eye = np.eye(d)
    s = sym(t) - (lam / (2 * mu + d * lam)) * tr(t)[..., None, None] * eye
    return s / (2 * mu) + skw(t) / (2 * muc)


def _apply_C(mu, muc, lam, t):
    d = t.shape[-1]
    return 2 * mu * sym(t) + lam * tr(t)[..., None, None] * np.eye(d) + 2 * muc * skw(t)


def apply_A_sigma(params: MaterialParams, t):
    return _apply_A(params.mu_sigma, params.muc_sigma, params.lam_sigma, np.asarray(t, float))


def apply_C_sigma(params: MaterialParams, t):
    return _apply_C(params.mu_sigma, params.muc_sigma, params.lam_sigma, np.asarray(t, float))


def apply_A_omega(params: MaterialParams, t):
    """Compliance of the couple stress; (..., 1, 2) in 2D, (..., 3, 3) in 3D."""
    t = np.asarray(t, float)
    if t.shape[-2] == 1:
        return t / (2 * params.mu_omega)
    return _apply_A(params.mu_omega, params.muc_omega, params.lam_omega, t)


def apply_C_omega(params: MaterialParams, t):
    t = np.asarray(t, float)
    if t.shape[-2] == 1:
        return 2 * params.mu_omega * t
    return _apply_C(params.mu_omega, params.muc_omega, params.lam_omega, t)


def quadratic_form_split(params: MaterialParams, t, t2=None):
    """``(A_sigma t) : t2`` written through the trace and asymmetry split."""
    t = np.asarray(t, float)
    t2 = t if t2 is None else np.asarray(t2, float)
    d = t.shape[-1]
    full = np.sum(t * t2, axis=(-2, -1))
    return (full - params.alpha(d) * tr(t) * tr(t2)) / (2 * params.mu_sigma) + 0.5 * params.beta() * np.sum(
        asym(t) * asym(t2), axis=-1
    )


def operator_matrix(params: MaterialParams, dim: int, field: str = "sigma", form: str = "direct"):
    """Matrix of the compliance acting on row-major flattened tensors.

    ``field`` is ``"sigma"`` or ``"omega"``; ``form="split"`` builds the
    stress compliance from :func:`quadratic_form_split` instead.
    """
    if field == "sigma":
        shape = (dim, dim)
    elif field == "omega":
        shape = (rotation_dim(dim), dim)
    else:
        raise ValueError(f"unknown field {field!r}")
    n = shape[0] * shape[1]
    basis = np.eye(n).reshape(n, *shape)
    if form == "split":
        if field != "sigma":
            raise ValueError("split form is defined for the stress only")
        return quadratic_form_split(params, basis[:, None], basis[None, :])
    if form != "direct":
        raise ValueError(f"unknown form {form!r}")
    apply = apply_A_sigma if field == "sigma" else apply_A_omega
    return apply(params, basis).reshape(n, n).T


# ------------------------------------------------------------- length scale

_THIRD = 1.0 / 3.0


def varpi(x1):
    """Smooth step from 0 (``x1 < 1/3``) to 1 (``x1 >= 2/3``)."""
    x1 = np.asarray(x1, dtype=float)
    mid = np.sin(0.5 * np.pi * (3 * x1 - 1)) ** 2
    return np.where(x1 < _THIRD, 0.0, np.where(x1 < 2 * _THIRD, mid, 1.0))


def varpi_grad(x1):
    """Derivative of :func:`varpi`."""
    x1 = np.asarray(x1, dtype=float)
    mid = 1.5 * np.pi * np.sin(np.pi * (3 * x1 - 1))
    return np.where((x1 >= _THIRD) & (x1 < 2 * _THIRD), mid, 0.0)


@dataclass(frozen=True)
class LengthScale:
    """Length-scale field: ``Constant(c)`` or the smooth step in ``x1``."""

    kind: str = "constant"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "smoothstep"):
            raise ValueError(f"unknown length scale kind {self.kind!r}")
        if self.kind == "constant" and not self.value >= 0:
            raise ValueError("length scale must be non-negative")

    @classmethod
    def from_name(cls, name: str) -> "LengthScale":
        """``one``, ``zero`` or ``varpi``."""
        table = {
            "one": cls("constant", 1.0),
            "zero": cls("constant", 0.0),
            "varpi": cls("smoothstep"),
        }
        try:
            return table[name]
        except KeyError:
            raise ValueError(f"unknown length scale case {name!r}") from None

    @property
    def name(self) -> str:
        if self.kind == "smoothstep":
            return "varpi"
        if self.value == 0:
            return "zero"
        if self.value == 1:
            return "one"
        return f"{self.value:g}"

    @property
    def is_zero(self) -> bool:
        return self.kind == "constant" and self.value == 0

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.kind == "constant":
            return np.full(x.shape[0], float(self.value))
        return varpi(x[:, 0])

    def grad(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        g = np.zeros(x.shape)
        if self.kind == "smoothstep":
            g[:, 0] = varpi_grad(x[:, 0])
        return g


# --------------------------------------------------- manufactured solutions


def _solution_jets(x, dim, kind):
    n = x.shape[0]
    X = [Jet.variable(x, i) for i in range(dim)]
    if kind == "zero":
        z = Jet.constant(0.0, n, dim)
        return [z] * dim, [z] * rotation_dim(dim)
    bump = [xi * (1 - xi) for xi in X]
    pi = np.pi
    if dim == 2:
        u = [bump[(i + 1) % 2] * jets.sin(X[i] * pi) for i in range(2)]
        r = [jets.sin(X[0] * pi) * jets.sin(X[1] * pi)]
    else:
        u = [
            bump[(i + 1) % 3] * bump[(i - 1) % 3] * jets.sin(X[i] * pi)
            for i in range(3)
        ]
        r = [
            bump[i] * jets.sin(X[(i + 1) % 3] * pi) * jets.sin(X[(i - 1) % 3] * pi)
            for i in range(3)
        ]
    return u, r


@dataclass(frozen=True)
class ManufacturedCase:
    """Analytic displacement and rotation with the stresses and loads they induce.

    ``solution="standard"`` is the trigonometric-polynomial field that
    vanishes on the boundary of the unit box; ``"zero"`` is the trivial one.
    """

    dim: int
    lengthscale: LengthScale = LengthScale()
    params: MaterialParams = MaterialParams()
    solution: str = "standard"

    def __post_init__(self):
        rotation_dim(self.dim)
        if self.solution not in ("standard", "zero"):
            raise ValueError(f"unknown solution {self.solution!r}")

    @property
    def k(self) -> int:
        return rotation_dim(self.dim)

    def _jets(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError("point dimension does not match the case")
        return x, *_solution_jets(x, self.dim, self.solution)

    def displacement(self, x) -> np.ndarray:
        _, u, _ = self._jets(x)
        return np.stack([c.val for c in u], axis=-1)

    def rotation(self, x) -> np.ndarray:
        _, _, r = self._jets(x)
        return np.stack([c.val for c in r], axis=-1)

    def exact_fields(self, x):
        """``(u, r, sigma, omega)`` with shapes (n, d), (n, k), (n, d, d), (n, k, d)."""
        x, u, r = self._jets(x)
        uval = np.stack([c.val for c in u], axis=-1)
        rval = np.stack([c.val for c in r], axis=-1)
        grad_u = np.stack([c.grad for c in u], axis=1)
        grad_r = np.stack([c.grad for c in r], axis=1)
        sigma = apply_C_sigma(self.params, grad_u + asym_star(rval))
        omega = self.lengthscale(x)[:, None, None] * apply_C_omega(self.params, grad_r)
        return uval, rval, sigma, omega

    def forcing(self, x):
        """``(f_sigma, f_omega)`` with shapes (n, d) and (n, k)."""
        x, u, r = self._jets(x)
        d = self.dim
        p = self.params
        rval = np.stack([c.val for c in r], axis=-1)
        grad_u = np.stack([c.grad for c in u], axis=1)
        grad_r = np.stack([c.grad for c in r], axis=1)
        hess_u = np.stack([c.hess for c in u], axis=1)  # (n, d, d, d): [i, j, k]
        hess_r = np.stack([c.hess for c in r], axis=1)  # (n, k, d, d)

        sigma = apply_C_sigma(p, grad_u + asym_star(rval))
        div_sigma = np.zeros((x.shape[0], d))
        div_G = np.zeros((x.shape[0], self.k))
        for j in range(d):
            dj = hess_u[:, :, :, j] + asym_star(grad_r[:, :, j])
            div_sigma += apply_C_sigma(p, dj)[:, :, j]
            div_G += apply_C_omega(p, hess_r[:, :, :, j])[:, :, j]
        G = apply_C_omega(p, grad_r)
        ell = self.lengthscale(x)
        gell = self.lengthscale.grad(x)
        div_ell_omega = 2 * ell[:, None] * np.einsum("nj,nmj->nm", gell, G) + (ell**2)[:, None] * div_G
        return -div_sigma, asym(sigma) - div_ell_omega
