"""Second-order forward-mode jets over batches of points.

A :class:`Jet` carries a value, gradient and Hessian at ``n`` points, which
is all the manufactured forcing needs: stresses are first derivatives of
the displacement and rotation, and their divergences second derivatives.
"""
from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variable(cls, x: np.ndarray, i: int) -> "Jet":
        """The coordinate function ``x_i`` at points ``x`` of shape (n, d)."""
        n, d = x.shape
        grad = np.zeros((n, d))
        grad[:, i] = 1.0
        return cls(x[:, i].astype(float), grad, np.zeros((n, d, d)))

    @classmethod
    def constant(cls, c, n: int, d: int) -> "Jet":
        return cls(np.full(n, float(c)), np.zeros((n, d)), np.zeros((n, d, d)))

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        n, d = self.grad.shape
        return Jet.constant(other, n, d)

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = float(other)
            return Jet(c * self.val, c * self.grad, c * self.hess)
        a, b = self, other
        cross = a.grad[:, :, None] * b.grad[:, None, :]
        return Jet(
            a.val * b.val,
            a.val[:, None] * b.grad + b.val[:, None] * a.grad,
            a.val[:, None, None] * b.hess + b.val[:, None, None] * a.hess
            + cross + np.swapaxes(cross, 1, 2),
        )

    __rmul__ = __mul__


def _compose(j: Jet, f0, f1, f2) -> Jet:
    """Chain rule for a scalar function with value/derivatives f0, f1, f2."""
    g = j.grad
    return Jet(
        f0,
        f1[:, None] * g,
        f1[:, None, None] * j.hess + f2[:, None, None] * g[:, :, None] * g[:, None, :],
    )


def sin(j: Jet) -> Jet:
    s, c = np.sin(j.val), np.cos(j.val)
    return _compose(j, s, c, -s)


def cos(j: Jet) -> Jet:
    s, c = np.sin(j.val), np.cos(j.val)
    return _compose(j, c, -s, -c)
