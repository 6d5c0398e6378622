"""Closed 3-manifolds presented as regular level sets ``C(x) = level`` in R^4."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Expression, eval_batch, parse

GRAD_EPS = 1e-8


class RetractDiverged(RuntimeError):
    pass


class DegenerateNormal(ValueError):
    pass


@dataclass(frozen=True)
class ImplicitThreeManifold:
    constraint: Expression
    level: float = 1.0
    name: str = "s3"
    source: str = field(default="x1^2 + x2^2 + x3^2 + x4^2", compare=False)

    @classmethod
    def from_text(cls, constraint: str, level: float, name: str = "custom"):
        return cls(parse(constraint), float(level), name, constraint)

    def residual(self, P):
        v, _, _ = eval_batch(self.constraint, P)
        return v - self.level


def sphere() -> ImplicitThreeManifold:
    return ImplicitThreeManifold(parse("x1^2 + x2^2 + x3^2 + x4^2"), 1.0, "s3")


def by_name(name: str) -> ImplicitThreeManifold:
    if name.lower() in ("s3", "sphere"):
        return sphere()
    raise KeyError(f"unknown manifold {name!r}")


def retract(m: ImplicitThreeManifold, p, tol=1e-12, max_iter=50):
    """Newton projection onto the level set along the constraint gradient.

    Accepts a single point or a batch ``(N, 4)``.
    """
    q = np.array(p, dtype=float)
    single = q.ndim == 1
    Q = q[None, :] if single else q
    for _ in range(max_iter):
        v, g, _ = eval_batch(m.constraint, Q)
        r = v - m.level
        if np.all(np.abs(r) <= tol):
            return Q[0] if single else Q
        gg = np.einsum("ni,ni->n", g, g)
        if np.any(gg < GRAD_EPS ** 2):
            raise DegenerateNormal("constraint gradient vanishes during retraction")
        Q = Q - (r / gg)[:, None] * g
    v, _, _ = eval_batch(m.constraint, Q)
    if np.all(np.abs(v - m.level) <= tol):
        return Q[0] if single else Q
    raise RetractDiverged(f"retraction did not converge in {max_iter} iterations")


def householder_basis(normal):
    """Orthonormal basis of the complement of ``normal`` and the pivot used.

    The pivot is the coordinate of largest magnitude; the reflection
    ``I - 2 v v^T / v^T v`` with ``v = n + sign(n_k) e_k`` maps ``n`` onto the
    k-th axis, so its remaining columns span the complement.
    """
    n = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(n)
    if norm < GRAD_EPS:
        raise DegenerateNormal(f"normal has norm {norm:.3g}")
    n = n / norm
    k = int(np.argmax(np.abs(n)))
    v = n.copy()
    v[k] += 1.0 if n[k] >= 0 else -1.0
    H = np.eye(len(n)) - 2.0 * np.outer(v, v) / (v @ v)
    cols = [j for j in range(len(n)) if j != k]
    return H[:, cols].T, k


def tangent_basis(m: ImplicitThreeManifold, p, check=True):
    """Three orthonormal vectors spanning ``T_p M`` (rows of the result)."""
    p = np.asarray(p, dtype=float)
    v, g, _ = eval_batch(m.constraint, p[None, :])
    if check and abs(v[0] - m.level) > 1e-10:
        raise ValueError("point is not on the manifold")
    B, _ = householder_basis(g[0])
    return B


def tangent_basis_with_pivot(m: ImplicitThreeManifold, p):
    _, g, _ = eval_batch(m.constraint, np.asarray(p, dtype=float)[None, :])
    return householder_basis(g[0])
