"""Critical points of a function restricted to an implicit 3-manifold."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ndtri
from scipy.stats import qmc

from .expr import Expression, eval_batch
from .manifold import ImplicitThreeManifold, householder_basis, retract

GRAD_TOL = 1e-9
NEWTON_TOL = 1e-12
NONDEGENERACY_TOL = 1e-7
DEDUP_RADIUS = 1e-6
DEFAULT_SEEDS = 4096


class MorseError(ValueError):
    pass


class DegenerateCritical(MorseError):
    pass


class EulerViolation(MorseError):
    pass


class ProfileInvalid(MorseError):
    pass


class SeedMiss(UserWarning):
    pass


@dataclass(frozen=True)
class CriticalPoint:
    position: np.ndarray
    value: float
    index: int
    hessian_eigenvalues: np.ndarray
    multiplier: float = 0.0


@dataclass(frozen=True)
class MorseProfile:
    counts: tuple
    genus: int
    extrema_unique: bool

    def to_json(self):
        return {"counts": list(self.counts), "genus": self.genus, "extrema_unique": self.extrema_unique}


def sphere_seeds(n=DEFAULT_SEEDS):
    """Deterministic quasi-uniform points on the unit 3-sphere.

    Unscrambled Halton points pushed through the normal quantile function and
    normalised; the first Halton point (the origin) is skipped.
    """
    u = qmc.Halton(d=4, scramble=False).random(n + 1)[1:]
    z = ndtri(u)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def manifold_seeds(m: ImplicitThreeManifold, n=DEFAULT_SEEDS):
    S = sphere_seeds(n)
    if m.name == "s3":
        return S
    try:
        return retract(m, S)
    except Exception:
        good = []
        for p in S:
            try:
                good.append(retract(m, p))
            except Exception:
                continue
        return np.array(good).reshape(-1, 4)


def lagrange(gf, gC):
    """Multiplier ``grad f . grad C / |grad C|^2`` and the constrained gradient."""
    lam = np.einsum("...i,...i->...", gf, gC) / np.einsum("...i,...i->...", gC, gC)
    return lam, gf - lam[..., None] * gC


def constrained_hessian(Hf, HC, lam, B):
    """Intrinsic Hessian ``B (Hf - lam HC) B^T`` for a tangent basis B (rows)."""
    return B @ (Hf - lam * HC) @ B.T


def _newton(f, m, X, iters=40):
    """Batched Newton on the Lagrange system; returns points, multipliers, residuals."""
    X = X.copy()
    _, gC, _ = eval_batch(m.constraint, X)
    _, gf, _ = eval_batch(f, X)
    lam, _ = lagrange(gf, gC)
    res = np.full(len(X), np.inf)
    active = np.ones(len(X), dtype=bool)
    for _ in range(iters):
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            break
        P = X[idx]
        vC, gC, HC = eval_batch(m.constraint, P)
        _, gf, Hf = eval_batch(f, P)
        L = lam[idx]
        r = np.concatenate([gf - L[:, None] * gC, (vC - m.level)[:, None]], axis=1)
        res[idx] = np.linalg.norm(r, axis=1)
        done = res[idx] <= NEWTON_TOL
        J = np.zeros((len(idx), 5, 5))
        J[:, :4, :4] = Hf - L[:, None, None] * HC
        J[:, :4, 4] = -gC
        J[:, 4, :4] = gC
        step = -np.einsum("nij,nj->ni", np.linalg.pinv(J), r)
        norm = np.linalg.norm(step[:, :4], axis=1)
        scale = np.minimum(1.0, 0.25 / np.maximum(norm, 1e-300))
        step *= scale[:, None]
        upd = ~done
        X[idx[upd]] += step[upd, :4]
        lam[idx[upd]] += step[upd, 4]
        active[idx[done]] = False
        # stop chasing points that wander off the manifold
        far = np.abs(vC - m.level) > 0.5
        active[idx[far]] = False
    return X, lam, res


def _local_minima(points, values, k=12):
    tree = cKDTree(points)
    _, nb = tree.query(points, k=min(k + 1, len(points)))
    return np.nonzero(values <= values[nb].min(axis=1))[0]


def classify_point(f, m, x, lam):
    vC, gC, HC = eval_batch(m.constraint, x[None, :])
    vf, gf, Hf = eval_batch(f, x[None, :])
    B, _ = householder_basis(gC[0])
    eig = np.linalg.eigvalsh(constrained_hessian(Hf[0], HC[0], lam, B))
    return float(vf[0]), eig


def find_critical_points(f: Expression, m: ImplicitThreeManifold, seeds=DEFAULT_SEEDS, exhaustive=False):
    """Non-degenerate critical points of ``f|M``, sorted by position."""
    S = manifold_seeds(m, seeds) if np.isscalar(seeds) else np.asarray(seeds, dtype=float)
    _, gC, _ = eval_batch(m.constraint, S)
    _, gf, _ = eval_batch(f, S)
    _, pg = lagrange(gf, gC)
    pnorm = np.linalg.norm(pg, axis=1)
    start = np.arange(len(S)) if exhaustive else _local_minima(S, pnorm)
    X, lam, res = _newton(f, m, S[start])
    pts = _collect(f, m, X, lam, res)
    if not exhaustive and not _euler_ok(pts):
        X, lam, res = _newton(f, m, S)
        pts = _collect(f, m, X, lam, res)
    if not _euler_ok(pts):
        warnings.warn(f"index counts {_counts(pts)} violate Euler parity; seeds may have missed points", SeedMiss)
    return pts


def _collect(f, m, X, lam, res):
    ok = res <= 1e-10
    X, lam = X[ok], lam[ok]
    if len(X) == 0:
        return []
    order = np.lexsort(X.T[::-1])
    X, lam = X[order], lam[order]
    keep = []
    for i, x in enumerate(X):
        if all(np.linalg.norm(x - X[j]) > DEDUP_RADIUS for j in keep):
            keep.append(i)
    out = []
    for i in keep:
        x = X[i]
        _, gC, _ = eval_batch(m.constraint, x[None, :])
        _, gf, _ = eval_batch(f, x[None, :])
        _, pg = lagrange(gf, gC)
        if np.linalg.norm(pg) > GRAD_TOL:
            continue
        value, eig = classify_point(f, m, x, lam[i])
        if np.min(np.abs(eig)) < NONDEGENERACY_TOL:
            raise DegenerateCritical(f"critical point at {x.tolist()} has Hessian eigenvalues {eig.tolist()}")
        out.append(CriticalPoint(x, value, int(np.sum(eig < 0)), eig, float(lam[i])))
    return out


def _counts(points):
    c = [0, 0, 0, 0]
    for p in points:
        c[p.index] += 1
    return tuple(c)


def _euler_ok(points):
    c = _counts(points)
    return len(points) > 0 and c[0] - c[1] + c[2] - c[3] == 0


def profile_from_counts(counts) -> MorseProfile:
    c = tuple(int(x) for x in counts)
    if c[0] - c[1] + c[2] - c[3] != 0:
        raise EulerViolation(f"alternating index sum of {c} is {c[0] - c[1] + c[2] - c[3]}")
    unique = c[0] == 1 and c[3] == 1
    if unique and c[1] != c[2]:
        raise ProfileInvalid(f"counts {c}: index-1 and index-2 counts differ")
    # handlebody genus of the union of 0- and 1-handles
    genus = c[1] - c[0] + 1
    return MorseProfile(c, genus, unique)


def profile(points) -> MorseProfile:
    if not points:
        raise ValueError("empty critical point list")
    return profile_from_counts(_counts(points))
