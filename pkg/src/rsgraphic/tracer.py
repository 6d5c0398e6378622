"""Trace the singular set of phi = (F, G) restricted to M and classify its points.

The singular set is where [grad C | grad F | grad G] has rank at most two. It
is computed as the zero set of C - level together with the four 3x3 minors of
that matrix, by pseudo-arclength continuation with a Gauss-Newton corrector.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import assemble
from .assemble import FeatureTooClose, OrientedCurve, TypeTwoDetected, find_crossings
from .expr import Expression, eval_batch, jet_point
from .graphic import Graphic, branch_side
from .manifold import ImplicitThreeManifold, householder_basis, retract
from .morse import manifold_seeds

log = logging.getLogger(__name__)

STEP_RANGE = (1e-4, 1e-1)
CORRECTOR_TOL = 1e-10
REFINE_TOL = 1e-13
MAX_FAILS = 5
SEED_THRESHOLD = 0.25
KERNEL_TOL = 1e-7
ANGLE_TOL = 1e-3
POINT_TOL = 1e-6
MAX_LENGTH = 500.0

__all__ = [
    "TraceError", "TraceStalled", "NotStable", "NoSingularSet", "IndefiniteBoundary",
    "FeatureTooClose", "TypeTwoDetected", "SingularSample", "TracedLoop", "SingularCurveSet",
    "StabilityReport", "trace_singular_set", "trace_open", "classify_fold", "detect_cusps",
    "verify_stability", "extract_graphic",
]


class TraceError(RuntimeError):
    pass


class TraceStalled(TraceError):
    pass


class NotStable(TraceError):
    pass


class NoSingularSet(TraceError):
    pass


class IndefiniteBoundary(ValueError):
    pass


# --- the rank system ------------------------------------------------------------

_ROWS = np.array([[j for j in range(4) if j != r] for r in range(4)])


def _cross(a, b):
    return np.stack([a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
                     a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
                     a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]], axis=-1)


def _minors(A, Hs):
    """The four 3x3 minors of A (N, 4, 3) and their gradients.

    Column j of A is the gradient whose Hessian is ``Hs[:, j]``. The derivative
    of a determinant in one column is the cross product of the other two.
    """
    B = A[:, _ROWS, :]                      # (N, 4, 3, 3): rows dropped one at a time
    c0, c1, c2 = B[..., 0], B[..., 1], B[..., 2]
    K = np.stack([_cross(c1, c2), _cross(c2, c0), _cross(c0, c1)], axis=1)  # (N, 3, 4, 3)
    m = np.einsum("nri,nri->nr", c0, K[:, 0])
    Hr = Hs[:, :, _ROWS, :]                 # (N, 3, 4, 3, 4)
    dm = np.einsum("njri,njril->nrl", K, Hr)
    return m, dm


class SingularSystem:
    def __init__(self, F: Expression, G: Expression, m: ImplicitThreeManifold):
        self.F, self.G, self.m = F, G, m

    def jets(self, x):
        return jet_point(self.m.constraint, x), jet_point(self.F, x), jet_point(self.G, x)

    def evaluate(self, x):
        jc, jf, jg = self.jets(x)
        A = np.stack([jc[1], jf[1], jg[1]], axis=1)[None]
        Hs = np.stack([jc[2], jf[2], jg[2]])[None]
        mv, dm = _minors(A, Hs)
        r = np.concatenate([[jc[0] - self.m.level], mv[0]])
        J = np.vstack([jc[1][None], dm[0]])
        return r, J, (jc, jf, jg)

    def batch(self, X):
        vc, gc, hc = eval_batch(self.m.constraint, X)
        _, gf, hf = eval_batch(self.F, X)
        _, gg, hg = eval_batch(self.G, X)
        A = np.stack([gc, gf, gg], axis=2)
        mv, dm = _minors(A, np.stack([hc, hf, hg], axis=1))
        R = np.concatenate([(vc - self.m.level)[:, None], mv], axis=1)
        J = np.concatenate([gc[:, None, :], dm], axis=1)
        return R, J, A

    def image(self, x):
        return np.array([jet_point(self.F, x)[0], jet_point(self.G, x)[0]])

    def image_batch(self, X):
        return np.stack([eval_batch(self.F, X)[0], eval_batch(self.G, X)[0]], axis=1)


def _null(J):
    _, s, vt = np.linalg.svd(J)
    if s[2] <= 1e-10 * max(s[0], 1e-300):
        raise NotStable(f"rank condition degenerates (singular values {s.tolist()}): "
                        "the singular set is not a smooth curve here")
    return vt[-1]


def _canonical(t):
    k = int(np.argmax(np.abs(t) > 1e-8))
    return t if t[k] > 0 else -t


def _correct(system, x, t_ref, x_ref, s, tol=CORRECTOR_TOL, max_iter=10):
    """Newton on the rank system plus the hyperplane ``t_ref . (y - x_ref) = s``."""
    for _ in range(max_iter):
        r, J, jets = system.evaluate(x)
        hp = t_ref @ (x - x_ref) - s
        if np.abs(r).max() <= tol and abs(hp) <= tol:
            return x, J, jets
        J6 = np.vstack([J, t_ref])
        dx = np.linalg.lstsq(J6, -np.append(r, hp), rcond=1e-12)[0]
        x = x + dx
        if np.linalg.norm(dx) <= 1e-15 * (1 + np.linalg.norm(x)):
            r, J, jets = system.evaluate(x)
            if np.abs(r).max() <= max(tol, 1e-12):
                return x, J, jets
    return None


# --- fold classification ---------------------------------------------------------

@dataclass
class FoldData:
    kind: str                   # definite | indefinite | uncertain
    covector: np.ndarray        # (a, b): a P grad F + b P grad G = 0
    kernel_eigenvalues: np.ndarray
    kernel: np.ndarray          # (2, 4) orthonormal basis of ker d(phi|M)
    gray_normal: np.ndarray | None  # image-plane direction of the covered side


def fold_data(jets) -> FoldData:
    (vc, gc, hc), (_, gf, hf), (_, gg, hg) = jets
    n = gc / np.linalg.norm(gc)
    pf = gf - (gf @ n) * n
    pg = gg - (gg @ n) * n
    e = pf if np.linalg.norm(pf) >= np.linalg.norm(pg) else pg
    ne = np.linalg.norm(e)
    B, _ = householder_basis(gc)
    if ne < 1e-12:
        raise NotStable("both constrained gradients vanish at a singular point")
    e = e / ne
    ab = np.array([pg @ e, -(pf @ e)])
    ab = ab / np.linalg.norm(ab)
    hl = ab[0] * hf + ab[1] * hg
    gl = ab[0] * gf + ab[1] * gg
    lam = (gl @ gc) / (gc @ gc)
    be = B @ e
    W, _ = householder_basis(be)
    K = W @ B
    Q = K @ (hl - lam * hc) @ K.T
    eig = np.linalg.eigvalsh(Q)
    if np.abs(eig).min() < KERNEL_TOL:
        return FoldData("uncertain", ab, eig, K, None)
    if eig[0] * eig[1] > 0:
        return FoldData("definite", ab, eig, K, ab if eig[0] > 0 else -ab)
    return FoldData("indefinite", ab, eig, K, None)


def _side(tau, w):
    c = tau[0] * w[1] - tau[1] * w[0]
    return "left" if c > 0 else "right"


def perturbed_gray_side(system, x, tau, kernel, eta):
    """Side of the image curve covered by images of nearby kernel-direction points."""
    P = np.array([x + s * eta * v for v in kernel for s in (1.0, -1.0)])
    Q = retract(system.m, P)
    W = system.image_batch(Q) - system.image(x)
    cross = tau[0] * W[:, 1] - tau[1] * W[:, 0]
    if np.all(cross > 0):
        return "left"
    if np.all(cross < 0):
        return "right"
    return None


def classify_fold(F, G, m, position, step=1e-3):
    """``(fold_kind, gray_side)`` at a refined singular point.

    The traversal direction is the canonically signed null direction of the
    rank system, so the returned side is relative to that orientation.
    """
    system = SingularSystem(F, G, m)
    x = np.asarray(position, dtype=float)
    _, J, jets = system.evaluate(x)
    t = _canonical(_null(J))
    tau = np.array([jets[1][1] @ t, jets[2][1] @ t])
    fd = fold_data(jets)
    if fd.kind == "uncertain":
        raise IndefiniteBoundary(f"kernel form eigenvalues {fd.kernel_eigenvalues.tolist()} are too small; "
                                 "retry at a neighbouring sample")
    if fd.kind == "indefinite":
        return "indefinite", "none"
    side = perturbed_gray_side(system, x, tau, fd.kernel, 10 * step)
    if side is None:
        side = _side(tau, fd.gray_normal)
    return "definite", side


# --- curves -----------------------------------------------------------------

@dataclass(frozen=True)
class SingularSample:
    position: np.ndarray
    image: np.ndarray
    arclength: float
    fold_kind: str
    gray_side: str
    tangent_image: np.ndarray


@dataclass(eq=False)
class TracedLoop:
    system: SingularSystem
    positions: np.ndarray
    tangents: np.ndarray
    closed: bool = True
    image: np.ndarray = None
    tau: np.ndarray = None
    kind: np.ndarray = None
    gray: np.ndarray = None
    u: np.ndarray = None
    period: float = 0.0
    cusps: list = field(default_factory=list)
    jets: list = None

    def parametrize(self):
        X, T = self.positions, self.tangents
        nxt = np.roll(X, -1, axis=0)
        inc = np.einsum("ij,ij->i", T, nxt - X)
        if not self.closed:
            inc = inc[:-1]
        self.u = np.concatenate([[0.0], np.cumsum(inc)])[: len(X)]
        self.period = float(np.sum(inc)) if self.closed else float(self.u[-1])

    def locate(self, u):
        if self.closed:
            u = u % self.period
        k = int(np.clip(np.searchsorted(self.u, u, side="right") - 1, 0, len(self.u) - 1))
        return k, u - self.u[k]

    def point_m(self, u, tol=REFINE_TOL):
        """Refined point of M on the curve at parameter u, with its unit tangent and jets."""
        k, s = self.locate(u)
        x0, t0 = self.positions[k], self.tangents[k]
        res = _correct(self.system, x0 + s * t0, t0, x0, s, tol=tol)
        if res is None:
            raise TraceStalled(f"corrector failed while refining at parameter {u:.6g}")
        x, J, jets = res
        t = _null(J)
        if t @ t0 < 0:
            t = -t
        return x, t, jets

    def point(self, u):
        x, t, jets = self.point_m(u)
        return np.array([jets[1][0], jets[2][0]]), np.array([jets[1][1] @ t, jets[2][1] @ t])

    @property
    def samples(self):
        return [SingularSample(self.positions[i], self.image[i], float(self.u[i]), self.kind[i],
                               self.gray[i], self.tau[i]) for i in range(len(self.positions))]

    @property
    def cusp_count(self):
        return len(self.cusps)


@dataclass(frozen=True)
class ImageCrossing:
    position: np.ndarray
    angle: float
    loops: tuple
    params: tuple


@dataclass(eq=False)
class SingularCurveSet:
    loops: list
    crossings: list = field(default_factory=list)
    contacts: list = field(default_factory=list)
    step: float = 0.0
    log: list = field(default_factory=list)

    @property
    def cusp_count(self):
        return sum(lp.cusp_count for lp in self.loops)


@dataclass
class StabilityIssue:
    kind: str
    position: tuple
    message: str


@dataclass
class StabilityReport:
    ok: bool
    issues: list

    def __bool__(self):
        return self.ok


# --- tracing ----------------------------------------------------------------

def _check_step(step):
    if not STEP_RANGE[0] <= step <= STEP_RANGE[1]:
        raise ValueError(f"step {step} outside [{STEP_RANGE[0]}, {STEP_RANGE[1]}]")


def _advance(system, x, t, h):
    res = _correct(system, x + h * t, t, x, h)
    if res is None:
        return None
    y, J, jets = res
    if np.linalg.norm(y - x) > 2 * h:
        return None
    t_new = _null(J)
    if t_new @ t < 0:
        t_new = -t_new
    if t_new @ t < 0.8:
        return None
    return y, t_new, jets


def _pivot(jets):
    return int(np.argmax(np.abs(jets[0][1])))


def _trace_loop(system, x0, t0, jets0, step, messages, max_length=MAX_LENGTH):
    X, T, JETS = [x0], [t0], [jets0]
    h, fails, length = step, 0, 0.0
    pivot = _pivot(jets0)
    while True:
        x, t = X[-1], T[-1]
        if length > 3 * step:
            d = x0 - x
            a = d @ t
            if 0 < a <= step and np.linalg.norm(d - a * t) <= 0.1 * step and t @ t0 > 0:
                return X, T, JETS
        if length > max_length:
            raise TraceStalled(f"loop through {x0.tolist()} did not close within arclength {max_length}")
        nxt = _advance(system, x, t, h)
        if nxt is None:
            fails += 1
            if fails >= MAX_FAILS:
                raise TraceStalled(f"corrector failed {fails} consecutive times near {x.tolist()}")
            h *= 0.5
            continue
        y, ty, jy = nxt
        fails = 0
        length += h
        h = min(step, 2 * h)
        X.append(y)
        T.append(ty)
        JETS.append(jy)
        p = _pivot(jy)
        if p != pivot:
            messages.append(f"tangent chart pivot {pivot} -> {p} at {np.round(y, 6).tolist()}")
            pivot = p


def _image_data(lp: TracedLoop):
    lp.image = np.array([[j[1][0], j[2][0]] for j in lp.jets])
    lp.tau = np.array([[j[1][1] @ t, j[2][1] @ t] for j, t in zip(lp.jets, lp.tangents)])


def _classify_samples(lp: TracedLoop):
    n = len(lp.positions)
    _image_data(lp)
    data = [fold_data(j) for j in lp.jets]
    lp.kind = np.array([d.kind for d in data], dtype=object)
    lp.gray = np.array(["none"] * n, dtype=object)
    return data


def _reorient(lp: TracedLoop):
    """Traverse counter-clockwise in the image; the start sample is kept."""
    img = np.array([[j[1][0], j[2][0]] for j in lp.jets])
    if assemble.signed_area(img) >= 0:
        return
    order = np.concatenate([[0], np.arange(len(img) - 1, 0, -1)])
    lp.positions = lp.positions[order]
    lp.tangents = -lp.tangents[order]
    lp.jets = [lp.jets[i] for i in order]


def _refine_cusp(lp: TracedLoop, k):
    """Cusp between samples k and k+1 as (position, tangent, jets)."""
    n = len(lp.positions)
    k1 = (k + 1) % n
    x0, t0 = lp.positions[k], lp.tangents[k]
    w = lp.tau[k] / np.linalg.norm(lp.tau[k])
    s_end = t0 @ (lp.positions[k1] - x0)

    def at(s):
        res = _correct(lp.system, x0 + s * t0, t0, x0, s, tol=REFINE_TOL)
        if res is None:
            raise TraceStalled("corrector failed while refining a cusp")
        x, J, jets = res
        t = _null(J)
        if t @ t0 < 0:
            t = -t
        return x, t, jets

    def psi(s):
        _, t, jets = at(s)
        return np.array([jets[1][1] @ t, jets[2][1] @ t]) @ w

    if s_end <= 0 or psi(s_end) >= 0:
        return None
    sc = brentq(psi, 0.0, s_end, xtol=1e-13, maxiter=200)
    return at(sc)


def detect_cusps(lp: TracedLoop):
    """Refined cusp samples of a traced curve, checked for type one.

    A cusp lies where the image tangent reverses between consecutive samples.
    """
    if lp.tau is None:
        _image_data(lp)
    n = len(lp.positions)
    last = n if lp.closed else n - 1
    found = []
    for k in range(last):
        k1 = (k + 1) % n
        if lp.tau[k] @ lp.tau[k1] >= 0:
            continue
        res = _refine_cusp(lp, k)
        if res is None:
            continue
        x, t, jets = res
        img = np.array([jets[1][0], jets[2][0]])
        d = lp.tau[k] - lp.tau[k1]
        d = d / np.linalg.norm(d)
        sides = []
        for idx in (range(k, k - 40, -1), range(k1, k1 + 40)):
            pts = [lp.image[i % n] for i in idx if (lp.closed or 0 <= i < n)]
            sides.append(branch_side(pts, img, d))
        if sides[0] == sides[1] and sides[0] != 0:
            raise TypeTwoDetected(f"cusp at {img.tolist()} has both branches on one side of its tangent line")
        found.append((k, x, t, jets))
    return found


def _insert_cusps(lp: TracedLoop, found):
    if not found:
        return
    X, T, J = list(lp.positions), list(lp.tangents), list(lp.jets)
    for k, x, t, jets in sorted(found, key=lambda c: -c[0]):
        X.insert(k + 1, x)
        T.insert(k + 1, t)
        J.insert(k + 1, jets)
    lp.positions, lp.tangents, lp.jets = np.array(X), np.array(T), J


def _finish(lp: TracedLoop, step, messages):
    _image_data(lp)
    found = detect_cusps(lp)
    _insert_cusps(lp, found)
    data = _classify_samples(lp)
    lp.parametrize()
    n = len(lp.positions)
    cusp_idx = []
    for k, x, _, _ in found:
        cusp_idx.append(int(np.argmin(np.linalg.norm(lp.positions - x, axis=1))))
    for i in cusp_idx:
        lp.kind[i] = "cusp"
    lp.cusps = sorted(float(lp.u[i]) for i in cusp_idx)
    _label_stretches(lp, data, cusp_idx, step, messages)


def _stretches(n, cusp_idx, closed):
    """Index runs between cusp samples (cyclic when closed)."""
    if not cusp_idx:
        return [list(range(n))]
    cs = sorted(cusp_idx)
    runs = []
    for a, b in zip(cs, cs[1:] + [cs[0] + n] if closed else cs[1:]):
        runs.append([i % n for i in range(a + 1, b)])
    if not closed:
        runs = [list(range(0, cs[0]))] + runs + [list(range(cs[-1] + 1, n))]
    return runs


def _label_stretches(lp: TracedLoop, data, cusp_idx, step, messages):
    for run in _stretches(len(lp.positions), cusp_idx, lp.closed):
        if not run:
            continue
        kinds = [lp.kind[i] for i in run if lp.kind[i] in ("definite", "indefinite")]
        if not kinds:
            raise TraceStalled("no classifiable sample between two cusps; retrace at a smaller step")
        n_def = kinds.count("definite")
        if 0 < n_def < len(kinds):
            bad = next(i for i in run if lp.kind[i] not in (kinds[0], "uncertain"))
            raise NotStable(f"fold type changes without a cusp near {lp.positions[bad].tolist()}: "
                            "two branches of the singular set meet there")
        kind = kinds[0]
        for i in run:
            lp.kind[i] = kind
        if kind != "definite":
            continue
        best = max(run, key=lambda i: np.abs(data[i].kernel_eigenvalues).min())
        fd = data[best]
        side = perturbed_gray_side(lp.system, lp.positions[best], lp.tau[best], fd.kernel, 10 * step)
        hess_side = _side(lp.tau[best], fd.gray_normal)
        if side is None:
            messages.append(f"perturbation gray side undecided at {lp.positions[best].tolist()}; using Hessian sign")
            side = hess_side
        elif side != hess_side:
            messages.append(f"gray side by perturbation ({side}) disagrees with Hessian sign ({hess_side})")
        for i in run:
            lp.gray[i] = side


def _seed_points(system, m, seeds, extra, messages):
    S = manifold_seeds(m, seeds)
    R, J, A = system.batch(S)
    An = A / np.maximum(np.linalg.norm(A, axis=1, keepdims=True), 1e-300)
    sv = np.linalg.svd(An, compute_uv=False)[:, 2]
    if np.mean(sv < 1e-8) > 0.5:
        raise NotStable("dF, dG and dC are dependent on an open set: the image of phi is not two-dimensional")
    order = np.argsort(sv, kind="stable")
    cand = S[order[sv[order] < SEED_THRESHOLD]]
    if extra is not None and len(extra):
        cand = np.concatenate([np.asarray(extra, dtype=float).reshape(-1, 4), cand])
    messages.append(f"{len(cand)} seed candidates from {len(S)} grid points")
    return _refine_seeds(system, cand)


def _refine_seeds(system, X, iters=60):
    X = X.copy()
    active = np.ones(len(X), dtype=bool)
    done = np.zeros(len(X), dtype=bool)
    for _ in range(iters):
        idx = np.nonzero(active)[0]
        if len(idx) == 0:
            break
        R, J, _ = system.batch(X[idx])
        ok = np.abs(R).max(axis=1) <= CORRECTOR_TOL
        done[idx[ok]] = True
        active[idx[ok]] = False
        mv = ~ok
        if not mv.any():
            break
        dx = -np.einsum("nij,nj->ni", np.linalg.pinv(J[mv], rcond=1e-10), R[mv])
        norm = np.linalg.norm(dx, axis=1)
        dx *= np.minimum(1.0, 0.1 / np.maximum(norm, 1e-300))[:, None]
        X[idx[mv]] += dx
        far = np.abs(R[mv, 0]) > 0.5
        active[idx[mv][far]] = False
    return X[done]


def _hausdorff(a, b):
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return max(da.max(), db.max())


def trace_singular_set(F: Expression, G: Expression, m: ImplicitThreeManifold, step=2e-3, seeds=4096,
                       extra_seeds=None) -> SingularCurveSet:
    """All closed curves of the singular set, classified and with cusps refined."""
    _check_step(step)
    system = SingularSystem(F, G, m)
    messages = []
    starts = _seed_points(system, m, seeds, extra_seeds, messages)
    loops, tree = [], None
    for x in starts:
        if tree is not None and tree.query(x)[0] < 5 * step:
            continue
        res = _correct(system, x, np.zeros(4), x, 0.0)
        if res is None:
            continue
        x, J, jets = res
        t = _canonical(_null(J))
        X, T, JETS = _trace_loop(system, x, t, jets, step, messages)
        lp = TracedLoop(system, np.array(X), np.array(T), jets=JETS)
        if any(_hausdorff(lp.positions, o.positions) < 10 * step for o in loops):
            continue
        loops.append(lp)
        messages.append(f"loop {len(loops)}: {len(X)} samples from seed {np.round(x, 6).tolist()}")
        tree = cKDTree(np.concatenate([o.positions for o in loops]))
    if not loops:
        raise NoSingularSet("no singular point found; a smooth pair on a closed manifold always has one")
    for lp in loops:
        _start_canonical(lp)
        _reorient(lp)
        _finish(lp, step, messages)
    loops.sort(key=lambda lp: tuple(lp.positions[np.lexsort(lp.positions.T[::-1])[0]]))
    curves = SingularCurveSet(loops, step=step, log=messages)
    _attach_crossings(curves)
    for msg in messages:
        log.info(msg)
    return curves


def _start_canonical(lp: TracedLoop):
    """Start at the lexicographically smallest sample, so output ignores seed order."""
    k = int(np.lexsort(lp.positions.T[::-1])[0])
    lp.positions = np.roll(lp.positions, -k, axis=0)
    lp.tangents = np.roll(lp.tangents, -k, axis=0)
    lp.jets = lp.jets[k:] + lp.jets[:k]


def trace_open(F, G, m, x0, step=1e-3, length=1.0) -> TracedLoop:
    """Open curve of the singular set through x0, traced ``length`` each way."""
    _check_step(step)
    system = SingularSystem(F, G, m)
    res = _correct(system, np.asarray(x0, dtype=float), np.zeros(4), np.asarray(x0, dtype=float), 0.0)
    if res is None:
        raise TraceStalled("seed does not converge onto the singular set")
    x, J, jets = res
    t = _canonical(_null(J))
    halves = []
    for sign in (1.0, -1.0):
        X, T, JETS = [x], [sign * t], [jets]
        h, fails, done = step, 0, 0.0
        while done < length:
            nxt = _advance(system, X[-1], T[-1], h)
            if nxt is None:
                fails += 1
                if fails >= MAX_FAILS:
                    raise TraceStalled("corrector failed on an open curve")
                h *= 0.5
                continue
            fails = 0
            done += h
            h = min(step, 2 * h)
            X.append(nxt[0])
            T.append(nxt[1])
            JETS.append(nxt[2])
        halves.append((X, T, JETS))
    (Xf, Tf, Jf), (Xb, Tb, Jb) = halves
    X = Xb[::-1] + Xf[1:]
    T = [-v for v in Tb[::-1]] + Tf[1:]
    J = Jb[::-1] + Jf[1:]
    lp = TracedLoop(system, np.array(X), np.array(T), closed=False, jets=J)
    _finish(lp, step, [])
    return lp


def _attach_crossings(curves: SingularCurveSet):
    oriented = [OrientedCurve(lp) for lp in curves.loops]
    raw, contacts = find_crossings(oriented)
    curves.crossings = [ImageCrossing(np.asarray(pos), angle, (la, lb), (ua, ub)) for la, ua, lb, ub, pos, angle in raw]
    curves.contacts = contacts


# --- stability and extraction ----------------------------------------------------

def verify_stability(curves: SingularCurveSet) -> StabilityReport:
    """Folds and cusps only, with transverse double points away from cusps."""
    issues = []
    for li, lp in enumerate(curves.loops):
        for i, k in enumerate(lp.kind):
            if k not in ("definite", "indefinite", "cusp"):
                issues.append(StabilityIssue("unclassified", tuple(lp.image[i]), f"sample {i} of loop {li} is {k}"))
        if lp.closed and lp.cusp_count % 2:
            issues.append(StabilityIssue("cusp_parity", tuple(lp.image[0]), f"loop {li} has {lp.cusp_count} cusps"))
    oriented = [OrientedCurve(lp) for lp in curves.loops]
    raw, contacts = find_crossings(oriented)
    for p in contacts:
        issues.append(StabilityIssue("contact", tuple(map(float, p)), "non-transverse contact of image curves"))
    cusp_pts = [lp.image[lp.kind == "cusp"] for lp in curves.loops]
    cusp_pts = np.concatenate(cusp_pts) if cusp_pts else np.zeros((0, 2))
    positions = [np.asarray(c[4]) for c in raw]
    for la, ua, lb, ub, pos, angle in raw:
        if angle <= ANGLE_TOL:
            issues.append(StabilityIssue("tangency", tuple(map(float, pos)), f"crossing angle {angle:.3g} rad"))
        if len(cusp_pts) and np.linalg.norm(cusp_pts - pos, axis=1).min() < POINT_TOL:
            issues.append(StabilityIssue("cusp_crossing", tuple(map(float, pos)), "double point on a cusp"))
    for i in range(len(positions)):
        for j in range(i + 1, len(positions)):
            if np.linalg.norm(positions[i] - positions[j]) < POINT_TOL:
                issues.append(StabilityIssue("triple_point", tuple(map(float, positions[i])), "two double points coincide"))
    return StabilityReport(not issues, issues)


def extract_graphic(curves: SingularCurveSet) -> Graphic:
    if not curves.loops:
        raise ValueError("empty curve set: the singular set of a map from a closed manifold is never empty")
    return assemble.assemble(curves.loops)
