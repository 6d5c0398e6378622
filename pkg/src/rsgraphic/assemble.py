"""Build Graphic loops from densely sampled closed image curves.

A curve source is any object with

* ``u``: increasing sample parameters in ``[0, period)``, ``period``;
* ``image`` ``(n, 2)`` and ``tau`` ``(n, 2)`` (derivative of the image in u);
* ``kind``: per-sample ``"definite" | "indefinite" | "cusp"``;
* ``gray``: per-sample ``"left" | "right" | "none"``;
* ``cusps``: parameters of the cusps (each also present as a sample);
* ``point(u) -> (image, tau)``: accurate evaluation anywhere on the curve.

Both the tracer and the synthetic generators provide this interface, so the
feature location logic below is shared.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .graphic import Arc, Crossing, Feature, Graphic, Loop, branch_side, cusp_branches, cusp_slope_sign

FEATURE_GAP = 1e-6
ROOT_XTOL = 1e-13
TIP_OFFSET = 1e-5
CURVATURE_OFFSET = 1e-4


class FeatureTooClose(ValueError):
    pass


class TypeTwoDetected(ValueError):
    pass


def signed_area(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class OrientedCurve:
    """A source traversed counter-clockwise in the image (when it has area)."""

    _SWAP = {"left": "right", "right": "left", "none": "none"}

    def __init__(self, src):
        self.src = src
        self.period = float(src.period)
        u = np.asarray(src.u, dtype=float)
        image = np.asarray(src.image, dtype=float)
        tau = np.asarray(src.tau, dtype=float)
        kind = np.asarray(src.kind, dtype=object)
        gray = np.asarray(src.gray, dtype=object)
        cusps = np.asarray(src.cusps, dtype=float)
        self.reversed = signed_area(image) < 0
        if self.reversed:
            u = (self.period - u) % self.period
            tau = -tau
            gray = np.array([self._SWAP[s] for s in gray], dtype=object)
            cusps = (self.period - cusps) % self.period
        order = np.argsort(u, kind="stable")
        self.u, self.image, self.tau = u[order], image[order], tau[order]
        self.kind, self.gray = kind[order], gray[order]
        self.cusps = np.sort(cusps)

    def point(self, u):
        if self.reversed:
            img, t = self.src.point((self.period - u) % self.period)
            return np.asarray(img), -np.asarray(t)
        img, t = self.src.point(u % self.period)
        return np.asarray(img), np.asarray(t)

    def tangent(self, u):
        return self.point(u)[1]

    def curvature(self, u, h=CURVATURE_OFFSET):
        t0 = self.tangent(u)
        tm, tp = self.tangent(u - h), self.tangent(u + h)
        dt = (tp - tm) / (2 * h)
        return t0[0] * dt[1] - t0[1] * dt[0]

    def segment_ids(self, u):
        m = len(self.cusps)
        if m == 0:
            return np.zeros(np.shape(u), dtype=int)
        return np.searchsorted(self.cusps, u, side="right") % m


def _sample_curvature(c: OrientedCurve):
    u = np.concatenate([c.u[-1:] - c.period, c.u, c.u[:1] + c.period])
    t = np.concatenate([c.tau[-1:], c.tau, c.tau[:1]])
    dt = (t[2:] - t[:-2]) / (u[2:] - u[:-2])[:, None]
    return c.tau[:, 0] * dt[:, 1] - c.tau[:, 1] * dt[:, 0]


def _root(fn, a, b):
    return brentq(fn, a, b, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=200)


def _crosses(a, b):
    """Sign change on ``(ua, ub]``: a root exactly at ub counts here, one at ua does not."""
    return (a < 0 <= b) or (a > 0 >= b)


def locate_features(c: OrientedCurve):
    """Horizontal, vertical, inflection and cusp features as ``(u, Feature)`` pairs."""
    n = len(c.u)
    out = []
    is_cusp = c.kind == "cusp"
    kappa = _sample_curvature(c)
    near_cusp = np.zeros(n, dtype=bool)
    for k in np.nonzero(is_cusp)[0]:
        for j in range(-2, 3):
            near_cusp[(k + j) % n] = True
    for k in range(n):
        k1 = (k + 1) % n
        ua, ub = c.u[k], c.u[k1] + (c.period if k1 == 0 else 0.0)
        if ub <= ua:
            continue
        ta, tb = c.tau[k], c.tau[k1]
        eps = min(1e-6, (ub - ua) / 4)
        if is_cusp[k]:
            ua = ua + eps
            ta = c.tangent(ua)
        if is_cusp[k1]:
            ub = ub - eps
            tb = c.tangent(ub)
        if _crosses(ta[1], tb[1]):
            r = _root(lambda s: c.tangent(s)[1], ua, ub)
            img, _ = c.point(r)
            conv = "down" if ta[1] < 0 else "up"
            out.append((r % c.period, Feature("horizontal", (float(img[0]), float(img[1])), conv, slope_sign="zero")))
        if _crosses(ta[0], tb[0]):
            r = _root(lambda s: c.tangent(s)[0], ua, ub)
            img, _ = c.point(r)
            conv = "left" if ta[0] < 0 else "right"
            out.append((r % c.period, Feature("vertical", (float(img[0]), float(img[1])), conv, slope_sign="infinite")))
        if not (near_cusp[k] or near_cusp[k1]) and _crosses(kappa[k], kappa[k1]):
            ka, kb = c.curvature(ua), c.curvature(ub)
            if _crosses(ka, kb):
                r = _root(c.curvature, ua, ub)
                img, t = c.point(r)
                slope = "positive" if t[0] * t[1] > 0 else "negative"
                out.append((r % c.period, Feature("inflection", (float(img[0]), float(img[1])), slope_sign=slope)))
    for uc in c.cusps:
        img, _ = c.point(uc)
        before, after = c.tangent(uc - TIP_OFFSET), c.tangent(uc + TIP_OFFSET)
        d = before - after
        d = d / np.hypot(*d)
        tip = (float(d[0]), float(d[1]))
        out.append((float(uc), Feature("cusp", (float(img[0]), float(img[1])), tip_direction=tip,
                                       slope_sign=cusp_slope_sign(tip))))
    return out


# --- crossings ----------------------------------------------------------------

def _segments(curves):
    P0, P1, owner, index = [], [], [], []
    for li, c in enumerate(curves):
        P0.append(c.image)
        P1.append(np.roll(c.image, -1, axis=0))
        owner.append(np.full(len(c.image), li))
        index.append(np.arange(len(c.image)))
    return np.concatenate(P0), np.concatenate(P1), np.concatenate(owner), np.concatenate(index)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def segment_intersections(curves):
    """Transverse segment crossings and collinear overlaps between polylines.

    Returns ``(hits, contacts)`` where hits are ``(la, ia, ta, lb, ib, tb)``
    tuples (segment index plus fraction) and contacts are image points.
    """
    P0, P1, owner, index = _segments(curves)
    lengths = np.hypot(*(P1 - P0).T)
    mid = 0.5 * (P0 + P1)
    tree = cKDTree(mid)
    pairs = tree.query_pairs(float(lengths.max()) * (1 + 1e-9) + 1e-12, output_type="ndarray")
    if len(pairs) == 0:
        return [], []
    i, j = pairs[:, 0], pairs[:, 1]
    same = owner[i] == owner[j]
    sizes = np.array([len(c.image) for c in curves])
    gap = np.abs(index[i] - index[j])
    gap = np.minimum(gap, sizes[owner[i]] - gap)
    keep = ~(same & (gap <= 1))
    i, j = i[keep], j[keep]
    r, s = P1[i] - P0[i], P1[j] - P0[j]
    qp = P0[j] - P0[i]
    denom = _cross(r, s)
    scale = lengths[i] * lengths[j]
    parallel = np.abs(denom) <= 1e-12 * np.maximum(scale, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(qp, s) / denom
        w = _cross(qp, r) / denom
    hit = ~parallel & (t >= 0) & (t < 1) & (w >= 0) & (w < 1)
    hits = [(int(owner[a]), int(index[a]), float(ta), int(owner[b]), int(index[b]), float(tb))
            for a, b, ta, tb in zip(i[hit], j[hit], t[hit], w[hit])]
    contacts = []
    for a, b in zip(i[parallel], j[parallel]):
        ra = P1[a] - P0[a]
        la = np.hypot(*ra)
        if la == 0:
            continue
        off = abs(_cross(ra, P0[b] - P0[a])) / la
        if off > 1e-12 * max(1.0, np.abs(P0[a]).max()):
            continue
        e = ra / la
        lo, hi = sorted(((P0[b] - P0[a]) @ e, (P1[b] - P0[a]) @ e))
        if hi > 0 and lo < la and min(hi, la) - max(lo, 0.0) > 1e-12 * la:
            contacts.append(tuple(0.5 * (P0[a] + P1[a])))
    return hits, contacts


def _refine_crossing(ca, ua, cb, ub):
    for _ in range(30):
        pa, ta = ca.point(ua)
        pb, tb = cb.point(ub)
        res = pa - pb
        if np.abs(res).max() <= 1e-14 * max(1.0, np.abs(pa).max()):
            break
        J = np.column_stack([ta, -tb])
        du = np.linalg.solve(J, -res)
        ua, ub = ua + du[0], ub + du[1]
    pa, ta = ca.point(ua)
    _, tb = cb.point(ub)
    cosang = abs(ta @ tb) / (np.hypot(*ta) * np.hypot(*tb))
    angle = float(np.arccos(min(1.0, cosang)))
    return ua % ca.period, ub % cb.period, pa, angle


def find_crossings(curves):
    """Refined double points ``(la, ua, lb, ub, position, angle)`` and contact points."""
    hits, contacts = segment_intersections(curves)
    out = []
    for la, ia, ta, lb, ib, tb in hits:
        ca, cb = curves[la], curves[lb]
        ua = _param(ca, ia, ta)
        ub = _param(cb, ib, tb)
        try:
            ua, ub, pos, angle = _refine_crossing(ca, ua, cb, ub)
        except np.linalg.LinAlgError:
            contacts.append(tuple(ca.point(ua)[0]))
            continue
        dup = any(o[0] == la and o[2] == lb and abs(o[1] - ua) < 1e-9 and abs(o[3] - ub) < 1e-9 for o in out)
        if not dup:
            out.append((la, ua, lb, ub, pos, angle))
    out.sort(key=lambda o: (o[4][1], o[4][0]))
    return out, contacts


def _param(c, i, frac):
    n = len(c.u)
    u0 = c.u[i]
    u1 = c.u[(i + 1) % n] + (c.period if i + 1 == n else 0.0)
    return u0 + frac * (u1 - u0)


# --- assembly -------------------------------------------------------------------

def _segment_attr(c: OrientedCurve, values, allowed):
    ids = c.segment_ids(c.u)
    out = {}
    for sid in np.unique(ids):
        vals = [v for v, k, s in zip(values, c.kind, ids) if s == sid and k != "cusp" and v in allowed]
        if vals:
            uniq, counts = np.unique(np.array(vals, dtype=str), return_counts=True)
            out[int(sid)] = str(uniq[np.argmax(counts)])
    return out


def assemble(sources) -> Graphic:
    """Graphic with located features, labelled arcs, cusp branches and crossings."""
    curves = [OrientedCurve(s) for s in sources]
    if not curves:
        raise ValueError("no curves to assemble")
    per_loop = [locate_features(c) for c in curves]
    crossings, _ = find_crossings(curves)
    for la, ua, lb, ub, pos, _ in crossings:
        p = (float(pos[0]), float(pos[1]))
        per_loop[la].append((ua, Feature("crossing_ref", p)))
        per_loop[lb].append((ub, Feature("crossing_ref", p)))
    loops = []
    feature_params = []
    for li, (c, feats) in enumerate(zip(curves, per_loop)):
        if not feats:
            raise ValueError(f"curve {li} has no features")
        feats.sort(key=lambda t: t[0])
        us = np.array([t[0] for t in feats])
        gaps = np.diff(np.append(us, us[0] + c.period))
        if len(feats) > 1 and gaps.min() < FEATURE_GAP:
            k = int(np.argmin(gaps))
            raise FeatureTooClose(f"features {feats[k][1].kind} and {feats[(k + 1) % len(feats)][1].kind} "
                                  f"on curve {li} are {gaps[k]:.3g} apart; retrace at a smaller step")
        start = min(range(len(feats)), key=lambda k: (feats[k][1].g, feats[k][1].f, k))
        feats = feats[start:] + feats[:start]
        loops.append(_build_loop(c, feats))
        feature_params.append([t[0] for t in feats])
    out = []
    for la, ua, lb, ub, pos, angle in crossings:
        ka = _index_of(feature_params[la], ua, loops[la], "crossing_ref")
        kb = _index_of(feature_params[lb], ub, loops[lb], "crossing_ref")
        out.append(Crossing((float(pos[0]), float(pos[1])), angle, ((la, ka), (lb, kb))))
    return Graphic(loops, out)


def _index_of(params, u, loop, kind):
    k = min(range(len(params)), key=lambda i: abs(params[i] - u) if loop.features[i].kind == kind else np.inf)
    return k


def _build_loop(c: OrientedCurve, feats):
    labels = _segment_attr(c, c.kind, ("definite", "indefinite"))
    grays = _segment_attr(c, c.gray, ("left", "right"))
    m = len(feats)
    arcs = []
    for k in range(m):
        u0 = feats[k][0]
        u1 = feats[(k + 1) % m][0]
        if u1 <= u0:
            u1 += c.period
        us = np.where(c.u < u0, c.u + c.period, c.u)
        inside = (us > u0 + 1e-12) & (us < u1 - 1e-12)
        order = np.argsort(us[inside])
        pts = [feats[k][1].position] + [tuple(p) for p in c.image[inside][order]] + [feats[(k + 1) % m][1].position]
        sid = int(c.segment_ids(np.array([(0.5 * (u0 + u1)) % c.period]))[0])
        if sid not in labels:
            raise ValueError("cannot determine the fold type of an arc")
        label = "d" if labels[sid] == "definite" else "i"
        gray = None
        if label == "d":
            if sid not in grays:
                raise ValueError("definite arc without a gray side")
            gray = grays[sid]
        arcs.append(Arc(label, gray, np.array(pts)))
    loop = Loop([f for _, f in feats], arcs)
    for k, ft in enumerate(loop.features):
        if ft.kind != "cusp":
            continue
        incoming, outgoing = cusp_branches(loop, k)
        s_in = branch_side(incoming, ft.position, ft.tip_direction)
        s_out = branch_side(outgoing, ft.position, ft.tip_direction)
        if s_in * s_out != -1:
            raise TypeTwoDetected(f"cusp at {ft.position} has both branches on one side of its tangent line")
        lab_in, lab_out = loop.arcs[(k - 1) % m].label, loop.arcs[k].label
        ft.branch_labels = (lab_out, lab_in) if s_in > 0 else (lab_in, lab_out)
    return loop
