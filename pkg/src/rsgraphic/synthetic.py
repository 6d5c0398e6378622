"""Synthetic graphics built from analytic closed curves.

Motifs: a definite ellipse shaded inside, indefinite ellipses, and a
"banana" (two arcs meeting in a pair of type-one cusps, definite on top).
Each is a parametric curve run through the same feature assembly as traced
data, so synthetic and traced graphics are built by one code path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assemble import assemble
from .classifier import graphic_profile
from .graphic import Graphic, validate
from .morse import MorseError

TWO_PI = 2 * math.pi


@dataclass
class Placement:
    center: tuple = (0.0, 0.0)
    angle: float = 0.0
    scale: float = 1.0
    mirror: bool = False

    def matrix(self):
        c, s = math.cos(self.angle), math.sin(self.angle)
        R = np.array([[c, -s], [s, c]]) * self.scale
        if self.mirror:
            R = R @ np.diag([-1.0, 1.0])
        return R


class ParametricCurve:
    """Closed curve ``u -> A r(u) + center`` on ``[0, 2 pi)`` with fold labels."""

    period = TWO_PI

    def __init__(self, r, dr, label, gray, cusps=(), placement=None, samples=256):
        self.r, self.dr, self._label, self._gray = r, dr, label, gray
        self.placement = placement or Placement()
        self.A = self.placement.matrix()
        self.c = np.asarray(self.placement.center, dtype=float)
        u = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        self.cusps = sorted(float(x) for x in cusps)
        self.u = np.unique(np.concatenate([u, self.cusps]))
        self.image = (self.A @ self.r(self.u)).T + self.c
        self.tau = (self.A @ self.dr(self.u)).T
        cusp_set = set(self.cusps)
        self.kind = np.array(["cusp" if x in cusp_set else label(x) for x in self.u], dtype=object)
        flip = {"left": "right", "right": "left", "none": "none"}
        g = [gray(x) if k == "definite" else "none" for x, k in zip(self.u, self.kind)]
        if self.placement.mirror:
            g = [flip[s] for s in g]
        self.gray = np.array(g, dtype=object)

    def point(self, u):
        return self.A @ self.r(u) + self.c, self.A @ self.dr(u)


def ellipse(a=1.0, b=1.0, label="definite", placement=None, samples=256):
    """Counter-clockwise ellipse; a definite one is shaded inside (left)."""
    return ParametricCurve(
        lambda u: np.array([a * np.cos(u), b * np.sin(u)]),
        lambda u: np.array([-a * np.sin(u), b * np.cos(u)]),
        lambda u: label, lambda u: "left", (), placement, samples)


def banana(a=1.0, c=0.4, placement=None, samples=256):
    """Arcs ``y = a x^2 +- c (1 - x^2)^(3/2)`` joined at cusps x = +-1.

    With 2a > 3c both arcs have a single minimum. The upper arc is definite
    with the region between the arcs shaded; the lower arc is indefinite.
    """
    if not 2 * a > 3 * c > 0:
        raise ValueError("banana needs 2a > 3c > 0")
    return ParametricCurve(
        lambda u: np.array([np.cos(u), a * np.cos(u) ** 2 + c * np.sin(u) ** 3]),
        lambda u: np.sin(u) * np.array([-np.ones_like(u), -2 * a * np.cos(u) + 3 * c * np.sin(u) * np.cos(u)]),
        lambda u: "definite" if 0 < u % TWO_PI < math.pi else "indefinite",
        lambda u: "left", (0.0, math.pi), placement, samples)


def lips(c=0.5, upper="indefinite", placement=None, samples=256):
    """Symmetric lips with horizontal cusps at x = +-1."""
    lower = "definite" if upper == "indefinite" else "indefinite"
    return ParametricCurve(
        lambda u: np.array([np.cos(u), c * np.sin(u) ** 3]),
        lambda u: np.sin(u) * np.array([-np.ones_like(u), 3 * c * np.sin(u) * np.cos(u)]),
        lambda u: upper if 0 < u % TWO_PI < math.pi else lower,
        lambda u: "left", (0.0, math.pi), placement, samples)


def deltoid(samples=240):
    """Three-cusped hypocycloid labelled d, i, d between its cusps: an invalid loop for tests."""
    third = TWO_PI / 3
    return ParametricCurve(
        lambda u: np.array([2 * np.cos(u) + np.cos(2 * u), 2 * np.sin(u) - np.sin(2 * u)]),
        lambda u: np.array([-2 * np.sin(u) - 2 * np.sin(2 * u), 2 * np.cos(u) - 2 * np.cos(2 * u)]),
        lambda u: "indefinite" if third < u % TWO_PI < 2 * third else "definite",
        lambda u: "left", (0.0, third, 2 * third), None, samples)


def circle_graphic(samples=256) -> Graphic:
    return assemble([ellipse(samples=samples)])


def nested_graphic(samples=256) -> Graphic:
    """Definite circle of radius 2 shaded inside around an indefinite unit circle."""
    return assemble([ellipse(2.0, 2.0, samples=samples), ellipse(1.0, 1.0, "indefinite", samples=samples)])


def banana_graphic(samples=256, angle=0.0) -> Graphic:
    """Outer definite circle around one banana."""
    return assemble([ellipse(4.0, 4.0, samples=samples),
                     banana(1.0, 0.4, Placement(angle=angle), samples=samples)])


def random_curves(rng: np.random.Generator, samples=96):
    """A random arrangement: one outer definite ellipse plus nested motifs."""
    A, B = rng.uniform(3.0, 5.0, size=2)
    curves = [ellipse(A, B, placement=Placement(angle=rng.uniform(-0.3, 0.3)), samples=samples)]
    for _ in range(rng.integers(0, 4)):
        center = rng.uniform(-1.5, 1.5, size=2)
        a, b = rng.uniform(0.3, 1.2, size=2)
        curves.append(ellipse(a, b, "indefinite", Placement(tuple(center), rng.uniform(0, math.pi)), samples))
    for _ in range(rng.integers(0, 4)):
        a = rng.uniform(0.5, 1.5)
        c = rng.uniform(0.1, 0.6) * 2 * a / 3
        place = Placement(tuple(rng.uniform(-1.5, 1.5, size=2)), rng.uniform(-0.6, 0.6),
                          rng.uniform(0.3, 1.0), bool(rng.integers(0, 2)))
        curves.append(banana(a, c, place, samples))
    return curves


def random_graphic(rng: np.random.Generator, samples=96, require_valid=True, max_tries=50):
    """Random graphic passing validation with unique extrema for F and G."""
    for _ in range(max_tries):
        try:
            g = assemble(random_curves(rng, samples))
        except ValueError:
            continue
        if not require_valid:
            return g
        if validate(g):
            continue
        try:
            graphic_profile(g, require_unique_extrema=True)
        except MorseError:
            continue
        return g
    raise RuntimeError("no valid random graphic found")
