"""Traced example pairs on the unit 3-sphere used by the end-to-end checks."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Example:
    name: str
    F: str
    G: str
    note: str = ""

    def manifest(self, step=2e-3):
        return {"manifold": "s3", "F": self.F, "G": self.G, "tracer": {"step": step}}


# The perturbation x2 + eps*x1*x3 against F = x1 gives no cusps for any eps tried in
# [0.2, 5] (eps = 1 is degenerate); tilting F by 0.2*x3 makes eps = 3 produce a cusp pair.
CUSP_EPSILON = 3.0

CORPUS = (
    Example("circle", "x1", "x2", "image is the unit circle, one definite fold loop"),
    Example("genus_one", "x4", "x1^2+x2^2+0.2*(x1+x3)",
            "G has index counts (1,1,1,1); two loops, one negative-slope and one positive-slope cusp"),
    Example("cusp_pair", "x1+0.2*x3", f"x2+{CUSP_EPSILON:g}*x1*x3",
            "two cusps and one crossing; G has two minima and two maxima"),
    Example("sheared", "x1", "x2+1.5*x1*x3", "no cusps; G has six critical points"),
)


def by_name(name: str) -> Example:
    for ex in CORPUS:
        if ex.name == name:
            return ex
    raise KeyError(name)
