"""Reproducible random potentials on a box polytope.

A base potential is the maximum of ``N`` random affine functions (``N`` in
``[3, 8]``, slopes in ``[-2, 2]^dim``, intercepts in ``[-1, 1]``) plus
``eps * |y - c|^2``.  ``eps = 0`` gives kinky (piecewise affine) potentials,
``eps = 0.1`` strictly convex ones.
"""

from __future__ import annotations

import numpy as np

from .rearrange import InvalidInput
from .toric import ConvexPotential, Polytope, join

KINDS = ("kinky", "smooth", "monotone-pair", "triple")
SMOOTH_EPS = 0.1


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def random_potential(rng: np.random.Generator, polytope: Polytope, eps: float) -> ConvexPotential:
    pts = polytope.points()
    n_planes = int(rng.integers(3, 9))
    slopes = rng.uniform(-2.0, 2.0, size=(n_planes, polytope.dim))
    intercepts = rng.uniform(-1.0, 1.0, size=n_planes)
    vals = np.max(pts @ slopes.T + intercepts, axis=1)
    if eps:
        lo = np.array([b[0] for b in polytope.bounds])
        hi = np.array([b[1] for b in polytope.bounds])
        centre = rng.uniform(lo, hi)
        vals = vals + eps * np.sum((pts - centre) ** 2, axis=1)
    return ConvexPotential(polytope, vals, validate=False)


def generate_instance(seed: int, dim: int = 1, m: int = 64, kind: str = "smooth") -> tuple:
    """Potentials for one experiment instance.

    ``kinky`` / ``smooth`` return a pair ``(uhat_u, uhat_v)``; ``monotone-pair``
    returns a pair with ``uhat_u >= uhat_v`` (so ``u <= v``); ``triple`` returns
    three distinct smooth-or-kinky potentials.
    """
    if kind not in KINDS:
        raise InvalidInput(f"unknown instance kind {kind!r}; expected one of {KINDS}")
    poly = Polytope(dim=dim, m=m)
    # m is not part of the stream: one seed is one continuous instance on every grid
    rng = rng_for(seed, dim, KINDS.index(kind))
    if kind in ("kinky", "smooth"):
        eps = SMOOTH_EPS if kind == "smooth" else 0.0
        return random_potential(rng, poly, eps), random_potential(rng, poly, eps)
    if kind == "monotone-pair":
        eps = SMOOTH_EPS if rng.random() < 0.5 else 0.0
        u = random_potential(rng, poly, eps)
        w = random_potential(rng, poly, eps)
        # v = max(u, w) - gap sits above u
        v = join(u, w).shifted(-float(rng.uniform(0.0, 0.5)))
        return u, v
    pots = []
    while len(pots) < 3:
        eps = SMOOTH_EPS if rng.random() < 0.5 else 0.0
        cand = random_potential(rng, poly, eps)
        if all(np.max(np.abs(cand.values - p.values)) > 0 for p in pots):
            pots.append(cand)
    return tuple(pots)
