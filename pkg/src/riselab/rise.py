"""The rise between two potentials and the identities and inequalities it obeys.

In the toric model the geodesic joining ``u`` and ``v`` has velocity
``(uhat_u - uhat_v)(y)`` at the point ``x = grad uhat_t(y)``, for every ``t``.
The rise is therefore the decreasing rearrangement of ``uhat_u - uhat_v``
under the uniform mass on the polytope grid; it is computed from that closed
form, and velocities only enter the cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .checks import CheckResult, violation
from .rearrange import (
    InvalidInput,
    StepFunction,
    WeightedSample,
    partial_integral,
    merged_breakpoints,
    probe_points,
    rearrange,
)
from .toric import (
    ConvexPotential,
    GeodesicPath,
    SpaceGrid,
    auto_space_grid,
    geodesic_at,
    legendre,
    meet,
    pushforward_measure,
    support_planes,
    velocity_finite_difference,
)

__all__ = [
    "Rise",
    "rise",
    "rise_of_path",
    "rise_of_segment",
    "rise_reversed",
    "pythagoras_check",
    "contraction_check",
    "triangle_hlp_check",
    "FlatComparison",
    "flat_compare",
    "flat_compare_check",
    "flat_compare_strong",
    "meet_distance_bound_check",
    "conservation_check",
    "ConservationReport",
    "support_truncations",
    "monotone_approx_check",
    "chord_sandwich",
    "pointwise_triangle_violation",
]

STRUCTURAL_TOL = 1e-12
INEQUALITY_TOL = 1e-9


class Rise(StepFunction):
    """Rise ``rho[u, v]``: a decreasing usc step function on ``(0, 1]``."""


def rise(u: ConvexPotential, v: ConvexPotential) -> Rise:
    """``rho[u, v]``: decreasing rearrangement of ``uhat_u - uhat_v`` (uniform mass 1)."""
    diff = u - v
    f = rearrange(WeightedSample.uniform(diff.ravel(), total_mass=1.0))
    return Rise(f.breakpoints, f.values)


def rise_of_path(path: GeodesicPath) -> Rise:
    """Rise of the geodesic ``path`` parametrized by ``[0, 1]``."""
    return rise(path.start, path.end)


def rise_of_segment(path: GeodesicPath, a: float, b: float) -> Rise:
    """``rho[psi(a), psi(b)]``, which equals ``(b - a)`` times the rise of the path."""
    if not 0.0 <= a < b <= 1.0:
        raise InvalidInput(f"need 0 <= a < b <= 1, got a={a}, b={b}")
    return rise(geodesic_at(path, a), geodesic_at(path, b))


def rise_reversed(r: StepFunction) -> Rise:
    """The usc function ``lam -> -r(V - lam)``: rise of the reversed geodesic."""
    return Rise(np.concatenate(([0.0], np.cumsum(r.lengths[::-1]))), -r.values[::-1])


def _deviation(f: StepFunction, g, probes: np.ndarray) -> np.ndarray:
    gv = g(probes) if callable(g) else g
    return np.abs(f.eval(probes) - gv)


def pythagoras_check(u: ConvexPotential, v: ConvexPotential, tol: float = STRUCTURAL_TOL) -> CheckResult:
    """``rho[u, u^v] = min(0, rho[u,v])``, ``rho[u^v, v] = max(0, rho[u,v])`` and their sum."""
    w = meet(u, v)
    r, r1, r2 = rise(u, v), rise(u, w), rise(w, v)
    s = probe_points(r, r1, r2)
    rv, r1v, r2v = r.eval(s), r1.eval(s), r2.eval(s)
    worst = max(
        float(np.max(np.abs(r1v - np.minimum(0.0, rv)))),
        float(np.max(np.abs(r2v - np.maximum(0.0, rv)))),
        float(np.max(np.abs(r1v + r2v - rv))),
    )
    return CheckResult("pythagoras", worst, tol)


def contraction_check(
    u: ConvexPotential, v: ConvexPotential, w: ConvexPotential, tol: float = INEQUALITY_TOL
) -> CheckResult:
    """If ``u <= v`` then ``rho[u^w, v^w] <= rho[u, v]``; if ``u >= v`` the reverse."""
    d = u - v
    if np.all(d >= 0):
        sign = 1.0  # uhat_u >= uhat_v, i.e. u <= v
    elif np.all(d <= 0):
        sign = -1.0
    else:
        raise InvalidInput("contraction needs comparable potentials (u <= v or u >= v)")
    lhs = rise(meet(u, w), meet(v, w))
    r = rise(u, v)
    s = probe_points(lhs, r)
    return CheckResult("contraction", violation(sign * (lhs.eval(s) - r.eval(s))), tol)


def triangle_hlp_check(
    u: ConvexPotential, v: ConvexPotential, w: ConvexPotential, tol: float = INEQUALITY_TOL
) -> CheckResult:
    """``int_0^lam rho[u,v] + int_0^lam rho[v,w] >= int_0^lam rho[u,w]`` for every ``lam``."""
    ruv, rvw, ruw = rise(u, v), rise(v, w), rise(u, w)
    lam = merged_breakpoints(ruv, rvw, ruw)
    gap = partial_integral(ruw, lam) - partial_integral(ruv, lam) - partial_integral(rvw, lam)
    return CheckResult("triangle_hlp", violation(gap), tol)


def pointwise_triangle_violation(u: ConvexPotential, v: ConvexPotential, w: ConvexPotential) -> float:
    """Worst failure of the un-integrated ``rho[u,v] + rho[v,w] >= rho[u,w]`` (expected to fail)."""
    ruv, rvw, ruw = rise(u, v), rise(v, w), rise(u, w)
    s = probe_points(ruv, rvw, ruw)
    return violation(ruw.eval(s) - ruv.eval(s) - rvw.eval(s))


# ---------------------------------------------------------------------------
# comparison with the rectilinear path


@dataclass(frozen=True)
class FlatComparison:
    """``(v-u)`` rearranged w.r.t. ``mu_v`` (lower) and ``mu_u`` (upper), with the rise between."""

    lower: StepFunction
    rise: Rise
    upper: StepFunction
    grid: SpaceGrid


def flat_compare(u: ConvexPotential, v: ConvexPotential, grid: SpaceGrid | None = None) -> FlatComparison:
    """Rearrangements of the rectilinear velocity ``v - u`` at either footpoint, and the rise."""
    if grid is None:
        grid = auto_space_grid(u, v)
    diff = legendre(v, grid) - legendre(u, grid)
    lower = rearrange(pushforward_measure(v, diff))
    upper = rearrange(pushforward_measure(u, diff))
    return FlatComparison(lower, rise(u, v), upper, grid)


def discretization_scale(u: ConvexPotential, grid: SpaceGrid) -> float:
    """``h``: the coarser of the polytope and space grid spacings."""
    return max(u.polytope.h, grid.spacing)


def flat_compare_check(
    u: ConvexPotential, v: ConvexPotential, C: float, grid: SpaceGrid | None = None
) -> CheckResult:
    """``(v-u)^{*v} <= rho[u,v] <= (v-u)^{*u}`` at all probes, within ``C * h``."""
    fc = flat_compare(u, v, grid)
    s = probe_points(fc.lower, fc.rise, fc.upper)
    r = fc.rise.eval(s)
    worst = max(violation(fc.lower.eval(s) - r), violation(r - fc.upper.eval(s)))
    return CheckResult("flat_compare", worst, C * discretization_scale(u, fc.grid))


def _require_ordered(u: ConvexPotential, v: ConvexPotential, what: str) -> None:
    if np.any(u - v < -STRUCTURAL_TOL):
        raise InvalidInput(f"{what} needs u <= v, i.e. uhat_u >= uhat_v pointwise")


def flat_compare_strong(
    u: ConvexPotential, v: ConvexPotential, C: float = 0.0, grid: SpaceGrid | None = None
) -> CheckResult:
    """For ``u <= v``: ``(v-u)^{*u}(s) / (n+1) <= rho[u,v](s/e)``, within ``C * h``."""
    _require_ordered(u, v, "flat_compare_strong")
    fc = flat_compare(u, v, grid)
    n = u.polytope.dim
    scaled = np.minimum(fc.rise.breakpoints * math.e, 1.0)
    bp = np.unique(np.concatenate((fc.upper.breakpoints, scaled)))
    s = 0.5 * (bp[:-1] + bp[1:])
    s = s[bp[1:] > bp[:-1]]
    excess = fc.upper.eval(s) / (n + 1) - fc.rise.eval(s / math.e)
    tol = C * discretization_scale(u, fc.grid) + INEQUALITY_TOL
    return CheckResult("flat_compare_strong", violation(excess), tol)


def meet_distance_bound_check(
    u: ConvexPotential,
    v: ConvexPotential,
    w: ConvexPotential,
    pairs: Sequence[tuple[float, float]],
    C: float = 0.0,
    grid: SpaceGrid | None = None,
) -> CheckResult:
    """``rho[u^v, w](s) <= max((w-u)^{*u}(sigma), (w-v)^{*v}(s-sigma))`` for each ``(sigma, s)``."""
    for sigma, s in pairs:
        if not 0.0 < sigma < s < 1.0:
            raise InvalidInput(f"need 0 < sigma < s < 1, got ({sigma}, {s})")
    if grid is None:
        grid = auto_space_grid(u, v, w)
    lhs_rise = rise(meet(u, v), w)
    wu = flat_compare(u, w, grid).upper
    wv = flat_compare(v, w, grid).upper
    sig = np.array([p[0] for p in pairs])
    s = np.array([p[1] for p in pairs])
    rhs = np.maximum(wu.eval(sig), wv.eval(s - sig))
    excess = lhs_rise.eval(s) - rhs
    return CheckResult(
        "meet_distance_bound", violation(excess), C * discretization_scale(u, grid) + INEQUALITY_TOL
    )


def chord_sandwich(path: GeodesicPath, sigma: float, tau: float, grid: SpaceGrid | None = None):
    """Chord velocity ``(psi(tau) - psi(sigma)) / (tau - sigma)`` rearranged at both footpoints.

    Returns ``(at_tau, rise_of_path, at_sigma)``; the rise lies between the two.
    """
    if not 0.0 <= sigma < tau <= 1.0:
        raise InvalidInput("need 0 <= sigma < tau <= 1")
    a, b = geodesic_at(path, sigma), geodesic_at(path, tau)
    fc = flat_compare(a, b, grid)
    k = 1.0 / (tau - sigma)
    return fc.lower.scale(k), rise_of_path(path), fc.upper.scale(k), fc.grid


# ---------------------------------------------------------------------------
# conservation and approximation


@dataclass(frozen=True)
class ConservationReport:
    times: tuple
    deviations: tuple
    tolerance: float

    @property
    def max_deviation(self) -> float:
        return max(self.deviations) if self.deviations else 0.0

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def __bool__(self) -> bool:
        return self.passed

    def as_check(self) -> CheckResult:
        return CheckResult("conservation", self.max_deviation, self.tolerance,
                           {"times": self.times, "deviations": self.deviations})


def velocity_rearrangement(path: GeodesicPath, t: float, dt: float, grid: SpaceGrid | None = None) -> StepFunction:
    """Finite-difference velocity at time ``t`` rearranged w.r.t. ``mu_{psi(t)}``."""
    if grid is None:
        grid = auto_space_grid(path.start, path.end)
    vel = velocity_finite_difference(path, t, dt, grid)
    return rearrange(pushforward_measure(geodesic_at(path, t), vel))


def conservation_check(
    path: GeodesicPath,
    times: Sequence[float],
    dt: float,
    tol: float,
    grid: SpaceGrid | None = None,
) -> ConservationReport:
    """Sup deviation between rearranged velocities at ``times`` and the rise, at plateau midpoints."""
    if grid is None:
        grid = auto_space_grid(path.start, path.end)
    r = rise_of_path(path)
    devs = []
    for t in times:
        if not dt < t < 1.0 - dt:
            raise InvalidInput(f"time {t} not inside ({dt}, {1 - dt})")
        rv = velocity_rearrangement(path, t, dt, grid)
        s = probe_points(rv, r)
        devs.append(float(np.max(_deviation(rv, r, s))))
    return ConservationReport(tuple(times), tuple(devs), tol)


def dyadic_order(m: int) -> list[int]:
    """Indices ``0..m`` ordered coarse to fine: ``0, m, m/2, m/4, 3m/4, ...``."""
    order = [0, m]
    seen = {0, m}
    step = m
    while step > 1:
        half = step // 2
        for i in range(half, m, step):
            if i not in seen:
                order.append(i)
                seen.add(i)
        step = half
    order.extend(i for i in range(m + 1) if i not in seen)
    return order


def support_nodes(polytope, count: int) -> np.ndarray:
    """Flat node indices of the first ``count`` support points in nested dyadic order."""
    one = dyadic_order(polytope.m)
    if polytope.dim == 1:
        nodes = one
    else:
        # nodes of coarser dyadic levels first; within a level, row-major
        level = {i: k for k, i in enumerate(one)}
        pairs = sorted(
            ((i, j) for i in range(polytope.m + 1) for j in range(polytope.m + 1)),
            key=lambda ij: (max(level[ij[0]], level[ij[1]]), ij),
        )
        nodes = [i * (polytope.m + 1) + j for i, j in pairs]
    return np.array(nodes[:count])


def support_truncations(pot: ConvexPotential, K: int) -> list[ConvexPotential]:
    """``uhat_j = max`` of the first ``j`` supporting affine functions, ``j = 1..K``.

    ``uhat_j`` increases to ``uhat`` (so ``u_j`` decreases to ``u``) and equals it
    at the touched nodes.
    """
    planes = support_planes(pot)
    nodes = support_nodes(pot.polytope, K)
    pts = pot.polytope.points()
    affine = pts @ planes[nodes, :-1].T + planes[nodes, -1]  # (N, K)
    running = np.maximum.accumulate(affine, axis=1)
    # float noise could lift a tangent plane above uhat by an ulp
    running = np.minimum(running, pot.values.ravel()[:, None])
    return [ConvexPotential(pot.polytope, running[:, j], validate=False) for j in range(len(nodes))]


def monotone_approx_check(
    u: ConvexPotential,
    v: ConvexPotential,
    K: int,
    tol: float,
    approximate: str = "u",
) -> CheckResult:
    """Rises of support truncations converge to ``rho[u, v]`` at its plateau midpoints.

    Passes when the sup deviation is non-increasing in ``j = 2..K`` (up to
    1e-12) and the final deviation is at most ``tol``.  ``approximate`` selects
    which endpoints are truncated: ``"u"`` (default), ``"v"`` or ``"both"``.
    A non-monotone sequence is reported as an infinite violation.
    """
    if approximate not in ("u", "v", "both"):
        raise InvalidInput("approximate must be 'u', 'v' or 'both'")
    if K < 2:
        raise InvalidInput("need at least two supporting planes")
    us = support_truncations(u, K) if approximate in ("u", "both") else [u] * K
    vs = support_truncations(v, K) if approximate in ("v", "both") else [v] * K
    n = min(len(us), len(vs))
    target = rise(u, v)
    s = target.midpoints
    goal = target.eval(s)
    devs = np.array([float(np.max(np.abs(rise(us[j], vs[j]).eval(s) - goal))) for j in range(n)])
    monotone = violation(np.diff(devs[1:])) <= STRUCTURAL_TOL
    score = float(devs[-1]) if monotone else float("inf")
    return CheckResult("monotone_approx", score, tol, {"deviations": devs.tolist(), "monotone": bool(monotone)})
