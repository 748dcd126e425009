"""Rearrangement-invariant Lagrangians, distances and actions built on the rise.

A Lagrangian ``L`` acts on functions ``xi`` on ``(X, mu)`` (here finite
:class:`WeightedSample` objects) and depends on ``xi`` only through its
decreasing rearrangement.  Four variants are provided:

* :class:`Weight`: ``L(xi) = int_0^V xi* f`` for a decreasing step function ``f``;
* :class:`OrliczIntegral`: ``L(xi) = int chi(xi) dmu``;
* :class:`OrliczNorm`: ``L(xi) = inf{r > 0 : int chi(xi / r) dmu <= chi(1)}``;
* :class:`Fenchel`: ``L(xi) = max_k a_k + int_0^V xi* f_k*`` for a finite family.

The metric layer turns a rise into numbers: ``l_star`` evaluates ``L`` on a
step function, ``action`` is ``T * l_star(rho / T)`` and ``d_chi``/``d_p``
integrate ``|rho|``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .checks import CheckResult, violation
from .rearrange import InvalidInput, StepFunction, WeightedSample, partial_integral, rearrange
from .rise import INEQUALITY_TOL, rise
from .toric import ConvexPotential

__all__ = [
    "Chi",
    "ORLICZ_CHI",
    "DISTANCE_CHI",
    "get_chi",
    "LagrangianSpec",
    "Weight",
    "OrliczIntegral",
    "OrliczNorm",
    "Fenchel",
    "ActionValue",
    "evaluate",
    "product_integral",
    "hardy_littlewood_sup_check",
    "derived_lagrangians",
    "comparison_check",
    "l_star",
    "d_chi",
    "d_p",
    "action",
    "path_action",
    "least_action_check",
    "triangle_action_check",
    "finiteness_bound",
    "ac_modulus",
    "lagrangian_from_dict",
    "catalogue_lagrangians",
]

MAX_BRUTE_FORCE_ATOMS = 7


# ---------------------------------------------------------------------------
# scalar weight functions


@dataclass(frozen=True)
class Chi:
    """A named even weight function; ``kind`` is ``"convex"`` or ``"concave"``.

    Concave ones are only meaningful on ``[0, inf)`` and are used for ``d_chi``.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)
    kind: str = "convex"
    homogeneity: float | None = None  # p when chi(c t) = |c|^p chi(t)

    def __call__(self, t):
        return self.fn(np.abs(np.asarray(t, dtype=float)))


def _power(p: float) -> Callable:
    return lambda a: a**p


def _huber(a):
    return np.where(a <= 5.0, a * a, 10.0 * a - 25.0)


EXP_CAP = 4.0


def _exp_capped(a):
    # cosh(t) - 1 up to the cap, then its tangent line: convex, C^1, finite growth
    inner = np.cosh(np.minimum(a, EXP_CAP)) - 1.0
    return np.where(a <= EXP_CAP, inner, math.cosh(EXP_CAP) - 1.0 + math.sinh(EXP_CAP) * (a - EXP_CAP))


ORLICZ_CHI = {
    c.name: c
    for c in (
        Chi("abs", _power(1.0), "convex", 1.0),
        Chi("pow1.5", _power(1.5), "convex", 1.5),
        Chi("square", _power(2.0), "convex", 2.0),
        Chi("cube", _power(3.0), "convex", 3.0),
        Chi("pow4", _power(4.0), "convex", 4.0),
        Chi("rational", lambda a: a * a / (1.0 + a), "convex"),
        Chi("huber", _huber, "convex"),
        Chi("exp-capped", _exp_capped, "convex"),
    )
}

DISTANCE_CHI = {
    c.name: c
    for c in (
        Chi("linear", _power(1.0), "concave", 1.0),
        Chi("sqrt", _power(0.5), "concave", 0.5),
        Chi("pow0.75", _power(0.75), "concave", 0.75),
        Chi("log1p", np.log1p, "concave"),
    )
}


def get_chi(name: str) -> Chi:
    for table in (ORLICZ_CHI, DISTANCE_CHI):
        if name in table:
            return table[name]
    raise InvalidInput(f"unknown chi {name!r}; known: {sorted(ORLICZ_CHI) + sorted(DISTANCE_CHI)}")


# ---------------------------------------------------------------------------
# Lagrangian variants


class LagrangianSpec:
    """Base class of the Lagrangian variants."""

    variant: str = ""

    def __call__(self, xi: WeightedSample) -> float:
        return evaluate(self, xi)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Weight(LagrangianSpec):
    """``L(xi) = int_0^V xi* f`` with ``f`` decreasing on ``(0, V]``."""

    f: StepFunction
    variant = "weight"

    def __post_init__(self):
        if not isinstance(self.f, StepFunction):
            raise InvalidInput("Weight needs a StepFunction profile")

    def to_dict(self) -> dict:
        return {"variant": self.variant, "f": self.f.to_dict()}


def _chi_of(chi) -> Chi:
    return get_chi(chi) if isinstance(chi, str) else chi


@dataclass(frozen=True)
class OrliczIntegral(LagrangianSpec):
    """``L(xi) = int chi(xi) dmu``."""

    chi: Chi
    variant = "orlicz-integral"

    def __post_init__(self):
        chi = _chi_of(self.chi)
        if chi.kind != "convex":
            raise InvalidInput("Orlicz Lagrangians need a convex chi")
        object.__setattr__(self, "chi", chi)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "chi": self.chi.name}


@dataclass(frozen=True)
class OrliczNorm(LagrangianSpec):
    """Luxemburg norm ``inf{r > 0 : int chi(xi / r) dmu <= chi(1)}``."""

    chi: Chi
    variant = "orlicz-norm"

    def __post_init__(self):
        chi = _chi_of(self.chi)
        if chi.kind != "convex":
            raise InvalidInput("Orlicz Lagrangians need a convex chi")
        object.__setattr__(self, "chi", chi)

    def to_dict(self) -> dict:
        return {"variant": self.variant, "chi": self.chi.name}


@dataclass(frozen=True)
class Fenchel(LagrangianSpec):
    """``L(xi) = max_k a_k + sup_{g ~ f_k} int xi g``, i.e. ``a_k + int_0^V xi* f_k*``.

    With ``absolute=True`` the member terms are ``a_k + int_0^V |xi|* |f_k|*``,
    the supremum of ``a_k + int |xi g|`` over rearrangements ``g`` of ``f_k``.
    """

    family: tuple
    absolute: bool = False
    variant = "fenchel"

    def __post_init__(self):
        fam = tuple((float(a), f) for a, f in self.family)
        if not fam:
            raise InvalidInput("Fenchel family must be nonempty")
        masses = {round(f.total_mass, 12) for _, f in fam}
        if any(not isinstance(f, WeightedSample) for _, f in fam) or len(masses) != 1:
            raise InvalidInput("Fenchel profiles must be WeightedSamples of one total mass")
        if not all(math.isfinite(a) for a, _ in fam):
            raise InvalidInput("Fenchel offsets must be finite")
        object.__setattr__(self, "family", fam)

    @property
    def V(self) -> float:
        return self.family[0][1].total_mass

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "absolute": self.absolute,
            "family": [{"a": a, "profile": f.to_dict()} for a, f in self.family],
        }


def lagrangian_from_dict(d: dict) -> LagrangianSpec:
    kind = d.get("variant")
    if kind == "weight":
        return Weight(StepFunction.from_dict(d["f"]))
    if kind == "orlicz-integral":
        return OrliczIntegral(get_chi(d["chi"]))
    if kind == "orlicz-norm":
        return OrliczNorm(get_chi(d["chi"]))
    if kind == "fenchel":
        fam = tuple((m["a"], WeightedSample.from_dict(m["profile"])) for m in d["family"])
        return Fenchel(fam, bool(d.get("absolute", False)))
    raise InvalidInput(f"unknown Lagrangian variant {kind!r}")


# ---------------------------------------------------------------------------
# evaluation


def product_integral(f: StepFunction, g: StepFunction) -> float:
    """``int_0^V f g`` for two step functions on the same interval."""
    if not math.isclose(f.V, g.V, rel_tol=1e-12, abs_tol=0.0):
        raise InvalidInput(f"step functions live on (0,{f.V}] and (0,{g.V}]")
    bp = np.union1d(f.breakpoints[:-1], g.breakpoints[:-1])
    bp = np.append(bp, min(f.V, g.V))
    mid = 0.5 * (bp[:-1] + bp[1:])
    return float(np.sum(np.diff(bp) * f.eval(mid) * g.eval(mid)))


def _check_mass(xi: WeightedSample, V: float) -> None:
    if not math.isclose(xi.total_mass, V, rel_tol=1e-12):
        raise InvalidInput(f"sample mass {xi.total_mass} does not match the Lagrangian's V={V}")


def _orlicz_norm(chi: Chi, xi: WeightedSample) -> float:
    a = np.abs(xi.values)
    top = float(np.max(a)) if a.size else 0.0
    if top == 0.0:
        return 0.0
    target = float(chi(1.0))

    a = a / top  # solve for r = top * x so tiny or huge samples stay well scaled

    def excess(x: float) -> float:
        return float(np.dot(xi.weights, chi(a / x))) - target

    # chi(t) <= chi(1) |t| on [-1, 1], so x = max(1, mass) is feasible
    hi = max(1.0, xi.total_mass)
    if excess(hi) > 0:  # pragma: no cover - guarded by the convexity bound
        raise InvalidInput("could not bracket the Orlicz norm")
    lo = hi
    while excess(lo) <= 0:
        lo *= 0.5
    return top * float(brentq(excess, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=200))


def evaluate(L: LagrangianSpec, xi: WeightedSample) -> float:
    """``L(xi)`` for any variant."""
    if isinstance(L, Weight):
        _check_mass(xi, L.f.V)
        return product_integral(rearrange(xi), L.f)
    if isinstance(L, OrliczIntegral):
        return float(np.dot(xi.weights, L.chi(xi.values)))
    if isinstance(L, OrliczNorm):
        return _orlicz_norm(L.chi, xi)
    if isinstance(L, Fenchel):
        _check_mass(xi, L.V)
        x = xi.map(np.abs) if L.absolute else xi
        xs = rearrange(x)
        best = -math.inf
        for a, f in L.family:
            prof = f.map(np.abs) if L.absolute else f
            best = max(best, a + product_integral(xs, rearrange(prof)))
        return best
    raise InvalidInput(f"not a Lagrangian: {L!r}")


def hardy_littlewood_sup_check(xi: WeightedSample, f: WeightedSample, tol: float = 1e-10) -> CheckResult:
    """``int_0^V xi* f*`` against the best pairing ``sum w xi_i f_pi(i)`` over all permutations."""
    n = len(xi.values)
    if n > MAX_BRUTE_FORCE_ATOMS:
        raise InvalidInput(f"exhaustive check limited to {MAX_BRUTE_FORCE_ATOMS} atoms, got {n}")
    if len(f.values) != n or not np.allclose(xi.weights, xi.weights[0], rtol=0, atol=0) \
            or not np.array_equal(xi.weights, f.weights):
        raise InvalidInput("need equal, uniform weights on both samples")
    w = xi.weights[0]
    best = max(float(np.dot(xi.values, f.values[list(p)])) for p in itertools.permutations(range(n))) * w
    value = product_integral(rearrange(xi), rearrange(f))
    return CheckResult("hardy_littlewood_sup", abs(value - best), tol, {"value": value, "brute_force": best})


def derived_lagrangians(L: Fenchel) -> tuple:
    """``(L+, L-, L||)``: profiles replaced by ``f_+``, ``f_-`` and ``|f|``."""
    if not isinstance(L, Fenchel):
        raise InvalidInput("derived Lagrangians need a Fenchel family")
    plus = Fenchel(tuple((a, f.map(lambda v: np.maximum(v, 0.0))) for a, f in L.family))
    minus = Fenchel(tuple((a, f.map(lambda v: np.maximum(-v, 0.0))) for a, f in L.family))
    absolute = Fenchel(tuple((a, f.map(np.abs)) for a, f in L.family), absolute=True)
    return plus, minus, absolute


def comparison_check(L: Fenchel, xi: WeightedSample, tol: float = INEQUALITY_TOL) -> CheckResult:
    """The four comparison inequalities between ``L``, ``L+``, ``L-`` and ``L||``."""
    plus, minus, ab = derived_lagrangians(L)
    mean = xi.integral() / xi.total_mass
    mean_abs = xi.map(np.abs).integral() / xi.total_mass

    def const(c: float) -> WeightedSample:
        return WeightedSample(np.full_like(xi.values, c), xi.weights)

    def scaled(c: float) -> WeightedSample:
        return xi.map(lambda v: c * v)

    zero = const(0.0)
    gaps = {
        "plus": 2 * plus(xi) - L(scaled(2)) - minus(const(2 * mean)),
        # obtained from "plus" applied to the family with profiles -f
        "minus": 2 * minus(xi) - L(scaled(-2)) - plus(const(2 * mean)),
        "absolute": 2 * ab(xi) - max(L(scaled(8)), L(scaled(-8))) - ab(const(6 * mean_abs)),
        "centered": abs(L(xi) - L(zero)) - (ab(xi) - ab(zero)),
    }
    return CheckResult("lagrangian_comparison", violation(list(gaps.values())), tol, gaps)


def finiteness_bound(L: Fenchel, lam: float) -> float:
    """``max_k a_k + lam int |f_k|``."""
    if lam <= 0:
        raise InvalidInput("lambda must be positive")
    return max(a + lam * f.map(np.abs).integral() for a, f in L.family)


def ac_modulus(L: Fenchel, lam: float, delta: float) -> float:
    """``max_k a_k + lam int_0^delta |f_k|*``; decreases to ``max a_k`` as ``delta -> 0``."""
    if lam <= 0:
        raise InvalidInput("lambda must be positive")
    if not 0.0 < delta <= L.V * (1 + 1e-12):
        raise InvalidInput(f"delta must lie in (0, {L.V}]")
    return max(a + lam * float(partial_integral(rearrange(f.map(np.abs)), delta)) for a, f in L.family)


# ---------------------------------------------------------------------------
# metric layer


@dataclass(frozen=True)
class ActionValue:
    value: float
    T: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise InvalidInput("action must be finite")

    def __float__(self) -> float:
        return self.value


def l_star(L: LagrangianSpec, zeta: StepFunction) -> float:
    """``L`` evaluated on a sample equidistributed with ``zeta``."""
    return evaluate(L, zeta.as_sample())


def d_chi(u: ConvexPotential, v: ConvexPotential, chi) -> float:
    """``int_0^1 chi(|rho[u, v]|)``."""
    chi = _chi_of(chi)
    r = rise(u, v)
    return float(np.sum(r.lengths * chi(r.values)))


def d_p(u: ConvexPotential, v: ConvexPotential, p: float) -> float:
    """``L^p`` norm of the rise."""
    if p < 1:
        raise InvalidInput("p must be at least 1")
    r = rise(u, v)
    return float(np.sum(r.lengths * np.abs(r.values) ** p) ** (1.0 / p))


def action(L: LagrangianSpec, u: ConvexPotential, v: ConvexPotential, T: float) -> ActionValue:
    """``T * L_*(rho[u, v] / T)``."""
    if not T > 0:
        raise InvalidInput("T must be positive")
    return ActionValue(T * l_star(L, rise(u, v).scale(1.0 / T)), float(T))


def path_action(L: LagrangianSpec, potentials: Sequence[ConvexPotential], times: Sequence[float]) -> float:
    """Sum of ``action`` over consecutive pairs of a sampled path."""
    times = np.asarray(times, dtype=float)
    if len(potentials) != len(times) or len(times) < 2:
        raise InvalidInput("need at least two potentials with one time each")
    if np.any(np.diff(times) <= 0):
        raise InvalidInput("times must be strictly increasing")
    return float(sum(
        action(L, potentials[i], potentials[i + 1], times[i + 1] - times[i]).value
        for i in range(len(times) - 1)
    ))


def least_action_check(
    L: LagrangianSpec,
    geodesic: Sequence[ConvexPotential],
    comparisons: dict,
    times: Sequence[float],
    tol: float,
) -> CheckResult:
    """Every comparison path costs at least as much as the geodesic, up to ``tol``.

    ``geodesic`` and each entry of ``comparisons`` are potentials sampled at ``times``.
    """
    base = path_action(L, geodesic, times)
    excess = {name: base - path_action(L, pots, times) for name, pots in comparisons.items()}
    return CheckResult("least_action", violation(list(excess.values())), tol, {"geodesic": base, **excess})


def triangle_action_check(
    L: LagrangianSpec,
    u: ConvexPotential,
    v: ConvexPotential,
    w: ConvexPotential,
    S: float,
    T: float,
    tol: float = INEQUALITY_TOL,
) -> CheckResult:
    """``L_S(u, v) + L_T(v, w) >= L_{S+T}(u, w)``."""
    gap = action(L, u, w, S + T).value - action(L, u, v, S).value - action(L, v, w, T).value
    return CheckResult("triangle_action", violation(gap), tol, {"gap": gap})


def catalogue_lagrangians() -> dict:
    """Named convex Lagrangians on ``(0, 1]`` used by the scenarios and tests."""
    cat = {
        "weight-linear": Weight(StepFunction.constant(1.0, 1.0)),
        "weight-half": Weight(StepFunction.from_plateaus([0.5, 0.5], [1.0, 0.0])),
        "weight-tilted": Weight(StepFunction.from_plateaus([0.25, 0.5, 0.25], [2.0, 0.5, -1.0])),
    }
    for name, chi in ORLICZ_CHI.items():
        cat[f"orlicz-{name}"] = OrliczIntegral(chi)
        cat[f"norm-{name}"] = OrliczNorm(chi)
    half = np.full(4, 0.25)
    cat["fenchel-pair"] = Fenchel((
        (0.0, WeightedSample(np.array([1.0, 1.0, -1.0, -1.0]), half)),
        (-0.5, WeightedSample(np.array([3.0, 0.0, 0.0, -1.0]), half)),
    ))
    return cat
