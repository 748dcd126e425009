"""Decreasing rearrangements on finite measure spaces.

A finite measure space with a real function on it is a :class:`WeightedSample`
(atoms with positive weights).  Its decreasing rearrangement is a
:class:`StepFunction` on ``(0, V]``: decreasing, left-continuous (so upper
semicontinuous), with adjacent equal plateaus merged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "InvalidInput",
    "WeightedSample",
    "StepFunction",
    "rearrange",
    "partial_integral",
    "hlp_geq",
    "distribution_bounds_check",
    "equidistributed",
    "rescale_allied",
    "sum_rearrangement_bound_check",
    "sum_rearrangement_bound_margin",
    "probe_points",
    "BIVARIATE",
]

MASS_RTOL = 1e-12


class InvalidInput(ValueError):
    """Raised when an argument violates an operation's precondition."""


def _as_float_array(x) -> np.ndarray:
    a = np.array(x, dtype=float).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """Finite measure space ``{x_i}`` with ``mu({x_i}) = weights[i]`` and ``xi(x_i) = values[i]``."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = _as_float_array(self.values)
        weights = _as_float_array(self.weights)
        if values.size == 0:
            raise InvalidInput("empty sample")
        if values.shape != weights.shape:
            raise InvalidInput(f"{values.size} values but {weights.size} weights")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("sample values must be finite")
        if not np.all(weights > 0) or not np.all(np.isfinite(weights)):
            raise InvalidInput("weights must be finite and strictly positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, values, total_mass: float = 1.0) -> "WeightedSample":
        values = np.asarray(values, dtype=float).ravel()
        n = values.size
        if n == 0:
            raise InvalidInput("empty sample")
        return cls(values, np.full(n, total_mass / n))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self) -> int:
        return self.values.size

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "WeightedSample":
        """Apply ``fn`` to the values, keeping the measure."""
        return WeightedSample(fn(self.values), self.weights)

    def integral(self) -> float:
        return float(np.dot(self.values, self.weights))

    def mass_where(self, mask: np.ndarray) -> float:
        return float(np.sum(self.weights[mask]))

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightedSample":
        return cls(d["values"], d["weights"])


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Decreasing left-continuous step function on ``(0, V]``.

    ``values[k]`` is the value on ``(breakpoints[k], breakpoints[k+1]]``.
    Construction canonicalizes: zero-length plateaus are dropped and adjacent
    equal plateaus are merged.  Values must be non-increasing.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float).ravel()
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size == 0 or bp.size != vals.size + 1:
            raise InvalidInput("need m >= 1 plateau values and m + 1 breakpoints")
        if bp[0] != 0.0:
            raise InvalidInput("first breakpoint must be 0")
        if not np.all(np.isfinite(vals)) or not np.all(np.isfinite(bp)):
            raise InvalidInput("step function data must be finite")
        lengths = np.diff(bp)
        if np.any(lengths < 0):
            raise InvalidInput("breakpoints must be increasing")
        if np.any(np.diff(vals) > 0):
            raise InvalidInput("plateau values must be non-increasing")
        keep = lengths > 0
        if not np.any(keep):
            raise InvalidInput("domain (0, V] must have positive length")
        vals = vals[keep]
        right = bp[1:][keep]
        # merge runs of equal values: keep the last right end of each run
        last_of_run = np.append(vals[1:] != vals[:-1], True)
        vals = vals[last_of_run]
        right = right[last_of_run]
        bp = np.concatenate(([0.0], right))
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepFunction):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(self.values, other.values)

    __hash__ = None

    @classmethod
    def constant(cls, c: float, V: float = 1.0) -> "StepFunction":
        return cls([0.0, V], [c])

    @classmethod
    def from_plateaus(cls, lengths, values) -> "StepFunction":
        """Build from plateau lengths (in order) and their values."""
        lengths = np.asarray(lengths, dtype=float)
        return cls(np.concatenate(([0.0], np.cumsum(lengths))), values)

    @property
    def V(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])

    def __call__(self, s):
        return self.eval(s)

    def eval(self, s):
        """Value at ``s`` in ``(0, V]``; left-continuous at breakpoints."""
        s_arr = np.asarray(s, dtype=float)
        if np.any(s_arr <= 0) or np.any(s_arr > self.V * (1 + 1e-15)):
            raise InvalidInput(f"evaluation point outside (0, {self.V}]")
        idx = np.searchsorted(self.breakpoints, s_arr, side="left") - 1
        idx = np.clip(idx, 0, self.values.size - 1)
        out = self.values[idx]
        return float(out) if np.ndim(out) == 0 else out

    def as_sample(self) -> WeightedSample:
        """Plateaus as atoms: a sample equidistributed with this function."""
        return WeightedSample(self.values, self.lengths)

    def scale(self, c: float) -> "StepFunction":
        """``s -> c * f(s)``; requires ``c >= 0`` to stay decreasing."""
        if c < 0:
            raise InvalidInput("negative scaling reverses order; use rescale_allied")
        if c == 0:
            return StepFunction.constant(0.0, self.V)
        return StepFunction(self.breakpoints, c * self.values)

    def shift(self, c: float) -> "StepFunction":
        return StepFunction(self.breakpoints, self.values + c)

    def apply_monotone(self, fn: Callable[[np.ndarray], np.ndarray]) -> "StepFunction":
        """Compose with a non-decreasing scalar map (keeps the step structure)."""
        return StepFunction(self.breakpoints, fn(self.values))

    def integral(self) -> float:
        return float(np.dot(self.values, self.lengths))

    def to_dict(self) -> dict:
        return {"V": self.V, "breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        f = cls(d["breakpoints"], d["values"])
        if "V" in d and not np.isclose(f.V, d["V"], rtol=MASS_RTOL, atol=0):
            raise InvalidInput("stated V disagrees with the last breakpoint")
        return f

    def __repr__(self) -> str:
        return f"StepFunction(V={self.V:g}, plateaus={self.values.size})"


def rearrange(sample: WeightedSample) -> StepFunction:
    """Decreasing rearrangement of a finite sample.

    Atoms are stably sorted by descending value; each plateau has length equal
    to the total weight carried by its value.
    """
    if not isinstance(sample, WeightedSample):
        sample = WeightedSample(*sample)
    order = np.argsort(-sample.values, kind="stable")
    vals = sample.values[order]
    cum = np.cumsum(sample.weights[order])
    return StepFunction(np.concatenate(([0.0], cum)), vals)


def merged_breakpoints(*fs: StepFunction) -> np.ndarray:
    return np.unique(np.concatenate([f.breakpoints for f in fs]))


def probe_points(*fs: StepFunction) -> np.ndarray:
    """Midpoints of the common refinement of the given step functions.

    These are the comparison probes for a.e. statements: every function is
    constant on a neighbourhood of each probe.
    """
    bp = merged_breakpoints(*fs)
    mids = 0.5 * (bp[:-1] + bp[1:])
    return mids[bp[1:] > bp[:-1]]


def _check_same_V(f: StepFunction, g: StepFunction, rtol: float = MASS_RTOL) -> None:
    if not np.isclose(f.V, g.V, rtol=rtol, atol=0):
        raise InvalidInput(f"domain mismatch: V={f.V} vs V={g.V}")


def partial_integral(f: StepFunction, lam):
    """Exact ``int_0^lam f`` for ``lam`` in ``[0, V]`` (vectorized in ``lam``)."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0) or np.any(lam_arr > f.V * (1 + 1e-12)):
        raise InvalidInput(f"lambda outside [0, {f.V}]")
    lam_arr = np.minimum(lam_arr, f.V)
    cum = np.concatenate(([0.0], np.cumsum(f.values * f.lengths)))
    k = np.clip(np.searchsorted(f.breakpoints, lam_arr, side="right") - 1, 0, f.values.size - 1)
    out = cum[k] + f.values[k] * (lam_arr - f.breakpoints[k])
    return float(out) if np.ndim(out) == 0 else out


def hlp_geq(f: StepFunction, g: StepFunction, tol: float = 1e-9) -> bool:
    """Hardy-Littlewood-Polya order: ``int_0^lam f >= int_0^lam g - tol`` for all ``lam``.

    The difference of the partial integrals is piecewise linear with kinks at
    the merged breakpoints, so checking those suffices.
    """
    return hlp_margin(f, g) >= -tol


def hlp_margin(f: StepFunction, g: StepFunction) -> float:
    """``min_lam (int_0^lam f - int_0^lam g)`` over the merged breakpoints."""
    _check_same_V(f, g)
    lam = merged_breakpoints(f, g)
    lam = np.minimum(lam, min(f.V, g.V))
    return float(np.min(partial_integral(f, lam) - partial_integral(g, lam)))


def distribution_bounds_check(sample: WeightedSample, rtol: float = 1e-12) -> bool:
    """``mu(xi > xi*(s)) <= s <= mu(xi >= xi*(s))`` at every plateau midpoint and breakpoint."""
    f = rearrange(sample)
    s = np.concatenate((f.midpoints, f.breakpoints[1:]))
    slack = rtol * sample.total_mass
    xs = f.eval(s)
    v = sample.values[None, :]
    w = sample.weights[None, :]
    above = np.sum(np.where(v > xs[:, None], w, 0.0), axis=1)
    at_or_above = np.sum(np.where(v >= xs[:, None], w, 0.0), axis=1)
    return bool(np.all(above <= s + slack) and np.all(s <= at_or_above + slack))


def equidistributed(a: WeightedSample, b: WeightedSample, tol: float = 1e-12) -> bool:
    """Whether two samples have the same distribution (same decreasing rearrangement)."""
    if abs(a.total_mass - b.total_mass) > tol * max(1.0, a.total_mass):
        raise InvalidInput(f"total masses differ: {a.total_mass} vs {b.total_mass}")
    fa, fb = rearrange(a), rearrange(b)
    V = min(fa.V, fb.V)
    bp = merged_breakpoints(fa, fb)
    s = np.concatenate((bp[1:], 0.5 * (bp[:-1] + bp[1:])))
    s = s[(s > 0) & (s <= V)]
    return bool(np.all(np.abs(fa.eval(s) - fb.eval(s)) <= tol))


def rescale_allied(f: StepFunction, alpha: float, beta: float) -> StepFunction:
    """The ``(alpha, beta)``-rescaling ``s -> (alpha f)*(beta s)`` on ``(0, V]``.

    ``beta * s`` never leaves ``(0, beta V]`` so the result is total on ``(0, V]``.
    """
    if not 0 < beta <= 1:
        raise InvalidInput("beta must lie in (0, 1]")
    g = rearrange(f.as_sample().map(lambda v: alpha * v))
    # g(beta s) jumps where beta s crosses a breakpoint of g
    bp = np.minimum(g.breakpoints / beta, f.V)
    bp[-1] = f.V
    return StepFunction(bp, g.values)


def _f_sum(x, y):
    return x + y


def _f_max(x, y):
    return np.maximum(x, y)


BIVARIATE: dict[str, Callable] = {"sum": _f_sum, "max": _f_max}


def sum_rearrangement_bound_margin(
    xi: WeightedSample,
    eta: WeightedSample,
    F: str | Callable,
    sigma,
    s,
) -> float:
    """Largest ``F(xi, eta)*(s) - F(xi*(sigma), eta*(s - sigma))`` over paired arrays ``sigma``, ``s``."""
    fn = BIVARIATE[F] if isinstance(F, str) else F
    if xi.weights.shape != eta.weights.shape or not np.array_equal(xi.weights, eta.weights):
        raise InvalidInput("xi and eta must live on the same weighted space")
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    V = xi.total_mass
    if sigma.shape != s.shape or not np.all((0 < sigma) & (sigma < s) & (s < V)):
        raise InvalidInput("need 0 < sigma < s < V")
    lhs = rearrange(WeightedSample(fn(xi.values, eta.values), xi.weights)).eval(s)
    rhs = fn(rearrange(xi).eval(sigma), rearrange(eta).eval(s - sigma))
    return float(np.max(lhs - rhs))


def sum_rearrangement_bound_check(
    xi: WeightedSample,
    eta: WeightedSample,
    F: str | Callable = "sum",
    sigma: float = 0.5,
    s: float = 1.0,
    tol: float = 1e-9,
) -> bool:
    """``F(xi, eta)*(s) <= F(xi*(sigma), eta*(s - sigma))`` for convex, increasing ``F``."""
    return sum_rearrangement_bound_margin(xi, eta, F, sigma, s) <= tol
