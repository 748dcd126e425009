import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riselab.rearrange import (
    InvalidInput,
    StepFunction,
    WeightedSample,
    distribution_bounds_check,
    equidistributed,
    hlp_geq,
    partial_integral,
    probe_points,
    rearrange,
    rescale_allied,
    sum_rearrangement_bound_check,
    sum_rearrangement_bound_margin,
)

from conftest import rearrange_oracle

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
positive = st.floats(0.01, 5.0)


@st.composite
def samples(draw, max_size=8):
    n = draw(st.integers(1, max_size))
    values = draw(st.lists(finite, min_size=n, max_size=n))
    # few distinct values so ties and merged plateaus show up
    if draw(st.booleans()):
        values = [round(v) for v in values]
    weights = draw(st.lists(positive, min_size=n, max_size=n))
    return WeightedSample(np.array(values), np.array(weights))


# --- WeightedSample / StepFunction -----------------------------------------


def test_sample_validation():
    with pytest.raises(InvalidInput):
        WeightedSample(np.array([]), np.array([]))
    with pytest.raises(InvalidInput):
        WeightedSample(np.array([1.0, 2.0]), np.array([1.0]))
    with pytest.raises(InvalidInput):
        WeightedSample(np.array([1.0]), np.array([0.0]))
    with pytest.raises(InvalidInput):
        WeightedSample(np.array([np.inf]), np.array([1.0]))


def test_step_function_is_canonical():
    f = StepFunction([0, 1, 1, 2, 3], [5, 4, 4, 1])
    assert f.breakpoints.tolist() == [0, 1, 2, 3]
    assert f.values.tolist() == [5, 4, 1]
    g = StepFunction([0, 1, 2, 3], [5, 5, 1])
    assert g.breakpoints.tolist() == [0, 2, 3]
    assert g.values.tolist() == [5, 1]
    with pytest.raises(InvalidInput):
        StepFunction([0, 1, 2], [1, 2])
    with pytest.raises(InvalidInput):
        StepFunction([0.5, 1], [1])


def test_eval_is_left_continuous():
    f = StepFunction([0, 1, 2], [3, 1])
    assert f.eval(1.0) == 3
    assert f.eval(1.5) == 1
    assert f.eval(2.0) == 1
    assert StepFunction.constant(7.0, 2.0).eval(0.3) == 7.0
    with pytest.raises(InvalidInput):
        f.eval(0.0)
    with pytest.raises(InvalidInput):
        f.eval(2.5)


def test_serialization_round_trip():
    f = StepFunction([0, 0.25, 1], [2, -1])
    assert json.loads(json.dumps(f.to_dict())) == {"V": 1.0, "breakpoints": [0, 0.25, 1], "values": [2, -1]}
    assert StepFunction.from_dict(f.to_dict()) == f
    x = WeightedSample(np.array([1.0, 2.0]), np.array([0.5, 0.5]))
    assert x.to_dict() == {"values": [1.0, 2.0], "weights": [0.5, 0.5]}
    y = WeightedSample.from_dict(x.to_dict())
    assert np.array_equal(y.values, x.values) and np.array_equal(y.weights, x.weights)


# --- rearrange ---------------------------------------------------------------


def test_rearrange_examples():
    f = rearrange(WeightedSample(np.array([3.0, 1.0, 2.0]), np.array([0.5, 0.25, 0.25])))
    assert f.breakpoints.tolist() == [0, 0.5, 0.75, 1.0]
    assert f.values.tolist() == [3, 2, 1]
    c = rearrange(WeightedSample(np.array([4.0, 4.0, 4.0]), np.array([0.2, 0.3, 0.5])))
    assert c.values.tolist() == [4.0] and c.V == pytest.approx(1.0)
    g = rearrange(WeightedSample(np.array([1.0, 2.0]), np.array([1.0, 1.0])))
    assert g.breakpoints.tolist() == [0, 1, 2] and g.values.tolist() == [2, 1]


@given(samples())
def test_rearrange_matches_distribution_oracle(x):
    f = rearrange(x)
    s = np.concatenate((f.midpoints, f.breakpoints[1:]))
    assert np.array_equal(f.eval(s), rearrange_oracle(x.values, x.weights, s))


@given(samples(), st.randoms(use_true_random=False))
def test_rearrange_invariant_under_permutation_and_splitting(x, rnd):
    idx = list(range(len(x.values)))
    rnd.shuffle(idx)
    perm = WeightedSample(x.values[idx], x.weights[idx])
    split = WeightedSample(np.repeat(x.values, 2), np.repeat(x.weights / 2, 2))
    assert equidistributed(x, perm)
    f = rearrange(x)
    for other in (perm, split):
        g = rearrange(other)
        assert np.allclose(g.breakpoints, f.breakpoints, rtol=1e-12, atol=1e-12)
        assert np.array_equal(g.values, f.values)


@given(samples())
def test_mass_and_integral_conserved(x):
    f = rearrange(x)
    assert f.V == pytest.approx(x.total_mass, rel=1e-12)
    assert partial_integral(f, f.V) == pytest.approx(x.integral(), rel=1e-12, abs=1e-10)


@given(samples())
def test_distribution_bounds(x):
    assert distribution_bounds_check(x)


def test_distribution_bounds_example():
    assert distribution_bounds_check(WeightedSample(np.array([3.0, 1.0, 2.0]), np.array([0.5, 0.25, 0.25])))
    assert distribution_bounds_check(WeightedSample(np.full(4, -2.0), np.ones(4)))


def test_convergence_at_continuity_points():
    rng = np.random.default_rng(5)
    base = np.array([3.0, 1.0, 1.0, -2.0, 0.5])
    w = np.array([0.1, 0.3, 0.2, 0.25, 0.15])
    target = rearrange(WeightedSample(base, w))
    s = target.midpoints
    errs = []
    for j in range(1, 8):
        xj = base + rng.uniform(-1, 1, base.size) * 2.0**-j
        errs.append(np.max(np.abs(rearrange(WeightedSample(xj, w)).eval(s) - target.eval(s))))
    assert errs[-1] <= 2.0**-7
    assert all(e <= 2.0 ** -(j + 1) for j, e in enumerate(errs))


# --- partial integrals and HLP ---------------------------------------------


def test_partial_integral_examples():
    f = StepFunction([0, 0.5, 1], [3, 1])
    assert partial_integral(f, 0.75) == pytest.approx(1.75)
    assert partial_integral(f, 0.0) == 0.0
    assert partial_integral(StepFunction.constant(2.5, 1.0), 0.4) == pytest.approx(1.0)
    with pytest.raises(InvalidInput):
        partial_integral(f, 1.5)


def test_partial_integral_exact_on_rationals():
    f = StepFunction([0, 0.125, 0.5, 1], [4, 2, -3])
    for lam in (Fraction(1, 16), Fraction(3, 8), Fraction(7, 8)):
        exact = Fraction(0)
        for lo, hi, v in ((0, Fraction(1, 8), 4), (Fraction(1, 8), Fraction(1, 2), 2), (Fraction(1, 2), 1, -3)):
            exact += v * max(Fraction(0), min(lam, hi) - lo)
        assert partial_integral(f, float(lam)) == float(exact)


def test_hlp_examples():
    one, zero = StepFunction.constant(1.0), StepFunction.constant(0.0)
    assert hlp_geq(one, zero)
    assert hlp_geq(StepFunction([0, 1, 2], [1, -1]), StepFunction.constant(0.0, 2.0))
    assert not hlp_geq(zero, one)
    with pytest.raises(InvalidInput):
        hlp_geq(one, StepFunction.constant(0.0, 2.0))


# --- equidistribution, rescaling, sum bound -------------------------------


def test_equidistributed_examples():
    ones = np.ones(2)
    assert equidistributed(WeightedSample(np.array([1.0, 2.0]), ones), WeightedSample(np.array([2.0, 1.0]), ones))
    assert equidistributed(WeightedSample(np.array([1.0]), np.array([2.0])), WeightedSample(np.array([1.0, 1.0]), ones))
    assert not equidistributed(WeightedSample(np.array([1.0, 2.0]), ones), WeightedSample(np.array([1.0, 3.0]), ones))
    with pytest.raises(InvalidInput):
        equidistributed(WeightedSample(np.array([1.0]), np.array([1.0])), WeightedSample(np.array([1.0]), np.array([2.0])))


def _ramp(n=100):
    # step approximation of 1 - 2s on (0, 1]
    mids = (np.arange(n) + 0.5) / n
    return StepFunction.from_plateaus(np.full(n, 1.0 / n), 1 - 2 * mids)


def test_rescale_allied_examples():
    f = StepFunction([0, 0.3, 1], [2, -1])
    assert rescale_allied(f, 1.0, 1.0) == f
    r = _ramp()
    flipped = rescale_allied(r, -1.0, 1.0)
    assert np.allclose(flipped.values, r.values) and np.allclose(flipped.breakpoints, r.breakpoints)
    c = rescale_allied(StepFunction.constant(1.5), 2.0, 0.5)
    assert c.values.tolist() == [3.0]
    with pytest.raises(InvalidInput):
        rescale_allied(f, 1.0, 0.0)


@given(samples(), st.floats(-3, 3), st.floats(0.05, 1.0))
def test_rescale_allied_pointwise(x, alpha, beta):
    f = rearrange(x)
    g = rescale_allied(f, alpha, beta)
    s = probe_points(g, StepFunction(np.minimum(f.breakpoints / beta, f.V), f.values))
    ref = rearrange(f.as_sample().map(lambda v: alpha * v))
    assert np.allclose(g.eval(s), ref.eval(beta * s))


def test_sum_bound_examples():
    c = WeightedSample(np.full(3, 2.0), np.ones(3))
    assert sum_rearrangement_bound_check(c, c, "sum", 1.0, 2.0)
    xi = WeightedSample(np.array([3.0, 0.0, 1.0]), np.ones(3))
    eta = WeightedSample(np.array([-1.0, -2.0, 0.0]), np.ones(3))
    assert sum_rearrangement_bound_check(xi, eta, "max", 0.5, 2.5)
    with pytest.raises(InvalidInput):
        sum_rearrangement_bound_check(xi, eta, "sum", 2.0, 1.0)


@given(st.integers(1, 6), st.data())
def test_sum_bound_on_unit_weights(n, data):
    vals = st.lists(st.integers(-4, 4), min_size=n, max_size=n)
    xi = WeightedSample(np.array(data.draw(vals), float), np.ones(n))
    eta = WeightedSample(np.array(data.draw(vals), float), np.ones(n))
    grid = np.linspace(0, n, 4 * n + 1)[1:-1]
    for F in ("sum", "max"):
        for s in grid:
            for sigma in grid[grid < s]:
                assert sum_rearrangement_bound_check(xi, eta, F, sigma, s)


@given(samples(), st.data())
def test_sum_bound_margin_matches_pointwise(x, data):
    eta = WeightedSample(np.array(data.draw(st.lists(finite, min_size=len(x.values), max_size=len(x.values)))), x.weights)
    V = x.total_mass
    s = np.array(data.draw(st.lists(st.floats(0.05, 0.95), min_size=1, max_size=5))) * V
    sig = s * data.draw(st.floats(0.05, 0.95))
    margin = sum_rearrangement_bound_margin(x, eta, "max", sig, s)
    singles = [sum_rearrangement_bound_margin(x, eta, "max", a, b) for a, b in zip(sig, s)]
    assert margin == max(singles)
    assert margin <= 1e-9
