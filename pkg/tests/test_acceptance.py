"""Exit criteria of the build, each at its pinned tolerance and runtime budget.

Every test records one ``criterion N: PASS|FAIL`` line, shown in the pytest
terminal summary (and printed directly under ``-s``).
"""

import itertools
import time

import numpy as np
import pytest

from riselab.checks import CheckResult
from riselab.instances import generate_instance, rng_for
from riselab.lagrangian import catalogue_lagrangians, hardy_littlewood_sup_check, triangle_action_check
from riselab.rearrange import (
    WeightedSample,
    distribution_bounds_check,
    sum_rearrangement_bound_margin,
)
from riselab.report import csv_text
from riselab.scenarios import SCENARIOS, config_from_mapping, run
from riselab.tolerances import ENVELOPE_FACTOR, INEQUALITY_TOL
from riselab.toric import GeodesicPath, auto_space_grid, envelope_oracle, geodesic_at, legendre

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance

RULE_TOL = 1e-9  # rearrangement inequalities


class Criterion:
    """Collects checks for one criterion and enforces its runtime budget."""

    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.failures: list[str] = []
        self.count = 0
        self.start = time.perf_counter()

    def add(self, label: str, ok: bool, detail: str = "") -> None:
        self.count += 1
        if not ok:
            self.failures.append(f"{label} {detail}".strip())

    def add_records(self, label: str, records) -> None:
        for r in records:
            self.add(f"{label} seed {r['seed']} {r['check']}", r["pass"],
                     f"({r['max_violation']:.3g} > {r['tolerance']:.3g})")

    def finish(self) -> None:
        elapsed = time.perf_counter() - self.start
        if elapsed >= self.budget:
            self.failures.append(f"runtime {elapsed:.1f}s exceeds {self.budget:g}s")
        status = "PASS" if not self.failures else "FAIL"
        line = (f"criterion {self.number}: {status} {self.title}: "
                f"{self.count - len([f for f in self.failures if not f.startswith('runtime')])}/{self.count} checks, "
                f"{elapsed:.1f}s of {self.budget:g}s")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert not self.failures, "; ".join(self.failures[:8])


def scenario_records(scenario: str, **kw) -> list:
    return run(config_from_mapping({"scenario": scenario, **kw})).records


# --- 1 -------------------------------------------------------------------------------


def _half_grid(V):
    pts = np.arange(1, int(round(2 * V))) / 2.0
    pairs = [(a, b) for a, b in itertools.combinations(pts, 2)]
    return np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])


def test_criterion_1_rearrangement_core():
    c = Criterion(1, "distribution bounds and sum-rearrangement bound", 10.0)
    # distribution bounds on every unit-weight tuple over {-1, 0, 1} with up to 8 atoms
    for n in range(1, 9):
        for vals in itertools.product((-1.0, 0.0, 1.0), repeat=n):
            c.add(f"bounds {vals}", bool(distribution_bounds_check(WeightedSample(np.array(vals), np.ones(n)))))
    # sum bound: unit weights are invariant under joint permutation, so xi runs over
    # sorted tuples and eta over all tuples; every (sigma, s) on the half-integer lattice
    for alphabet, top in (((0.0, 1.0), 8), ((-1.0, 0.0, 1.0), 4)):
        for n in range(2, top + 1):
            sig, s = _half_grid(n)
            for xv in itertools.combinations_with_replacement(alphabet, n):
                xi = WeightedSample(np.array(xv), np.ones(n))
                for ev in itertools.product(alphabet, repeat=n):
                    eta = WeightedSample(np.array(ev), np.ones(n))
                    for F in ("sum", "max"):
                        gap = sum_rearrangement_bound_margin(xi, eta, F, sig, s)
                        c.add(f"sum bound {F} {xv} {ev}", gap <= RULE_TOL, f"({gap:.3g})")
    # randomized weighted instances
    for seed in range(100):
        rng = rng_for(seed, 1)
        n = int(rng.integers(1, 9))
        w = rng.uniform(0.05, 2.0, n)
        xi = WeightedSample(rng.normal(size=n) * 3, w)
        eta = WeightedSample(np.round(rng.normal(size=n)), w)
        c.add(f"bounds seed {seed}", bool(distribution_bounds_check(xi)))
        V = xi.total_mass
        s = rng.uniform(0.02, 0.98, 40) * V
        sig = s * rng.uniform(0.02, 0.98, 40)
        for F in ("sum", "max"):
            gap = sum_rearrangement_bound_margin(xi, eta, F, sig, s)
            c.add(f"sum bound {F} seed {seed}", gap <= RULE_TOL, f"({gap:.3g})")
    c.finish()


# --- 2 -------------------------------------------------------------------------------


def test_criterion_2_conservation():
    c = Criterion(2, "conservation within C(h+dt) and strictly decreasing under refinement", 60.0)
    records = scenario_records("conservation", m=64, dt=1 / 256, seeds=50, grids=[32, 64, 128],
                               times=[0.25, 0.5, 0.75])
    c.add_records("conservation", records)
    c.finish()


# --- 3 -------------------------------------------------------------------------------


def test_criterion_3_pythagoras():
    c = Criterion(3, "Pythagorean identity at 1e-12", 30.0)
    c.add_records("1D", scenario_records("pythagoras", dim=1, m=64, seeds=200))
    c.add_records("2D", scenario_records("pythagoras", dim=2, m=16, seeds=50))
    c.finish()


# --- 4 -------------------------------------------------------------------------------


def test_criterion_4_triangle():
    c = Criterion(4, "HLP triangle at 1e-9", 30.0)
    c.add_records("triangle", scenario_records("triangle", dim=1, m=64, seeds=200))
    c.finish()


# --- 5 -------------------------------------------------------------------------------


def test_criterion_5_flat_comparison():
    c = Criterion(5, "flat comparison chain, strong bound and meet bound", 120.0)
    c.add_records("1D", scenario_records("flat-compare", dim=1, m=64, seeds=100, svg=False))
    # the 2D run supplies the monotone pairs for the strong bound in that dimension
    c.add_records("2D", scenario_records("flat-compare", dim=2, m=16, seeds=100, svg=False))
    c.add_records("meet", scenario_records("meet-bound", dim=1, m=64, seeds=100))
    c.finish()


# --- 6 -------------------------------------------------------------------------------


def test_criterion_6_envelope_oracle():
    c = Criterion(6, "dual interpolation against the envelope oracle", 60.0)
    for dim, m in ((1, 64), (2, 16)):
        for seed in range(50):
            u, v = generate_instance(seed, dim, m, "smooth" if seed % 2 == 0 else "kinky")
            grid = auto_space_grid(u, v)
            lu, lv = legendre(u, grid), legendre(v, grid)
            path = GeodesicPath(u, v)
            tol = ENVELOPE_FACTOR * u.polytope.h * u.polytope.diameter
            times = (0.25, 0.5, 0.75)
            for t, env in zip(times, envelope_oracle(lu, lv, times)):
                dual = legendre(geodesic_at(path, t), grid).values.ravel()
                dev = float(np.max(np.abs(env - dual)))
                c.add(f"dim {dim} seed {seed} t {t}", dev <= tol, f"({dev:.3g} > {tol:.3g})")
    c.finish()


# --- 7 -------------------------------------------------------------------------------


def test_criterion_7_monotone_approximation():
    c = Criterion(7, "monotone decay of support truncations, final deviation <= C h", 60.0)
    c.add_records("monotone", scenario_records("monotone-approx", dim=1, m=64, seeds=50))
    c.finish()


# --- 8 -------------------------------------------------------------------------------


def test_criterion_8_lagrangian_structure():
    c = Criterion(8, "Hardy-Littlewood pairing, comparison inequalities, ac modulus", 30.0)
    for seed in range(50):
        rng = rng_for(seed, 8)
        for n in range(1, 7):
            unit = np.full(n, 1.0 / n)
            xi = WeightedSample(rng.normal(size=n), unit)
            f = WeightedSample(rng.normal(size=n), unit)
            res = hardy_littlewood_sup_check(xi, f)
            c.add(f"pairing seed {seed} n {n}", res.passed, f"({res.max_violation:.3g})")
    c.add_records("structure", scenario_records("lagrangian-structure", seeds=100))
    c.finish()


# --- 9 -------------------------------------------------------------------------------


def test_criterion_9_action_layer():
    c = Criterion(9, "action triangle, least action, T and partition independence", 120.0)
    cat = catalogue_lagrangians()
    for seed in range(100):
        u, v, w = generate_instance(seed, 1, 64, "triple")
        S, T = rng_for(seed, 9).uniform(0.2, 2.0, 2)
        for name, L in cat.items():
            res: CheckResult = triangle_action_check(L, u, v, w, float(S), float(T), INEQUALITY_TOL)
            c.add(f"triangle seed {seed} {name}", res.passed, f"({res.max_violation:.3g})")
    c.add_records("least action", scenario_records("least-action", dim=1, m=64, seeds=50, partition=16,
                                                   lagrangians=sorted(cat)))
    c.finish()


# --- 10 ------------------------------------------------------------------------------


def test_criterion_10_determinism():
    c = Criterion(10, "identical config gives byte-identical CSV", 120.0)
    for scenario in SCENARIOS:
        cfg = config_from_mapping({"scenario": scenario, "seeds": 3, "m": 32, "grids": [16, 32],
                                   "partition": 4, "svg": False})
        first = csv_text(run(cfg).records)
        second = csv_text(run(cfg, threads=1).records)
        c.add(scenario, first == second)
    c.finish()
