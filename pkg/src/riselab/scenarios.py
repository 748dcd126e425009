"""Experiment scenarios: configuration, per-seed drivers and the run loop."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml

from . import __version__
from .checks import CheckResult, violation
from .instances import generate_instance, rng_for
from .lagrangian import (
    ORLICZ_CHI,
    Fenchel,
    OrliczNorm,
    ac_modulus,
    action,
    catalogue_lagrangians,
    comparison_check,
    d_chi,
    d_p,
    finiteness_bound,
    get_chi,
    hardy_littlewood_sup_check,
    least_action_check,
    path_action,
    triangle_action_check,
)
from .rearrange import InvalidInput, WeightedSample
from .rise import (
    conservation_check,
    discretization_scale,
    flat_compare,
    flat_compare_check,
    flat_compare_strong,
    meet_distance_bound_check,
    monotone_approx_check,
    pointwise_triangle_violation,
    pythagoras_check,
    rise,
    triangle_hlp_check,
    contraction_check,
)
from .tolerances import (
    C_CONSERVATION,
    C_FLAT,
    C_FLAT_STRONG,
    C_LEAST_ACTION,
    C_MEET,
    C_MONOTONE,
    DT_PER_H,
    STRUCTURAL_TOL,
)
from .toric import (
    GeodesicPath,
    SpaceFunction,
    auto_space_grid,
    geodesic_at,
    legendre,
    meet,
    project_space_function,
)

SCENARIOS = (
    "conservation",
    "pythagoras",
    "triangle",
    "contraction",
    "flat-compare",
    "meet-bound",
    "monotone-approx",
    "least-action",
    "metric-table",
    "lagrangian-structure",
    "exploratory-strong-triangle",
)

# scenarios that record findings without gating the exit code
EXPLORATORY = frozenset({"exploratory-strong-triangle"})

DEFAULT_LAGRANGIANS = ("weight-linear", "weight-tilted", "orlicz-square", "norm-abs", "norm-cube", "fenchel-pair")


class ConfigError(InvalidInput):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    dim: int = 1
    m: int = 64
    seeds: int = 10
    seed: int = 0
    dt: float | None = None  # default DT_PER_H * h
    grids: tuple = (32, 64, 128)
    times: tuple = (0.25, 0.5, 0.75)
    partition: int = 16
    chi: tuple = ("linear", "sqrt", "log1p", "square")
    p: tuple = (1.0, 2.0, 3.0)
    lagrangians: tuple = DEFAULT_LAGRANGIANS
    shift: float | None = None  # metric-table: use the pair (u, u - shift)
    tolerances: dict = field(default_factory=dict)
    out: str = "riselab-out"
    svg: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {', '.join(SCENARIOS)}")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if int(self.m) < 8 or any(int(g) < 8 for g in self.grids):
            raise ConfigError("grid sizes must be at least 8")
        if int(self.seeds) < 1:
            raise ConfigError("seeds must be at least 1")
        if self.dt is not None:
            if not 0.0 < self.dt <= 0.125:
                raise ConfigError("dt must lie in (0, 1/8]")
            if self.dt >= 1.0 / self.m:
                raise ConfigError(f"grid too coarse for dt: need dt < h = 1/{self.m}")
        if self.partition < 1:
            raise ConfigError("partition must be at least 1")
        for name in self.lagrangians:
            if name not in catalogue_lagrangians():
                raise ConfigError(f"unknown Lagrangian {name!r}")
        for name in self.chi:
            try:
                get_chi(name)
            except InvalidInput as exc:
                raise ConfigError(str(exc)) from None
        if any(q < 1 for q in self.p):
            raise ConfigError("p values must be at least 1")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def dt_value(self) -> float:
        return self.dt if self.dt is not None else DT_PER_H * self.h

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


_TUPLE_KEYS = {"grids", "times", "chi", "p", "lagrangians"}


def config_from_mapping(data: dict, **overrides) -> ScenarioConfig:
    """Build a config from a parsed mapping plus non-``None`` overrides."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    merged = dict(data)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "scenario" not in merged:
        raise ConfigError("no scenario given")
    try:
        for k in _TUPLE_KEYS & set(merged):
            merged[k] = tuple(merged[k])
        for k in ("dim", "m", "seeds", "seed", "partition"):
            if k in merged:
                merged[k] = int(merged[k])
        for k in ("dt", "shift"):
            if merged.get(k) is not None:
                merged[k] = float(merged[k])
        if "tolerances" in merged:
            merged["tolerances"] = {str(k): float(v) for k, v in dict(merged["tolerances"] or {}).items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return ScenarioConfig(**merged)


def load_config(path: str, **overrides) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_mapping(data, **overrides)


# ---------------------------------------------------------------------------
# per-seed drivers: each returns (checks, extras)


def pair_kind(seed: int) -> str:
    """Alternate smooth and kinky pairs across seeds."""
    return ("smooth", "kinky")[seed % 2]


def conservation_study(seed: int, grids, dt_per_h: float, times, dim: int = 1) -> list[float]:
    """Sup deviation of the rearranged velocities on each grid of a refinement ladder."""
    devs = []
    for m in grids:
        u, v = generate_instance(seed, dim, m, "smooth")
        rep = conservation_check(GeodesicPath(u, v), times, dt_per_h / m, math.inf)
        devs.append(rep.max_deviation)
    return devs


def strict_decrease_violation(values) -> float:
    """0 when ``values`` strictly decrease; otherwise the largest non-decrease step (> 0)."""
    steps = np.diff(np.asarray(values, dtype=float))
    if steps.size == 0 or np.all(steps < 0):
        return 0.0
    return max(float(np.max(steps)), float(np.nextafter(0.0, 1.0)))


def _conservation(cfg: ScenarioConfig, seed: int):
    ratio = cfg.dt_value * cfg.m
    c = cfg.tol("C_conservation", C_CONSERVATION)
    grids = sorted(set(cfg.grids))
    devs = conservation_study(seed, grids, ratio, cfg.times, cfg.dim)
    checks = [
        CheckResult(f"conservation_m{m}", d, c * (1.0 + ratio) / m) for m, d in zip(grids, devs)
    ]
    checks.append(CheckResult("conservation_refinement", strict_decrease_violation(devs), 0.0))
    return checks, {"grids": grids, "deviations": devs}


def _pythagoras(cfg, seed):
    u, v = generate_instance(seed, cfg.dim, cfg.m, pair_kind(seed))
    return [pythagoras_check(u, v, cfg.tol("pythagoras", STRUCTURAL_TOL))], {}


def _triangle(cfg, seed):
    u, v, w = generate_instance(seed, cfg.dim, cfg.m, "triple")
    return [triangle_hlp_check(u, v, w, cfg.tol("triangle", 1e-9))], {}


def _contraction(cfg, seed):
    u, v = generate_instance(seed, cfg.dim, cfg.m, "monotone-pair")
    w = generate_instance(seed, cfg.dim, cfg.m, "triple")[0]
    return [contraction_check(u, v, w, cfg.tol("contraction", 1e-9))], {}


def _flat_compare(cfg, seed):
    u, v = generate_instance(seed, cfg.dim, cfg.m, pair_kind(seed))
    grid = auto_space_grid(u, v)
    chain = flat_compare_check(u, v, cfg.tol("C_flat", C_FLAT), grid)
    a, b = generate_instance(seed, cfg.dim, cfg.m, "monotone-pair")
    strong = flat_compare_strong(a, b, cfg.tol("C_flat_strong", C_FLAT_STRONG))
    extras = {}
    if seed == cfg.seed:
        fc = flat_compare(u, v, grid)
        extras["profiles"] = {"lower": fc.lower, "rise": fc.rise, "upper": fc.upper}
    return [chain, strong], extras


def probe_pairs(k: int = 5) -> list[tuple[float, float]]:
    """A ``k x k`` grid of ``(sigma, s)`` with ``0 < sigma < s < 1``."""
    return [(a * s, s) for s in np.linspace(0.15, 0.95, k) for a in np.linspace(0.1, 0.9, k)]


def _meet_bound(cfg, seed):
    u, v, w = generate_instance(seed, cfg.dim, cfg.m, "triple")
    return [meet_distance_bound_check(u, v, w, probe_pairs(), cfg.tol("C_meet", C_MEET))], {}


def _monotone_approx(cfg, seed):
    u, v = generate_instance(seed, cfg.dim, cfg.m, pair_kind(seed))
    K = cfg.m // 4 + 1
    res = monotone_approx_check(u, v, K, cfg.tol("C_monotone", C_MONOTONE) * cfg.h)
    return [res], {}


def comparison_paths(u, v, w, times) -> dict:
    """Rectilinear space-side path and two piecewise-geodesic detours, sampled at ``times``."""
    grid = auto_space_grid(u, v, w)
    lu, lv = legendre(u, grid), legendre(v, grid)
    inner = [
        project_space_function(SpaceFunction(grid, (1 - t) * lu.values + t * lv.values), u.polytope)
        for t in times[1:-1]
    ]

    def detour(mid):
        first, second = GeodesicPath(u, mid), GeodesicPath(mid, v)
        return [geodesic_at(first, 2 * t) if t <= 0.5 else geodesic_at(second, 2 * t - 1) for t in times]

    return {"rectilinear": [u, *inner, v], "meet_detour": detour(meet(u, v)), "third_detour": detour(w)}


def _least_action(cfg, seed):
    u, v, w = generate_instance(seed, cfg.dim, cfg.m, "triple")
    times = np.linspace(0.0, 1.0, cfg.partition + 1)
    path = GeodesicPath(u, v)
    geo = [geodesic_at(path, t) for t in times]
    comps = comparison_paths(u, v, w, times)
    cat = catalogue_lagrangians()
    tol = cfg.tol("C_least_action", C_LEAST_ACTION) * cfg.h + 1e-9
    checks = []
    for name in cfg.lagrangians:
        L = cat[name]
        checks.append(_renamed(least_action_check(L, geo, comps, times, tol), f"least_action[{name}]"))
        checks.append(_renamed(triangle_action_check(L, u, w, v, 0.5, 1.5), f"triangle_action[{name}]"))
        whole = action(L, u, v, 1.0).value
        split = path_action(L, geo, times)
        checks.append(CheckResult(f"partition_independence[{name}]", abs(split - whole),
                                  cfg.tol("partition", 1e-9) * max(1.0, abs(whole))))
        if isinstance(L, OrliczNorm):
            vals = [action(L, u, v, T).value for T in (0.5, 1.0, 2.0)]
            checks.append(CheckResult(f"T_independence[{name}]", max(vals) - min(vals), cfg.tol("T_independence", 1e-9)))
    return checks, {}


def metric_pair(cfg, seed):
    if cfg.shift is not None:
        u = generate_instance(seed, cfg.dim, cfg.m, pair_kind(seed))[0]
        return u, u.shifted(-cfg.shift)
    return generate_instance(seed, cfg.dim, cfg.m, pair_kind(seed))


def _metric_table(cfg, seed):
    u, v = metric_pair(cfg, seed)
    rows, checks = [], []
    for name in cfg.chi:
        a, b = d_chi(u, v, name), d_chi(v, u, name)
        rows.append((f"d_chi[{name}]", a))
        checks.append(CheckResult(f"d_chi_symmetry[{name}]", abs(a - b), 1e-12 * max(1.0, abs(a))))
    for q in cfg.p:
        a, b = d_p(u, v, q), d_p(v, u, q)
        rows.append((f"d_p[{q:g}]", a))
        checks.append(CheckResult(f"d_p_symmetry[{q:g}]", abs(a - b), 1e-12 * max(1.0, abs(a))))
        # the Orlicz-norm action of |t|^q is the L^q norm of the rise, for every T
        chi = next((c for c in ORLICZ_CHI.values() if c.homogeneity == q), None)
        if chi is not None:
            act = action(OrliczNorm(chi), u, v, 1.0).value
            rows.append((f"action[norm-{chi.name}]", act))
            checks.append(CheckResult(f"action_equals_d_p[{q:g}]", abs(act - a), 1e-9 * max(1.0, abs(a))))
    return checks, {"metrics": rows}


def random_fenchel(rng: np.random.Generator, max_members: int = 4, max_atoms: int = 6) -> tuple:
    """A random finite family and a random sample on a shared weighted space."""
    n = int(rng.integers(1, max_atoms + 1))
    w = rng.uniform(0.1, 1.0, n)
    w = w / w.sum()
    fam = tuple(
        (float(rng.normal()), WeightedSample(rng.normal(size=n) * rng.uniform(0.1, 3.0), w))
        for _ in range(int(rng.integers(1, max_members + 1)))
    )
    xi = WeightedSample(rng.normal(size=n) * rng.uniform(0.1, 5.0) + rng.normal(), w)
    return Fenchel(fam), xi


def _lagrangian_structure(cfg, seed):
    rng = rng_for(seed, 99)
    n = int(rng.integers(1, 7))
    unit = np.full(n, 1.0 / n)
    xi = WeightedSample(rng.normal(size=n), unit)
    f = WeightedSample(rng.normal(size=n), unit)
    hl = hardy_littlewood_sup_check(xi, f, cfg.tol("hardy_littlewood", 1e-10))
    L, eta = random_fenchel(rng)
    comp = comparison_check(L, eta, cfg.tol("comparison", 1e-9))
    lam = float(rng.uniform(0.5, 4.0))
    deltas = L.V * 0.5 ** np.arange(12)
    mods = [ac_modulus(L, lam, d) for d in deltas]
    # decreasing as delta halves, never above the full bound, approaching max a
    floor = max(a for a, _ in L.family)
    decay = max(violation(np.diff(mods)), violation(mods[0] - finiteness_bound(L, lam)), violation(floor - mods[-1]))
    ac = CheckResult("ac_modulus_decay", decay, cfg.tol("ac_modulus", 1e-12))
    return [hl, comp, ac], {}


def _exploratory(cfg, seed):
    u, v, w = generate_instance(seed, cfg.dim, cfg.m, "triple")
    gap = pointwise_triangle_violation(u, v, w)
    return [CheckResult("pointwise_triangle", gap, cfg.tol("pointwise_triangle", 1e-9))], {}


def _renamed(res: CheckResult, name: str) -> CheckResult:
    return replace(res, check=name)


DRIVERS = {
    "conservation": _conservation,
    "pythagoras": _pythagoras,
    "triangle": _triangle,
    "contraction": _contraction,
    "flat-compare": _flat_compare,
    "meet-bound": _meet_bound,
    "monotone-approx": _monotone_approx,
    "least-action": _least_action,
    "metric-table": _metric_table,
    "lagrangian-structure": _lagrangian_structure,
    "exploratory-strong-triangle": _exploratory,
}


# ---------------------------------------------------------------------------
# run loop


@dataclass
class RunReport:
    config: ScenarioConfig
    records: list
    extras: dict = field(default_factory=dict)  # seed -> extras dict

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.records)

    @property
    def exit_code(self) -> int:
        if self.config.scenario in EXPLORATORY:
            return 0
        return 0 if self.passed else 1

    def stamp(self) -> dict:
        cfg = self.config
        return {
            "version": __version__,
            "scenario": cfg.scenario,
            "seed": cfg.seed,
            "seeds": cfg.seeds,
            "dim": cfg.dim,
            "m": cfg.m,
            "dt": cfg.dt_value,
            "records": len(self.records),
            "failed": sum(not r["pass"] for r in self.records),
            "pass": self.passed,
        }


def worker_count() -> int:
    raw = os.environ.get("RISELAB_THREADS", "")
    try:
        n = int(raw) if raw else min(4, os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"RISELAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def run(cfg: ScenarioConfig, threads: int | None = None) -> RunReport:
    """Run every seed of ``cfg``; records are ordered by seed whatever the worker count."""
    driver = DRIVERS[cfg.scenario]
    seeds = [cfg.seed + k for k in range(cfg.seeds)]
    n = threads if threads is not None else worker_count()
    if n > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            outcomes = list(pool.map(lambda s: driver(cfg, s), seeds))
    else:
        outcomes = [driver(cfg, s) for s in seeds]
    records, extras = [], {}
    for s, (checks, extra) in zip(seeds, outcomes):
        records.extend(c.as_record(cfg.scenario, s) for c in checks)
        if extra:
            extras[s] = extra
    return RunReport(cfg, records, extras)
