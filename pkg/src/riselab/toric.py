"""Torus-invariant potentials represented by convex symplectic potentials on a box.

A potential ``u`` on the space side (log coordinates ``x``) and its symplectic
potential ``uhat`` on the moment polytope ``P`` are Legendre dual::

    u(x) = max_{y in P} <x, y> - uhat(y)

Under this dictionary the Monge-Ampere measure of ``u`` is the pullback of
normalized Lebesgue measure on ``P`` by the moment map ``x = grad uhat(y)``,
geodesics are affine interpolations of the ``uhat``, the envelope ``u ^ v`` is
``max(uhat_u, uhat_v)`` and ``u v v`` is the convex hull of ``min(uhat_u, uhat_v)``.

Everything lives on uniform grids; ``P`` carries mass ``V = 1`` split evenly
over the grid nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import ConvexHull

from .rearrange import InvalidInput, WeightedSample

__all__ = [
    "Polytope",
    "ConvexPotential",
    "SpaceGrid",
    "SpaceFunction",
    "GeodesicPath",
    "GridMismatch",
    "convexify",
    "is_discretely_convex",
    "legendre",
    "meet",
    "join",
    "geodesic_at",
    "envelope_oracle",
    "velocity_finite_difference",
    "pushforward_measure",
    "project_space_function",
    "auto_space_grid",
    "moment_map",
]

CONVEXITY_TOL = 1e-9
HULL_SNAP_TOL = 1e-12
# legendre/oracle sweeps are chunked so that a block holds at most this many floats
_BLOCK = 4_000_000


class GridMismatch(InvalidInput):
    """Two potentials do not share the same polytope grid."""


@dataclass(frozen=True)
class Polytope:
    """Box ``prod_k [lo_k, hi_k]`` with ``m`` uniform subdivisions per axis."""

    dim: int = 1
    m: int = 64
    bounds: tuple = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidInput("dim must be 1 or 2")
        if self.m < 8:
            raise InvalidInput("grid resolution m must be at least 8")
        bounds = self.bounds if self.bounds is not None else ((0.0, 1.0),) * self.dim
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != self.dim or any(hi <= lo for lo, hi in bounds):
            raise InvalidInput(f"bad bounds {self.bounds!r} for dim={self.dim}")
        object.__setattr__(self, "bounds", bounds)

    @property
    def shape(self) -> tuple:
        return (self.m + 1,) * self.dim

    @property
    def size(self) -> int:
        return (self.m + 1) ** self.dim

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(hi - lo) / self.m for lo, hi in self.bounds])

    @property
    def h(self) -> float:
        return float(np.max(self.spacing))

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum((hi - lo) ** 2 for lo, hi in self.bounds)))

    def axes(self) -> list:
        return [np.linspace(lo, hi, self.m + 1) for lo, hi in self.bounds]

    def points(self) -> np.ndarray:
        """Grid nodes as an ``(N, dim)`` array in row-major order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def sample(self, fn) -> np.ndarray:
        """Evaluate ``fn`` on the nodes; ``fn`` gets one array per axis."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.broadcast_to(np.asarray(fn(*mesh), dtype=float), self.shape).copy()

    def to_dict(self) -> dict:
        return {"dim": self.dim, "bounds": [list(b) for b in self.bounds], "m": self.m}


class ConvexPotential:
    """Grid-sampled convex function on a :class:`Polytope`.

    ``validate=False`` skips the convexity test for values that are convex by
    construction (convex combinations, maxima, hulls).
    """

    def __init__(self, polytope: Polytope, values, validate: bool = True):
        vals = np.array(values, dtype=float).reshape(polytope.shape)
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("potential values must be finite")
        if validate and not is_discretely_convex(vals, polytope):
            raise InvalidInput("values are not discretely convex")
        vals.setflags(write=False)
        self.polytope = polytope
        self.values = vals

    @classmethod
    def from_function(cls, polytope: Polytope, fn, validate: bool = True) -> "ConvexPotential":
        return cls(polytope, polytope.sample(fn), validate=validate)

    def _same_grid(self, other: "ConvexPotential") -> None:
        if self.polytope != other.polytope:
            raise GridMismatch("potentials live on different polytope grids")

    def __sub__(self, other):
        """Pointwise difference of the value arrays (not a potential)."""
        if isinstance(other, ConvexPotential):
            self._same_grid(other)
            return self.values - other.values
        return NotImplemented

    def shifted(self, c: float) -> "ConvexPotential":
        """``uhat + c``, i.e. the space-side potential ``u - c``."""
        return ConvexPotential(self.polytope, self.values + c, validate=False)

    @cached_property
    def gradient(self) -> np.ndarray:
        """Centered differences (one-sided at the boundary), shape ``(N, dim)``."""
        p = self.polytope
        grads = [
            np.gradient(self.values, p.spacing[k], axis=k, edge_order=2) for k in range(p.dim)
        ]
        return np.stack([g.ravel() for g in grads], axis=1)

    def to_dict(self) -> dict:
        d = self.polytope.to_dict()
        d["values"] = self.values.ravel().tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> "ConvexPotential":
        poly = Polytope(dim=int(d["dim"]), m=int(d["m"]), bounds=d.get("bounds"))
        return cls(poly, d["values"], validate=validate)

    def __repr__(self) -> str:
        return f"ConvexPotential(dim={self.polytope.dim}, m={self.polytope.m})"


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform grid on ``[-R, R]^dim`` with ``n`` nodes per axis (``n`` odd, so 0 is a node)."""

    dim: int
    R: float
    n: int

    def __post_init__(self):
        if self.R <= 0 or self.n < 3:
            raise InvalidInput("space grid needs R > 0 and n >= 3")
        if self.n % 2 == 0:
            object.__setattr__(self, "n", self.n + 1)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def spacing(self) -> float:
        return 2.0 * self.R / (self.n - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.n)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis()] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class SpaceFunction:
    """Space-side function sampled on a :class:`SpaceGrid`."""

    grid: SpaceGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("space function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def R(self) -> float:
        return self.grid.R

    def __sub__(self, other: "SpaceFunction") -> "SpaceFunction":
        if self.grid != other.grid:
            raise GridMismatch("space functions on different grids")
        return SpaceFunction(self.grid, self.values - other.values)

    def __call__(self, x) -> np.ndarray:
        """Multilinear interpolation at points ``x`` of shape ``(k, dim)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.grid.dim and self.grid.dim == 1:
            x = x.reshape(-1, 1)
        if np.any(np.abs(x) > self.R * (1 + 1e-12)):
            raise InvalidInput(f"points leave the space grid [-{self.R}, {self.R}]^{self.grid.dim}")
        if self.grid.dim == 1:
            return np.interp(x[:, 0], self.grid.axis(), self.values)
        interp = RegularGridInterpolator((self.grid.axis(),) * self.grid.dim, self.values)
        return interp(np.clip(x, -self.R, self.R))

    def to_dict(self) -> dict:
        return {
            "dim": self.grid.dim,
            "R": self.grid.R,
            "n": self.grid.n,
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceFunction":
        return cls(SpaceGrid(int(d["dim"]), float(d["R"]), int(d["n"])), d["values"])


# ---------------------------------------------------------------------------
# convex envelopes


def _lower_hull_1d(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull vertices (monotone chain, ``x`` sorted)."""
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (z[i] - z[a]) - (z[b] - z[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


def _lower_hull_planes_2d(pts: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Supporting planes ``(a, b, c)`` with ``z >= a x + b y + c`` of the lower hull."""
    zmax = float(np.max(z))
    spread = max(zmax - float(np.min(z)), 1.0)
    centre = pts.mean(axis=0)
    # an apex above the data keeps qhull away from flat (coplanar) input
    lifted = np.vstack([np.column_stack([pts, z]), [centre[0], centre[1], zmax + spread]])
    hull = ConvexHull(lifted, qhull_options="Qt")
    normals = hull.equations
    lower = normals[:, 2] < -1e-12
    nx, ny, nz, off = normals[lower].T
    # facet: nx x + ny y + nz z + off = 0  ->  z = a x + b y + c
    return np.column_stack([-nx / nz, -ny / nz, -off / nz])


def convexify(values, polytope: Polytope) -> np.ndarray:
    """Largest discretely convex grid function below ``values`` (lower convex envelope)."""
    vals = np.asarray(values, dtype=float).reshape(polytope.shape)
    if polytope.dim == 1:
        x = polytope.axes()[0]
        idx = _lower_hull_1d(x, vals)
        return _snap(np.interp(x, x[idx], vals[idx]), vals)
    pts = polytope.points()
    planes = _lower_hull_planes_2d(pts, vals.ravel())
    env = np.full(pts.shape[0], -np.inf)
    step = max(1, _BLOCK // max(planes.shape[0], 1))
    for start in range(0, pts.shape[0], step):
        p = pts[start : start + step]
        env[start : start + step] = np.max(p @ planes[:, :2].T + planes[:, 2], axis=1)
    return _snap(env, vals.ravel()).reshape(polytope.shape)


def _snap(env: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Nodes where the envelope meets the data (up to rounding) keep the data value.

    This makes convexify an exact identity on convex input.
    """
    tol = HULL_SNAP_TOL * max(1.0, float(np.max(np.abs(vals))))
    return np.where(vals <= env + tol, vals, np.minimum(env, vals))


def is_discretely_convex(values, polytope: Polytope, tol: float = CONVEXITY_TOL) -> bool:
    vals = np.asarray(values, dtype=float).reshape(polytope.shape)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if polytope.dim == 1:
        return bool(np.all(np.diff(vals, 2) >= -tol * scale))
    return bool(np.max(np.abs(convexify(vals, polytope) - vals)) <= tol * scale)


def support_planes(pot: ConvexPotential) -> np.ndarray:
    """For each node a supporting affine function ``(slope..., intercept)`` touching there."""
    p = pot.polytope
    pts = p.points()
    vals = pot.values.ravel()
    if p.dim == 1:
        slopes = pot.gradient  # centered slope lies in the discrete subdifferential
        return np.column_stack([slopes, vals - slopes[:, 0] * pts[:, 0]])
    planes = _lower_hull_planes_2d(pts, vals)
    best = np.empty(pts.shape[0], dtype=int)
    step = max(1, _BLOCK // max(planes.shape[0], 1))
    for start in range(0, pts.shape[0], step):
        q = pts[start : start + step]
        best[start : start + step] = np.argmax(q @ planes[:, :2].T + planes[:, 2], axis=1)
    chosen = planes[best]
    # re-anchor so the plane passes exactly through the node value
    chosen[:, 2] = vals - np.sum(chosen[:, :2] * pts, axis=1)
    return chosen


# ---------------------------------------------------------------------------
# duality


def auto_space_grid(*pots: ConvexPotential, refine: float | None = None, margin: float = 1.0) -> SpaceGrid:
    """Space grid wide enough to contain every moment-map image of ``pots``.

    Spacing is ``h / refine`` with ``refine`` defaulting to 2 in 1D and 1 in 2D.
    """
    p = pots[0].polytope
    for q in pots[1:]:
        pots[0]._same_grid(q)
    gmax = max(float(np.max(np.abs(q.gradient))) for q in pots)
    R = float(np.ceil(gmax + margin))
    if refine is None:
        refine = 2.0 if p.dim == 1 else 1.0
    spacing = p.h / refine
    n = 2 * int(np.ceil(R / spacing)) + 1
    return SpaceGrid(p.dim, R, n)


def _blocked_max(X: np.ndarray, Y: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """``max_j <X_i, Y_j> + offsets_j`` for every row of ``X``."""
    out = np.empty(X.shape[0])
    step = max(1, _BLOCK // max(Y.shape[0], 1))
    for start in range(0, X.shape[0], step):
        out[start : start + step] = np.max(X[start : start + step] @ Y.T + offsets, axis=1)
    return out


def legendre(pot: ConvexPotential, grid: SpaceGrid | None = None) -> SpaceFunction:
    """Space-side potential ``u(x) = max_y <x, y> - uhat(y)`` on a space grid."""
    if grid is None:
        grid = auto_space_grid(pot)
    if grid.dim != pot.polytope.dim:
        raise GridMismatch("space grid and polytope differ in dimension")
    vals = _blocked_max(grid.points(), pot.polytope.points(), -pot.values.ravel())
    return SpaceFunction(grid, vals)


def project_space_function(f: SpaceFunction, polytope: Polytope) -> ConvexPotential:
    """Symplectic potential of the largest model potential below ``f``.

    ``uhat(y) = max_x <x, y> - f(x)`` over the space grid; the result is then
    convexified (a no-op up to rounding, since it is a maximum of affine maps).
    """
    if f.grid.dim != polytope.dim:
        raise GridMismatch("space grid and polytope differ in dimension")
    vals = _blocked_max(polytope.points(), f.grid.points(), -f.values.ravel())
    return ConvexPotential(polytope, convexify(vals, polytope), validate=False)


def meet(u: ConvexPotential, v: ConvexPotential) -> ConvexPotential:
    """Envelope ``u ^ v`` (largest potential below both): pointwise max of the duals."""
    u._same_grid(v)
    return ConvexPotential(u.polytope, np.maximum(u.values, v.values), validate=False)


def join(u: ConvexPotential, v: ConvexPotential) -> ConvexPotential:
    """``u v v = max(u, v)``: convex envelope of the pointwise min of the duals."""
    u._same_grid(v)
    return ConvexPotential(u.polytope, convexify(np.minimum(u.values, v.values), u.polytope), validate=False)


# ---------------------------------------------------------------------------
# geodesics


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    start: ConvexPotential
    end: ConvexPotential

    def __post_init__(self):
        self.start._same_grid(self.end)

    @property
    def polytope(self) -> Polytope:
        return self.start.polytope


def geodesic_at(path: GeodesicPath, t: float) -> ConvexPotential:
    """Dual potential ``(1 - t) uhat_u + t uhat_v`` of the geodesic at time ``t``."""
    if not 0.0 <= t <= 1.0:
        raise InvalidInput(f"t={t} outside [0, 1]")
    if t == 0.0:
        return path.start
    if t == 1.0:
        return path.end
    vals = (1.0 - t) * path.start.values + t * path.end.values
    return ConvexPotential(path.polytope, vals, validate=False)


def envelope_oracle(
    u: SpaceFunction,
    v: SpaceFunction,
    t,
    x=None,
    slopes: np.ndarray | None = None,
) -> np.ndarray:
    """Geodesic value as the upper envelope of affine subgeodesics.

    Candidates are ``l(t, x) = <x, y> + (1 - t) a + t b`` with ``l(0, .) <= u`` and
    ``l(1, .) <= v``; for a slope ``y`` the best intercepts are
    ``a = min_x u(x) - <x, y>`` and ``b = min_x v(x) - <x, y>``, read off the
    space-side boundary data only.  Slopes default to a grid on the unit box with
    65 points per axis in 1D and 33 in 2D.  Returns values at ``x`` (default: the
    space grid nodes); a sequence of times gives one row per time.
    """
    if u.grid != v.grid:
        raise GridMismatch("boundary data on different space grids")
    dim = u.grid.dim
    if slopes is None:
        slopes = Polytope(dim=dim, m=64 if dim == 1 else 32).points()
    slopes = np.asarray(slopes, dtype=float).reshape(-1, dim)
    X = u.grid.points()
    a = -_blocked_max(slopes, X, -u.values.ravel())
    b = -_blocked_max(slopes, X, -v.values.ravel())
    xq = X if x is None else np.asarray(x, dtype=float).reshape(-1, dim)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    rows = np.array([_blocked_max(xq, slopes, (1.0 - s) * a + s * b) for s in times])
    return rows if np.ndim(t) else rows[0]


def velocity_finite_difference(
    path: GeodesicPath, t: float, dt: float, grid: SpaceGrid | None = None
) -> SpaceFunction:
    """Centered difference ``(psi_{t+dt} - psi_{t-dt}) / 2dt`` of the space-side geodesic."""
    if dt <= 0 or t - dt < 0 or t + dt > 1:
        raise InvalidInput(f"need 0 <= t - dt and t + dt <= 1 (t={t}, dt={dt})")
    if grid is None:
        grid = auto_space_grid(path.start, path.end)
    hi = legendre(geodesic_at(path, t + dt), grid)
    lo = legendre(geodesic_at(path, t - dt), grid)
    return SpaceFunction(grid, (hi.values - lo.values) / (2.0 * dt))


def moment_map(pot: ConvexPotential) -> np.ndarray:
    """Images ``grad uhat(y)`` of the polytope nodes, shape ``(N, dim)``."""
    return pot.gradient


def pushforward_measure(pot: ConvexPotential, g: SpaceFunction) -> WeightedSample:
    """``g`` as a function on ``(X, mu_u)``: sampled at the moment-map images, uniform weights."""
    if g.grid.dim != pot.polytope.dim:
        raise GridMismatch("space function and potential differ in dimension")
    x = moment_map(pot)
    if np.any(np.abs(x) > g.R * (1 + 1e-12)):
        raise InvalidInput(
            f"moment map leaves the space grid: max |grad| = {np.max(np.abs(x)):.4g} > R = {g.R:g}"
        )
    return WeightedSample.uniform(g(x), total_mass=1.0)


def potentials_equal(a: ConvexPotential, b: ConvexPotential, atol: float = 0.0) -> bool:
    return a.polytope == b.polytope and bool(np.max(np.abs(a.values - b.values)) <= atol)
