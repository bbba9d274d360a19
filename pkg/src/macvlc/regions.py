"""Rate regions in the (R1, R2) plane.

Regions are unions over a grid of input distributions of simple polygons
``{0 <= R1 <= a, 0 <= R2 <= b, s R1 + R2 <= c}``, closed under convex
hull (time sharing) and projection toward the axes. Everything is in nats;
conversion to bits happens at export.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import ConvexHull
from shapely.geometry import MultiPoint, Point

from .channel import McChannel
from .errors import DegenerateQuery, NotPentagonShaped
from .infomeasures import (
    ChannelSummary,
    InfoTriple,
    channel_summary,
    info_triples_grid,
)

LN2 = math.log(2.0)
DEDUP_TOL = 1e-9

__all__ = [
    "Pentagon",
    "PentagonCorners",
    "RateRegion",
    "RegionQuery",
    "simplex_grid",
    "pentagon_corners",
    "block_capacity_region",
    "outer_bound_constraints",
    "outer_region",
    "contract_extend",
    "outer_membership",
    "r1_fixed_outer",
    "region_corners",
    "eq1_boundary",
    "timeshare_rates",
    "feedback_outer_region",
    "rectangle_region",
    "lemma_slack",
    "hausdorff",
    "fmt6",
    "region_to_csv",
    "region_to_json",
]


def fmt6(x: float) -> str:
    """Six decimals, round-half-even on the shortest decimal repr."""
    d = Decimal(repr(float(x))).quantize(Decimal("0.000001"), rounding=ROUND_HALF_EVEN)
    if d == 0:
        d = abs(d)
    return f"{d:.6f}"


@dataclass(frozen=True)
class RegionQuery:
    """Decoding-time ratios ``r1 = E[N]/E[N1]``, ``r2 = E[N]/E[N2] = s r1``.

    ``s`` is derived from ``r1`` and ``r2`` when ``r1 > 0``. With
    ``r1 = 0`` only ``r2 = 0`` is meaningful; ``s`` then defaults to 1 and
    does not affect the region.
    """

    r1: float
    r2: float
    s: float | None = None

    def __post_init__(self):
        r1, r2 = float(self.r1), float(self.r2)
        if not (0.0 <= r1 <= 1.0 and 0.0 <= r2 <= 1.0):
            raise ValueError(f"r1, r2 must lie in [0, 1], got ({r1}, {r2})")
        if r1 == 0.0:
            if r2 != 0.0:
                raise DegenerateQuery(f"r1 = 0 with r2 = {r2} leaves s undefined")
            s = 1.0 if self.s is None else float(self.s)
        else:
            s = r2 / r1
            if self.s is not None and not math.isclose(float(self.s), s, rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError(f"s = {self.s} inconsistent with r2 / r1 = {s}")
        if s <= 0.0 and not (r1 == 0.0 and r2 == 0.0):
            raise DegenerateQuery("s must be positive")
        object.__setattr__(self, "r1", r1)
        object.__setattr__(self, "r2", r2)
        object.__setattr__(self, "s", s)


@dataclass(frozen=True)
class Pentagon:
    triple: InfoTriple

    def vertices(self) -> NDArray[np.float64]:
        t = self.triple
        return _poly_vertices(np.array([t.i1]), np.array([t.i2]), np.array([t.i12]), 1.0).reshape(-1, 2)


@dataclass(frozen=True)
class PentagonCorners:
    """``corner_a = (I(X1;Y|X2), I(X2;Y))``, ``corner_b = (I(X1;Y), I(X2;Y|X1))``."""

    corner_a: tuple[float, float]
    corner_b: tuple[float, float]

    @property
    def c1(self) -> float:
        return self.corner_a[0]

    @property
    def d2(self) -> float:
        return self.corner_a[1]

    @property
    def d1(self) -> float:
        return self.corner_b[0]

    @property
    def c2(self) -> float:
        return self.corner_b[1]


def pentagon_corners(triple: InfoTriple) -> PentagonCorners:
    return PentagonCorners(
        corner_a=(triple.i1, triple.i12 - triple.i1),
        corner_b=(triple.i12 - triple.i2, triple.i2),
    )


@dataclass(frozen=True, eq=False)
class RateRegion:
    """Boundary vertices (nats, counterclockwise from the origin) of a region.

    Every provenance except ``eq1_curve`` is convex. ``eq1_curve`` regions
    are unions of the rectangles dominated by the listed curve points.
    """

    hull: NDArray[np.float64]
    provenance: str
    query: RegionQuery | None = None
    curve: NDArray[np.float64] | None = field(default=None, repr=False)

    @property
    def convex(self) -> bool:
        return self.provenance != "eq1_curve"

    def _geom(self):
        return MultiPoint([tuple(v) for v in self.hull]).convex_hull

    def contains(self, point, tol: float = 1e-9) -> bool:
        x, y = float(point[0]), float(point[1])
        if x < -tol or y < -tol:
            return False
        if not self.convex:
            pts = self.curve[:, 1:] if self.curve is not None else self.hull
            return bool(np.any((pts[:, 0] >= x - tol) & (pts[:, 1] >= y - tol)))
        return self._geom().distance(Point(max(x, 0.0), max(y, 0.0))) <= tol

    def distance_to(self, point) -> float:
        return float(self._geom().distance(Point(float(point[0]), float(point[1]))))

    def max_r1(self) -> float:
        return float(self.hull[:, 0].max())

    def max_r2(self) -> float:
        return float(self.hull[:, 1].max())

    def max_weighted_sum(self, w1: float, w2: float) -> float:
        return float((self.hull @ np.array([w1, w2])).max())

    def in_bits(self) -> NDArray[np.float64]:
        return self.hull / LN2


def hausdorff(a: RateRegion, b: RateRegion) -> float:
    """Two-sided Hausdorff distance between two convex regions (nats).

    For convex sets the supremum is attained at a vertex.
    """
    ga, gb = a._geom(), b._geom()
    d_ab = max(gb.distance(Point(*v)) for v in a.hull)
    d_ba = max(ga.distance(Point(*v)) for v in b.hull)
    return float(max(d_ab, d_ba))


def _poly_vertices(a, b, c, s) -> NDArray[np.float64]:
    """Vertices of ``{0<=x<=a, 0<=y<=b, s x + y <= c}`` for arrays of (a, b, c).

    Returns shape ``(n, 5, 2)``; repeated vertices are left in place.
    """
    a = np.maximum(np.asarray(a, dtype=float), 0.0)
    b = np.maximum(np.asarray(b, dtype=float), 0.0)
    c = np.maximum(np.asarray(c, dtype=float), 0.0)
    if s > 0:
        xa = np.minimum(a, c / s)
        yb = np.minimum(b, c)
        xb = np.clip((c - yb) / s, 0.0, xa)
    else:
        xa = a
        yb = np.minimum(b, c)
        xb = a
    ya = np.clip(c - s * xa, 0.0, yb)
    zero = np.zeros_like(a)
    pts = np.stack(
        [
            np.stack([zero, zero], -1),
            np.stack([xa, zero], -1),
            np.stack([xa, ya], -1),
            np.stack([xb, yb], -1),
            np.stack([zero, yb], -1),
        ],
        axis=-2,
    )
    return pts


def _hull(points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Convex hull of a point cloud closed toward the axes, ccw from (0, 0)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    pts = np.maximum(pts, 0.0)
    xmax = float(pts[:, 0].max()) if len(pts) else 0.0
    ymax = float(pts[:, 1].max()) if len(pts) else 0.0
    if xmax <= DEDUP_TOL and ymax <= DEDUP_TOL:
        return np.zeros((1, 2))
    if ymax <= DEDUP_TOL:
        return np.array([[0.0, 0.0], [xmax, 0.0]])
    if xmax <= DEDUP_TOL:
        return np.array([[0.0, 0.0], [0.0, ymax]])
    pts = np.vstack([pts, [[0.0, 0.0], [xmax, 0.0], [0.0, ymax]]])
    pts = np.unique(np.round(pts, 12), axis=0)
    hull = ConvexHull(pts)
    verts = pts[hull.vertices]
    # start at the origin, keep counterclockwise order
    start = int(np.argmin(np.abs(verts).sum(axis=1)))
    verts = np.roll(verts, -start, axis=0)
    keep = [verts[0]]
    for v in verts[1:]:
        if np.max(np.abs(v - keep[-1])) > DEDUP_TOL:
            keep.append(v)
    return np.array(keep)


@lru_cache(maxsize=None)
def _simplex_grid_cached(k: int, n: int) -> NDArray[np.float64]:
    steps = n - 1
    rows = []
    for bars in itertools.combinations(range(steps + k - 1), k - 1):
        prev = -1
        counts = []
        for bar in bars:
            counts.append(bar - prev - 1)
            prev = bar
        counts.append(steps + k - 1 - prev - 1)
        rows.append(counts)
    out = np.array(rows, dtype=float) / steps
    out.setflags(write=False)
    return out


def simplex_grid(k: int, n: int) -> NDArray[np.float64]:
    """All pmfs on ``k`` letters whose entries are multiples of ``1/(n-1)``."""
    if k == 1:
        return np.ones((1, 1))
    if n < 2:
        raise ValueError("grid needs at least 2 points per simplex edge")
    return _simplex_grid_cached(k, n)


def _input_grids(ch: McChannel, grid: int, grid_large: int):
    n1 = grid if ch.x1_size <= 2 else grid_large
    n2 = grid if ch.x2_size <= 2 else grid_large
    return simplex_grid(ch.x1_size, n1), simplex_grid(ch.x2_size, n2)


def _grid_triples(ch, grid, grid_large):
    p1s, p2s = _input_grids(ch, grid, grid_large)
    i1, i2, i12 = info_triples_grid(ch, p1s, p2s)
    return i1.ravel(), i2.ravel(), i12.ravel(), p1s, p2s


def block_capacity_region(ch: McChannel, grid: int = 101, grid_large: int = 21) -> RateRegion:
    """``R_MAC``: hull of the pentagons of all grid product inputs."""
    if grid < 11:
        raise ValueError("grid must have at least 11 points per simplex dimension")
    i1, i2, i12, _, _ = _grid_triples(ch, grid, grid_large)
    verts = _poly_vertices(i1, i2, i12, 1.0)
    return RateRegion(_hull(verts), "r_mac", RegionQuery(1.0, 1.0))


def outer_bound_constraints(triple: InfoTriple, summary: ChannelSummary, q: RegionQuery):
    """Right-hand sides bounding ``R1``, ``R2`` and ``s R1 + R2``."""
    c1, c2 = summary.c1, summary.c2
    return (
        q.r1 * triple.i1 + (1 - q.r1) * c1,
        q.r2 * triple.i2 + (1 - q.r2) * c2,
        q.r2 * triple.i12 + q.s * (1 - q.r1) * c1 + (1 - q.r2) * c2,
    )


def rectangle_region(summary: ChannelSummary) -> RateRegion:
    return RateRegion(_hull(np.array([[summary.c1, summary.c2]])), "rectangle", RegionQuery(0.0, 0.0))


def _sweep(ch, r1, r2, s, summary, grid, grid_large):
    i1, i2, i12, _, _ = _grid_triples(ch, grid, grid_large)
    c1, c2 = summary.c1, summary.c2
    a = r1 * i1 + (1 - r1) * c1
    b = r2 * i2 + (1 - r2) * c2
    c = r2 * i12 + s * (1 - r1) * c1 + (1 - r2) * c2
    return _hull(_poly_vertices(a, b, c, s))


def outer_region(
    ch: McChannel,
    q: RegionQuery,
    grid: int = 101,
    grid_large: int = 21,
    summary: ChannelSummary | None = None,
) -> RateRegion:
    """Union over grid inputs of the three outer-bound constraints, convexified.

    At ``(r1, r2) = (0, 0)`` this is the rectangle ``[0, C1] x [0, C2]``.
    """
    summary = summary or channel_summary(ch)
    if q.r1 == 0.0 and q.r2 == 0.0:
        return RateRegion(rectangle_region(summary).hull, "outer", q)
    return RateRegion(_sweep(ch, q.r1, q.r2, q.s, summary, grid, grid_large), "outer", q)


def contract_extend(rmac: RateRegion, summary: ChannelSummary, q: RegionQuery) -> RateRegion:
    """Map ``R_MAC`` to the outer region by scaling and translating.

    Works in ``(s R1, R2)`` coordinates: scale by ``r2``, shift by
    ``(s (1 - r1) C1, (1 - r2) C2)``, close toward the axes, divide the
    first coordinate by ``s``.
    """
    if q.r1 == 0.0 and q.r2 == 0.0:
        return RateRegion(rectangle_region(summary).hull, "outer", q)
    shift = np.array([q.s * (1 - q.r1) * summary.c1, (1 - q.r2) * summary.c2])
    moved = q.r2 * rmac.hull + shift
    hull = _hull(moved)
    return RateRegion(hull / np.array([q.s, 1.0]), "outer", q)


def outer_membership(point, rmac: RateRegion, summary: ChannelSummary, q: RegionQuery, tol: float = 1e-9) -> bool:
    """Membership of ``(R1, R2)`` in the outer region, tested in ``R_MAC``.

    ``(s R1 - s (1 - r1) C1, R2 - (1 - r2) C2) / r2`` must be dominated by a
    point of ``R_MAC``.
    """
    if q.r2 == 0.0:
        return point[0] <= summary.c1 + tol and point[1] <= summary.c2 + tol and min(point) >= -tol
    if point[0] < -tol or point[1] < -tol:
        return False
    u = (q.s * point[0] - q.s * (1 - q.r1) * summary.c1) / q.r2
    v = (point[1] - (1 - q.r2) * summary.c2) / q.r2
    return rmac.contains((max(u, 0.0), max(v, 0.0)), tol=tol / q.r2)


def r1_fixed_outer(ch: McChannel, r2: float, grid: int = 101, grid_large: int = 21,
                   summary: ChannelSummary | None = None) -> RateRegion:
    """Outer region when user 1 is always decoded first (``r1 = 1``, ``s = r2``)."""
    if not 0.0 <= r2 <= 1.0:
        raise ValueError("r2 must lie in [0, 1]")
    summary = summary or channel_summary(ch)
    hull = _sweep(ch, 1.0, r2, r2, summary, grid, grid_large)
    q = RegionQuery(1.0, r2) if r2 > 0 else None
    return RateRegion(hull, "outer", q)


def region_corners(ch: McChannel, summary: ChannelSummary | None = None, grid: int = 101,
                   grid_large: int = 21, tol: float = 1e-6) -> PentagonCorners:
    """Corners ``(C1, d2)`` and ``(d1, C2)`` of the dominant face of ``R_MAC``.

    Uses the grid product input maximizing ``I(X1,X2;Y)``. The region is
    accepted as pentagon-shaped only if that pentagon reaches ``C1`` and
    ``C2``; otherwise :class:`NotPentagonShaped` is raised.
    """
    summary = summary or channel_summary(ch)
    i1, i2, i12, _, _ = _grid_triples(ch, grid, grid_large)
    k = int(np.argmax(i12))
    corners = pentagon_corners(InfoTriple(float(i1[k]), float(i2[k]), float(i12[k])))
    if abs(corners.c1 - summary.c1) > tol or abs(corners.c2 - summary.c2) > tol:
        raise NotPentagonShaped(
            f"sum-rate maximizer reaches ({corners.c1:.6g}, {corners.c2:.6g}) nats, "
            f"not (C1, C2) = ({summary.c1:.6g}, {summary.c2:.6g})"
        )
    return PentagonCorners((summary.c1, corners.d2), (corners.d1, summary.c2))


def _eq1_point(c1, c2, d1, d2, p):
    p = np.asarray(p, dtype=float)
    r1 = c1 / (1 + (1 - p) * (1 - d1 / c1))
    r2 = c2 / (1 + p * (1 - d2 / c2))
    return r1, r2


def eq1_boundary(summary: ChannelSummary, corners: PentagonCorners, p_grid=101) -> RateRegion:
    """Boundary of the non-convex region reachable with equal ``log M / C`` ratios.

    ``p_grid`` is a point count over ``[0, 1]`` or an explicit array.
    """
    ps = np.linspace(0.0, 1.0, int(p_grid)) if np.isscalar(p_grid) else np.asarray(p_grid, dtype=float)
    if ps.size < 2:
        raise ValueError("p_grid needs at least 2 points")
    r1, r2 = _eq1_point(summary.c1, summary.c2, corners.d1, corners.d2, ps)
    curve = np.column_stack([ps, r1, r2])
    order = np.lexsort((r2, -r1))  # R1 decreasing
    pts = curve[order, 1:]
    hull = np.vstack([[0.0, 0.0], [pts[0, 0], 0.0], pts, [0.0, pts[-1, 1]]])
    return RateRegion(hull, "eq1_curve", None, curve=curve)


def timeshare_rates(summary: ChannelSummary, corners: PentagonCorners, lam: float,
                    log_m1: float, log_m2: float, eps: float) -> tuple[float, float]:
    """Rates of the λ-mixture of the two concatenated codes (nats/use)."""
    if log_m1 <= 0 or log_m2 <= 0:
        raise ValueError("log M must be positive")
    a1 = summary.c1 - eps
    a2 = summary.c2 - eps
    lb = 1.0 - lam
    r1 = a1 / (1 + lb * (log_m2 / log_m1) * (a1 / a2) * (1 - corners.d1 / a1))
    r2 = a2 / (1 + lam * (log_m1 / log_m2) * (a2 / a1) * (1 - corners.d2 / a2))
    return float(r1), float(r2)


def _joint_infos(ch: McChannel, pj: NDArray[np.float64]):
    """Mutual informations for arbitrary joint input pmfs ``pj`` of shape (n, k1, k2)."""
    w = ch.transition

    def ent(p, axis=-1):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0).sum(axis=axis)

    pxy = pj[..., None] * w[None]  # (n, k1, k2, y)
    h_cond = np.einsum("nab,ab->n", pj, ent(w))
    py = pxy.sum(axis=(1, 2))
    h_y = ent(py)
    # H(Y|X2) = H(X2,Y) - H(X2)
    h_x2y = ent(pxy.sum(axis=1).reshape(len(pj), -1))
    h_x2 = ent(pj.sum(axis=1))
    h_x1y = ent(pxy.sum(axis=2).reshape(len(pj), -1))
    h_x1 = ent(pj.sum(axis=2))
    i1 = np.maximum(h_x2y - h_x2 - h_cond, 0.0)
    i2 = np.maximum(h_x1y - h_x1 - h_cond, 0.0)
    i12 = np.maximum(h_y - h_cond, 0.0)
    return i1, i2, i12


def feedback_outer_region(ch: McChannel, q: RegionQuery, grid: int = 21,
                          summary: ChannelSummary | None = None) -> RateRegion:
    """Outer bound with feedback: the same constraints over joint ``p(x1, x2)``."""
    summary = summary or channel_summary(ch)
    if q.r1 == 0.0 and q.r2 == 0.0:
        return RateRegion(rectangle_region(summary).hull, "feedback_outer", q)
    pj = simplex_grid(ch.x1_size * ch.x2_size, grid).reshape(-1, ch.x1_size, ch.x2_size)
    i1, i2, i12 = _joint_infos(ch, pj)
    c1, c2 = summary.c1, summary.c2
    a = q.r1 * i1 + (1 - q.r1) * c1
    b = q.r2 * i2 + (1 - q.r2) * c2
    c = q.r2 * i12 + q.s * (1 - q.r1) * c1 + (1 - q.r2) * c2
    return RateRegion(_hull(_poly_vertices(a, b, c, q.s)), "feedback_outer", q)


def lemma_slack(expected_length: float) -> float:
    """``ln(e E[N])``, the entropy bound for a positive integer variable."""
    if expected_length <= 0:
        raise ValueError("expected length must be positive")
    return 1.0 + math.log(expected_length)


def region_to_csv(region: RateRegion) -> str:
    lines = ["R1_bits,R2_bits"]
    for x, y in region.in_bits():
        lines.append(f"{fmt6(x)},{fmt6(y)}")
    return "\n".join(lines) + "\n"


def region_to_json(region: RateRegion) -> dict:
    q = region.query
    return {
        "provenance": region.provenance,
        "query": None if q is None else {"r1": q.r1, "r2": q.r2, "s": q.s},
        "vertices_nats": region.hull.tolist(),
        "vertices_bits": region.in_bits().tolist(),
    }
