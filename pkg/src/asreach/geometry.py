"""Safety-set geometry: H-polytopes, their unions, piecewise-linear paths and ball covers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .control import Ball
from .errors import (DimensionMismatch, InvalidPath, OutsidePolytope, PreconditionViolation,
                     VertexOnBoundary)
from .model import to_fraction

COVER_TOL = 1e-12


@dataclass(frozen=True)
class ConvexPolytope:
    """``{x : a_j . x <= b_j for all j}``; the open version uses strict inequalities."""

    rows: tuple  # tuple of (tuple[Fraction, ...], Fraction)

    def __post_init__(self):
        rows = tuple((tuple(to_fraction(x) for x in a), to_fraction(b)) for a, b in self.rows)
        if not rows:
            raise ValueError("a polytope needs at least one row")
        n = len(rows[0][0])
        for a, _ in rows:
            if len(a) != n:
                raise DimensionMismatch("polytope rows differ in dimension")
            if not any(a):
                raise ValueError("polytope row with zero normal")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def box(cls, lo: Sequence, hi: Sequence) -> "ConvexPolytope":
        n = len(lo)
        rows = []
        for j in range(n):
            e = [0] * n
            e[j] = 1
            rows.append((tuple(e), hi[j]))
            e = [0] * n
            e[j] = -1
            rows.append((tuple(e), -to_fraction(lo[j])))
        return cls(tuple(rows))

    @property
    def dim(self) -> int:
        return len(self.rows[0][0])

    @cached_property
    def A(self) -> np.ndarray:
        return np.array([[float(x) for x in a] for a, _ in self.rows])

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([float(b) for _, b in self.rows])

    @cached_property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.A, axis=1)

    def slacks(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"point of dimension {x.shape[-1]} for a {self.dim}-D polytope")
        return (self.b - self.A @ x) / self.norms

    def exact_clearance(self, x: Sequence[float]) -> float:
        """Distance to the boundary with slacks formed in rational arithmetic.

        Coordinates are read through their shortest decimal repr, so a vertex
        at ``0.8`` in the unit square has clearance exactly ``0.2``.
        """
        xr = [to_fraction(float(v)) for v in x]
        if len(xr) != self.dim:
            raise DimensionMismatch(f"point of dimension {len(xr)} for a {self.dim}-D polytope")
        return min(float(b - sum(ai * xi for ai, xi in zip(a, xr))) / nj
                   for (a, b), nj in zip(self.rows, self.exact_norms))

    @cached_property
    def exact_norms(self) -> list[float]:
        return [math.sqrt(sum(ai * ai for ai in a)) for a, _ in self.rows]

    def to_json(self) -> dict:
        return {"rows": [{"a": [str(x) for x in a], "b": str(b)} for a, b in self.rows]}


def polytope_contains(p: ConvexPolytope, x: Sequence[float], strict: bool = True) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.dim:
        raise DimensionMismatch(f"point of dimension {x.shape[-1]} for a {p.dim}-D polytope")
    lhs = p.A @ x
    return bool(np.all(lhs < p.b) if strict else np.all(lhs <= p.b))


def distance_to_boundary(p: ConvexPolytope, x: Sequence[float]) -> float:
    """Radius of the largest ball around ``x`` inside ``p``."""
    s = p.slacks(x)
    if np.any(s < 0):
        raise OutsidePolytope(f"point {list(np.asarray(x, dtype=float))} violates a polytope row")
    return float(s.min())


def chebyshev_center(p: ConvexPolytope, cap: float = 1e6) -> tuple[np.ndarray, float]:
    """Deepest interior point of ``p`` and its depth (capped for unbounded sets)."""
    from scipy.optimize import linprog

    n = p.dim
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([p.A, p.norms[:, None]])
    res = linprog(c, A_ub=a_ub, b_ub=p.b, bounds=[(None, None)] * n + [(None, cap)],
                  method="highs")
    if res.status != 0:
        return np.zeros(n), -math.inf
    return res.x[:n], float(res.x[-1])


def polytope_bounds(p: ConvexPolytope) -> tuple[np.ndarray, np.ndarray] | None:
    """Axis-aligned bounding box, or None when ``p`` is unbounded."""
    from scipy.optimize import linprog

    n = p.dim
    lo, hi = np.empty(n), np.empty(n)
    for j in range(n):
        for sgn, out in ((1.0, lo), (-1.0, hi)):
            c = np.zeros(n)
            c[j] = sgn
            res = linprog(c, A_ub=p.A, b_ub=p.b, bounds=[(None, None)] * n, method="highs")
            if res.status != 0:
                return None
            out[j] = sgn * res.fun
    return lo, hi


@dataclass(frozen=True)
class SafetySet:
    """Union of convex polytopes; each member must have nonempty interior."""

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("a safety set needs at least one polytope")
        n = members[0].dim
        for i, p in enumerate(members):
            if p.dim != n:
                raise DimensionMismatch(f"member {i} has dimension {p.dim}, expected {n}")
            _, depth = chebyshev_center(p)
            if not depth > 0:
                raise ValueError(f"member {i} has empty interior")
        object.__setattr__(self, "members", members)

    @property
    def dim(self) -> int:
        return self.members[0].dim

    def contains(self, x: Sequence[float], strict: bool = True) -> bool:
        return any(polytope_contains(p, x, strict) for p in self.members)

    def clearance_in(self, j: int, x: Sequence[float]) -> float:
        """Signed distance to the boundary of member ``j`` (negative outside)."""
        return float(self.members[j].slacks(x).min())

    def best_member(self, x: Sequence[float]) -> int | None:
        vals = [self.clearance_in(j, x) for j in range(len(self.members))]
        j = int(np.argmax(vals))
        return j if vals[j] > 0 else None

    def segment_member(self, a: Sequence[float], b: Sequence[float],
                       min_clearance: tuple[float, float] = (0.0, 0.0)) -> int | None:
        """Member holding the whole segment ``ab`` with the most clearance.

        Members are convex, so it suffices that both endpoints are strictly
        inside; ``min_clearance`` adds a per-endpoint depth requirement.
        """
        best, best_j = -math.inf, None
        for j in range(len(self.members)):
            ca, cb = self.clearance_in(j, a), self.clearance_in(j, b)
            if ca > 0 and cb > 0 and ca >= min_clearance[0] and cb >= min_clearance[1]:
                if min(ca, cb) > best:
                    best, best_j = min(ca, cb), j
        return best_j

    @cached_property
    def bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        boxes = [polytope_bounds(p) for p in self.members]
        if any(bx is None for bx in boxes):
            return None
        return (np.min([bx[0] for bx in boxes], axis=0), np.max([bx[1] for bx in boxes], axis=0))

    def to_json(self) -> list:
        return [p.to_json() for p in self.members]


@dataclass
class PiecewiseLinearPath:
    """Vertices plus, per segment, the member polytope that contains it.

    A single-vertex path carries one entry in ``members``: the polytope of
    that vertex.
    """

    vertices: np.ndarray
    members: list = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if len(self.vertices) < 1:
            raise InvalidPath("a path needs at least one vertex")
        expected = max(len(self.vertices) - 1, 1)
        if self.members and len(self.members) != expected:
            raise InvalidPath(f"expected {expected} member indices, got {len(self.members)}")

    @property
    def n_segments(self) -> int:
        return len(self.vertices) - 1

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())

    def vertex_members(self, i: int) -> list[int]:
        if self.n_segments == 0:
            return [self.members[0]]
        out = []
        if i > 0:
            out.append(self.members[i - 1])
        if i < self.n_segments:
            out.append(self.members[i])
        return out

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist(), "members": list(self.members)}


def assign_members(vertices: Sequence[Sequence[float]], s: SafetySet) -> PiecewiseLinearPath:
    """Attach a containing member to every segment of a vertex list."""
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    if v.shape[1] != s.dim:
        raise DimensionMismatch("path dimension differs from the safety set")
    if len(v) == 1:
        j = s.best_member(v[0])
        if j is None:
            raise InvalidPath("path vertex is not strictly inside the safety set")
        return PiecewiseLinearPath(v, [j])
    members = []
    for i in range(len(v) - 1):
        j = s.segment_member(v[i], v[i + 1])
        if j is None:
            raise InvalidPath(f"segment {i} is not contained in any member polytope")
        members.append(j)
    return PiecewiseLinearPath(v, members)


def validate_path(path: PiecewiseLinearPath, s: SafetySet) -> list[str]:
    """Problems with ``path`` (empty when valid), computed from geometry alone."""
    problems = []
    for i in range(len(path.vertices)):
        for j in path.vertex_members(i):
            if not polytope_contains(s.members[j], path.vertices[i], strict=True):
                problems.append(f"vertex {i} not strictly inside member {j}")
    return problems


def path_clearance(path: PiecewiseLinearPath, s: SafetySet) -> float:
    """Lower bound on the distance from the path to the complement of ``s``.

    Distance to the boundary is concave on a convex member, so along a
    segment it is smallest at an endpoint; the minimum over vertices (in the
    members of their adjacent segments) bounds the whole path.
    """
    if not path.members:
        path = assign_members(path.vertices, s)
    best = math.inf
    for i, x in enumerate(path.vertices):
        for j in path.vertex_members(i):
            slack = s.members[j].exact_clearance(x)
            if slack < 0:
                raise InvalidPath(f"vertex {i} lies outside member {j}")
            best = min(best, slack)
    if not best > 0:
        raise VertexOnBoundary("a path vertex lies on the safety-set boundary")
    return best


@dataclass
class BallCover:
    """Chain of safe balls along a path.

    ``handoffs[0]`` is the start, ``handoffs[-1]`` the goal and
    ``handoffs[i]`` for ``0 < i < len(balls)`` lies in ``balls[i-1]`` and
    ``balls[i]``.
    """

    balls: list
    handoffs: list
    members: list

    def to_json(self) -> dict:
        return {
            "balls": [{"center": list(b.center), "radius": b.radius} for b in self.balls],
            "handoffs": [list(map(float, h)) for h in self.handoffs],
            "members": list(self.members),
        }


def densify(path: PiecewiseLinearPath, spacing: float) -> tuple[np.ndarray, list[int]]:
    """Insert points so consecutive points are at most ``spacing`` apart."""
    v = path.vertices
    if path.n_segments == 0:
        return v.copy(), [path.members[0] if path.members else -1]
    pts = [v[0]]
    mem = [path.members[0] if path.members else -1]
    for i in range(path.n_segments):
        a, b = v[i], v[i + 1]
        seg = float(np.linalg.norm(b - a))
        if seg == 0.0:
            continue
        pieces = max(1, math.ceil(seg / spacing - 1e-9))
        j = path.members[i] if path.members else -1
        for k in range(1, pieces + 1):
            pts.append(a + (k / pieces) * (b - a))
            mem.append(j)
    return np.array(pts), mem


def build_ball_cover(path: PiecewiseLinearPath, r_star: float, x_s: Sequence[float],
                     x_t: Sequence[float], s: SafetySet | None = None) -> BallCover:
    """Balls of radius ``3 r*/4`` centred on points at most ``r*/2`` apart."""
    if not r_star > 0:
        raise PreconditionViolation("r* must be positive")
    v = path.vertices
    if not (np.allclose(v[0], x_s, rtol=0, atol=1e-12) and np.allclose(v[-1], x_t, rtol=0, atol=1e-12)):
        raise PreconditionViolation("path endpoints must equal the start and target")
    pts, mem = densify(path, r_star / 2.0)
    radius = 0.75 * r_star
    balls = [Ball(tuple(p), radius) for p in pts]
    if s is not None:
        for i, (p, j) in enumerate(zip(pts, mem)):
            if s.clearance_in(j, p) < radius * (1 - COVER_TOL):
                raise PreconditionViolation(f"cover ball {i} is not inside member {j}")
    handoffs = [np.asarray(x_s, dtype=float)] + [p for p in pts[1:-1]] + [np.asarray(x_t, dtype=float)]
    if len(pts) == 1:
        handoffs = [np.asarray(x_s, dtype=float), np.asarray(x_t, dtype=float)]
    return BallCover(balls, handoffs, mem)


def polygon_vertices(p: ConvexPolytope, bounds: tuple | None = None) -> np.ndarray:
    """Counter-clockwise vertices of a 2-D polytope, clipped to ``bounds``."""
    if p.dim != 2:
        raise DimensionMismatch("polygon_vertices needs a 2-D polytope")
    A, b = p.A, p.b
    if bounds is not None:
        lo, hi = bounds
        A = np.vstack([A, [[1, 0], [-1, 0], [0, 1], [0, -1]]])
        b = np.concatenate([b, [hi[0], -lo[0], hi[1], -lo[1]]])
    pts = []
    for i in range(len(A)):
        for j in range(i + 1, len(A)):
            m = np.array([A[i], A[j]])
            if abs(np.linalg.det(m)) < 1e-14:
                continue
            x = np.linalg.solve(m, [b[i], b[j]])
            if np.all(A @ x <= b + 1e-9 * (1 + np.abs(b))):
                pts.append(x)
    if not pts:
        return np.zeros((0, 2))
    pts = np.unique(np.round(np.array(pts), 12), axis=0)
    c = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
    return pts[order]
