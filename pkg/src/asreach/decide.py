"""Exact decision procedure for almost-sure reachability.

A system is almost-surely reachable (for bounded, open, path-connected safety
sets) iff the mode means positively span R^n, i.e. they have full rank and
``sum_i alpha_i * mean_i = 0`` for some ``alpha_i >= 1``.  Both tests run in
exact rational arithmetic.  The feasibility test is a phase-1 simplex with
Bland's rule; when it fails, the final duals give a Farkas direction ``w`` with
``mean_i . w <= 0`` for all modes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidOrdering, NotPositivelySpanning
from .model import ExpectedSystem, Smms, make_rng

SAMPLED_SAFETY_FACTOR = 0.9
CERT_TOL = 1e-12
N_PROBES = 10_000


class Verdict(str, enum.Enum):
    YES = "yes"
    NO = "no"


@dataclass(frozen=True)
class SpanCertificate:
    alpha: tuple  # Fractions, each >= 1


@dataclass(frozen=True)
class ViolatingDirection:
    w: tuple  # Fractions, not all zero


class LambdaMethod(str, enum.Enum):
    EXACT_2D = "exact_2d"
    HULL_EXACT = "hull_exact"
    SAMPLED_SUBGRADIENT = "sampled_subgradient"


@dataclass(frozen=True)
class LambdaBound:
    value: float
    method: LambdaMethod
    certified: bool


@dataclass
class DecisionResult:
    verdict: Verdict
    certificate: SpanCertificate | ViolatingDirection
    rank: int
    simplex_iterations: int = 0
    lam: LambdaBound | None = None

    @property
    def yes(self) -> bool:
        return self.verdict is Verdict.YES

    def to_json(self) -> dict:
        out: dict = {"verdict": self.verdict.value}
        if isinstance(self.certificate, SpanCertificate):
            out["alpha"] = [str(a) for a in self.certificate.alpha]
        else:
            out["witness"] = [str(x) for x in self.certificate.w]
        if self.lam is not None:
            out["lambda"] = {"value": self.lam.value, "method": self.lam.method.value,
                             "certified": self.lam.certified}
        return out


# ---------------------------------------------------------------- linear algebra

def _check_vectors(vectors: Sequence[Sequence[Fraction]], n: int | None = None) -> int:
    if not vectors:
        raise DimensionMismatch("need at least one vector")
    n = len(vectors[0]) if n is None else n
    for v in vectors:
        if len(v) != n:
            raise DimensionMismatch(f"vector of length {len(v)} in dimension {n}")
    return n


def _integer_rows(vectors) -> list[list[int]]:
    rows = []
    for v in vectors:
        fr = [Fraction(x) for x in v]
        den = reduce(math.lcm, (x.denominator for x in fr), 1)
        rows.append([int(x * den) for x in fr])
    return rows


def rank_rational(vectors: Sequence[Sequence[Fraction]], n: int | None = None) -> int:
    """Exact rank by fraction-free (Bareiss) elimination."""
    n = _check_vectors(vectors, n)
    a = _integer_rows(vectors)
    rows = len(a)
    rank = 0
    prev = 1
    for col in range(n):
        piv = next((r for r in range(rank, rows) if a[r][col] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        p = a[rank][col]
        for r in range(rank + 1, rows):
            arc = a[r][col]
            a[r] = [(p * a[r][j] - arc * a[rank][j]) // prev for j in range(n)]
        prev = p
        rank += 1
        if rank == rows:
            break
    return rank


def null_space_vector(vectors: Sequence[Sequence[Fraction]], n: int) -> tuple | None:
    """A nonzero integer vector orthogonal to every row, or None if full rank."""
    m = [[Fraction(x) for x in v] for v in vectors]
    pivots: list[int] = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][col]
        m[r] = [x / p for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    if not free:
        return None
    f = free[0]
    w = [Fraction(0)] * n
    w[f] = Fraction(1)
    for row, pc in zip(m, pivots):
        w[pc] = -row[f]
    den = reduce(math.lcm, (x.denominator for x in w), 1)
    return tuple(Fraction(int(x * den)) for x in w)


# ---------------------------------------------------------------- simplex

@dataclass
class _Phase1Result:
    feasible: bool
    x: list  # primal values of the structural variables
    y: list  # row duals
    iterations: int


def _phase1(a: list[list[Fraction]], b: list[Fraction]) -> _Phase1Result:
    """Phase-1 simplex for ``a x = b, x >= 0`` with one artificial per row.

    Bland's rule (lowest eligible index enters, lowest basic index breaks
    ratio ties) rules out cycling.
    """
    m, nv = len(a), len(a[0])
    sign = [(-1 if bi < 0 else 1) for bi in b]
    rows = [[s * x for x in row] + [Fraction(int(i == k)) for k in range(m)] + [s * bi]
            for i, (row, bi, s) in enumerate(zip(a, b, sign))]
    ncol = nv + m
    basis = list(range(nv, nv + m))
    # reduced costs for min sum(artificials); last entry is -objective
    cost = [-sum((rows[i][j] for i in range(m)), Fraction(0)) for j in range(nv)]
    cost += [Fraction(0)] * m + [-sum((rows[i][-1] for i in range(m)), Fraction(0))]
    it = 0
    while True:
        enter = next((j for j in range(ncol) if cost[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            if rows[i][enter] > 0:
                ratio = rows[i][-1] / rows[i][enter]
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        # phase 1 is bounded below by 0, so an improving column always has a pivot row
        assert best is not None
        leave = best[1]
        piv = rows[leave][enter]
        rows[leave] = [x / piv for x in rows[leave]]
        for i in range(m):
            if i != leave and rows[i][enter] != 0:
                f = rows[i][enter]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[leave])]
        f = cost[enter]
        cost = [x - f * y for x, y in zip(cost, rows[leave])]
        basis[leave] = enter
        it += 1
    x = [Fraction(0)] * nv
    for i, bv in enumerate(basis):
        if bv < nv:
            x[bv] = rows[i][-1]
    # reduced cost of artificial i is 1 - y_i (in the sign-flipped rows)
    y = [(1 - cost[nv + i]) * sign[i] for i in range(m)]
    return _Phase1Result(feasible=(cost[-1] == 0), x=x, y=y, iterations=it)


def positive_span_feasible(vectors: Sequence[Sequence[Fraction]]
                           ) -> tuple[SpanCertificate | ViolatingDirection, int]:
    """Solve ``sum alpha_i v_i = 0, alpha_i >= 1`` exactly.

    Returns the certificate and the simplex iteration count.  Writing
    ``alpha = 1 + beta`` turns the problem into ``M beta = -sum v_i``,
    ``beta >= 0``; on infeasibility the phase-1 duals ``w`` satisfy
    ``v_i . w <= 0`` for all i and ``w . sum v_i < 0``.
    """
    n = _check_vectors(vectors)
    vs = [[Fraction(x) for x in v] for v in vectors]
    gamma = len(vs)
    a = [[vs[i][j] for i in range(gamma)] for j in range(n)]
    b = [-sum((v[j] for v in vs), Fraction(0)) for j in range(n)]
    res = _phase1(a, b)
    if res.feasible:
        return SpanCertificate(tuple(1 + bi for bi in res.x)), res.iterations
    den = reduce(math.lcm, (x.denominator for x in res.y), 1)
    w = tuple(Fraction(int(x * den)) for x in res.y)
    return ViolatingDirection(w), res.iterations


def is_almost_sure_reachable(m: Smms | ExpectedSystem, *, with_lambda: bool = False,
                             lambda_method: str = "auto") -> DecisionResult:
    """Decide the positive-spanning condition for the system's mode means."""
    es = m.expected if isinstance(m, Smms) else m
    means = [list(v) for v in es.means]
    rank = rank_rational(means, es.dim)
    if rank < es.dim:
        w = null_space_vector(means, es.dim)
        return DecisionResult(Verdict.NO, ViolatingDirection(w), rank)
    cert, iters = positive_span_feasible(means)
    if isinstance(cert, ViolatingDirection):
        return DecisionResult(Verdict.NO, cert, rank, iters)
    res = DecisionResult(Verdict.YES, cert, rank, iters)
    if with_lambda:
        res.lam = compute_lambda(es, lambda_method)
    return res


# ---------------------------------------------------------------- lambda

def _support(means: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    return (dirs @ means.T).max(axis=1)


def probe_directions(n: int, count: int = N_PROBES) -> np.ndarray:
    """Quasi-uniform unit directions used to certify a lambda bound."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    import warnings

    from scipy.stats import norm, qmc

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # count need not be a power of two
        u = qmc.Sobol(d=n, scramble=True, seed=12345).random(count)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _lambda_exact_2d(means: list) -> float:
    # Drop parallel duplicates (keep the longer), sort by angle, prune
    # non-extreme points with a Graham scan around the interior origin, then
    # lambda is the smallest origin-to-edge distance of the hull.
    pts: list = []
    for v in means:
        if v[0] == 0 and v[1] == 0:
            continue
        for k, u in enumerate(pts):
            if u[0] * v[1] - u[1] * v[0] == 0 and u[0] * v[0] + u[1] * v[1] > 0:
                if v[0] ** 2 + v[1] ** 2 > u[0] ** 2 + u[1] ** 2:
                    pts[k] = v
                break
        else:
            pts.append(v)
    pts.sort(key=lambda p: math.atan2(p[1], p[0]))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    hull = list(pts)
    changed = True
    while changed and len(hull) > 3:
        changed = False
        for i in range(len(hull)):
            p, q, r = hull[i - 1], hull[i], hull[(i + 1) % len(hull)]
            if cross(p, q, r) <= 0:
                del hull[i]
                changed = True
                break
    best = None
    for i in range(len(hull)):
        p, q = hull[i - 1], hull[i]
        c = p[0] * q[1] - p[1] * q[0]
        d2 = (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2
        dist2 = c * c / d2
        if best is None or dist2 < best:
            best = dist2
    return math.sqrt(best)


def _cofactor_normal(diffs: list) -> list:
    """Vector orthogonal to the n-1 given vectors (generalized cross product)."""
    n = len(diffs) + 1
    normal = []
    for j in range(n):
        minor = [[row[k] for k in range(n) if k != j] for row in diffs]
        normal.append((-1) ** j * _det(minor))
    return normal


def _det(mat: list) -> int:
    if not mat:
        return 1
    if len(mat) == 1:
        return mat[0][0]
    if len(mat) == 2:
        return mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0]
    return sum((-1) ** j * mat[0][j] * _det([row[:j] + row[j + 1:] for row in mat[1:]])
               for j in range(len(mat)))


def _lambda_hull_exact(means: list, n: int) -> float:
    """Smallest origin-to-facet distance over all supporting hyperplanes."""
    from itertools import combinations

    scale = reduce(math.lcm, (Fraction(x).denominator for v in means for x in v), 1)
    rows = [[int(Fraction(x) * scale) for x in v] for v in means]
    if n == 1:
        return min(max(r[0] for r in rows), max(-r[0] for r in rows)) / scale
    uniq = sorted(set(map(tuple, rows)))
    best = None
    for combo in combinations(uniq, n):
        base = combo[0]
        diffs = [[c[k] - base[k] for k in range(n)] for c in combo[1:]]
        normal = _cofactor_normal(diffs)
        if not any(normal):
            continue
        off = sum(a * b for a, b in zip(normal, base))
        if off < 0:
            normal = [-x for x in normal]
            off = -off
        if off == 0:
            continue
        if all(sum(a * b for a, b in zip(normal, p)) <= off for p in uniq):
            dist2 = Fraction(off * off, sum(x * x for x in normal))
            if best is None or dist2 < best:
                best = dist2
    if best is None:
        raise NotPositivelySpanning("no supporting facet found")
    return math.sqrt(best) / scale


def _lambda_sampled(means: np.ndarray, rng: np.random.Generator,
                    starts: int = 32, iters: int = 3000) -> float:
    n = means.shape[1]
    v = rng.standard_normal((starts, n))
    v = np.vstack([v, -means / np.maximum(np.linalg.norm(means, axis=1, keepdims=True), 1e-300)])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    scale = float(np.linalg.norm(means, axis=1).max())
    best = float(_support(means, v).min())
    rows = np.arange(len(v))
    for t in range(iters):
        vals = v @ means.T
        j = vals.argmax(axis=1)
        best = min(best, float(vals[rows, j].min()))
        g = means[j]
        g = g - (g * v).sum(axis=1, keepdims=True) * v
        v = v - (0.5 / scale / math.sqrt(t + 1.0)) * g
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    return min(best, float(_support(means, v).min()))


def compute_lambda(es: ExpectedSystem | Smms, method: str = "auto",
                   rng: np.random.Generator | None = None) -> LambdaBound:
    """Lower bound on ``inf_{|v|=1} max_i v . mean_i``.

    ``auto`` picks the exact 2-D method for n = 2, facet enumeration for
    n <= 3 and the sampled subgradient method otherwise.
    """
    if isinstance(es, Smms):
        es = es.expected
    n = es.dim
    means_f = es.means_array
    means = [list(v) for v in es.means]
    probes = probe_directions(n)
    probe_min = float(_support(means_f, probes).min())
    if probe_min <= 0:
        raise NotPositivelySpanning(f"support function is {probe_min:g} <= 0 at a probe direction")

    if method == "auto":
        method = "exact" if n <= 3 else "sampled"
    if method == "exact":
        if n == 2:
            value, kind = _lambda_exact_2d(means), LambdaMethod.EXACT_2D
        elif n <= 3:
            value, kind = _lambda_hull_exact(means, n), LambdaMethod.HULL_EXACT
        else:
            raise ValueError("exact lambda is implemented for n <= 3 only")
        certified = probe_min >= value - CERT_TOL
        if not certified:  # pragma: no cover - would indicate a bug in the exact path
            raise NotPositivelySpanning("exact lambda failed its probe certification")
        return LambdaBound(value, kind, True)
    if method != "sampled":
        raise ValueError(f"unknown lambda method {method!r}")
    rng = make_rng(0) if rng is None else rng
    value = SAMPLED_SAFETY_FACTOR * _lambda_sampled(means_f, rng)
    if probe_min < value - CERT_TOL:
        value = SAMPLED_SAFETY_FACTOR * probe_min
    return LambdaBound(value, LambdaMethod.SAMPLED_SUBGRADIENT, False)


# ---------------------------------------------------------------- 1-D necessity

def necessity_bound(b: float, x_s: float, x_t: float, eps: float) -> float:
    """Upper bound on the probability of reaching ``(x_t - eps, x_t + eps)``
    from ``x_s`` inside ``(0, b)`` when no mode has negative mean."""
    if not (0 < x_t < x_t + eps < x_s < b):
        raise InvalidOrdering("need 0 < x_t < x_t + eps < x_s < b")
    return (b - x_s) / (b - (x_t + eps))
