"""Feedback policies that steer a stochastic multi-mode system.

``reach_center`` drives the state into the ``eps``-ball around the center of a
safe ball, ``reach_in_ball`` chains center-reaching legs along the segment to
an arbitrary in-ball target and ``reach_1d`` is the multiplicative policy for
one-dimensional systems on an interval.  All arithmetic is binary64 and every
decision instant is recorded in a :class:`Trajectory`.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .decide import DecisionResult, LambdaBound, compute_lambda, is_almost_sure_reachable
from .errors import (DegenerateGeometry, NotReachable, PreconditionViolation,
                     SafetyViolationDetected, StepBudgetExhausted)
from .model import ModeDistribution, Smms, make_rng

BALL_TOL = 1e-9
SUB_PRECISION = 0.99
SAMPLE_BLOCK = 512


class Outcome(str, enum.Enum):
    REACHED = "reached"
    STEP_BUDGET_EXHAUSTED = "step_budget_exhausted"
    SAFETY_VIOLATION = "safety_violation_detected"


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(x) for x in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def contains(self, x: Sequence[float]) -> bool:
        return _dist(x, self.center) < self.radius


@dataclass
class ControllerConfig:
    eps: float
    delta_override: float | None = None
    max_steps: int = 10**6
    delta_safety_factor: float = 0.5
    rng_seed: int = 0
    lambda_method: str = "auto"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if not 0 < self.delta_safety_factor <= 1:
            raise ValueError("delta_safety_factor must lie in (0, 1]")
        if self.delta_override is not None and not self.delta_override > 0:
            raise ValueError("delta_override must be positive")


@dataclass(frozen=True)
class SystemConstants:
    """Everything the policies need from the decision procedure."""

    decision: DecisionResult
    means: tuple  # tuple of float tuples
    support: float
    lam: LambdaBound


def prepare_system(m: Smms, lambda_method: str = "auto") -> SystemConstants:
    """Run the decision procedure and compute ``L`` and a lambda bound.

    Raises :class:`NotReachable` when the means do not positively span.
    """
    dec = is_almost_sure_reachable(m)
    if not dec.yes:
        raise NotReachable(dec.certificate.w)
    lam = compute_lambda(m.expected, lambda_method)
    dec.lam = lam
    means = tuple(tuple(float(x) for x in row) for row in m.means_array)
    return SystemConstants(dec, means, m.support, lam)


def center_delta(support: float, lam: float, r: float, eps: float, factor: float = 0.5) -> float:
    L = support
    return factor * min(1.0 / L, 1.0 / (2.0 * L * r), eps * lam / (r * r * L * L),
                        eps * lam / (4.0 * r * L + 2.0 * eps * lam))


def delta_1d(mean_pos: float, eps: float, length: float, factor: float = 0.5) -> float:
    """Step constant of the multiplicative 1-D policy (unit-support units)."""
    return factor * min(mean_pos / 2.0, eps / length)


@dataclass(frozen=True)
class Leg:
    kind: str  # "center" or "1d"
    center: tuple
    radius: float
    eps: float
    delta: float
    start: int  # index of the first step of this leg
    mode: int | None = None  # fixed mode of a 1-d leg


@dataclass
class Trajectory:
    """Decision-time record of one controlled run.

    ``y[k]`` is the state at time ``t[k]``; step ``k`` applies ``mode[k]`` for
    ``dwell[k]`` with sampled rate ``rate[k]`` so that
    ``y[k+1] = y[k] + dwell[k] * rate[k]``.
    """

    t: np.ndarray
    y: np.ndarray
    mode: np.ndarray
    dwell: np.ndarray
    rate: np.ndarray
    leg: np.ndarray
    legs: list = field(default_factory=list)
    outcome: Outcome = Outcome.REACHED
    target: tuple | None = None
    eps: float | None = None
    message: str = ""

    @property
    def n_steps(self) -> int:
        return len(self.dwell)

    @property
    def dim(self) -> int:
        return self.y.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.y[-1]

    @property
    def reached(self) -> bool:
        return self.outcome is Outcome.REACHED

    def csv_header(self) -> list[str]:
        n = self.dim
        return (["k", "t"] + [f"y_{j + 1}" for j in range(n)] + ["mode", "dwell"]
                + [f"rate_{j + 1}" for j in range(n)] + ["leg"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        n = self.dim
        for k in range(self.n_steps + 1):
            row = [k, repr(float(self.t[k]))] + [repr(float(x)) for x in self.y[k]]
            if k < self.n_steps:
                row += [int(self.mode[k]), repr(float(self.dwell[k]))]
                row += [repr(float(x)) for x in self.rate[k]] + [int(self.leg[k])]
            else:
                row += [""] * (n + 3)
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        n = sum(1 for h in header if h.startswith("y_"))
        t = np.array([float(r[1]) for r in body])
        y = np.array([[float(x) for x in r[2:2 + n]] for r in body]).reshape(len(body), n)
        steps = body[:-1]
        mode = np.array([int(r[2 + n]) for r in steps], dtype=int)
        dwell = np.array([float(r[3 + n]) for r in steps])
        rate = np.array([[float(x) for x in r[4 + n:4 + 2 * n]] for r in steps]).reshape(len(steps), n)
        leg = np.array([int(r[4 + 2 * n]) for r in steps], dtype=int)
        return cls(t, y, mode, dwell, rate, leg, outcome=Outcome.REACHED)

    def to_json(self, config: ControllerConfig | None = None) -> dict:
        out = {
            "outcome": self.outcome.value,
            "message": self.message,
            "target": list(self.target) if self.target is not None else None,
            "eps": self.eps,
            "t": self.t.tolist(),
            "y": self.y.tolist(),
            "mode": self.mode.tolist(),
            "dwell": self.dwell.tolist(),
            "rate": self.rate.tolist(),
            "leg": self.leg.tolist(),
            "legs": [asdict(leg) for leg in self.legs],
        }
        if config is not None:
            out["config"] = asdict(config)
        return out

    def to_json_str(self, config: ControllerConfig | None = None) -> str:
        return json.dumps(self.to_json(config), sort_keys=True)


def _dist(a: Sequence[float], b: Sequence[float]) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


class _ModeStreams:
    """Per-mode buffers of pre-drawn rates, refilled from one generator.

    Every rate is drawn before the decision that consumes it is made, and
    independently of it, so the draws stay i.i.d. per mode.
    """

    def __init__(self, modes: Sequence[ModeDistribution], rng: np.random.Generator,
                 block: int = SAMPLE_BLOCK):
        self.modes = modes
        self.rng = rng
        self.block = block
        self.buf: list[list] = [[] for _ in modes]
        self.pos = [0] * len(modes)

    def draw(self, i: int) -> list:
        if self.pos[i] >= len(self.buf[i]):
            self.buf[i] = self.modes[i].sample_block(self.rng, self.block).tolist()
            self.pos[i] = 0
        v = self.buf[i][self.pos[i]]
        self.pos[i] += 1
        return v


class _Recorder:
    def __init__(self, x0: Sequence[float], m: Smms, rng: np.random.Generator, budget: int):
        self.t = [0.0]
        self.y = [[float(x) for x in x0]]
        self.mode: list[int] = []
        self.dwell: list[float] = []
        self.rate: list[list] = []
        self.leg: list[int] = []
        self.legs: list[Leg] = []
        self.streams = _ModeStreams(m.modes, rng)
        self.budget = budget

    @property
    def state(self) -> list:
        return self.y[-1]

    def open_leg(self, leg: Leg) -> int:
        self.legs.append(leg)
        return len(self.legs) - 1

    def finish(self, outcome: Outcome, target=None, eps=None, message="") -> Trajectory:
        n = len(self.y[0])
        return Trajectory(
            t=np.array(self.t), y=np.array(self.y).reshape(len(self.y), n),
            mode=np.array(self.mode, dtype=int), dwell=np.array(self.dwell),
            rate=np.array(self.rate).reshape(len(self.rate), n),
            leg=np.array(self.leg, dtype=int), legs=self.legs, outcome=outcome,
            target=None if target is None else tuple(float(x) for x in target),
            eps=eps, message=message)


def _run_guarded(rec: _Recorder, body, target, eps) -> Trajectory:
    try:
        body()
    except StepBudgetExhausted as exc:
        return rec.finish(Outcome.STEP_BUDGET_EXHAUSTED, target, eps, str(exc))
    except SafetyViolationDetected as exc:
        return rec.finish(Outcome.SAFETY_VIOLATION, target, eps, str(exc))
    return rec.finish(Outcome.REACHED, target, eps)


def _center_leg(rec: _Recorder, consts: SystemConstants, center: Sequence[float], r: float,
                eps: float, cfg: ControllerConfig) -> None:
    """Run the center-reaching policy from the recorder's current state."""
    eps = min(eps, r)
    if cfg.delta_override is not None:
        delta = cfg.delta_override
    else:
        delta = center_delta(consts.support, consts.lam.value, r, eps, cfg.delta_safety_factor)
    c = [float(x) for x in center]
    leg_id = rec.open_leg(Leg("center", tuple(c), r, eps, delta, len(rec.dwell)))
    means = consts.means
    r2 = r * r
    eps2 = eps * eps
    limit2 = (r * (1.0 + BALL_TOL)) ** 2
    y = rec.state
    t = rec.t[-1]
    draw = rec.streams.draw
    Y, T, M, D, R, G = rec.y, rec.t, rec.mode, rec.dwell, rec.rate, rec.leg
    while True:
        z = [a - b for a, b in zip(y, c)]
        d2 = sum(v * v for v in z)
        if d2 <= eps2:
            return
        if d2 >= limit2:
            raise SafetyViolationDetected(
                f"state left B({c}, {r}) at step {len(D)}: distance {math.sqrt(d2)!r}")
        if rec.budget <= 0:
            raise StepBudgetExhausted(f"step budget exhausted after {len(D)} steps")
        best, bi = -math.inf, 0
        for i, mu in enumerate(means):
            s = -sum(p * q for p, q in zip(mu, z))
            if s > best:
                best, bi = s, i
        d = delta * (r2 - d2)
        rate = draw(bi)
        y = [a + d * b for a, b in zip(y, rate)]
        t = t + d
        Y.append(y)
        T.append(t)
        M.append(bi)
        D.append(d)
        R.append(rate)
        G.append(leg_id)
        rec.budget -= 1


def _check_center_pre(consts_or_none, m: Smms, cfg: ControllerConfig) -> SystemConstants:
    if consts_or_none is not None:
        return consts_or_none
    try:
        return prepare_system(m, cfg.lambda_method)
    except NotReachable:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        raise PreconditionViolation(str(exc)) from exc


def _rng_for(cfg: ControllerConfig, rng):
    return make_rng(cfg.rng_seed) if rng is None else rng


def step(y: Sequence[float], mode: ModeDistribution, dwell: float,
         rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Advance the plant by one decision: returns ``(new_state, sampled_rate)``."""
    if dwell < 0:
        raise ValueError("dwell must be nonnegative")
    rate = mode.sample_block(rng, 1)[0]
    return np.asarray(y, dtype=float) + dwell * rate, rate


def reach_center(m: Smms, ball: Ball, x_s: Sequence[float], cfg: ControllerConfig,
                 rng: np.random.Generator | None = None, *,
                 consts: SystemConstants | None = None) -> Trajectory:
    """Steer from ``x_s`` into ``B(ball.center, eps)`` without leaving ``ball``."""
    consts = _check_center_pre(consts, m, cfg)
    if not ball.contains(x_s):
        raise PreconditionViolation("start point is not strictly inside the ball")
    rec = _Recorder(x_s, m, _rng_for(cfg, rng), cfg.max_steps)
    eps = min(cfg.eps, ball.radius)
    return _run_guarded(rec, lambda: _center_leg(rec, consts, ball.center, ball.radius, eps, cfg),
                        ball.center, eps)


def waypoint_plan(ball: Ball, x_s: Sequence[float], x_t: Sequence[float]) -> tuple[float, int]:
    """Half-clearance ``r~`` and waypoint count ``N`` for an in-ball transfer."""
    r = ball.radius
    rt = 0.5 * min(r - _dist(x_s, ball.center), r - _dist(x_t, ball.center))
    if not rt > 0:
        raise DegenerateGeometry("start or target is not strictly inside the ball")
    n = math.floor(_dist(x_t, x_s) / rt) + 1
    return rt, n


def _ball_legs(rec: _Recorder, consts: SystemConstants, ball: Ball, x_t: Sequence[float],
               eps: float, cfg: ControllerConfig) -> None:
    x_s = list(rec.state)
    if _dist(x_s, x_t) <= eps:
        return
    rt, n = waypoint_plan(ball, x_s, x_t)
    sub_eps = SUB_PRECISION * min(eps, rt)
    for k in range(1, n + 1):
        if _dist(rec.state, x_t) <= eps:
            return
        u = [a + (k / n) * (b - a) for a, b in zip(x_s, x_t)]
        # B(u, 2 r~) must sit inside the outer ball
        if _dist(u, ball.center) + 2 * rt > ball.radius * (1 + 1e-12):
            raise DegenerateGeometry("waypoint ball escapes the outer ball")
        _center_leg(rec, consts, u, 2 * rt, sub_eps, cfg)


def reach_in_ball(m: Smms, ball: Ball, x_s: Sequence[float], x_t: Sequence[float],
                  cfg: ControllerConfig, rng: np.random.Generator | None = None, *,
                  consts: SystemConstants | None = None) -> Trajectory:
    """Steer from ``x_s`` to within ``eps`` of ``x_t`` inside ``ball``."""
    consts = _check_center_pre(consts, m, cfg)
    if not ball.contains(x_s) or not ball.contains(x_t):
        waypoint_plan(ball, x_s, x_t)  # raises DegenerateGeometry
    rec = _Recorder(x_s, m, _rng_for(cfg, rng), cfg.max_steps)
    return _run_guarded(rec, lambda: _ball_legs(rec, consts, ball, x_t, cfg.eps, cfg),
                        x_t, cfg.eps)


def _interval_leg(rec: _Recorder, m: Smms, a: float, b: float, x_t: float,
                  eps: float, cfg: ControllerConfig) -> None:
    x_s = rec.state[0]
    if abs(x_s - x_t) <= eps:
        return
    up = x_t > x_s
    sgn = 1.0 if up else -1.0
    means = [sgn * float(row[0]) for row in m.means_array]
    mi = max(range(len(means)), key=lambda i: (means[i], -i))
    if not means[mi] > 0:
        raise PreconditionViolation(
            f"no mode with {'positive' if up else 'negative'} mean for this transfer")
    # work in coordinates where the transfer moves away from 0 toward b'
    length = b - a
    origin = a if up else b
    tgt = sgn * (x_t - origin)
    rho = max(m.modes[mi].support_radius(), 1.0)
    eps_t = min(eps, length - tgt)
    if cfg.delta_override is not None:
        delta = cfg.delta_override
    else:
        delta = delta_1d(means[mi] / rho, eps_t, length, cfg.delta_safety_factor)
    leg_id = rec.open_leg(Leg("1d", (float(x_t),), length, eps, delta, len(rec.dwell), mi))
    y = x_s
    t = rec.t[-1]
    draw = rec.streams.draw
    while abs(y - x_t) > eps:
        w = sgn * (y - origin)
        if not 0.0 < w < length:
            raise SafetyViolationDetected(f"state {y!r} left ({a}, {b}) at step {len(rec.dwell)}")
        if rec.budget <= 0:
            raise StepBudgetExhausted(f"step budget exhausted after {len(rec.dwell)} steps")
        d = delta * w / rho
        rate = draw(mi)
        y = y + d * rate[0]
        t = t + d
        rec.y.append([y])
        rec.t.append(t)
        rec.mode.append(mi)
        rec.dwell.append(d)
        rec.rate.append(rate)
        rec.leg.append(leg_id)
        rec.budget -= 1


def reach_1d(m: Smms, interval: tuple[float, float], x_s: float, x_t: float,
             cfg: ControllerConfig, rng: np.random.Generator | None = None) -> Trajectory:
    """Multiplicative-dwell policy on ``(a, b)`` for a one-dimensional system."""
    if m.dim != 1:
        raise PreconditionViolation("reach_1d needs a one-dimensional system")
    a, b = (float(v) for v in interval)
    x_s, x_t = float(x_s), float(x_t)
    if not (a < x_s < b and a < x_t < b):
        raise PreconditionViolation("start and target must lie strictly inside the interval")
    rec = _Recorder([x_s], m, _rng_for(cfg, rng), cfg.max_steps)
    if abs(x_s - x_t) > cfg.eps:
        # surface a missing-mode precondition before any stepping
        sgn = 1.0 if x_t > x_s else -1.0
        if not any(sgn * float(row[0]) > 0 for row in m.means_array):
            raise PreconditionViolation(
                f"no mode with {'positive' if sgn > 0 else 'negative'} mean for this transfer")
    return _run_guarded(rec, lambda: _interval_leg(rec, m, a, b, x_t, cfg.eps, cfg),
                        (x_t,), cfg.eps)
