"""Seeded Monte Carlo harness, trajectory auditing and the 1-D necessity trial."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .control import (Ball, ControllerConfig, Outcome, Trajectory, prepare_system, reach_1d,
                      reach_in_ball)
from .decide import necessity_bound
from .errors import PreconditionViolation
from .geometry import PiecewiseLinearPath, SafetySet, assign_members, polytope_bounds
from .model import Smms, derive_rng, derive_seed, make_rng
from .plan import PlannerConfig, reach_in_pc_set, rrt_plan

STATE_TOL = 1e-9
DWELL_RTOL = 1e-9
ARGMAX_TOL = 1e-12


@dataclass
class Scenario:
    system: Smms
    x_s: tuple
    x_t: tuple
    eps: float
    safety: SafetySet | None = None
    ball: Ball | None = None
    controller: ControllerConfig | None = None
    planner: PlannerConfig | None = None
    path: list | None = None
    name: str = ""

    def __post_init__(self):
        self.x_s = tuple(float(v) for v in self.x_s)
        self.x_t = tuple(float(v) for v in self.x_t)
        n = self.system.dim
        if len(self.x_s) != n or len(self.x_t) != n:
            raise PreconditionViolation("start/target dimension differs from the system")
        if self.safety is None and self.ball is None:
            raise PreconditionViolation("a scenario needs a safety set or a ball")
        if self.controller is None:
            self.controller = ControllerConfig(eps=self.eps)
        else:
            self.controller.eps = self.eps
        for name, x in (("start", self.x_s), ("target", self.x_t)):
            if not self.inside(x):
                raise PreconditionViolation(f"{name} is not strictly inside the safety region")

    @property
    def kind(self) -> str:
        if self.ball is not None:
            return "ball"
        if self.system.dim == 1 and len(self.safety.members) == 1:
            return "interval"
        return "pc_set"

    def interval(self) -> tuple[float, float]:
        box = polytope_bounds(self.safety.members[0])
        if box is None:
            raise PreconditionViolation("a 1-D scenario needs a bounded interval")
        return float(box[0][0]), float(box[1][0])

    def inside(self, x: Sequence[float]) -> bool:
        if self.ball is not None:
            return self.ball.contains(x)
        return self.safety.contains(x)


@dataclass
class BatchStats:
    runs: int
    reached: int
    failures: int
    safety_violations: int
    budget_exhausted: int
    steps: dict
    total_time: dict
    seeds: list

    def to_json(self) -> dict:
        return {
            "runs": self.runs, "reached": self.reached, "failures": self.failures,
            "safety_violations": self.safety_violations,
            "budget_exhausted": self.budget_exhausted,
            "steps": self.steps, "total_time": self.total_time, "seeds": self.seeds,
        }


@dataclass
class BatchResult:
    stats: BatchStats
    trajectories: list
    path: PiecewiseLinearPath | None = None


def _summary(values: Sequence[float]) -> dict:
    a = np.asarray(values, dtype=float)
    return {"min": float(a.min()), "median": float(np.median(a)), "max": float(a.max())}


def scenario_path(sc: Scenario) -> PiecewiseLinearPath | None:
    """The fixed path of a polytope scenario, or an RRT path from its planner seed."""
    if sc.kind != "pc_set":
        return None
    if sc.path is not None:
        return assign_members(sc.path, sc.safety)
    planner = sc.planner or PlannerConfig()
    return rrt_plan(sc.safety, sc.x_s, sc.x_t, planner, make_rng(planner.seed))


def run_scenario(sc: Scenario, rng: np.random.Generator, consts=None,
                 path: PiecewiseLinearPath | None = None) -> Trajectory:
    cfg = sc.controller
    if sc.kind == "ball":
        return reach_in_ball(sc.system, sc.ball, sc.x_s, sc.x_t, cfg, rng, consts=consts)
    if sc.kind == "interval":
        return reach_1d(sc.system, sc.interval(), sc.x_s[0], sc.x_t[0], cfg, rng)
    return reach_in_pc_set(sc.system, sc.safety, sc.x_s, sc.x_t, cfg, rng,
                           path=path if path is not None else scenario_path(sc), consts=consts)


def run_monte_carlo(sc: Scenario, runs: int, base_seed: int, *,
                    keep_trajectories: bool = True, verify: bool = True,
                    on_trajectory: Callable[[int, Trajectory], None] | None = None) -> BatchResult:
    """Run ``runs`` independent controlled trajectories of ``sc``.

    Run ``i`` uses the stream :func:`~asreach.model.derive_rng` ``(base_seed, i)``
    so the batch is bit-reproducible.  The decision procedure runs first and
    raises :class:`~asreach.errors.NotReachable` for a NO verdict.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    consts = None
    if sc.kind != "interval":
        consts = prepare_system(sc.system, sc.controller.lambda_method)
    path = scenario_path(sc)
    reached = violations = exhausted = 0
    steps, times, seeds, kept = [], [], [], []
    for i in range(runs):
        seeds.append(derive_seed(base_seed, i))
        traj = run_scenario(sc, derive_rng(base_seed, i), consts, path)
        bad = traj.outcome is Outcome.SAFETY_VIOLATION
        if verify:
            report = verify_trajectory(traj, sc)
            bad = bad or any(v.kind in _SAFETY_KINDS for v in report.violations)
        reached += traj.reached
        violations += bad
        exhausted += traj.outcome is Outcome.STEP_BUDGET_EXHAUSTED
        steps.append(traj.n_steps)
        times.append(float(traj.t[-1]))
        if on_trajectory is not None:
            on_trajectory(i, traj)
        if keep_trajectories:
            kept.append(traj)
    stats = BatchStats(runs=runs, reached=reached, failures=runs - reached,
                       safety_violations=violations, budget_exhausted=exhausted,
                       steps=_summary(steps), total_time=_summary(times), seeds=seeds)
    return BatchResult(stats, kept, path)


# ---------------------------------------------------------------- auditing

_SAFETY_KINDS = {"state_safety", "segment_safety", "ball_exit"}


@dataclass(frozen=True)
class Violation:
    kind: str
    step: int
    detail: str = ""


@dataclass
class VerificationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(1 for v in self.violations if v.kind == kind)


def _region_inside(sc: Scenario, pts: np.ndarray) -> np.ndarray:
    """(members, K) boolean array: point strictly inside each member, up to tolerance."""
    if sc.ball is not None:
        c = np.asarray(sc.ball.center)
        d = np.linalg.norm(pts - c, axis=1)
        return (d < sc.ball.radius * (1 + STATE_TOL))[None, :]
    rows = []
    for p in sc.safety.members:
        sl = (p.b[None, :] - pts @ p.A.T) / p.norms[None, :]
        rows.append(sl.min(axis=1) > -STATE_TOL)
    return np.array(rows)


def verify_trajectory(t: Trajectory, sc: Scenario) -> VerificationReport:
    """Re-check a trajectory from its recorded data alone.

    Checks the state recurrence, membership of every state and segment in
    the safety region, each recorded leg's ball and mode-choice rules and the
    terminal precision.  Never raises; problems are returned.
    """
    out: list[Violation] = []
    try:
        _verify(t, sc, out)
    except Exception as exc:  # malformed input is itself a finding
        out.append(Violation("malformed", -1, repr(exc)))
    return VerificationReport(out)


def _verify(t: Trajectory, sc: Scenario, out: list) -> None:
    y, d, rate = t.y, t.dwell, t.rate
    K = len(d)
    if t.t[0] != 0.0:
        out.append(Violation("replay", 0, "t_0 != 0"))
    if K:
        bad_t = np.nonzero(t.t[1:] != t.t[:-1] + d)[0]
        for k in bad_t:
            out.append(Violation("replay", int(k), "time recurrence"))
        nxt = y[:-1] + d[:, None] * rate
        for k in np.nonzero(np.any(nxt != y[1:], axis=1))[0]:
            out.append(Violation("replay", int(k), "state recurrence"))
        for k in np.nonzero(d < 0)[0]:
            out.append(Violation("dwell", int(k), "negative dwell"))

    inside = _region_inside(sc, y)
    for k in np.nonzero(~inside.any(axis=0))[0]:
        out.append(Violation("state_safety", int(k), f"state {y[k].tolist()} outside the safety region"))
    if K:
        seg_ok = (inside[:, :-1] & inside[:, 1:]).any(axis=0)
        for k in np.nonzero(~seg_ok)[0]:
            out.append(Violation("segment_safety", int(k), "no single convex member holds the segment"))

    means = sc.system.means_array
    support = sc.system.support
    step_len = np.linalg.norm(np.diff(y, axis=0), axis=1) if K else np.zeros(0)
    for k in np.nonzero(step_len > d * support * (1 + DWELL_RTOL) + 1e-300)[0]:
        out.append(Violation("displacement", int(k), "step longer than dwell * L"))

    for li, leg in enumerate(t.legs):
        ks = np.nonzero(t.leg == li)[0]
        if not len(ks):
            continue
        c = np.asarray(leg.center)
        if leg.kind == "center":
            z = y[ks] - c
            dist2 = (z * z).sum(axis=1)
            for k in ks[np.sqrt(dist2) >= leg.radius * (1 + STATE_TOL)]:
                out.append(Violation("ball_exit", int(k), f"left leg ball {li}"))
            after = y[ks + 1] - c
            for k in ks[np.linalg.norm(after, axis=1) >= leg.radius * (1 + STATE_TOL)]:
                out.append(Violation("ball_exit", int(k) + 1, f"left leg ball {li}"))
            scores = -z @ means.T
            chosen = scores[np.arange(len(ks)), t.mode[ks]]
            tol = ARGMAX_TOL * (1.0 + np.abs(scores).max(axis=1))
            for k in ks[chosen < scores.max(axis=1) - tol]:
                out.append(Violation("mode_choice", int(k), "mode is not an argmax"))
            expect = leg.delta * (leg.radius ** 2 - dist2)
            for k in ks[np.abs(d[ks] - expect) > DWELL_RTOL * (leg.radius ** 2) * leg.delta]:
                out.append(Violation("dwell", int(k), "dwell differs from delta (r^2 - |y|^2)"))
        elif leg.kind == "1d":
            for k in ks[t.mode[ks] != leg.mode]:
                out.append(Violation("mode_choice", int(k), "1-d leg switched mode"))
            jump = np.abs(y[ks + 1, 0] - y[ks, 0])
            for k in ks[jump > leg.delta * leg.radius * (1 + DWELL_RTOL)]:
                out.append(Violation("overshoot", int(k), "1-d step larger than delta (b - a)"))

    if t.outcome is Outcome.REACHED and t.target is not None and t.eps is not None:
        if np.linalg.norm(y[-1] - np.asarray(t.target)) > t.eps * (1 + 1e-12):
            out.append(Violation("terminal", K, "final state is not within eps of the target"))


# ---------------------------------------------------------------- necessity

@dataclass
class NecessityReport:
    runs: int
    reached: int
    frequency: float
    bound: float
    slack: float
    passed: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def necessity_trial(system: Smms, b: float, x_s: float, x_t: float, eps: float, runs: int,
                    budget: int = 10**5, rng: np.random.Generator | None = None,
                    dwell_fraction: float = 0.5) -> NecessityReport:
    """Empirical reach frequency of a best-effort policy against the necessity bound.

    The system has no negative-mean mode, so every causal policy reaches
    ``(x_t - eps, x_t + eps)`` from ``x_s`` with probability at most the
    bound.  The policy tried here always uses the lowest-mean mode with the
    dwell kept small enough that the state cannot leave ``(0, b)``.  All runs
    advance together, vectorized, from one generator.
    """
    if system.dim != 1:
        raise PreconditionViolation("necessity_trial needs a one-dimensional system")
    means = system.means_array[:, 0]
    if np.any(means < 0):
        raise PreconditionViolation("every mode mean must be nonnegative")
    if runs < 1 or budget < 1:
        raise PreconditionViolation("runs and budget must be positive")
    try:
        bound = necessity_bound(b, x_s, x_t, eps)
    except Exception as exc:
        raise PreconditionViolation(str(exc)) from exc
    rng = make_rng(0) if rng is None else rng
    mi = int(np.argmin(means))
    mode = system.modes[mi]
    rho = mode.support_radius()
    y = np.full(runs, float(x_s))
    active = np.arange(runs)
    hit = np.zeros(runs, dtype=bool)
    for _ in range(budget):
        if not len(active):
            break
        ya = y[active]
        d = dwell_fraction * np.minimum(ya, b - ya) / rho
        ya = ya + d * mode.sample_block(rng, len(active))[:, 0]
        y[active] = ya
        now = np.abs(ya - x_t) < eps
        hit[active[now]] = True
        active = active[~now]
    reached = int(hit.sum())
    freq = reached / runs
    slack = 3.0 * math.sqrt(bound * (1.0 - bound) / runs)
    return NecessityReport(runs, reached, freq, bound, slack, freq <= bound + slack)
