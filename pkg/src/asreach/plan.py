"""Path finding and the top-level reach-in-a-safety-set orchestration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .control import (Ball, ControllerConfig, SystemConstants, Trajectory, _Recorder,
                      _ball_legs, _run_guarded, prepare_system)
from .errors import PlanningBudgetExhausted, PreconditionViolation
from .geometry import (PiecewiseLinearPath, SafetySet, assign_members, build_ball_cover,
                       path_clearance)
from .model import Smms, make_rng


@dataclass
class PlannerConfig:
    max_samples: int = 5000
    goal_bias: float = 0.05
    step_fraction: float = 0.1
    connect_radius: float | None = None
    min_clearance: float = 0.0
    shortcut: bool = True
    bounds: tuple | None = None  # (lo, hi); required for unbounded safety sets
    seed: int = 0


def _edge_member(s: SafetySet, a, b, need_a: float, need_b: float) -> int | None:
    return s.segment_member(a, b, (need_a, need_b))


def rrt_plan(s: SafetySet, x_s: Sequence[float], x_t: Sequence[float],
             cfg: PlannerConfig | None = None,
             rng: np.random.Generator | None = None) -> PiecewiseLinearPath:
    """Single-tree RRT with goal bias; segments are checked member by member.

    A segment is accepted when one convex member strictly contains both of
    its endpoints, which makes the check exact.  Intermediate vertices must
    also sit at least ``min_clearance`` inside that member.
    """
    cfg = cfg or PlannerConfig()
    rng = make_rng(cfg.seed) if rng is None else rng
    x_s = np.asarray(x_s, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    if not (s.contains(x_s) and s.contains(x_t)):
        raise PreconditionViolation("start and target must be strictly inside the safety set")
    need = cfg.min_clearance

    if _edge_member(s, x_s, x_t, 0.0, 0.0) is not None:
        return assign_members([x_s, x_t], s)

    if cfg.bounds is not None:
        lo, hi = (np.asarray(v, dtype=float) for v in cfg.bounds)
    else:
        box = s.bounds
        if box is None:
            raise PreconditionViolation("unbounded safety set: planner bounds are required")
        lo, hi = box
    step_len = cfg.step_fraction * float(np.linalg.norm(hi - lo))
    connect = cfg.connect_radius if cfg.connect_radius is not None else step_len

    nodes = [x_s]
    parent = [-1]
    arr = np.empty((cfg.max_samples + 1, len(x_s)))
    arr[0] = x_s
    goal_node = None
    for _ in range(cfg.max_samples):
        q = x_t if rng.random() < cfg.goal_bias else lo + (hi - lo) * rng.random(len(lo))
        k = len(nodes)
        i = int(np.argmin(np.linalg.norm(arr[:k] - q, axis=1)))
        near = nodes[i]
        d = float(np.linalg.norm(q - near))
        if d == 0.0:
            continue
        new = q if d <= step_len else near + (step_len / d) * (q - near)
        need_near = 0.0 if i == 0 else need
        if _edge_member(s, near, new, need_near, need) is None:
            continue
        nodes.append(new)
        parent.append(i)
        arr[k] = new
        if np.linalg.norm(new - x_t) <= connect and _edge_member(s, new, x_t, need, 0.0) is not None:
            goal_node = k
            break
    if goal_node is None:
        raise PlanningBudgetExhausted(f"no path found after {cfg.max_samples} samples")

    chain = [x_t]
    i = goal_node
    while i != -1:
        chain.append(nodes[i])
        i = parent[i]
    chain.reverse()
    if cfg.shortcut:
        chain = _shortcut(s, chain, need)
    return assign_members(chain, s)


def _shortcut(s: SafetySet, chain: list, need: float) -> list:
    out = [chain[0]]
    i = 0
    last = len(chain) - 1
    while i < last:
        j = last
        while j > i + 1:
            na = 0.0 if i == 0 else need
            nb = 0.0 if j == last else need
            if _edge_member(s, chain[i], chain[j], na, nb) is not None:
                break
            j -= 1
        out.append(chain[j])
        i = j
    return out


def reach_in_pc_set(m: Smms, s: SafetySet, x_s: Sequence[float], x_t: Sequence[float],
                    cfg: ControllerConfig, rng: np.random.Generator | None = None,
                    path: PiecewiseLinearPath | Sequence | None = None, *,
                    planner: PlannerConfig | None = None,
                    consts: SystemConstants | None = None) -> Trajectory:
    """Follow a path through ``s`` by chaining in-ball transfers along a ball cover.

    Raises :class:`~asreach.errors.NotReachable` (carrying the witness) when
    the system fails the decision procedure.
    """
    consts = consts or prepare_system(m, cfg.lambda_method)
    x_s = np.asarray(x_s, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    if not (s.contains(x_s) and s.contains(x_t)):
        raise PreconditionViolation("start and target must be strictly inside the safety set")
    rng = make_rng(cfg.rng_seed) if rng is None else rng
    rec = _Recorder(x_s, m, rng, cfg.max_steps)
    if float(np.linalg.norm(x_s - x_t)) <= cfg.eps:
        return _run_guarded(rec, lambda: None, x_t, cfg.eps)

    if path is None:
        path = rrt_plan(s, x_s, x_t, planner, rng if planner is None else None)
    elif not isinstance(path, PiecewiseLinearPath):
        path = assign_members(path, s)
    elif not path.members:
        path = assign_members(path.vertices, s)
    r_star = path_clearance(path, s)
    cover = build_ball_cover(path, r_star, x_s, x_t, s)
    legs = cover_legs(cover, cfg.eps)

    def body():
        for ball, target, eps in legs:
            if float(np.linalg.norm(np.asarray(rec.state) - x_t)) <= cfg.eps:
                return
            _ball_legs(rec, consts, ball, target, eps, cfg)

    return _run_guarded(rec, body, x_t, cfg.eps)


def cover_legs(cover, eps: float) -> list[tuple[Ball, np.ndarray, float]]:
    """(ball, target, precision) for every transfer along a cover.

    Handoff targets use precision ``min(eps, overlap/2)`` so that the state
    reached is a valid start inside the next ball.
    """
    balls, hand = cover.balls, cover.handoffs
    legs = []
    for i in range(len(hand) - 1):
        b0 = balls[i]
        b1 = balls[min(i + 1, len(balls) - 1)]
        gap = math.dist(b0.center, b1.center)
        overlap = b0.radius + b1.radius - gap
        legs.append((b0, np.asarray(hand[i + 1], dtype=float), min(eps, overlap / 2.0)))
    legs.append((balls[-1], np.asarray(hand[-1], dtype=float), eps))
    return legs
