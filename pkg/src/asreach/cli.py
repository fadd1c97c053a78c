"""Command-line front end: ``asreach check | plan | run | render``.

Exit codes: 0 success, 1 input error, 2 not reachable, 3 planning budget
exhausted, 4 at least one run failed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .control import Ball, Trajectory, waypoint_plan
from .decide import is_almost_sure_reachable
from .errors import (AsReachError, DimensionNot2D, NotReachable, PlanningBudgetExhausted,
                     ScenarioError)
from .geometry import BallCover, build_ball_cover, path_clearance
from .scenario import load_document, parse_system, scenario_from_document
from .sim import run_monte_carlo, scenario_path

EXIT_OK, EXIT_INPUT, EXIT_NO, EXIT_PLAN, EXIT_FAIL = 0, 1, 2, 3, 4


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _fail(msg: str, code: int):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load(path):
    try:
        return load_document(path)
    except ScenarioError as exc:
        _fail(str(exc), EXIT_INPUT)
    except OSError as exc:
        _fail(str(exc), EXIT_INPUT)


def _scenario(doc):
    try:
        return scenario_from_document(doc)
    except (AsReachError, ValueError, TypeError) as exc:
        _fail(str(exc), EXIT_INPUT)


def _witness_exit(exc: NotReachable):
    click.echo(_dump({"verdict": "no", "witness": [str(w) for w in exc.witness]}))
    sys.exit(EXIT_NO)


@click.group()
@click.version_option(version=__version__, prog_name="asreach")
def main():
    """Almost-sure reachability for stochastic multi-mode systems."""


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--lambda-method", default="auto", type=click.Choice(["auto", "exact", "sampled"]),
              show_default=True)
def check(file, lambda_method):
    """Decide whether the modes' means positively span the state space."""
    doc = _load(file)
    try:
        res = is_almost_sure_reachable(parse_system(doc), with_lambda=True, lambda_method=lambda_method)
    except ValueError as exc:
        _fail(str(exc), EXIT_INPUT)
    click.echo(_dump(res.to_json()))
    sys.exit(EXIT_OK if res.yes else EXIT_NO)


def _plan_payload(sc):
    res = is_almost_sure_reachable(sc.system)
    if not res.yes:
        raise NotReachable(res.certificate.w)
    if sc.kind == "ball":
        r_tilde, n_legs = waypoint_plan(sc.ball, sc.x_s, sc.x_t)
        return {"kind": "ball", "r_tilde": r_tilde, "legs": n_legs}, None
    if sc.kind == "interval":
        return {"kind": "interval", "interval": list(sc.interval())}, None
    path = scenario_path(sc)
    r_star = path_clearance(path, sc.safety)
    cover = build_ball_cover(path, r_star, sc.x_s, sc.x_t, sc.safety)
    payload = {"kind": "pc_set", "path": path.to_json(), "r_star": r_star, "cover": cover.to_json(),
               "fixed_path": sc.path is not None}
    return payload, cover


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None, help="Planner seed (overrides the file's planner.seed).")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write path, r* and cover JSON.")
def plan(file, seed, out):
    """Plan a path through the safety set and build its ball cover."""
    doc = _load(file)
    if seed is not None:
        doc = dict(doc, planner=dict(doc.get("planner", {}), seed=seed))
    sc = _scenario(doc)
    try:
        payload, cover = _plan_payload(sc)
    except NotReachable as exc:
        _witness_exit(exc)
    except PlanningBudgetExhausted as exc:
        _fail(str(exc), EXIT_PLAN)
    except AsReachError as exc:
        _fail(str(exc), EXIT_INPUT)
    if out:
        Path(out).write_text(_dump(payload) + "\n", encoding="utf-8")
    summary = {"kind": payload["kind"]}
    if cover is not None:
        summary.update(vertices=len(payload["path"]["vertices"]), r_star=payload["r_star"],
                       balls=len(cover.balls))
    else:
        summary.update({k: v for k, v in payload.items() if k != "kind"})
    click.echo(_dump(summary))


@main.command()
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True, help="Base seed for per-run streams.")
@click.option("--runs", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--traj-dir", type=click.Path(file_okay=False), default=None,
              help="Write each run as traj_NNNN.csv here.")
@click.option("--max-steps", type=click.IntRange(min=1), default=None, help="Total step budget per run.")
@click.option("--figure", type=click.Path(dir_okay=False), default=None,
              help="Render run 0 of a 2-D scenario to this SVG.")
def run(file, seed, runs, traj_dir, max_steps, figure):
    """Run the controller over independent seeded runs and print batch statistics."""
    doc = _load(file)
    sc = _scenario(doc)
    if max_steps is not None:
        sc.controller.max_steps = max_steps
    if traj_dir:
        Path(traj_dir).mkdir(parents=True, exist_ok=True)
    first = []

    def sink(i, traj):
        if traj_dir:
            (Path(traj_dir) / f"traj_{i:04d}.csv").write_text(traj.to_csv(), encoding="utf-8")
        if figure and i == 0:
            first.append(traj)

    try:
        res = run_monte_carlo(sc, runs, seed, keep_trajectories=False, on_trajectory=sink)
    except NotReachable as exc:
        _witness_exit(exc)
    except PlanningBudgetExhausted as exc:
        _fail(str(exc), EXIT_PLAN)
    except AsReachError as exc:
        _fail(str(exc), EXIT_INPUT)
    st = res.stats
    click.echo(_dump(dict(st.to_json(), scenario=sc.name, base_seed=seed)))
    if figure:
        from .plotting import render_svg

        cover = None
        if res.path is not None:
            cover = build_ball_cover(res.path, path_clearance(res.path, sc.safety), sc.x_s, sc.x_t)
        try:
            render_svg(sc, first[0], cover, figure, title=sc.name or None)
        except DimensionNot2D as exc:
            _fail(str(exc), EXIT_INPUT)
    ok = st.reached == st.runs and st.safety_violations == 0
    sys.exit(EXIT_OK if ok else EXIT_FAIL)


def _cover_from_json(path) -> BallCover:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    data = data.get("cover", data)
    balls = [Ball(tuple(b["center"]), b["radius"]) for b in data["balls"]]
    return BallCover(balls, data.get("handoffs", []), data.get("members", []))


@main.command()
@click.argument("traj", type=click.Path(dir_okay=False, exists=True))
@click.argument("file", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="SVG output path.")
@click.option("--cover", type=click.Path(dir_okay=False, exists=True), default=None,
              help="Plan JSON (from `plan --out`) whose ball cover is drawn.")
def render(traj, file, out, cover):
    """Render a recorded trajectory over its scenario as SVG."""
    from .plotting import render_svg

    sc = _scenario(_load(file))
    try:
        t = Trajectory.from_csv(Path(traj).read_text(encoding="utf-8"))
        bc = _cover_from_json(cover) if cover else None
    except (ValueError, KeyError, IndexError) as exc:
        _fail(f"cannot read input: {exc}", EXIT_INPUT)
    try:
        render_svg(sc, t, bc, out, title=sc.name or None)
    except DimensionNot2D as exc:
        _fail(str(exc), EXIT_INPUT)
    click.echo(out)


if __name__ == "__main__":
    main()
