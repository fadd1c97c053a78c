"""Acceptance gate: ten end-to-end criteria at their stated tolerances.

Each test prints one ``[criterion N] PASS|FAIL`` line (visible with or
without ``-s``) and then asserts.  Run alone with::

    pytest tests/test_acceptance.py -v
"""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from click.testing import CliRunner

from asreach import (Ball, ControllerConfig, FiniteDiscrete, PointMass, SafetySet, Smms,
                     UniformBall, UniformBox, build_ball_cover, compute_lambda,
                     is_almost_sure_reachable, necessity_trial, path_clearance, reach_1d,
                     reach_center, run_monte_carlo, verify_trajectory)
from asreach.cli import main
from asreach.control import prepare_system
from asreach.decide import probe_directions
from asreach.geometry import ConvexPolytope, assign_members
from asreach.model import derive_rng, make_rng
from asreach.scenario import bundled_path, load_scenario
from asreach.sim import run_scenario
from oracles import (check_certificate, hull_lambda, interior_point, margin_filtered_instances,
                     plain_slack, random_instance, random_polytope)

from conftest import axis_point_masses, car_modes, fair_coin


@pytest.fixture
def report(capsys):
    def emit(n: int, title: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
        return ok
    return emit


def _modes_doc(means):
    n = len(means[0])
    return {"schema": 1, "dimension": n,
            "modes": [{"type": "point_mass", "v": [str(x) for x in v]} for v in means]}


def _cmd_check(path):
    return CliRunner().invoke(main, ["check", str(path)])


def test_c01_oracle_equivalence(report, tmp_path):
    instances = margin_filtered_instances(seed=20260, count=50)
    agree, elapsed = 0, 0.0
    for i, (means, expect) in enumerate(instances):
        f = tmp_path / f"inst_{i}.json"
        f.write_text(json.dumps(_modes_doc(means)))
        t0 = time.perf_counter()
        res = _cmd_check(f)
        elapsed += time.perf_counter() - t0
        verdict = json.loads(res.output)["verdict"] == "yes"
        assert res.exit_code == (0 if verdict else 2)
        agree += verdict == expect
    ok = agree == 50 and elapsed < 10.0
    report(1, "decision verdicts vs dense direction grid", ok,
           f"agree={agree}/50 yes={sum(e for _, e in instances)} check_time={elapsed:.2f}s")
    assert ok


def test_c02_certificate_soundness(report):
    rng = np.random.default_rng(2)
    yes = no = bad = 0
    for _ in range(300):
        n = int(rng.integers(1, 5))
        means = random_instance(rng, n, int(rng.integers(1, 9)))
        if all(all(x == 0 for x in v) for v in means):
            continue
        r = is_almost_sure_reachable(Smms(tuple(PointMass(tuple(v)) for v in means)))
        yes += r.yes
        no += not r.yes
        bad += not check_certificate(means, r)
    for means, _ in margin_filtered_instances(seed=5, count=30):
        r = is_almost_sure_reachable(Smms(tuple(PointMass(tuple(v)) for v in means)))
        yes += r.yes
        no += not r.yes
        bad += not check_certificate(means, r)
    ok = bad == 0 and yes > 0 and no > 0
    report(2, "YES and NO certificates re-verified exactly", ok, f"yes={yes} no={no} unsound={bad}")
    assert ok


def test_c03_lambda_accuracy(report):
    car = compute_lambda(car_modes(), "exact")
    octa = compute_lambda(axis_point_masses(3), "exact")
    ok_exact = (abs(car.value - 1 / math.sqrt(2)) <= 1e-9 and car.method.value == "exact_2d"
                and abs(octa.value - 1 / math.sqrt(3)) <= 1e-9 and octa.method.value == "hull_exact")
    # second route through qhull
    octa_means = [[float(x) for x in v] for v in axis_point_masses(3).means_array]
    ok_exact &= abs(hull_lambda(octa_means) - octa.value) <= 1e-9
    sampled_ok = True
    details = []
    for sysm, true in ((car_modes(), 1 / math.sqrt(2)), (axis_point_masses(3), 1 / math.sqrt(3))):
        lam = compute_lambda(sysm, "sampled")
        m = sysm.means_array
        dirs = probe_directions(m.shape[1], 10_000)
        cert = float((dirs @ m.T).max(axis=1).min()) >= lam.value - 1e-12
        rng = np.random.default_rng(99)
        v = rng.normal(size=(10_000, m.shape[1]))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        cert = cert and float((v @ m.T).max(axis=1).min()) >= lam.value - 1e-12
        sampled_ok &= 0 < lam.value <= true and cert
        details.append(f"{lam.value:.6f}<={true:.6f}")
    ok = ok_exact and sampled_ok
    report(3, "lambda exact (2-D, hull) and sampled lower bound", ok,
           f"car={car.value:.12f} octa={octa.value:.12f} sampled=[{', '.join(details)}]")
    assert ok


def test_c04_reach_center_car(report):
    m = car_modes()
    consts = prepare_system(m)
    cfg = ControllerConfig(eps=0.5, max_steps=10**6)
    ball = Ball((0, 0), 5)
    reached = exits = 0
    steps = []
    t0 = time.perf_counter()
    for i in range(100):
        t = reach_center(m, ball, (3, 0), cfg, derive_rng(4, i), consts=consts)
        reached += t.reached
        exits += int(np.any(np.linalg.norm(t.y, axis=1) >= 5 * (1 + 1e-9)))
        steps.append(t.n_steps)
    wall = time.perf_counter() - t0
    ok = reached == 100 and exits == 0 and wall < 300
    report(4, "reach-center, car modes in B(0,5)", ok,
           f"reached={reached}/100 ball_exits={exits} median_steps={int(np.median(steps))} wall={wall:.1f}s")
    assert ok


def test_c05_parking_lot(report):
    sc = load_scenario(bundled_path("parking_lot"))
    flagged = []
    first_csv = {}

    def audit(i, t):
        rep = verify_trajectory(t, sc)
        if not rep.ok:
            flagged.append((i, rep.violations[:3]))
        if i < 2:
            first_csv[i] = t.to_csv()

    res = run_monte_carlo(sc, 100, 2026, keep_trajectories=False, on_trajectory=audit)
    st = res.stats
    replay = all(run_scenario(sc, derive_rng(2026, i), None, res.path).to_csv() == first_csv[i]
                 for i in range(2))
    ok = st.reached == 100 and st.safety_violations == 0 and not flagged and replay
    report(5, "parking-lot scenario end to end", ok,
           f"reached={st.reached}/100 safety_violations={st.safety_violations} audit_flags={len(flagged)} "
           f"replay_identical={replay} median_steps={st.steps['median']:.0f}")
    assert ok


def test_c06_one_dimensional_sufficiency(report):
    m = Smms((UniformBox((Fraction(1, 2),), (Fraction(2, 5),)),))
    cfg = ControllerConfig(eps=0.1, max_steps=10**5)
    reached = over = 0
    delta = None
    for i in range(500):
        t = reach_1d(m, (0, 1), 0.1, 0.8, cfg, derive_rng(6, i))
        reached += t.reached
        delta = t.legs[0].delta
        eps_tilde = min(0.1, 1 - 0.8)
        over += int(np.any(np.abs(np.diff(t.y[:, 0])) > eps_tilde))
    ok = reached == 500 and over == 0 and delta == pytest.approx(0.5 * min(0.25, 0.1))
    report(6, "1-D policy with a single positive-mean mode", ok,
           f"reached={reached}/500 overshoot_steps={over} delta={delta}")
    assert ok


def test_c07_one_dimensional_necessity(report):
    rep = necessity_trial(fair_coin(), 1.0, 0.75, 0.25, 0.1, runs=1000, budget=10**5, rng=make_rng(7))
    ok = rep.passed and rep.frequency <= 0.431 and abs(rep.bound - 0.38462) < 1e-5
    report(7, "reach frequency against the necessity bound", ok,
           f"freq={rep.frequency:.3f} bound={rep.bound:.5f} slack={rep.slack:.4f}")
    assert ok


def test_c08_geometry(report):
    square = SafetySet((ConvexPolytope.box((0, 0), (1, 1)),))
    r_sq = path_clearance(assign_members([(0.2, 0.5), (0.8, 0.5)], square), square)
    rng = np.random.default_rng(88)
    failures = 0
    for trial in range(100):
        poly = random_polytope(rng, 2 if trial % 2 == 0 else 3)
        s = SafetySet((poly,))
        verts = [interior_point(rng, poly, 0.5) for _ in range(int(rng.integers(2, 5)))]
        path = assign_members(verts, s)
        r = path_clearance(path, s)
        cover = build_ball_cover(path, r, verts[0], verts[-1], s)
        good = all(plain_slack(poly.rows, b.center) >= b.radius - 1e-9 for b in cover.balls)
        good &= all(math.dist(a.center, b.center) < a.radius + b.radius
                    for a, b in zip(cover.balls, cover.balls[1:]))
        good &= all(math.dist(h, cover.balls[i - 1].center) < cover.balls[i - 1].radius
                    and math.dist(h, cover.balls[i].center) < cover.balls[i].radius
                    for i, h in enumerate(cover.handoffs[1:-1], start=1))
        failures += not good
    ok = r_sq == 0.2 and failures == 0
    report(8, "path clearance and ball-cover invariants", ok,
           f"unit_square_r*={r_sq!r} random_cover_failures={failures}/100")
    assert ok


def test_c09_sampler_fidelity(report):
    n_draws = 100_000
    cases = [
        ("point_mass", PointMass((1, -2)), np.zeros(2)),
        ("uniform_box", UniformBox((0, 1), ("15/2", "15/2")), np.full(2, 7.5 / math.sqrt(3))),
        ("uniform_ball", UniformBall((1, 0, -1), 2), np.full(3, 2 / 2)),
    ]
    atoms = (((1, 0), Fraction(1, 4)), ((-1, 2), Fraction(1, 2)), ((0, -3), Fraction(1, 4)))
    d = FiniteDiscrete(atoms)
    pts = np.array([[float(x) for x in v] for v, _ in atoms])
    p = np.array([float(q) for _, q in atoms])
    mean = p @ pts
    cases.append(("finite_discrete", d, np.sqrt(p @ (pts - mean) ** 2)))
    worst = []
    ok = True
    for i, (name, dist, sigma) in enumerate(cases):
        x = dist.sample_block(make_rng(900 + i), n_draws)
        err = np.abs(x.mean(axis=0) - np.array([float(v) for v in dist.mean()]))
        tol = 3 * sigma / math.sqrt(n_draws) + 1e-9
        ok &= bool(np.all(err <= tol))
        worst.append(f"{name}:{float((err / tol).max()):.2f}")
    report(9, "empirical means within 3 sigma", ok, "max err/tol " + " ".join(worst))
    assert ok


def test_c10_complexity(report, tmp_path):
    rng = np.random.default_rng(10)
    times, iters_ok = [], True
    for k in range(3):
        means = random_instance(rng, 10, 50)
        f = tmp_path / f"big_{k}.json"
        f.write_text(json.dumps(_modes_doc(means)))
        if k == 0:
            _cmd_check(f)  # warm imports once
        t0 = time.perf_counter()
        res = _cmd_check(f)
        times.append(time.perf_counter() - t0)
        assert res.exit_code in (0, 2)
        r = is_almost_sure_reachable(Smms(tuple(PointMass(tuple(v)) for v in means)))
        iters_ok &= r.simplex_iterations <= math.comb(60, 10)
    ok = max(times) < 1.0 and iters_ok
    report(10, "gamma=50, n=10 check under one second", ok,
           f"max_time={max(times):.3f}s iterations_within_cap={iters_ok}")
    assert ok
