"""Iteration runs: hand-stepped cases, linkage, boundedness, residual caches."""

import numpy as np
import pytest

from ratecert import (
    DomainError,
    EuclideanSpace,
    StarTreeSpace,
    bound_constants,
    check_link,
    constant_schedule,
    default_zoo,
    harmonic_schedule,
    linked_start,
    make_operator,
    modified_halpern_run,
    residuals,
    sabach_schedule,
    tikhonov_mann_run,
)

E1 = EuclideanSpace(1)
NEG = make_operator("negation", {}, E1)
HALF = make_operator("contraction-to-c", {"c": (0.0,), "rho": 0.5}, E1)
IDENT = make_operator("contraction-to-c", {"c": (0.0,), "rho": 1.0}, E1)


def test_tm_identity_collapses_to_companion():
    sched, _ = harmonic_schedule(0.7)
    traj = tikhonov_mann_run(E1, IDENT, u=(0.3,), x0=(1.0,), schedule=sched, n_steps=20)
    for n in range(20):
        assert traj.points[n + 1] == traj.companions[n]


def test_tm_negation_hits_zero_immediately():
    sched, _ = harmonic_schedule(0.5)
    traj = tikhonov_mann_run(E1, NEG, u=(0.25,), x0=(0.8,), schedule=sched, n_steps=10)
    for n in range(1, 11):
        assert traj.points[n] == (0.0,)


def test_tm_hand_stepped_first_point():
    # harmonic has beta_0 = 0, so u_0 = u = 0 and x_1 = (1-lam)*0 + lam*T(0) = 0
    sched, _ = harmonic_schedule(0.5)
    traj = tikhonov_mann_run(E1, HALF, u=(0.0,), x0=(1.0,), schedule=sched, n_steps=1)
    assert traj.companions[0] == (0.0,)
    assert traj.points[1] == (0.0,)


def test_mh_fixed_start_stays_put():
    sched, _ = harmonic_schedule(1.0)
    traj = modified_halpern_run(E1, IDENT, u=(0.4,), y0=(0.4,), schedule=sched, n_steps=25)
    assert all(p == (0.4,) for p in traj.points)


def test_mh_negation_hand_stepped():
    # v_n = 0, so y_{n+1} = (1 - beta_{n+1}) u
    sched, _ = harmonic_schedule(0.5)
    u = (0.6,)
    traj = modified_halpern_run(E1, NEG, u=u, y0=(1.0,), schedule=sched, n_steps=5)
    for n in range(5):
        assert traj.companions[n][0] == pytest.approx(0.0, abs=1e-15)
        expected = (1.0 - sched.beta(n + 1)) * u[0]
        assert traj.points[n + 1][0] == pytest.approx(expected, abs=1e-15)


def test_mh_with_lambda_one_is_plain_halpern():
    sched, _ = harmonic_schedule(1.0)
    u, y0 = (0.3,), (0.9,)
    traj = modified_halpern_run(E1, HALF, u=u, y0=y0, schedule=sched, n_steps=40)
    y = y0
    for n in range(40):
        b = sched.beta(n + 1)
        y = ((1 - b) * u[0] + b * HALF(y)[0],)
        assert traj.points[n + 1][0] == pytest.approx(y[0], abs=1e-15)


def test_link_identity_at_zero_steps():
    sched, _ = harmonic_schedule(0.5)
    rep = check_link(E1, HALF, u=(0.5,), x0=(1.0,), schedule=sched, n_steps=0)
    assert rep.max_companion_deviation == 0.0
    assert rep.passed


def test_link_euclidean_long_run():
    sched, _ = harmonic_schedule(0.5)
    rep = check_link(E1, HALF, u=(0.5,), x0=(1.0,), schedule=sched, n_steps=10_000)
    assert rep.max_companion_deviation <= 1e-9
    assert rep.max_step_deviation <= 1e-9


def test_link_star_tree():
    tree = StarTreeSpace(5)
    op = make_operator("tree-halving", {}, tree)
    sched, _ = sabach_schedule(0.5)
    rep = check_link(tree, op, u=(1, 1.5), x0=(3, 2.0), schedule=sched, n_steps=1000)
    assert rep.passed, (rep.max_companion_deviation, rep.max_step_deviation)


def test_linked_start_formula():
    sched, _ = harmonic_schedule(0.5)
    forced = sched.with_beta0(1.0)
    assert linked_start(E1, (0.5,), (1.0,), forced) == (1.0,)
    assert linked_start(E1, (0.5,), (1.0,), sched) == (0.5,)  # beta_0 = 0


@pytest.mark.parametrize("inst", default_zoo(), ids=lambda z: z.name)
def test_iterate_bound_and_companion_gap_bound(inst):
    # d(x_n, p) <= radius and d(x_n, u_n) <= 2 * radius * (1 - beta_n)
    sched, _ = harmonic_schedule(0.5)
    bc = bound_constants(inst.op, inst.u, inst.x0, inst.y0)
    traj = tikhonov_mann_run(inst.space, inst.op, inst.u, inst.x0, sched, 2000)
    p = inst.op.fixed_point
    for n, (x, un) in enumerate(zip(traj.points, traj.companions)):
        assert inst.space.dist(x, p) <= bc.radius + 1e-9
        gap_bound = 2.0 * bc.radius * (1.0 - sched.beta(n))
        assert inst.space.dist(x, un) <= gap_bound + 1e-9


@pytest.mark.parametrize("inst", default_zoo(), ids=lambda z: z.name)
def test_halpern_distance_bounds(inst):
    # d(y_n, u) <= M, d(T y_n, u) <= M and d(y_n, y_{n+1}) <= M for n >= 1
    sched, _ = harmonic_schedule(0.5)
    bc = bound_constants(inst.op, inst.u, inst.x0, inst.y0)
    traj = modified_halpern_run(inst.space, inst.op, inst.u, inst.y0, sched, 2000)
    M = bc.mh_bound
    d = inst.space.dist
    for n in range(1, len(traj.points) - 1):
        y = traj.points[n]
        assert d(y, inst.u) <= M + 1e-9
        assert d(inst.op(y), inst.u) <= M + 1e-9
        assert d(y, traj.points[n + 1]) <= M + 1e-9


def test_residual_caches_match_recomputation():
    sched, _ = sabach_schedule(0.5)
    inst = default_zoo()[2]  # plane rotation
    traj = tikhonov_mann_run(inst.space, inst.op, inst.u, inst.x0, sched, 500)
    step, fp = residuals(traj)
    assert np.max(np.abs(step - traj.step_residuals)) <= 1e-12
    assert np.max(np.abs(fp - traj.fixed_point_residuals)) <= 1e-12


def test_constant_trajectory_has_zero_residuals():
    sched, _ = harmonic_schedule(0.5)
    p = HALF.fixed_point
    traj = tikhonov_mann_run(E1, HALF, u=p, x0=p, schedule=sched, n_steps=50)
    assert np.all(traj.step_residuals == 0.0)
    assert np.all(traj.fixed_point_residuals == 0.0)


def test_zero_steps_trajectory():
    sched, _ = harmonic_schedule(0.5)
    traj = tikhonov_mann_run(E1, HALF, u=(0.5,), x0=(1.0,), schedule=sched, n_steps=0)
    assert len(traj.points) == 1
    assert len(traj.companions) == 1
    assert traj.step_residuals.size == 0
    assert traj.fixed_point_residuals.size == 1


def test_trajectory_cap_enforced():
    sched, _ = harmonic_schedule(0.5)
    with pytest.raises(DomainError):
        tikhonov_mann_run(E1, HALF, (0.5,), (1.0,), sched, 2_000_001)
    with pytest.raises(DomainError):
        tikhonov_mann_run(E1, HALF, (0.5,), (1.0,), sched, -1)


def test_trajectory_csv_roundtrip(tmp_path):
    sched, _ = harmonic_schedule(0.5)
    traj = tikhonov_mann_run(E1, HALF, u=(0.5,), x0=(1.0,), schedule=sched, n_steps=3)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "n,c0,d_step,d_T_residual"
    assert len(lines) == 5  # header + 4 points
    last = lines[-1].split(",")
    assert last[0] == "3" and last[2] == ""  # no step residual at the tail


def test_mann_degeneration_ignores_anchor():
    # beta = 1 makes the companion equal the iterate: plain averaged iteration
    sched = constant_schedule(1.0, 0.5)
    traj = tikhonov_mann_run(E1, NEG, u=(9.9,), x0=(1.0,), schedule=sched, n_steps=5)
    assert traj.companions[0] == (1.0,)
    for n in range(1, 6):
        assert traj.points[n] == (0.0,)
