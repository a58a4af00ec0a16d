import math

import numpy as np
import pytest

from so3smc.controllers import GainError, QuatSmcConfig, S1Variant, SmcConfig, reach_time_bound
from so3smc.dynamics import BodyState, CylinderState, Inertia, QuatState, Reference
from so3smc.sim import (
    QUAT_COLUMNS,
    SO3_COLUMNS,
    AttitudeUpdate,
    DisturbanceSpec,
    RunMetrics,
    SimConfig,
    SimulationAbort,
    eval_disturbance,
    portrait_grid,
    reach_tolerance,
    simulate_cylinder,
    simulate_cylinder_grid,
    simulate_quat_closed_loop,
    simulate_so3_closed_loop,
    step_attitude,
)
from so3smc.so3 import is_rotation, random_rotation, rodrigues

E1, E2, E3 = np.eye(3)
ZERO = np.zeros(3)
J345 = Inertia.diag(3.0, 4.0, 5.0)
BENCH = SmcConfig.benchmark()
TRACK_REF = Reference(offset=(0, 0, 0.1), amplitude=(0.3, 0.2, 0.25), freq=(0.5, 0.8, 0.3),
                      phase=(0, 1.0, 0.5))


def so3_run(init, ref=TRACK_REF, dist=None, engine="compiled", smc=BENCH, **sim):
    sim.setdefault("T", 1.0)
    return simulate_so3_closed_loop(init, ref, J345, smc, dist or DisturbanceSpec.benchmark(),
                                    SimConfig(**sim), engine=engine)


def test_sim_config_validation():
    assert SimConfig(dt=1e-3, T=1.0).n_steps == 1000
    with pytest.raises(ValueError):
        SimConfig(dt=0.0, T=1.0)
    with pytest.raises(ValueError):
        SimConfig(dt=2.0, T=1.0)
    with pytest.raises(ValueError):
        SimConfig(record_stride=0)


def test_disturbance_examples():
    bench = DisturbanceSpec.benchmark()
    np.testing.assert_array_equal(eval_disturbance(bench, 0.0), [0, 1, 0])
    np.testing.assert_allclose(
        eval_disturbance(bench, 0.1), [1, math.cos(0.7 * math.pi), math.sin(0.9 * math.pi)],
        atol=1e-15,
    )
    for t in (0.0, 0.3, 17.0):
        assert not eval_disturbance(DisturbanceSpec.zero(), t).any()


def test_disturbance_bound():
    bench = DisturbanceSpec.benchmark()
    assert bench.d_bar == pytest.approx(math.sqrt(3))
    ts = np.linspace(0, 20, 200_001)
    sup = max(np.linalg.norm(eval_disturbance(bench, t)) for t in ts[::50])
    assert sup <= bench.d_bar


def test_disturbance_validation():
    with pytest.raises(ValueError):
        DisturbanceSpec((1, 1, 1), (1, 1, 1), ("sin", "tan", "sin"))


def test_step_attitude_examples(rng):
    R = random_rotation(rng)
    for mode in AttitudeUpdate:
        np.testing.assert_allclose(step_attitude(R, ZERO, 0.1, mode), R, atol=1e-15)
    np.testing.assert_allclose(
        step_attitude(np.eye(3), [0, 0, math.pi / 2], 1.0), rodrigues(E3, math.pi / 2), atol=1e-15
    )
    w = rng.standard_normal(3)
    Rn = R
    for _ in range(10):
        Rn = step_attitude(Rn, w, 0.01)
    np.testing.assert_allclose(Rn, step_attitude(R, w, 0.1), atol=1e-12)


def test_step_attitude_rk4project_close_to_exact(rng):
    R, w = random_rotation(rng), rng.standard_normal(3)
    a = step_attitude(R, w, 1e-2, AttitudeUpdate.EXPMAP)
    b = step_attitude(R, w, 1e-2, AttitudeUpdate.RK4_PROJECT)
    assert is_rotation(b)
    assert np.linalg.norm(a - b) < 1e-10


@pytest.mark.parametrize(
    "ref",
    [Reference.regulation(rodrigues(E2, 0.7)), Reference(offset=(0, 0, 0.5), amplitude=(0, 0, 0.2),
                                                        freq=(0, 0, 1.0))],
    ids=["regulation", "principal-axis-spin"],
)
def test_start_on_target_without_disturbance_stays_put(ref):
    init = BodyState(ref.R_d0, ref.omega_d(0.0))
    traj, m = so3_run(init, ref=ref, dist=DisturbanceSpec.zero(), T=2.0)
    assert np.max(np.linalg.norm(traj.sigma, axis=1)) <= 1e-6
    assert np.min(traj.column("trRe")) >= 3 - 1e-6
    assert m.reach_time == 0.0


def test_start_on_target_generic_reference_stays_in_layer():
    # the gyroscopic term (J w) x w is dominated by the gain, not cancelled,
    # so sigma leaves zero but stays inside the boundary layer
    init = BodyState(np.eye(3), TRACK_REF.omega_d(0.0))
    traj, _ = so3_run(init, dist=DisturbanceSpec.zero(), T=2.0)
    assert np.max(np.linalg.norm(traj.sigma, axis=1)) <= BENCH.eps_layer
    assert np.min(traj.column("trRe")) >= 3 - 1e-6


def test_benchmark_regulation_holds_attitude():
    traj, m = so3_run(BodyState(np.eye(3), ZERO), ref=Reference.regulation(), T=10.0)
    assert m.min_tr_Re >= 3 - 1e-3
    assert np.min(traj.column("trRe")) >= 3 - 1e-3


def test_reach_time_within_bound():
    init = BodyState(rodrigues(E3, math.pi / 2), ZERO)
    traj, m = so3_run(init, ref=Reference.regulation(), T=3.0, dt=1e-4)
    V0 = traj.column("Vsig")[0]
    assert V0 == pytest.approx(2.5)
    assert m.reach_time is not None
    assert m.reach_time <= reach_time_bound(V0, J345, 1.8 - math.sqrt(3)) + 0.1


def test_sustained_reach():
    traj, m = so3_run(BodyState(rodrigues(E1, 2.0), ZERO), T=5.0)
    tol = reach_tolerance(BENCH.eps_layer)
    after = traj.t >= m.reach_time
    assert np.all(np.linalg.norm(traj.sigma[after], axis=1) <= 2 * tol)


def test_manifold_preserved_and_records_valid():
    traj, _ = so3_run(BodyState(rodrigues(np.array([0.6, 0.0, 0.8]), 3.0), E2), T=20.0)
    assert traj.columns == SO3_COLUMNS
    assert np.all(np.isfinite(traj.data))
    for rec in traj.records():
        R = rec.R
        assert np.linalg.norm(R @ R.T - np.eye(3)) <= 1e-8
        assert abs(np.linalg.det(R) - 1) <= 1e-8
        assert -1 - 1e-6 <= rec.tr_Re <= 3 + 1e-6
        assert rec.q0 is None


def test_record_grid_and_last_sample():
    traj, _ = so3_run(BodyState(np.eye(3), ZERO), T=0.011, dt=1e-3, record_stride=4)
    np.testing.assert_allclose(traj.t, [0, 0.004, 0.008, 0.011], atol=1e-15)


def test_expmap_and_rk4project_agree():
    init = BodyState(rodrigues(E2, 1.0), np.array([0.2, -0.1, 0.3]))
    a, _ = so3_run(init, dist=DisturbanceSpec.zero(), attitude_update=AttitudeUpdate.EXPMAP)
    b, _ = so3_run(init, dist=DisturbanceSpec.zero(), attitude_update=AttitudeUpdate.RK4_PROJECT)
    gap = np.linalg.norm(a.data[:, 1:10] - b.data[:, 1:10], axis=1)
    assert np.max(gap) <= 1e-5


def test_step_size_robustness():
    init = BodyState(rodrigues(np.array([1.0, 1.0, 1.0]) / math.sqrt(3), 2.0), ZERO)
    _, coarse = so3_run(init, T=20.0, dt=1e-4)
    _, fine = so3_run(init, T=20.0, dt=5e-5, record_stride=200)
    assert abs(coarse.final_tr_Re - fine.final_tr_Re) <= 1e-4


@pytest.mark.parametrize("mode", list(AttitudeUpdate))
def test_compiled_engine_matches_numpy_oracle(mode):
    init = BodyState(rodrigues(np.array([0.0, 0.6, 0.8]), 2.5), np.array([0.3, -0.2, 0.1]))
    a, ma = so3_run(init, T=0.3, attitude_update=mode, record_stride=10)
    b, mb = so3_run(init, T=0.3, attitude_update=mode, record_stride=10, engine="numpy")
    np.testing.assert_allclose(a.data, b.data, rtol=0, atol=1e-12)
    assert ma.min_tr_Re == pytest.approx(mb.min_tr_Re, abs=1e-12)
    assert ma.max_u_norm == pytest.approx(mb.max_u_norm, abs=1e-10)


def test_quat_engine_matches_numpy_oracle():
    init = QuatState(np.array([0.6, 0.0, 0.8, 0.0]), np.array([0.1, 0.0, -0.3]))
    sim = SimConfig(dt=1e-4, T=0.3, record_stride=10)
    a, _ = simulate_quat_closed_loop(init, J345, QuatSmcConfig(), DisturbanceSpec.benchmark(), sim)
    b, _ = simulate_quat_closed_loop(init, J345, QuatSmcConfig(), DisturbanceSpec.benchmark(), sim,
                                     engine="numpy")
    np.testing.assert_allclose(a.data, b.data, rtol=0, atol=1e-12)
    np.testing.assert_allclose(a.quaternions, b.quaternions, rtol=0, atol=1e-12)


def test_determinism():
    init = BodyState(rodrigues(E1, 2.0), ZERO)
    a, _ = so3_run(init)
    b, _ = so3_run(init)
    assert a.data.tobytes() == b.data.tobytes()


@pytest.mark.parametrize("engine", ["compiled", "numpy"])
def test_non_finite_state_aborts(engine):
    init = BodyState(np.eye(3), np.array([50.0, 50.0, 50.0]))
    with pytest.raises(SimulationAbort) as info:
        so3_run(init, ref=Reference.regulation(), T=50.0, dt=0.5, record_stride=1, engine=engine)
    assert info.value.index == 3


def test_gain_checks_before_running():
    with pytest.raises(GainError):
        simulate_so3_closed_loop(BodyState(np.eye(3), ZERO), TRACK_REF, Inertia.diag(3, 4, 9),
                                 BENCH, DisturbanceSpec.benchmark(), SimConfig(T=0.01))
    weak = SmcConfig(delta=0.05, d_bar=1.0, c_omega2=7.0, c_omega_e=2.0, k_0=1.8)
    with pytest.raises(GainError, match="disturbance bound"):
        simulate_so3_closed_loop(BodyState(np.eye(3), ZERO), TRACK_REF, J345, weak,
                                 DisturbanceSpec.benchmark(), SimConfig(T=0.01))


def test_quat_at_stable_equilibrium_without_disturbance():
    init = QuatState(np.array([1.0, 0, 0, 0]), ZERO)
    traj, m = simulate_quat_closed_loop(init, J345, QuatSmcConfig(), DisturbanceSpec.zero(),
                                        SimConfig(T=1.0))
    assert traj.columns == QUAT_COLUMNS
    assert np.all(traj.column("q0") == 1.0)
    assert m.min_tr_Re == 3.0 and m.max_u_norm == 0.0


def test_quat_unwinding():
    init = QuatState(np.array([-1.0, 0, 0, 0]), ZERO)
    traj, m = simulate_quat_closed_loop(init, J345, QuatSmcConfig(k_q=5.0),
                                        DisturbanceSpec.benchmark(), SimConfig(T=40.0))
    assert m.min_tr_Re < 0
    assert m.final_tr_Re > 3 - 0.05
    # the body turns all the way round to the other representative
    assert traj.column("q0")[0] == -1.0 and traj.column("q0")[-1] > 0.99
    norms = np.linalg.norm(traj.quaternions, axis=1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-9


def test_cylinder_examples():
    sim = SimConfig(dt=1e-3, T=20.0, record_stride=100)
    for variant in S1Variant:
        run = simulate_cylinder(CylinderState(0.0, 0.0), variant, sim)
        assert not run.data[:, 1:].any()
    run = simulate_cylinder(CylinderState(math.pi, 0.0), S1Variant.SMOOTH, sim)
    assert np.all(run.column("theta") == math.pi) and not run.column("omega").any()
    end = simulate_cylinder(CylinderState(math.pi + 0.01, 0.0), S1Variant.SMOOTH, sim).final
    assert min(end.theta, 2 * math.pi - end.theta) <= 1e-2 and abs(end.omega) <= 1e-2


def test_cylinder_theta_wrapped():
    run = simulate_cylinder(CylinderState(0.1, 3.0), S1Variant.WRAPPED,
                            SimConfig(dt=1e-3, T=5.0, record_stride=1))
    th = run.column("theta")
    assert np.all((th >= 0) & (th < 2 * math.pi))


def test_wrapped_variant_flags_sigma_jump():
    # starting just below pi with positive rate crosses the cut
    run = simulate_cylinder(CylinderState(math.pi - 0.05, 1.0), S1Variant.WRAPPED,
                            SimConfig(dt=1e-3, T=1.0, record_stride=10))
    assert run.column("jump").any()
    smooth = simulate_cylinder(CylinderState(math.pi - 0.05, 1.0), S1Variant.SMOOTH,
                               SimConfig(dt=1e-3, T=1.0, record_stride=10))
    assert not smooth.column("jump").any()


def test_portrait_grid_and_batch_order():
    inits = portrait_grid(4, (-1.0, 1.0), 3)
    assert len(inits) == 12
    assert inits[6].theta == math.pi and inits[7].omega == 0.0
    sim = SimConfig(dt=1e-2, T=2.0, record_stride=10)
    runs = simulate_cylinder_grid(inits, S1Variant.SMOOTH, sim, workers=3)
    assert [r.run_id for r in runs] == list(range(12))
    for init, run in zip(inits, runs):
        single = simulate_cylinder(init, S1Variant.SMOOTH, sim, run.run_id)
        assert np.array_equal(single.data, run.data)


def test_run_metrics_round_trip():
    m = RunMetrics(None, -0.5, 2.9, 1e-3, 4.0)
    assert RunMetrics.from_dict(m.to_dict()) == m
