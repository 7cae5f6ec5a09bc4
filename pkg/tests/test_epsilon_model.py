import numpy as np
import pytest

from gyrovlasov import epsilon_model as M
from gyrovlasov.core import Ensemble, Frame, FrameMismatchError, PhysicalParams, TrajectoryRecord
from gyrovlasov.kernel import KernelDomainError
from gyrovlasov.sampling import InitialCondition, sample_lab

INV2PI = 1 / (2 * np.pi)


def lab(n_per_dim=3, eps=0.1, delta=1e-3, jitter=True):
    return sample_lab(InitialCondition(), n_per_dim, PhysicalParams(1.0, eps, delta), jitter, 0)


def test_config_limits():
    with pytest.raises(ValueError):
        M.SplitStepConfig(substeps_per_cyclotron_period=10)
    with pytest.raises(ValueError):
        M.SplitStepConfig(dt=-1.0)
    p = PhysicalParams(2.0, 0.1, 0.0)
    assert M.SplitStepConfig(dt=1.0).max_step(p) == pytest.approx(p.fast_cyclotron_period / 20)
    assert M.SplitStepConfig(dt=1e-6).max_step(p) == 1e-6


def test_electric_field_of_one_marker():
    e = Ensemble([[0.0, 0.0]], [[0.0, 0.0]], [2.0], PhysicalParams(), frame=Frame.LAB)
    np.testing.assert_allclose(M.electric_field(e, [2.0, 0.0]), [2 * INV2PI / 2, 0.0])
    np.testing.assert_array_equal(M.electric_field(e, [0.0, 0.0]), [0.0, 0.0])


def test_marker_field_matches_query_field_and_cancels():
    e = lab()
    E = M.marker_electric_field(e)
    np.testing.assert_allclose(E, M.electric_field(e, e.pos), rtol=1e-12, atol=1e-15)
    assert np.abs(e.weights @ E).max() < 1e-14


def test_coincident_markers_without_regularization():
    e = Ensemble([[0.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]], [1.0, 1.0],
                 PhysicalParams(), frame=Frame.LAB)
    with pytest.raises(KernelDomainError):
        M.marker_electric_field(e)


def test_gyro_frame_is_refused():
    e = lab().to_gyro_frame()
    with pytest.raises(FrameMismatchError):
        M.step_full(e, M.SplitStepConfig())


def test_cyclotron_substep_is_exact_gyration():
    e = lab()
    p = e.params
    out = M.cyclotron_substep(e, 0.3 * p.fast_cyclotron_period)
    g0, g1 = e.to_gyro_frame(), out.to_gyro_frame()
    np.testing.assert_allclose(g1.pos, g0.pos, atol=1e-14)
    np.testing.assert_allclose(g1.vel, g0.vel, atol=1e-14)
    back = M.cyclotron_substep(e, p.fast_cyclotron_period)
    np.testing.assert_allclose(back.pos, e.pos, atol=1e-13)
    np.testing.assert_allclose(back.vel, e.vel, atol=1e-13)
    assert out.time == pytest.approx(0.3 * p.fast_cyclotron_period)


def test_kick_leaves_positions_and_time():
    e = lab()
    out = M.kick_substep(e, 0.1)
    np.testing.assert_array_equal(out.pos, e.pos)
    assert out.time == e.time
    np.testing.assert_allclose(out.vel - e.vel, 0.1 * M.marker_electric_field(e))


def test_field_off_keeps_gyro_coordinates_fixed():
    e = lab()
    rec = M.integrate_full(e, M.SplitStepConfig(field=False), 0.5, snapshot_every=0.1)
    filt = M.filtered_trajectory(rec)
    g0 = e.to_gyro_frame()
    assert np.abs(filt.positions - g0.pos).max() < 1e-12
    assert np.abs(filt.velocities - g0.vel).max() < 1e-12


def test_strang_splitting_is_second_order():
    # smooth regime: strong regularization keeps the field gradients moderate
    e = lab(eps=0.5, delta=0.3)
    T = 0.5
    run = lambda sub: M.integrate_full(
        e, M.SplitStepConfig(dt=1.0, substeps_per_cyclotron_period=sub), T).final().pos
    ref = run(2560)
    errs = [np.abs(run(sub) - ref).max() for sub in (80, 160)]
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_snapshots_and_filtering():
    e = lab()
    rec = M.integrate_full(e, M.SplitStepConfig(), 0.3, snapshot_every=0.1)
    assert rec.frame is Frame.LAB
    np.testing.assert_allclose(rec.times, [0, 0.1, 0.2, 0.3], atol=1e-15)
    filt = M.filtered_trajectory(rec)
    assert filt.frame is Frame.GYRO
    with pytest.raises(FrameMismatchError):
        M.filtered_trajectory(filt)


def test_step_full_advances_time_once():
    e = lab()
    out = M.step_full(e, M.SplitStepConfig(dt=1e-3))
    assert out.time == pytest.approx(1e-3)
