import numpy as np
import pytest

from gyrovlasov import limit_model as L
from gyrovlasov.core import Ensemble, PhysicalParams
from gyrovlasov.kernel import KernelDomainError
from gyrovlasov.treecode import build_tree, fast_velocity_field


def cloud(n, spread, seed=0, delta=0.0, wc=1.0):
    rng = np.random.default_rng(seed)
    return Ensemble(rng.uniform(-1, 1, (n, 2)), spread * rng.normal(size=(n, 2)),
                    rng.uniform(0.5, 1.5, n) / n, PhysicalParams(wc, 1.0, delta))


def rel_err(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


@pytest.mark.parametrize("spread", [0.0, 0.01])
def test_tree_matches_direct_when_gate_is_open(spread):
    e = cloud(1500, spread, seed=1)
    direct = L.ensemble_fields(e).velocity
    assert rel_err(fast_velocity_field(e), direct) < 1e-9


def test_tree_respects_closed_gate():
    # wide velocity spread closes the gate for many far pairs
    e = cloud(800, 1.0, seed=2, wc=1.7)
    assert rel_err(fast_velocity_field(e), L.ensemble_fields(e).velocity) < 1e-9


def test_zero_theta_reproduces_direct_sum():
    e = cloud(600, 0.3, seed=3, delta=1e-3, wc=-1.3)
    np.testing.assert_allclose(fast_velocity_field(e, mac_theta=0.0), L.ensemble_fields(e).velocity,
                               rtol=1e-12, atol=1e-14)


def test_single_target_and_prebuilt_tree():
    e = cloud(400, 0.0, seed=4)
    tree = build_tree(e, leaf_size=8, n_terms=20)
    full = fast_velocity_field(e, tree=tree)
    for j in (0, 17, 399):
        np.testing.assert_allclose(fast_velocity_field(e, j, tree=tree), full[j], rtol=1e-13,
                                   atol=1e-16)


def test_regularized_cells_fall_back_to_direct():
    e = cloud(500, 0.0, seed=5, delta=0.05)
    direct = L.ensemble_fields(e).velocity
    assert rel_err(fast_velocity_field(e), direct) < 1e-12


def test_tree_covers_every_marker_once():
    e = cloud(333, 0.0, seed=6)
    tree = build_tree(e, leaf_size=5)
    assert sorted(tree.order.tolist()) == list(range(e.n))
    assert tree.end[0] - tree.start[0] == e.n


def test_bad_arguments():
    e = cloud(10, 0.0)
    with pytest.raises(ValueError):
        build_tree(e, leaf_size=0)
    with pytest.raises(ValueError):
        fast_velocity_field(e, mac_theta=-1)
    twin = Ensemble([[0.0, 0.0], [0.0, 0.0]], np.zeros((2, 2)), [1.0, 1.0], PhysicalParams())
    with pytest.raises(KernelDomainError):
        fast_velocity_field(twin)
