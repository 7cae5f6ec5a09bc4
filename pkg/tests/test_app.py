from dataclasses import replace

import numpy as np
import pytest

from gyrovlasov import cli, harness, storage
from gyrovlasov.config import ConfigError, ExplicitMarkers, RunConfig, parse_config, preset
from gyrovlasov.core import Ensemble, Frame, PhysicalParams
from gyrovlasov.epsilon_model import SplitStepConfig
from gyrovlasov.limit_model import IntegratorConfig

SMALL = """
[physics]
omega_c = 1
epsilon = 0.1
delta = 1e-3
[initial]
n_per_dim = 2
jitter = true
[integrator]
dt = 1e-2
[run]
t_end = 0.2
snapshot_every = 0.1
"""


@pytest.mark.parametrize("text", [
    "[physics]\nomega_c = 0\n",
    "[physics]\nepsilon = -1\n",
    "[physics]\nomega = 1\n",
    "[bogus]\nx = 1\n",
    "[initial]\nn_per_dim = 1\n",
    "[initial]\nkind = plasma\n",
    "[integrator]\nscheme = euler\n",
    "[integrator]\ndt = abc\n",
    "[split]\nsubsteps_per_cyclotron_period = 5\n",
    "[run]\nt_end = 0\n",
    "[run]\nsnapshot_every = -1\n",
    "[compare]\neps = 0.05, 0.1\n",
    "[initial]\nkind = explicit\npositions = 0 0\nvelocities = 0 0; 1 1\nweights = 1\n",
    "not a config",
])
def test_bad_configurations_are_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_values_and_relative_output_dir(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(SMALL + "output_dir = res\n")
    from gyrovlasov.config import load_config
    cfg = load_config(path)
    assert cfg.n_per_dim == 2 and cfg.jitter and cfg.integrator.dt == 1e-2
    assert cfg.output_dir == tmp_path / "res"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_presets():
    tv = preset("two_vortex")
    assert isinstance(tv.ic, ExplicitMarkers)
    assert tv.t_end == pytest.approx(2 * np.pi ** 2)
    assert preset("gaussian_bump", t_end=1.0).t_end == 1.0
    with pytest.raises(ConfigError):
        preset("nope")


def test_snapshot_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    e = Ensemble(rng.normal(size=(7, 2)), rng.normal(size=(7, 2)), rng.uniform(size=7),
                 PhysicalParams(-1.3, 0.07, 1e-3), time=np.pi, frame=Frame.LAB)
    path = tmp_path / "s.csv"
    storage.write_snapshot(path, e)
    back = storage.read_snapshot(path)
    np.testing.assert_array_equal(back.pos, e.pos)
    np.testing.assert_array_equal(back.vel, e.vel)
    np.testing.assert_array_equal(back.weights, e.weights)
    np.testing.assert_array_equal(back.ids, e.ids)
    assert back.params == e.params and back.time == e.time and back.frame is Frame.LAB
    text = path.read_text().splitlines()
    assert text[0].startswith("# frame=lab") and text[1].startswith("# units")
    assert text[2] == "id,x1,x2,v1,v2,w"


def test_reading_malformed_tables(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# frame=gyro t=0\nid,x1,x2,v1,v2,w\n0,0,0,0,0,1\n")
    with pytest.raises(ValueError):
        storage.read_snapshot(bad)
    bad.write_text("t,mass\n0,1\n")
    with pytest.raises(ValueError):
        storage.read_diag(bad)


def test_runs_are_byte_deterministic(tmp_path):
    cfg = parse_config(SMALL)
    harness.run_limit(cfg, tmp_path / "a")
    harness.run_limit(cfg, tmp_path / "b")
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "diag.csv" in files and "snapshot_2.csv" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = storage.read_diag(tmp_path / "a" / "diag.csv")
    assert [r["t"] for r in rows] == pytest.approx([0.0, 0.1, 0.2])


def test_single_marker_run_is_stationary(tmp_path):
    cfg = replace(parse_config(SMALL),
                  ic=ExplicitMarkers(np.array([[0.5, 0.0]]), np.array([[0.0, 1.0]]), np.ones(1)))
    res = harness.run_limit(cfg, tmp_path)
    snap = storage.read_snapshot(tmp_path / "snapshot_2.csv")
    np.testing.assert_array_equal(snap.pos, [[1.5, 0.0]])
    assert max(res.drift.values()) == 0.0


def test_full_run_writes_lab_snapshots(tmp_path):
    cfg = parse_config(SMALL)
    res = harness.run_full(cfg, tmp_path)
    assert storage.read_snapshot(tmp_path / "snapshot_0.csv").frame is Frame.LAB
    assert res.drift["mass"] == 0.0


def test_compare_with_one_epsilon():
    res = harness.compare_eps(parse_config(SMALL), eps_list=(0.05,))
    assert len(res.errors) == 1 and res.strictly_decreasing


def test_field_off_compare_is_exact():
    cfg = replace(parse_config(SMALL), split=SplitStepConfig(field=False))
    res = harness.compare_eps(cfg, eps_list=(0.1, 0.05))
    assert max(res.errors) <= 1e-8


def test_kernel_samples_respect_margin():
    xi, eta, wc = harness.kernel_samples(500, 0.05, True, seed=1)
    r1 = np.linalg.norm(xi, axis=1)
    r2 = np.linalg.norm(eta, axis=1) / np.abs(wc)
    assert np.all(np.abs(r1 - r2) > 0.05 * np.maximum(r1, r2))
    _, _, wc = harness.kernel_samples(100, 1e-3, False)
    assert set(np.unique(wc)) <= set(harness.KERNEL_OMEGAS)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL)
    out = str(tmp_path / "o")
    assert cli.main(["verify-kernel", "--n-samples", "200", "--quiet"]) == 0
    assert cli.main(["verify-kernel", "--n-samples", "0"]) == 0
    assert "warning" in capsys.readouterr().err
    assert cli.main(["verify-kernel", "--n-samples", "50", "--n-nodes", "8", "--quiet"]) == 1
    assert cli.main(["run-limit", "--config", str(cfg), "--out", out, "--quiet"]) == 0
    assert cli.main(["diagnose", "--out", out, "--tol", "1e-6", "--quiet"]) == 0
    assert cli.main(["diagnose", "--out", str(tmp_path / "none")]) == 2
    assert cli.main(["run-full", "--config", str(cfg), "--out", out, "--quiet"]) == 0
    assert cli.main(["run-limit", "--config", str(cfg), "--out", out, "--tol", "0",
                     "--quiet"]) == 1
    assert cli.main(["compare", "--config", str(cfg), "--eps", "0.1,0.05", "--out", out,
                     "--quiet"]) == 0
    assert (tmp_path / "o" / "compare.csv").exists()
    assert cli.main(["run-limit"]) == 2
    assert cli.main(["run-limit", "--preset", "nope"]) == 2
    assert cli.main(["compare", "--config", str(cfg), "--eps", "0.05,0.1"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[physics]\nomega_c = 0\n")
    assert cli.main(["run-limit", "--config", str(bad)]) == 2


def test_cli_run_failure_exit_code(tmp_path):
    cfg = tmp_path / "twin.cfg"
    cfg.write_text("[physics]\ndelta = 0\n[initial]\nkind = explicit\n"
                   "positions = 0 0; 0 0\nvelocities = 1 0; 1 0\nweights = 1, 1\n"
                   "[run]\nt_end = 0.1\n")
    assert cli.main(["run-limit", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--quiet"]) == 1
