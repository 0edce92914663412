import json

import numpy as np
import pytest

from tricontact import cli, experiments as E
from tricontact.config import ConfigError, format_config, parse_config, sweep_spec
from tricontact.lattice import Boundary, HEALTHY, INFECTED, PASSIVE
from tricontact.schedule import derive_seed

SMALL = """# small sweep
q_grid = 0.05, 0.5, 0.9
window_radius = 30
horizon = 8
replicas = 4
master_seed = 12
observables = survival, rightmostDrift
"""


def write_config(tmp_path, text=SMALL):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return p


# --- configuration ------------------------------------------------------------

def test_parse_config_types():
    v = parse_config(SMALL)
    assert v["q_grid"] == (0.05, 0.5, 0.9) and v["replicas"] == 4
    assert v["observables"] == ("survival", "rightmostDrift")


@pytest.mark.parametrize("text", ["qgrid = 0.1", "replicas = many", "horizon 5",
                                  "replicas = 1\nreplicas = 2", "replicas = 0",
                                  "observables = survival, bogus", "boundary = Sticky"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        sweep_spec(parse_config(text))


def test_format_config_roundtrip():
    spec = sweep_spec(parse_config(SMALL + "initial = block\nblock_radius = 3\n"))
    assert sweep_spec(parse_config(format_config(spec))) == spec


def test_initial_conditions():
    c = E.build_initial(20, E.InitialSpec("single", 0, "periodic", spacing=8), Boundary.passive())
    assert len(c) == 41 and np.sum(c.states == INFECTED) == 1 and c[0] == INFECTED
    assert c[4] == HEALTHY and c[1] == PASSIVE
    b = E.build_initial(20, E.InitialSpec("block", 3), Boundary.passive())
    assert np.sum(b.states == INFECTED) == 7


def test_auto_boundary():
    assert E.resolve_boundary("auto", 0.1) == Boundary.passive()
    assert E.resolve_boundary("auto", 0.9) == Boundary.healthy()
    assert E.resolve_boundary("FrozenHealthy", 0.1) == Boundary.healthy()


def test_seeds_distinct():
    seeds = {derive_seed(7, qi, r) for qi in range(10) for r in range(1000)}
    assert len(seeds) == 10_000
    assert derive_seed(7, "xi", 3) != derive_seed(7, "fa1f", 3)


# --- sweeps -------------------------------------------------------------------

def test_sweep_rows_in_grid_order():
    res = E.run_sweep(sweep_spec(parse_config(SMALL)))
    assert [r.q for r in res.rows] == [0.05, 0.5, 0.9]
    assert all(r.survival.n == 4 for r in res.rows)
    assert not res.failures


def test_thread_count_invariance():
    spec = sweep_spec(parse_config(SMALL))
    assert repr(E.run_sweep(spec, threads=1).rows) == repr(E.run_sweep(spec, threads=2, chunk=3).rows)


def run_cli(args):
    return cli.main([str(a) for a in args])


def test_single_replica_sweep_is_bit_identical(tmp_path):
    cfg = write_config(tmp_path, SMALL.replace("replicas = 4", "replicas = 1"))
    for d in ("a", "b"):
        assert run_cli(["sweep", "--config", cfg, "--out", tmp_path / d]) == 0
    for name in ("survival.csv", "rightmostDrift.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_outputs_per_observable(tmp_path):
    cfg = write_config(tmp_path, SMALL.replace("q_grid = 0.05, 0.5, 0.9", "q_grid = 0.1, 0.5, 0.8"))
    assert run_cli(["sweep", "--config", cfg, "--out", tmp_path / "o"]) == 0
    csvs = sorted(p.name for p in (tmp_path / "o").glob("*.csv"))
    assert csvs == ["rightmostDrift.csv", "survival.csv"]
    lines = (tmp_path / "o" / "survival.csv").read_text().splitlines()
    assert len(lines) == 4
    assert "\r" not in (tmp_path / "o" / "survival.csv").read_text()


def test_empty_observables_give_summary_only(tmp_path):
    cfg = write_config(tmp_path, SMALL.replace("observables = survival, rightmostDrift", "observables ="))
    assert run_cli(["sweep", "--config", cfg, "--out", tmp_path / "o"]) == 0
    assert not list((tmp_path / "o").glob("*.csv"))
    assert (tmp_path / "o" / "summary.txt").exists()


def test_cache_reemit_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path)
    assert run_cli(["sweep", "--config", cfg, "--out", tmp_path / "a"]) == 0
    assert run_cli(["sweep", "--from-cache", tmp_path / "a" / "sweep.json", "--out", tmp_path / "b"]) == 0
    for name in ("survival.csv", "rightmostDrift.csv", "summary.txt", "config.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_all_observables(tmp_path):
    text = SMALL.replace("observables = survival, rightmostDrift",
                         "observables = " + ",".join(E.OBSERVABLES)) + "fa1f_sites = 40\nxi_radius = 20\n"
    assert run_cli(["sweep", "--config", write_config(tmp_path, text), "--out", tmp_path / "o"]) == 0
    for name in E.OBSERVABLES:
        assert (tmp_path / "o" / f"{name}.csv").exists()


def test_unwritable_output_fails_before_compute(tmp_path, capsys, monkeypatch):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    called = []
    monkeypatch.setattr(E, "run_sweep", lambda *a, **k: called.append(1))
    assert run_cli(["sweep", "--config", write_config(tmp_path), "--out", blocker / "sub"]) == 2
    assert not called
    assert "error" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    assert run_cli(["sweep", "--config", write_config(tmp_path, "bogus = 1\n"), "--out", tmp_path]) == 2
    assert "unknown key" in capsys.readouterr().err


# --- other commands -----------------------------------------------------------

def test_simulate_writes_event_log(tmp_path):
    assert run_cli(["simulate", "--q", 0.3, "--horizon", 2, "--radius", 10, "--out", tmp_path]) == 0
    ev = (tmp_path / "events.csv").read_text().splitlines()
    assert ev[0].startswith("# q=0.3") and ev[1] == "time,site,draw,new_state"
    assert len((tmp_path / "snapshot.csv").read_text().splitlines()) == 2 + 21


def test_ychain_command(tmp_path):
    assert run_cli(["ychain", "--grid", "0.01,0.1", "--out", tmp_path]) == 0
    rows = (tmp_path / "ychain.csv").read_text().splitlines()
    assert len(rows) == 3 and "fail" not in rows[1] + rows[2]


def test_verify_exit_codes(tmp_path, capsys, monkeypatch):
    assert run_cli(["verify", "invariants", "--scale", 0.05, "--out", tmp_path]) == 0
    out = capsys.readouterr().out
    assert "suite invariants: PASS" in out and "failures: []" in out
    data = json.loads((tmp_path / "verify_invariants.json").read_text())
    assert data["failures"] == []

    from tricontact import verify
    monkeypatch.setitem(verify.SUITES, "invariants",
                        lambda scale, seed, threads: [verify.Check("always red", False, "forced")])
    assert run_cli(["verify", "invariants"]) == 1
    out = capsys.readouterr().out
    assert 'failures: ["always red"]' in out


def test_fa1f_command(tmp_path):
    assert run_cli(["fa1f", "--q", 0.75, "--replicas", 20, "--times", "1,2", "--out", tmp_path]) == 0
    for name in ("xi_drift.csv", "discrepancy_density.csv", "wald.csv"):
        assert (tmp_path / name).exists()
