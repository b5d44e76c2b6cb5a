import json
import math

import numpy as np
import pytest

from sgfluid import harness
from sgfluid.cli import main
from sgfluid.results import ResultTable, RunManifest, dumps_report, write_text

SMALL_SWEEP = dict(alpha_grid=(0.2, 0.1), M=2, n=33, N=8, n_stokes=16, K=2, T=0.02, dt=1e-3, save_stride=5)
SMALL_ENERGY = dict(n=33, N=8, n_stokes=24, K=2, T=0.02, M=2, remainder_N=(6, 10), remainder_states=3)
SMALL_ADDITIVE = dict(n=33, N=8, n_stokes=16, K=2, dt=1e-3, T=0.01, M=3, save_stride=5, bin_steps=5)


# configuration


def test_default_configs_match_documented_values():
    cfgs = harness.load_config()
    assert cfgs["sweep"].alpha_grid == (0.2, 0.1, 0.05, 0.025) and cfgs["sweep"].M == 32
    assert cfgs["sweep"].coupling == "shared_paths"
    assert cfgs["corrector"].n == 129 and cfgs["additive"].M == 64
    assert set(cfgs) == set(harness.SECTIONS)


def test_ini_overrides_and_case(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[sweep]\nalpha_grid = 0.4, 0.2\nM = 3\ncoupling = independent\n[energy]\nT = 0.25\n")
    cfgs = harness.load_config(p)
    assert cfgs["sweep"].alpha_grid == (0.4, 0.2) and cfgs["sweep"].M == 3
    assert cfgs["sweep"].coupling == "independent" and cfgs["energy"].T == 0.25
    assert cfgs["corrector"] == harness.CorrectorConfig()


@pytest.mark.parametrize("text", ["[sweep]\nbogus = 1\n", "[sweeps]\nM = 1\n", "[sweep]\nm = 4\n"])
def test_ini_unknown_keys_and_sections(text):
    with pytest.raises(KeyError):
        harness.load_config(text=text)


@pytest.mark.parametrize("text", ["[sweep]\nalpha_grid = 0.1, 0.2\n", "[sweep]\nM = 0\n",
                                  "[sweep]\ncoupling = mixed\n", "[corrector]\nalpha_grid = -1\n"])
def test_ini_invalid_values(text):
    with pytest.raises(ValueError):
        harness.load_config(text=text)


def test_with_seed_and_config_dict():
    c = harness.with_seed(harness.SweepConfig(), 99)
    assert c.seed == 99 and harness.with_seed(c, None) is c
    assert harness.with_seed(harness.CorrectorConfig(), 5) == harness.CorrectorConfig()
    d = harness.config_dict(c)
    assert d["alpha_grid"] == [0.2, 0.1, 0.05, 0.025]
    assert json.loads(json.dumps(d)) == d


# persistence


def test_result_table_round_trip():
    t = ResultTable(["a", "b", "c"])
    t.add(a=0.1, b=3, c=float("nan"))
    t.add(a=1 / 3, b=-2, c=1e-300)
    back = ResultTable.from_csv(t.to_csv())
    assert back.equals(t) and back.to_csv() == t.to_csv()
    with pytest.raises(KeyError):
        t.add(a=1.0)


def test_empty_table_and_csv():
    t = ResultTable(["x"])
    assert len(t) == 0 and t.to_csv() == "x\n"
    assert ResultTable.from_csv(t.to_csv()).equals(t)
    with pytest.raises(ValueError):
        ResultTable.from_csv("")


def test_manifest_round_trip_and_checksums(tmp_path):
    m = RunManifest("sweep", {"a": [1, 2]}, seeds={"seed": 1}, notes={"x": np.float64(0.5)})
    back = RunManifest.from_json(m.to_json())
    assert back.to_json() == m.to_json()
    h1 = write_text(tmp_path / "a.txt", "hello\n")
    h2 = write_text(tmp_path / "b.txt", "hello\n")
    assert h1 == h2 == "5891b5b522d5df086d0ff0b110fbd9d21bb4fc7163af34d08286a2e846f6be03"
    assert dumps_report({"v": math.inf}) == dumps_report({"v": math.inf})


def test_emit_results_index(tmp_path):
    t = ResultTable(["x"])
    t.add(x=1.0)
    m = RunManifest("corrector", {})
    idx = harness.emit_results(t, m, tmp_path, report={"flags": {}})
    assert set(idx) == {"corrector.csv", "corrector.json", "corrector.manifest.json"}
    saved = RunManifest.from_json((tmp_path / "corrector.manifest.json").read_text())
    assert saved.outputs == {k: v for k, v in idx.items() if not k.endswith("manifest.json")}


# invariant suite


def test_invariant_suite_passes_and_sabotage_fails():
    ok = harness.run_invariant_suite(harness.CheckConfig(samples=5, steps=10))
    assert ok["passed"] and len(ok["checks"]) >= 10
    bad = harness.run_invariant_suite(harness.CheckConfig(samples=5, steps=10), sabotage=True)
    assert not bad["passed"]
    failed = {c["name"] for c in bad["checks"] if not c["passed"]}
    assert "trilinear_skew" in failed


# experiments at toy size


def test_sweep_small_shared_and_independent():
    t, man, per_path = harness.run_inviscid_sweep(harness.SweepConfig(**SMALL_SWEEP))
    assert t.columns == harness.SWEEP_COLUMNS and len(t) == 2
    assert man.path_counts and set(t.flags) >= {"err_decreasing_2se", "ratio_ok", "h3_within_factor_10",
                                                "grad_decreasing"}
    ti, mani, _ = harness.run_inviscid_sweep(harness.SweepConfig(**SMALL_SWEEP, coupling="independent"))
    assert ti.column("alpha") == t.column("alpha")
    assert mani.config["coupling"] == "independent"
    assert harness._path_ids(harness.SweepConfig(coupling="independent"), 1) != \
        harness._path_ids(harness.SweepConfig(coupling="independent"), 0)
    assert harness._path_ids(harness.SweepConfig(), 1) == harness._path_ids(harness.SweepConfig(), 0)


def test_sweep_single_path_noise_off_lane():
    t, _, _ = harness.run_inviscid_sweep(harness.SweepConfig(**{**SMALL_SWEEP, "M": 1, "c_nu_tilde": 0.0}))
    assert t.column("nu_tilde") == [0.0, 0.0]
    assert all(b == 0 for b in t.column("blown_up"))


def test_energy_small():
    report, man = harness.run_energy_experiment(harness.EnergyConfig(**SMALL_ENERGY))
    assert report["flags"]["midpoint_ok"]
    assert man.experiment == "energy"


def test_corrector_small():
    t, man = harness.run_corrector_diagnostics(harness.CorrectorConfig(alpha_grid=(0.4, 0.2), n=65))
    assert t.columns == harness.CORRECTOR_COLUMNS and len(t) == 2
    v = t.column("v_norm")
    assert v[1] < v[0]


def test_corrector_skips_underresolved():
    with pytest.warns(UserWarning):
        t, _ = harness.run_corrector_diagnostics(harness.CorrectorConfig(alpha_grid=(0.2, 0.05), n=33))
    assert len(t) == 1


def test_corrector_scale_is_linear():
    a, _ = harness.run_corrector_diagnostics(harness.CorrectorConfig(alpha_grid=(0.4, 0.2), n=65))
    b, _ = harness.run_corrector_diagnostics(harness.CorrectorConfig(alpha_grid=(0.4, 0.2), n=65, scale=2.0))
    assert np.allclose(b.column("v_norm"), 2 * np.array(a.column("v_norm")), rtol=1e-12)


def test_additive_small():
    report, man = harness.run_additive_experiment(harness.AdditiveConfig(**SMALL_ADDITIVE))
    assert "equivalence" in report and "energy_law" in report
    assert man.experiment == "additive"


def test_run_experiment_rejects_unknown():
    with pytest.raises(ValueError):
        harness.run_experiment("nope", None)


def test_rerun_is_byte_identical(tmp_path):
    cfg = harness.CorrectorConfig(alpha_grid=(0.4, 0.2), n=65)
    table, report, man = harness.run_experiment("corrector", cfg)
    first = harness.emit_results(table, man, tmp_path / "a", report=report)
    second = harness.rerun_manifest(tmp_path / "a" / "corrector.manifest.json", tmp_path / "b")
    assert first == second
    for name in first:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# CLI


def test_cli_check_and_sabotage(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[check]\nsamples = 4\nsteps = 5\n")
    assert main(["check", "--config", str(ini), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    assert "PASS trilinear_skew" in out and "FAIL" not in out
    assert main(["check", "--sabotage", "--config", str(ini), "--out", str(tmp_path / "o2")]) == 1
    assert "FAIL trilinear_skew" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[sweep]\nwhatever = 1\n")
    assert main(["sweep", "--config", str(bad)]) == 2
    assert "sgfluid: error:" in capsys.readouterr().err
    assert main(["rerun", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_cli_eig(tmp_path, capsys):
    assert main(["eig", "--n", "17", "--N", "4", "--cache", str(tmp_path)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert len(d["eigenvalues"]) == 4 and d["eigenvalues"] == sorted(d["eigenvalues"])


def test_cli_simulate_and_rerun(tmp_path, capsys):
    ini = tmp_path / "s.ini"
    ini.write_text("[simulate]\nn = 33\nT = 0.02\nN = 8\nn_stokes = 16\n")
    assert main(["simulate", "--config", str(ini), "--seed", "3", "--out", str(tmp_path / "a")]) == 0
    man = json.loads((tmp_path / "a" / "simulate.manifest.json").read_text())
    assert man["seeds"]["seed"] == 3
    assert main(["rerun", str(tmp_path / "a" / "simulate.manifest.json"), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "simulate.csv").read_bytes() == (tmp_path / "b" / "simulate.csv").read_bytes()


@pytest.mark.parametrize("kind,kw", [("sweep", SMALL_SWEEP), ("energy", SMALL_ENERGY),
                                     ("additive", SMALL_ADDITIVE)])
def test_rerun_small_experiments_byte_identical(kind, kw, tmp_path):
    cfg = harness.SECTIONS[kind](**kw)
    table, report, man = harness.run_experiment(kind, cfg)
    first = harness.emit_results(table, man, tmp_path / "a", report=report)
    assert harness.rerun_manifest(tmp_path / "a" / f"{kind}.manifest.json", tmp_path / "b") == first
