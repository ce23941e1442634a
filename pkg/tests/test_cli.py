import json
import math

import numpy as np
import pytest
from scipy import stats

from doubly_scenery import cli
from doubly_scenery.config import PRESETS, ExperimentConfig, load_config, preset
from doubly_scenery.experiments import (
    run_check_conditions,
    run_simulate,
    run_verify_cf,
    run_verify_scaling,
)
from doubly_scenery.stable import ParameterError

SMALL = {
    "params": {"alpha": 1.0, "beta": 2.0, "gamma": 2.0, "kappa": 1.1},
    "n_grid": [64, 256, 1024],
    "c_n": 16,
    "times": [1.0, 2.0],
    "theta_vectors": [[1.0, 0.0], [2.0, 0.0], [1.0, -1.0]],
    "replicas": 200,
    "root_seed": 11,
}


def write_config(tmp_path, **changes):
    data = {**SMALL, "out_dir": str(tmp_path / "out"), **changes}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], lines[1], [l.split(",") for l in lines[2:]]


def test_simulate_empty_run(tmp_path):
    cfg = write_config(tmp_path, replicas=0)
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    head, header, rows = read_csv(tmp_path / "out" / "gn_samples.csv")
    assert head == "# doubly-scenery v1" and header == "replica,n,t,value" and rows == []


def test_simulate_is_deterministic_and_thread_free(tmp_path):
    cfg = write_config(tmp_path, replicas=30, n_grid=[512, 1024, 4096], c_n=64)
    outs = []
    for i, threads in enumerate(("1", "1", "3")):
        out = tmp_path / f"run{i}"
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(out),
                         "--threads", threads]) == 0
        outs.append((out / "gn_samples.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "s"),
                     "--seed", "12"]) == 0
    assert (tmp_path / "s" / "gn_samples.csv").read_bytes() != outs[0]


def test_simulate_two_step_values_are_enumerable(tmp_path):
    cfg = write_config(tmp_path, n_grid=[2], c_n=1, times=[1.0], theta_vectors=[[1.0]],
                       replicas=20000, check_law_indices=False,
                       laws={"step": "rademacher", "xi": "rademacher",
                             "y": {"kind": "constant", "value": 1}})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    _, _, rows = read_csv(tmp_path / "out" / "gn_samples.csv")
    vals = np.array([float(r[3]) for r in rows])
    # two distinct sites with one visit each: Z in {-2, 0, 2} w.p. 1/4, 1/2, 1/4
    r2 = 2 ** 0.75
    table = {-2 / r2: 0.25, 0.0: 0.5, 2 / r2: 0.25}
    assert set(np.round(vals, 12)) <= set(np.round(list(table), 12))
    observed = [np.sum(np.isclose(vals, v)) for v in table]
    expected = [p * vals.size for p in table.values()]
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_verify_cf_zero_vector_and_marginal_ratio(tmp_path):
    cfg = ExperimentConfig.from_dict({
        **SMALL, "n_grid": [1024], "c_n": 64, "replicas": 400, "times": [1.0],
        "theta_vectors": [[0.0], [1.0], [2.0]], "out_dir": str(tmp_path)})
    report, _ = run_verify_cf(cfg)
    rows = report["vectors"]
    assert rows[0]["status"] == "skipped"
    ratio = rows[2]["neg_log_cf"] / rows[1]["neg_log_cf"]
    assert ratio == pytest.approx(2.0 ** cfg.sim_params.alpha, rel=0.1)
    saved = json.loads((tmp_path / "cf_report.json").read_text())
    assert saved["config"] == cfg.to_dict()


def test_report_reruns_from_embedded_config(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "replicas": 300, "out_dir": str(tmp_path / "a")})
    first, _ = run_verify_scaling(cfg)
    again = load_config(tmp_path / "a" / "scaling_report.json")
    assert again == cfg
    second, _ = run_verify_scaling(again)
    assert first == second


def test_verify_scaling_reports_hurst(tmp_path):
    cfg = ExperimentConfig.from_dict({**SMALL, "out_dir": str(tmp_path)})
    report, _ = run_verify_scaling(cfg)
    assert report["hurst"] == 0.75
    assert 0 <= report["ks"]["pvalue"] <= 1
    bad = cfg.replace(times=[1.0, 3.0], theta_vectors=[[1.0, 0.0]])
    with pytest.raises(ParameterError):
        run_verify_scaling(bad)


def test_check_conditions_gaussian_strategy(tmp_path):
    cfg = ExperimentConfig.from_dict({
        **SMALL, "params": {"alpha": 1.5, "beta": 2.0, "gamma": 2.0, "kappa": 1.1},
        "laws": {"y": {"kind": "gaussian"}}, "replicas": 1000, "c_n": 64,
        "cond_replicas": 5000, "out_dir": str(tmp_path)})
    body, passed = run_check_conditions(cfg)
    verdicts = {c["criterion"]: c["verdict"] for c in body["checks"]}
    assert verdicts["cf_near_zero"] == verdicts["cf_tail_integral"] == "satisfied"
    assert verdicts["cond_moments"] == "satisfied"
    assert passed
    saved = json.loads((tmp_path / "conditions.json").read_text())
    assert saved["experiment"] == "check-conditions"


def test_check_conditions_pareto_strategy_moments(tmp_path):
    cfg = ExperimentConfig.from_dict({
        **SMALL, "params": {"alpha": 1.0, "beta": 2.0, "gamma": 1.5, "kappa": 1.1},
        "n_grid": [64, 128, 256], "replicas": 1000, "cond_replicas": 10 ** 5,
        "out_dir": str(tmp_path)})
    body, _ = run_check_conditions(cfg)
    verdicts = {c["criterion"]: c["verdict"] for c in body["checks"]}
    assert verdicts["cond_moments"] == "satisfied"
    assert verdicts["cf_near_zero"] == "not applicable"


def test_invalid_domain_is_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, params={"alpha": 1.9, "beta": 2.0, "gamma": 2.0,
                                         "kappa": 1.1})
    assert cli.main(["check-conditions", "--config", str(cfg)]) == 1
    assert "alpha*kappa" in capsys.readouterr().err


def test_unknown_keys_are_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, replicaz=3)
    assert cli.main(["simulate", "--config", str(cfg)]) == 1
    assert "replicaz" in capsys.readouterr().err
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({**SMALL, "params": {**SMALL["params"], "delta": 1}})
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({**SMALL, "laws": {"walk": "rademacher"}})


def test_verdict_failure_exit_code(tmp_path):
    cfg = write_config(tmp_path, cf_tolerance=0.0, n_grid=[256], times=[1.0],
                       theta_vectors=[[1.0], [2.0]])
    assert cli.main(["verify-cf", "--config", str(cfg)]) == 2


def test_oracle_test_small_preset(tmp_path):
    cfg = preset("oracle-small").replace(replicas=20000, out_dir=str(tmp_path))
    assert cli.main(["oracle-test", "--config", str(write_json(tmp_path, cfg))]) == 0
    assert cli.main(["oracle-test", "--preset", "paper-desk", "--out", str(tmp_path)]) == 1


def write_json(tmp_path, cfg):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    return p


def test_toml_config(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('n_grid = [64, 128, 256]\nc_n = 4\ntimes = [1.0]\n'
                 'theta_vectors = [[1.0]]\nreplicas = 5\nroot_seed = 1\n'
                 '[params]\nalpha = 1.0\nbeta = 2.0\ngamma = 2.0\n')
    cfg = load_config(p)
    assert cfg.n_grid == [64, 128, 256] and cfg.sim_params.kappa == 1.1


def test_presets_are_valid_and_round_trip():
    for name in PRESETS:
        cfg = preset(name)
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    desk = preset("paper-desk")
    assert desk.n_grid == [1024, 4096, 16384] and desk.c_n == 256 and desk.replicas == 2000
    with pytest.raises(ParameterError):
        preset("nope")


def test_usage_errors():
    assert cli.main(["launch"]) == 1
    assert cli.main(["simulate", "--config", "a.json", "--preset", "paper-desk"]) == 1
    assert cli.main(["simulate", "--preset", "paper-desk", "--threads", "0"]) == 1
