import json
import os

import numpy as np
import pytest

from sicomore.cli import main
from sicomore.errors import ConfigError, StageError
from sicomore.model import Response, load_dataset, load_response
from sicomore.pipeline import OUTPUT_FILES, PipelineConfig, fit_sicomore, load_config, run_pipeline
from sicomore.simulate import simulate_scenario


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "7", "--out", str(d)]) == 0
    return d


def _cfg(sim_dir, out, **kw):
    return PipelineConfig(x_G=str(sim_dir / "x_G.tsv"), x_M=str(sim_dir / "x_M.tsv"), y=str(sim_dir / "y.tsv"),
                          out=str(out), **kw)


def test_simulate_outputs(sim_dir):
    truth = json.loads((sim_dir / "truth.json").read_text())
    assert isinstance(truth, dict) and truth
    assert load_dataset(str(sim_dir / "x_G.tsv")).values.shape == (100, 200)
    assert load_dataset(str(sim_dir / "x_M.tsv")).values.shape == (100, 100)
    assert len(load_response(str(sim_dir / "y.tsv"))) == 100


def test_run_is_nonempty_and_byte_identical(sim_dir, tmp_path):
    r1, m1 = run_pipeline(_cfg(sim_dir, tmp_path / "a"))
    r2, _ = run_pipeline(_cfg(sim_dir, tmp_path / "b"))
    assert r1.report.n_hits > 0
    assert sorted(os.listdir(tmp_path / "a")) == sorted(OUTPUT_FILES)
    for name in ("report.tsv", "report.json", "groups_G.json", "groups_M.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    total = sum(m1["timings"].values())
    assert abs(total - m1["total_seconds"]) <= 0.05 * m1["total_seconds"]
    assert m1["config_sha256"] == _cfg(sim_dir, tmp_path / "a").digest()


def test_missing_view_m_reports_stage(sim_dir, tmp_path, capsys):
    cfg = _cfg(sim_dir, tmp_path / "o")
    cfg = PipelineConfig.from_mapping({**cfg.to_dict(), "x_M": str(tmp_path / "nope.tsv")})
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "load:view-M"
    code = main(["run", "--x-G", cfg.x_G, "--x-M", cfg.x_M, "--y", cfg.y, "--out", cfg.out])
    assert code == 3
    assert "load:view-M" in capsys.readouterr().err
    assert not os.path.exists(os.path.join(cfg.out, "report.tsv"))


def test_config_file_and_flag_override(sim_dir, tmp_path):
    conf = tmp_path / "run.toml"
    conf.write_text(f'x_G = "{sim_dir / "x_G.tsv"}"\nx_M = "{sim_dir / "x_M.tsv"}"\ny = "{sim_dir / "y.tsv"}"\n'
                    f'out = "{tmp_path / "cfg"}"\nalpha = 0.01\nselect = "bic"\n')
    assert load_config(str(conf))["alpha"] == 0.01
    assert main(["run", "--config", str(conf), "--alpha", "0.1"]) == 0
    manifest = json.loads((tmp_path / "cfg" / "manifest.json").read_text())
    assert manifest["config"]["alpha"] == 0.1 and manifest["config"]["select"] == "bic"


def test_bad_config_exit_code(tmp_path):
    conf = tmp_path / "bad.toml"
    conf.write_text('colour = "red"\n')
    assert main(["run", "--config", str(conf)]) == 2
    conf.write_text("[section]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(str(conf))
    assert main(["run", "--alpha", "2", "--x-G", "a", "--x-M", "b", "--y", "c"]) == 2


def test_shuffled_response_rarely_hits():
    sc = simulate_scenario(100, 0.5, 5, seed=7)
    rng = np.random.default_rng(2024)
    runs = 100
    clean = sum(fit_sicomore(sc.x_G, sc.x_M, Response(rng.permutation(sc.y.y))).report.n_hits == 0
                for _ in range(runs))
    assert clean >= 95


def test_theorem_check_cli(capsys):
    assert main(["theorem-check", "--rho", "0.995", "--n-mc", "500"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert np.isclose(out["predicted_threshold"], 0.98)
    assert out["mse_averaged"] < out["mse_ols"]


def test_explore_cli(sim_dir, tmp_path, capsys):
    code = main(["explore", "--x-G", str(sim_dir / "x_G.tsv"), "--x-M", str(sim_dir / "x_M.tsv"),
                 "--y", str(sim_dir / "y.tsv"), "--level-step", "40", "--out", str(tmp_path)])
    assert code == 0
    trace = capsys.readouterr().out.splitlines()
    assert trace[0] == "k\tl\tcriterion\tn_active"
    best = json.loads((tmp_path / "explore_best.json").read_text())
    assert best["n_visited"] == len(trace) - 1
