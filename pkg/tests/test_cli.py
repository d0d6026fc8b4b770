import json
import math
from pathlib import Path

import numpy as np
import pytest

from cylflow import __version__, cli
from cylflow.errors import (ConfigurationError, GeometryError, InputError, ResolutionError,
                            StiffnessError)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _report(out):
    return json.loads((Path(out) / "report.json").read_text())


@pytest.fixture(scope="module")
def verify_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    code = cli.main(["verify", "--config", str(CONFIGS / "verify.ini"), "--out", str(out)])
    return code, _report(out)


def test_verify_default_passes(verify_run):
    code, rep = verify_run
    assert code == 0
    assert rep["status"] == "ok"
    entries = rep["result"]["identities"]
    assert len(entries) >= 12
    assert all(e["passed"] for e in entries)
    assert rep["result"]["failed"] == []


def test_verify_identity_orders(verify_run):
    _, rep = verify_run
    ladders = [e for e in rep["result"]["identities"] if e["fitted_order"] is not None and len(e["resolution"]) >= 3]
    assert ladders
    for e in ladders:
        assert e["fitted_order"] >= 3.5 or e["residual_L2"][-1] <= 1e-9


def test_report_metadata(verify_run):
    _, rep = verify_run
    assert rep["schema"] == cli.REPORT_SCHEMA
    assert rep["version"] == __version__
    assert rep["config_hash"] == cli.config_hash(rep["config"], rep["seed"])


def test_verify_below_resolution_floor(tmp_path):
    p = _write(tmp_path, "[grid]\nm_theta = 8\nm_y = 25\n")
    assert cli.main(["verify", "--config", str(p), "--out", str(tmp_path)]) == cli.EXIT_RESOLUTION
    rep = _report(tmp_path)
    assert rep["status"] == "error"
    assert rep["error"]["type"] == "ResolutionError"


def test_verify_hypersurface_P_vanishes(tmp_path):
    p = _write(tmp_path, "[grid]\nN = 3\nm_theta = 16\nm_y = 49\n")
    code, rep = cli.run("verify", p, tmp_path)
    P = [e for e in rep["result"]["identities"] if e["identity_name"].startswith("P_")]
    assert P
    assert all(e["residual_max"] <= 1e-8 for e in P)


@pytest.mark.parametrize("text", [
    "[grid]\nbogus = 1\n",
    "[nonsense]\nx = 1\n",
    "[grid]\nk = two\n",
    "[experiment]\ncommand = tail\n[grid]\n",
    "not an ini file",
])
def test_bad_config_exit_4(tmp_path, text, capsys):
    p = _write(tmp_path, text)
    assert cli.main(["verify", "--config", str(p), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "cylflow:" in capsys.readouterr().err


def test_missing_section(tmp_path):
    p = _write(tmp_path, "[grid]\n")
    with pytest.raises(ConfigurationError):
        cli.load_config(p, "evolve")


def test_missing_file(tmp_path):
    assert cli.main(["tail", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_bad_seed(tmp_path):
    assert cli.main(["rates", "--config", str(CONFIGS / "rates.ini"), "--out", str(tmp_path),
                     "--seed", "-1"]) == cli.EXIT_CONFIG


def test_loja_synthetic(tmp_path):
    code, rep = cli.run("loja", CONFIGS / "loja.ini", tmp_path)
    assert code == 0
    alpha = rep["result"]["audit"]["fit"]["alpha"]
    assert 0.45 <= alpha <= 0.55
    assert (tmp_path / "sequence.csv").exists()


def test_loja_reads_trace(tmp_path):
    j = np.arange(0, 40)
    F = 1.0 + (j + 1.0) ** -2.0
    rows = "\n".join(f"{t},{f},0,0,0,0,0" for t, f in zip(j, F))
    trace = _write(tmp_path, "t,F,tail_bound,phi_L2,phi_W12,U_L2,dt\n" + rows + "\n", "trace.csv")
    p = _write(tmp_path, f"[loja]\ntrace = {trace}\nF_inf = 1.0\n")
    code, rep = cli.run("loja", p, tmp_path / "out")
    assert code == 0
    assert rep["result"]["source"] == "trace"
    assert rep["result"]["audit"]["fit"]["alpha"] == pytest.approx(0.5, rel=0.1)


def test_tail(tmp_path):
    p = _write(tmp_path, "[tail]\nm = 2\nk_pow = 0 2\nR = 1.0 2.0\n")
    code, rep = cli.run("tail", p, tmp_path)
    assert code == 0
    assert rep["result"]["all_hold"]
    row = [r for r in rep["result"]["results"] if r.get("m") == 2 and r.get("k_pow") == 0 and r.get("R") == 2.0]
    assert len(row) == 1
    # gamma_1(2) = 2 exp(-1)
    gaps = [r for r in rep["result"]["results"] if "gamma_recursion" in r and r["R"] == 2.0][0]
    assert gaps["gamma_recursion"][1] == pytest.approx(2 * math.exp(-1), rel=1e-12)


def test_rates(tmp_path):
    code, rep = cli.run("rates", CONFIGS / "rates.ini", tmp_path)
    assert code == 0
    res = rep["result"]
    assert res["inequality_holds"]
    assert res["beta_threshold"] == pytest.approx(2 / 3)
    verdicts = {v["beta"]: v["verdict"] for v in res["summability"]}
    assert verdicts[0.8] == "summable"
    assert verdicts[0.6] != "summable"


def test_evolve_zero_data(tmp_path):
    p = _write(tmp_path, "[grid]\nm_theta = 16\nm_y = 49\n[initial]\n[stepper]\ndt = 0.25\nT_end = 2\n")
    code, rep = cli.run("evolve", p, tmp_path)
    assert code == 0
    data = np.genfromtxt(tmp_path / "trace.csv", delimiter=",", names=True)
    assert np.ptp(data["F"]) <= 1e-14
    assert rep["result"]["monotone"]


def test_evolve_modes(tmp_path):
    text = ("[grid]\nm_theta = 16\nm_y = 49\n[initial]\nmodes = n:cos2:gauss, z1:sin1:y2m2\n"
            "amplitudes = 0.02 0.01\nrandom_modes = 2\nseed = 3\n[stepper]\ndt = 0.1\nT_end = 2\n")
    p = _write(tmp_path, text)
    code, rep = cli.run("evolve", p, tmp_path)
    assert code == 0
    F = rep["result"]["samples"]["F"]
    assert F[0] > F[-1]
    assert rep["result"]["monotone"]


def test_initial_field_grammar(tmp_path):
    p = _write(tmp_path, "[grid]\nm_theta = 16\nm_y = 49\n[initial]\nmodes = n:cos7:wiggle\namplitudes = 1\n"
                         "[stepper]\n")
    cfg = cli.load_config(p, "evolve")
    with pytest.raises(ConfigurationError):
        cli.initial_field(cfg, 0)


def test_seed_changes_random_modes(tmp_path):
    p = _write(tmp_path, "[grid]\nm_theta = 16\nm_y = 49\n[initial]\nrandom_modes = 3\n[stepper]\n")
    cfg = cli.load_config(p, "evolve")
    a, b, c = (cli.initial_field(cfg, s).comps for s in (1, 1, 2))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert cli.config_hash(cfg, 1) != cli.config_hash(cfg, 2)


def test_reports_byte_identical(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert cli.main(["rates", "--config", str(CONFIGS / "rates.ini"), "--out", str(o)]) == 0
    for name in ("report.json", "sequence.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_exit_code_mapping():
    assert cli.exit_code_for(ResolutionError("x")) == 2
    assert cli.exit_code_for(StiffnessError("x")) == 2
    assert cli.exit_code_for(GeometryError("x")) == 3
    assert cli.exit_code_for(ConfigurationError("x")) == 4
    assert cli.exit_code_for(InputError("x")) == 1


def test_clean_nonfinite():
    out = cli._clean(dict(a=math.inf, b=np.float64(1.5), c=np.arange(2), d=(math.nan,)))
    assert out == dict(a="inf", b=1.5, c=[0, 1], d=["nan"])
    json.dumps(out)
