import json

import pytest

from mvi import generators
from mvi.cli import main
from mvi.mdp import Policy, load, save


@pytest.fixture
def four_file(tmp_path):
    path = tmp_path / "four.json"
    path.write_bytes(save(generators.gen_four_state(0.25)))
    return path


def test_validate(four_file, capsys):
    assert main(["validate", str(four_file)]) == 0
    assert "4 states" in capsys.readouterr().out


def test_validate_rejects_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_states": 1, "states": [{"actions": [{"probs": [0.5], "reward": 0}]}]}))
    assert main(["validate", str(bad)]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.json")]) == 1


def test_analyze(four_file, tmp_path, capsys):
    assert main(["analyze", str(four_file)]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["ground_truth"]["rho_star"] == pytest.approx([1.0, 0.75, 0.0, 1.0])
    assert data["complexity"]["b"] == pytest.approx(1.0)
    pol = tmp_path / "pi.json"
    pol.write_text(json.dumps(Policy.deterministic([0, 0, 0, 1]).to_dict()))
    assert main(["analyze", str(four_file), "--policy", str(pol)]) == 0
    assert json.loads(capsys.readouterr().out)["chain"]["gain"][3] == pytest.approx(0.75)


@pytest.mark.parametrize("alg", ["vi", "alg1", "alg2", "alg3", "baseline"])
def test_solve(four_file, tmp_path, alg):
    out = tmp_path / f"{alg}.json"
    assert main(["solve", str(four_file), "--alg", alg, "--n", "20", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert len(data["output_policy"]["actions"]) == 4
    if alg != "baseline":
        # the baseline's horizon at n=20 is about 3 steps, too short to see the better loop
        assert data["output_policy"]["actions"] == [0, 0, 0, 0]


def test_certify(four_file, tmp_path, capsys):
    report = tmp_path / "checks.json"
    assert main(["certify", str(four_file), "--n-grid", "2,10", "--json", str(report)]) == 0
    assert "PASS" in capsys.readouterr().out
    assert json.loads(report.read_text())["passed"] is True
    assert main(["certify", str(four_file), "--n-grid", "x"]) == 2


def test_gen(tmp_path):
    out = tmp_path / "m.json"
    assert main(["gen", "mkt", "--k", "3", "--T", "4", "--eps", "0.1", "--out", str(out)]) == 0
    assert load(out.read_bytes()) == generators.gen_mkt(3, 4.0, 0.1, 0)
    assert main(["gen", "four-state", "--eps", "2", "--out", str(out)]) == 1


def test_bench(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instance": {"kind": "four-state", "eps": 0.5}, "algorithms": ["vi", "alg1"],
                               "n": 10, "out_dir": str(tmp_path / "out")}))
    assert main(["bench", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "alg1_seed0.csv").exists()
    cfg.write_text(json.dumps({"instance": {"kind": "four-state", "eps": 0.5}, "algorithms": [], "n": 10}))
    assert main(["bench", "--config", str(cfg)]) == 1


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["solve"])
    assert info.value.code == 2
