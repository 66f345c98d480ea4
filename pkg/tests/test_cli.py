import csv
import json

import numpy as np
import pytest

from robustmg.cli import loglog_slope, main, parse_int_list
from robustmg.core import JointActionSpace, RobustMarkovGame, load_game, save_game
from robustmg.instances import fishing_game


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def data_rows(text):
    return [r for r in csv.reader(l for l in text.splitlines() if not l.startswith("#"))][1:]


@pytest.fixture
def game_file(tmp_path, capsys):
    path = tmp_path / "g.json"
    assert run(["generate", "--states", 3, "--horizon", 3, "--actions", "2,2", "--sigma", 0.2,
                "--structure", "constant-sum", "--seed", 0, "--out", path], capsys)[0] == 0
    return path


def test_parse_int_list():
    assert parse_int_list("0-3") == [0, 1, 2, 3]
    assert parse_int_list("5,1,2-3") == [5, 1, 2, 3]


def test_loglog_slope_exact():
    ns = [4, 16, 64]
    assert loglog_slope(ns, [1 / n ** 0.5 for n in ns]) == pytest.approx(-0.5)


def test_fishing_command(capsys):
    code, out, _ = run(["fishing", "standard", "--seeds", "0-2"], capsys)
    assert code == 0
    res = json.loads(out)
    assert [r["constant_profile"] for r in res["results"]] == [[1, 1], [0, 0]]
    assert res["results"][0]["rollout_terminal_states"] == {"0": 100, "1": 100, "2": 100}
    assert res["results"][1]["rollout_terminal_states"] == {"0": 0, "1": 0, "2": 0}
    assert {"tool_version", "command", "config", "seeds"} <= set(res)
    code, out, _ = run(["fishing", "robust", "--sigma", 0.005], capsys)
    assert [r["constant_profile"] for r in json.loads(out)["results"]] == [[0, 0], [0, 0]]


def test_generate_validate_solve_eval(game_file, tmp_path, capsys):
    assert run(["validate", "--game", game_file], capsys)[0] == 0
    sol = tmp_path / "sol.json"
    assert run(["solve", "--game", game_file, "--kind", "nash", "--out", sol], capsys)[0] == 0
    solved = json.loads(sol.read_text())
    assert np.asarray(solved["v"]).shape == (2, 4, 3)
    code, out, _ = run(["eval", "--game", game_file, "--policy", sol], capsys)
    assert code == 0
    ev = json.loads(out)
    assert ev["gaps"]["ne"] <= 1e-8
    assert np.allclose(ev["v"], solved["v"], atol=1e-8)


def test_solve_fishing_export(tmp_path, capsys):
    path = tmp_path / "fish.json"
    save_game(fishing_game(0.049, 4).to_game(0.0), path)
    code, out, _ = run(["solve", "--game", path], capsys)
    assert code == 0
    assert {tuple(p) for row in json.loads(out)["pure_profiles"] for p in row} == {(1, 1)}


def test_malformed_json_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"horizon": 1,\n "kernel": [1, 2,]}')
    code, _, err = run(["validate", "--game", bad], capsys)
    assert code == 2 and "line 2, column" in err


def test_invalid_kernel_exit_code(game_file, capsys):
    d = json.loads(game_file.read_text())
    d["kernel"][0][0][0][0] += 0.1
    game_file.write_text(json.dumps(d))
    code, _, err = run(["solve", "--game", game_file], capsys)
    assert code == 2 and "h=0, s=0, a=0" in err


def test_intractable_exit_code(tmp_path, capsys):
    u = np.array([[[1, 0], [0, 1]], [[0, 1], [1, 0]]], dtype=float).ravel()
    reward = np.stack([u, 1 - u, np.full(8, 0.5)])[:, None, None, :]
    g = RobustMarkovGame(1, 1, JointActionSpace((2, 2, 2)), reward, np.ones((1, 1, 8, 1)), np.zeros(3))
    path = tmp_path / "three.json"
    save_game(g, path)
    assert run(["solve", "--game", path, "--kind", "nash"], capsys)[0] == 4
    assert run(["solve", "--game", path, "--kind", "cce"], capsys)[0] == 0


def test_hard_instance_command(capsys):
    code, out, _ = run(["hard-instance", "--horizon", 12, "--sigma", 0.1, "--eps", 0.5], capsys)
    rep = json.loads(out)["report"]
    assert code == 0
    assert rep["policy_matches_before_last_step"] and rep["last_step_all_actions_tie"]
    assert rep["max_gap_error"] <= 1e-10 and rep["ordering_holds"]
    assert run(["hard-instance", "--sigma", 0.9], capsys)[0] == 2


def test_sweep_rows_and_reproducibility(game_file, capsys):
    argv = ["sweep", "--game", game_file, "--kind", "cce", "--n-list", "32", "--seeds", "0-1", "--no-timing"]
    code, first, _ = run(argv, capsys)
    assert code == 0
    rows = data_rows(first)
    assert len(rows) == 3 and rows[-1][:2] == ["summary", "loglog_slope_median_gap"]
    assert first.splitlines()[4] == "N,seed,gap_cce,wall_ms"
    assert run(argv, capsys)[1] == first
    parallel = run(argv + ["--workers", "2"], capsys)[1]
    assert data_rows(parallel) == rows


def test_seed_env_var(game_file, monkeypatch, capsys):
    monkeypatch.setenv("RMG_SOLVE_SEED", "5")
    a = run(["generate", "--states", 2, "--horizon", 1], capsys)[1]
    b = run(["generate", "--states", 2, "--horizon", 1, "--seed", 5], capsys)[1]
    assert a == b
    out = run(["sweep", "--game", game_file, "--n-list", "16", "--no-timing"], capsys)[1]
    assert "# seeds: 5" in out


def test_sigma_sweep_matches_sweep_point(game_file, capsys):
    common = ["--game", game_file, "--kind", "nash", "--gap", "cce", "--seeds", "0-2", "--no-timing"]
    sweep = data_rows(run(["sweep", *common, "--n-list", "64", "--sigma", 0.0], capsys)[1])
    sig = data_rows(run(["sigma-sweep", *common, "--n", 64, "--sigma-list", "0"], capsys)[1])
    assert [r[2] for r in sweep[:3]] == [r[3] for r in sig[:3]]
    assert sig[-1][0] == "median"


def test_sigma_sweep_trend(tmp_path, capsys):
    path = tmp_path / "cs.json"
    run(["generate", "--structure", "constant-sum", "--sigma", 0.2, "--seed", 0, "--out", path], capsys)
    horizon = load_game(path).horizon
    out = run(["sigma-sweep", "--game", path, "--kind", "nash", "--gap", "cce", "--n", 256,
               "--sigma-list", f"{1 / horizon},0.5", "--seeds", "0-9", "--no-timing"], capsys)[1]
    medians = {float(r[1]): float(r[3]) for r in data_rows(out) if r[0] == "median"}
    assert medians[0.5] <= medians[1 / horizon]
