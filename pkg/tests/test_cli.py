import os

import pytest

from possession_ratings.cli import EXIT_CODES, main
from possession_ratings.config import read_header
from possession_ratings.errors import ConfigurationError

WORLD = ["--teams", "4", "--squad-size", "13", "--rounds", "6", "--possessions-per-match", "60",
         "--subs", "1"]
FAST = ["--lambda-grid", "5:1e-2", "--cv-folds", "3"]


def _text(path):
    with open(path, "rb") as f:
        return f.read()


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    sim, ing = str(root / "sim"), str(root / "ing")
    assert main(["simulate", "--out", sim, "--seed", "1"] + WORLD) == 0
    assert main(["ingest", "--events", f"{sim}/events.csv", "--rosters", f"{sim}/rosters.csv",
                 "--out", ing]) == 0
    return root, sim, ing


def test_simulate_and_ingest_outputs(world):
    _, sim, ing = world
    for name in ("events.csv", "rosters.csv", "matches.csv", "elo.csv", "truth.csv"):
        assert _text(os.path.join(sim, name)).startswith(b"# possession_ratings seed=1 ")
    for name in ("possessions.jsonl", "all_possessions.jsonl", "players.csv",
                 "possession_stats.csv"):
        assert os.path.exists(os.path.join(ing, name))


def test_group_lasso_fit_by_position(world, capsys):
    root, _, ing = world
    out = str(root / "gl")
    assert main(["fit", "--possessions", f"{ing}/possessions.jsonl", "--players",
                 f"{ing}/players.csv", "--penalty", "group_lasso", "--grouping", "position",
                 "--out", out] + FAST) == 0
    h = read_header(_text(f"{out}/fit.csv").decode())
    assert h["n_groups"] == 8 and h["grouping"] == "position" and h["converged"] is True
    assert "converged" in capsys.readouterr().out
    cv = [ln for ln in _text(f"{out}/cv_report.csv").decode().splitlines()
          if not ln.startswith("#")]
    assert cv[0] == "lambda,mean_deviance,se_deviance,fold_count,seed"
    assert len(cv) == 1 + 5


def test_fit_rate_validate_pipeline(world):
    root, sim, ing = world
    fit_dir, rate_dir, val_dir = (str(root / d) for d in ("ridge", "rate", "val"))
    assert main(["fit", "--possessions", f"{ing}/possessions.jsonl", "--players",
                 f"{ing}/players.csv", "--train-only", "--matches", f"{sim}/matches.csv",
                 "--split", "24", "--out", fit_dir] + FAST) == 0
    assert main(["rate", "--fit", f"{fit_dir}/fit.csv", "--out", rate_dir]) == 0
    for name in ("ratings.csv", "ratings_long.csv", "position_summary.csv", "comparison.csv"):
        assert os.path.exists(os.path.join(rate_dir, name))
    assert main(["validate", "--rosters", f"{sim}/rosters.csv", "--matches", f"{sim}/matches.csv",
                 "--elo", f"{sim}/elo.csv", "--ratings", f"ridge={rate_dir}/ratings.csv",
                 "--split", "24", "--out", val_dir]) == 0
    rows = _text(f"{val_dir}/results.csv").decode().splitlines()
    body = [r for r in rows if not r.startswith("#")][1:]
    names = {r.split(",")[0] for r in body}
    assert {"Baseline", "ELO", "ridge"} <= names
    assert os.path.exists(f"{val_dir}/pvalues.csv")


def test_leaky_ratings_refused(world, capsys):
    root, sim, ing = world
    fit_dir, rate_dir = str(root / "leak_fit"), str(root / "leak_rate")
    main(["fit", "--possessions", f"{ing}/possessions.jsonl", "--players", f"{ing}/players.csv",
          "--out", fit_dir] + FAST)
    main(["rate", "--fit", f"{fit_dir}/fit.csv", "--out", rate_dir])
    args = ["validate", "--rosters", f"{sim}/rosters.csv", "--matches", f"{sim}/matches.csv",
            "--ratings", f"ridge={rate_dir}/ratings.csv", "--split", "24"]
    capsys.readouterr()
    assert main(args + ["--out", str(root / "v_leak")]) == EXIT_CODES["E_INTEGRITY"]
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("E_INTEGRITY: ")
    assert main(args + ["--leaky-ratings", "--out", str(root / "v_ok")]) == 0


def test_validate_exclusive_lasso_uses_position_team(world):
    root, sim, ing = world
    out = str(root / "ex")
    assert main(["validate", "--rosters", f"{sim}/rosters.csv", "--matches", f"{sim}/matches.csv",
                 "--possessions", f"{ing}/possessions.jsonl", "--players", f"{ing}/players.csv",
                 "--penalty", "exclusive_lasso", "--split", "24", "--out", out] + FAST) == 0
    h = read_header(_text(f"{out}/exclusive_lasso_fit.csv").decode())
    assert h["grouping"] == "position_team"
    used = [ln for ln in _text(f"{out}/exclusive_lasso_fit.csv").decode().splitlines()
            if ln.startswith("# matches=")]
    assert len(used[0].split("=", 1)[1].split(";")) == 24


def test_reruns_byte_identical(world, tmp_path):
    _, _, ing = world
    outs = []
    for k in range(2):
        d = str(tmp_path / f"s{k}")
        assert main(["simulate", "--out", d, "--seed", "5"] + WORLD) == 0
        f = str(tmp_path / f"f{k}")
        assert main(["fit", "--possessions", f"{ing}/possessions.jsonl", "--players",
                     f"{ing}/players.csv", "--penalty", "lasso", "--seed", "2",
                     "--out", f] + FAST) == 0
        outs.append([_text(os.path.join(d, n)) for n in sorted(os.listdir(d))] +
                    [_text(os.path.join(f, n)) for n in sorted(os.listdir(f))])
    assert outs[0] == outs[1]


def test_check_subcommand(tmp_path):
    assert main(["check", "--instances", "1", "--out", str(tmp_path)]) == 0
    lines = _text(tmp_path / "check_report.csv").decode().splitlines()
    assert lines[1].startswith("instance,kind")
    assert all(ln.endswith(",True") for ln in lines[2:])


@pytest.mark.parametrize("argv, code", [
    (["fit", "--possessions", "/nonexistent.jsonl"], "E_CONFIG"),
    (["fit", "--possessions", "x", "--penalty", "elastic"], "E_CONFIG"),
    (["fit", "--possessions", "x", "--lambda-grid", "0:3"], "E_CONFIG"),
    (["simulate", "--goal-rate", "1.5"], "E_CONFIG"),
])
def test_error_codes(argv, code, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_CODES[code]
    err = capsys.readouterr().err.strip()
    assert err.startswith(f"{code}: ") and "\n" not in err


def test_malformed_events_exit_format(tmp_path, capsys):
    ev, ro = tmp_path / "e.csv", tmp_path / "r.csv"
    ev.write_text("not,a,valid,header\n1,2,3,4\n")
    ro.write_text("match_id,team,player_id,position\n")
    assert main(["ingest", "--events", str(ev), "--rosters", str(ro),
                 "--out", str(tmp_path)]) == EXIT_CODES["E_FORMAT"]
    assert capsys.readouterr().err.startswith("E_FORMAT: ")


def test_errors_are_configuration_errors():
    assert ConfigurationError("x").code == "E_CONFIG"
