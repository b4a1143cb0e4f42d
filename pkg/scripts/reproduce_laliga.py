"""Full-season La Liga run: possession counts and the predictive-loss table.

Expects a directory holding the public Wyscout files ``events_Spain.json``,
``matches_Spain.json``, ``players.json`` and ``teams.json``, plus ``elo.csv``
exported from club ELO (club names must match ``teams.json``).

    python3 scripts/reproduce_laliga.py DATA_DIR --out results/laliga
"""
from __future__ import annotations

import argparse
import json
import os
import time

from possession_ratings import workflow
from possession_ratings.config import GridSpec
from possession_ratings.events import parse_wyscout_rosters
from possession_ratings.possessions import possession_stats
from possession_ratings.validation import (attach_lineups, parse_elo, parse_wyscout_matches,
                                           run_protocol)
from possession_ratings.validation.protocol import training_match_ids

TARGET_POSSESSIONS = 53233
TARGET_GOAL_RATE = 0.013
# OLR (BS, IL) of the published table
PUBLISHED_OLR = {
    "ridge sum": (0.576, 1.398), "ridge std_avg": (0.574, 1.392),
    "group_lasso sum": (0.566, 1.381), "group_lasso std_avg": (0.569, 1.387),
    "exclusive_lasso sum": (0.577, 1.401), "exclusive_lasso std_avg": (0.577, 1.403),
    "generalized_lasso sum": (0.611, 1.470), "generalized_lasso std_avg": (0.596, 1.443),
    "ELO": (0.638, 1.525), "Baseline": (0.636, 1.521),
}
KINDS = ("ridge", "group_lasso", "exclusive_lasso", "generalized_lasso")


def _read(data_dir, name):
    with open(os.path.join(data_dir, name), "rb") as f:
        return f.read()


def reproduce(data_dir, split=280, folds=10, grid="50:1e-4", train_only=True, seed=0,
              kinds=KINDS, log=print):
    """Run ingest, fitting and validation; return a summary dict."""
    t0 = time.time()
    matches_json = _read(data_dir, "matches_Spain.json")
    rosters = parse_wyscout_rosters(matches_json, _read(data_dir, "players.json"))
    res = workflow.ingest(_read(data_dir, "events_Spain.json"), b"", "wyscout_v2",
                          roster_list=rosters)
    st = possession_stats(res.valuable)
    log(f"{st.count} valuable possessions, goal rate {st.goal_rate:.4f} "
        f"({time.time() - t0:.0f}s)")
    matches = attach_lineups(parse_wyscout_matches(matches_json, _read(data_dir, "teams.json")),
                             rosters)
    elo = parse_elo(_read(data_dir, "elo.csv"))
    ids = training_match_ids(matches, split) if train_only else None
    matrix = workflow.design(res.valuable, res.registry, ids)
    models = {}
    for kind in kinds:
        grouping = "position_team" if kind == "exclusive_lasso" else None
        spec = workflow.penalty_spec(kind, res.registry, matrix, grouping)
        fit, _ = workflow.select_and_fit(matrix, spec, None, GridSpec.parse(grid), folds, seed)
        models[kind] = fit.pairs()
        log(f"{kind}: lambda={fit.lam:.4g} converged={fit.converged} ({time.time() - t0:.0f}s)")
    table = run_protocol(matches, models, elo, split)
    olr = {(s if c == "-" else f"{s} {c}"): (bs, il)
           for s, c, pm, bs, il in table.rows if pm == "OLR"}
    return {"n_possessions": st.count, "goal_rate": st.goal_rate, "n_players": len(res.registry),
            "n_matches": len(matches), "olr": olr, "rows": table.rows, "table": table}


def acceptance(summary) -> dict:
    """Named pass/fail checks of a reproduction summary."""
    olr = summary["olr"]
    fitted = [k for k in olr if k.split()[0] in KINDS]
    refs = [olr["Baseline"], olr["ELO"]]
    best = min(olr, key=lambda k: olr[k][0])
    return {
        "possession count within 2%":
            abs(summary["n_possessions"] - TARGET_POSSESSIONS) <= 0.02 * TARGET_POSSESSIONS,
        "goal rate within 0.2 points": abs(summary["goal_rate"] - TARGET_GOAL_RATE) <= 0.002,
        "penalized models beat Baseline and ELO (OLR)":
            all(olr[k][j] < r[j] for k in fitted for r in refs for j in (0, 1)),
        "group lasso sum is best under OLR": best == "group_lasso sum",
        "mean losses within 0.02":
            all(abs(olr[k][j] - PUBLISHED_OLR[k][j]) <= 0.02 for k in PUBLISHED_OLR if k in olr
                for j in (0, 1)),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("data_dir")
    p.add_argument("--out", default="results/laliga")
    p.add_argument("--split", type=int, default=280)
    p.add_argument("--cv-folds", type=int, default=10)
    p.add_argument("--lambda-grid", default="50:1e-4")
    p.add_argument("--full-season", action="store_true",
                   help="fit ratings on all matches (test matches leak into the ratings)")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)
    summary = reproduce(a.data_dir, a.split, a.cv_folds, a.lambda_grid, not a.full_season, a.seed)
    os.makedirs(a.out, exist_ok=True)
    with open(os.path.join(a.out, "results.csv"), "w") as f:
        f.write(summary["table"].results_csv())
    checks = acceptance(summary)
    with open(os.path.join(a.out, "summary.json"), "w") as f:
        json.dump({k: v for k, v in summary.items() if k not in ("table", "rows")} |
                  {"checks": checks}, f, indent=2)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if all(checks.values()) else 1


if __name__ == "__main__":
    raise SystemExit(main())
