"""Simulate a league, then ingest, fit every penalty, rate and validate through the CLI.

    python3 scripts/synthetic_pipeline.py --out results/synthetic --seed 0
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np
from scipy import stats

from possession_ratings.cli import main as cli
from possession_ratings.ratings import read_ratings_csv

PENALTIES = ("ridge", "lasso", "group_lasso", "exclusive_lasso", "generalized_lasso")


def _run(*argv):
    code = cli([str(a) for a in argv])
    if code:
        sys.exit(code)


def truth_table(path):
    with open(path) as f:
        rows = [ln.rstrip("\n").split(",") for ln in f if not ln.startswith("#")]
    head = rows[0]
    return {r[0]: dict(zip(head, r)) for r in rows[1:]}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results/synthetic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--teams", type=int, default=4)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--split", type=int, default=45)
    p.add_argument("--lambda-grid", default="10:1e-2")
    p.add_argument("--cv-folds", type=int, default=3)
    a = p.parse_args(argv)
    d = {k: os.path.join(a.out, k) for k in ("sim", "ingest", "fits", "rate", "validate")}
    _run("simulate", "--out", d["sim"], "--seed", a.seed, "--teams", a.teams, "--rounds", a.rounds,
         "--squad-size", 13, "--subs", 1, "--possessions-per-match", 80)
    _run("ingest", "--events", f"{d['sim']}/events.csv", "--rosters", f"{d['sim']}/rosters.csv",
         "--out", d["ingest"])
    fits = []
    for kind in PENALTIES:
        out = os.path.join(d["fits"], kind)
        _run("fit", "--possessions", f"{d['ingest']}/possessions.jsonl",
             "--players", f"{d['ingest']}/players.csv", "--penalty", kind,
             "--lambda-grid", a.lambda_grid, "--cv-folds", a.cv_folds, "--seed", a.seed,
             "--train-only", "--matches", f"{d['sim']}/matches.csv", "--split", a.split,
             "--out", out)
        fits.append(f"{out}/fit.csv")
    _run("rate", *sum((["--fit", f] for f in fits), []), "--out", d["rate"])
    truth = truth_table(f"{d['sim']}/truth.csv")
    ratings = []
    for kind in PENALTIES:
        path = f"{d['rate']}/{kind}_ratings.csv"
        with open(path) as f:
            pairs = read_ratings_csv(f.read())["pairs"]
        ids = sorted(pairs)
        rho = stats.spearmanr([pairs[i][0] for i in ids],
                              [float(truth[i]["s_inv"]) for i in ids])[0]
        print(f"{kind:>18}: Spearman(inv, truth) = {np.nan_to_num(rho):.3f}")
        ratings += ["--ratings", f"{kind}={path}"]
    _run("validate", "--rosters", f"{d['sim']}/rosters.csv", "--matches", f"{d['sim']}/matches.csv",
         "--elo", f"{d['sim']}/elo.csv", "--split", a.split, *ratings, "--out", d["validate"])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
