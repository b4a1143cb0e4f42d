"""Command-line entry point: ``possession-ratings <subcommand> [options]``.

Every artifact starts with a ``#`` comment recording the configuration and
seed. Failures exit non-zero after printing one ``CODE: message`` line.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import workflow
from .config import GridSpec, RunConfig, header
from .design import PlayerRegistry, export_matrix
from .errors import ConfigurationError, IntegrityError, RatingError
from .events import parse_wyscout_rosters
from .genlasso import extract_clusters, write_cluster_csv
from .possessions import possession_stats, read_possessions, write_possessions
from .ratings import (assemble_ratings, compare_ratings, correlation_plot_data,
                      position_summaries, ratings_plot_data, read_ratings_csv,
                      summaries_plot_data, write_ratings_csv)
from .solvers import KINDS, read_fit_csv, write_fit_csv

EXIT_CODES = {"E_CONFIG": 2, "E_FORMAT": 3, "E_INTEGRITY": 4, "E_PLAN": 5, "E_CONVERGENCE": 6}


def _read(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _registry_for(cfg: RunConfig) -> PlayerRegistry:
    if cfg.players:
        return PlayerRegistry.from_csv(_read(cfg.players).decode())
    if cfg.rosters:
        from .events import parse_rosters
        return PlayerRegistry.from_rosters(parse_rosters(_read(cfg.rosters)))
    if cfg.possessions:
        guess = os.path.join(os.path.dirname(cfg.possessions), "players.csv")
        if os.path.exists(guess):
            return PlayerRegistry.from_csv(_read(guess).decode())
    raise ConfigurationError("need --players or --rosters (or players.csv next to --possessions)")


# --- subcommands ------------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> None:
    if not cfg.events or not cfg.rosters:
        raise ConfigurationError("ingest needs --events and --rosters")
    roster_list = None
    if cfg.event_format == "wyscout_v2":
        if not cfg.players:
            raise ConfigurationError("wyscout ingest needs --players (players.json); "
                                     "--rosters is the matches JSON")
        roster_list = parse_wyscout_rosters(_read(cfg.rosters), _read(cfg.players))
    res = workflow.ingest(_read(cfg.events), _read(cfg.rosters) if roster_list is None else b"",
                          cfg.event_format, roster_list=roster_list)
    h = header(cfg)
    _write(cfg.out, "possessions.jsonl", write_possessions(res.valuable, h))
    _write(cfg.out, "all_possessions.jsonl", write_possessions(res.possessions, h))
    _write(cfg.out, "players.csv", h + "\n" + res.registry.to_csv())
    st = possession_stats(res.valuable)
    _write(cfg.out, "possession_stats.csv", h + "\n" +
           "count,mean_length,median_length,goal_rate,mean_involvements,n_all\n"
           f"{st.count},{st.mean_length!r},{st.median_length!r},{st.goal_rate!r},"
           f"{st.mean_involvements!r},{len(res.possessions)}\n")
    print(f"{st.count} valuable possessions of {len(res.possessions)}; goal rate {st.goal_rate:.4f}")


def _training_ids(cfg: RunConfig):
    from .validation.matches import parse_matches
    from .validation.protocol import training_match_ids
    if not cfg.matches:
        raise ConfigurationError("--train-only needs --matches")
    return training_match_ids(parse_matches(_read(cfg.matches)), cfg.split)


def _fit_one(cfg: RunConfig, kind: str, possessions, registry, match_ids, out_prefix=""):
    matrix = workflow.design(possessions, registry, match_ids)
    grouping = cfg.grouping
    if kind == "exclusive_lasso" and cfg.subcommand == "validate" and grouping is None:
        grouping = "position_team"
    if kind not in workflow.DEFAULT_GROUPING:
        grouping = None
    spec = workflow.penalty_spec(kind, registry, matrix, grouping, cfg.adaptive)
    kw = {"backend": cfg.backend} if kind == "generalized_lasso" else {}
    fit, cv = workflow.select_and_fit(matrix, spec, cfg.lam, cfg.grid, cfg.cv_folds, cfg.seed, **kw)
    used = sorted({p.match_id for p in possessions if match_ids is None or p.match_id in match_ids})
    h = header(cfg, penalty=kind, grouping=grouping,
               n_groups=spec.grouping.n_groups if spec.grouping is not None else None,
               converged=fit.converged) + "\n# matches=" + ";".join(used)
    _write(cfg.out, f"{out_prefix}fit.csv", write_fit_csv(fit, registry.position, h))
    if cv is not None:
        _write(cfg.out, f"{out_prefix}cv_report.csv", cv.report_csv(h))
    if kind == "generalized_lasso":
        _write(cfg.out, f"{out_prefix}clusters.csv", write_cluster_csv(extract_clusters(fit), h))
    status = "converged" if fit.converged else f"NOT converged ({fit.message})"
    print(f"{kind}: lambda={fit.lam:.6g} objective={fit.objective:.10f} "
          f"kkt={fit.kkt_residual:.2e} {status}")
    return fit, spec


def cmd_fit(cfg: RunConfig) -> None:
    if not cfg.possessions:
        raise ConfigurationError("fit needs --possessions")
    registry = _registry_for(cfg)
    possessions = read_possessions(_read(cfg.possessions).decode())
    ids = _training_ids(cfg) if cfg.train_only else None
    fit, spec = _fit_one(cfg, cfg.penalty, possessions, registry, ids)
    if cfg.extra.get("export_matrix"):
        for name, text in export_matrix(workflow.design(possessions, registry, ids)).items():
            _write(cfg.out, name, text)


def cmd_rate(cfg: RunConfig) -> None:
    if not cfg.fits:
        raise ConfigurationError("rate needs --fit")
    fits, positions = {}, {}
    h = header(cfg)
    for path in cfg.fits:
        text = _read(path).decode()
        f = read_fit_csv(text)
        name = f.kind if f.kind not in fits else os.path.splitext(os.path.basename(path))[0]
        fits[name] = f
        positions.update(f.extra["positions"])
        ratings = assemble_ratings(f, cfg.combiner, positions)
        prefix = "" if len(cfg.fits) == 1 else f"{name}_"
        fit_meta = [ln for ln in text.splitlines() if ln.startswith("# matches=")]
        _write(cfg.out, f"{prefix}ratings.csv",
               write_ratings_csv(ratings, f.kind, f.lam, "\n".join([h] + fit_meta)))
        _write(cfg.out, f"{prefix}ratings_long.csv", ratings_plot_data(ratings, name))
        _write(cfg.out, f"{prefix}position_summary.csv",
               summaries_plot_data(position_summaries(ratings)))
    cells = compare_ratings(fits, positions)
    _write(cfg.out, "comparison.csv", correlation_plot_data(cells))
    print(f"rated {len(positions)} players from {len(fits)} fit(s)")


def _ratings_meta(text):
    for ln in text.splitlines():
        if ln.startswith("# matches="):
            return [m for m in ln.split("=", 1)[1].split(";") if m]
        if not ln.startswith("#"):
            break
    return None


def cmd_validate(cfg: RunConfig) -> None:
    from .validation.elo import parse_elo
    from .validation.matches import parse_matches
    from .validation.protocol import check_no_leak, run_protocol, training_match_ids
    if not cfg.matches or not cfg.rosters:
        raise ConfigurationError("validate needs --matches and --rosters")
    from .events import parse_rosters
    roster_list = parse_rosters(_read(cfg.rosters))
    matches = parse_matches(_read(cfg.matches), roster_list)
    elo = parse_elo(_read(cfg.elo)) if cfg.elo else None
    models = {}
    for name, path in cfg.ratings:
        text = _read(path).decode()
        used = _ratings_meta(text)
        if not cfg.leaky_ratings:
            if used is None:
                raise IntegrityError(f"ratings file {path} does not record its training matches; "
                                     "pass --leaky-ratings to use it anyway")
            check_no_leak(used, matches, cfg.split)
        models[name] = read_ratings_csv(text)["pairs"]
    if cfg.possessions:
        registry = _registry_for(cfg)
        possessions = read_possessions(_read(cfg.possessions).decode())
        ids = None if cfg.leaky_ratings else training_match_ids(matches, cfg.split)
        for kind in cfg.penalty.split(","):
            fit, _ = _fit_one(cfg, kind, possessions, registry, ids, out_prefix=f"{kind}_")
            models[kind] = fit.pairs()
    if not models:
        raise ConfigurationError("validate needs --ratings NAME=PATH or --possessions with --penalty")
    res = run_protocol(matches, models, elo, cfg.split)
    h = header(cfg)
    _write(cfg.out, "results.csv", res.results_csv(h))
    _write(cfg.out, "pvalues.csv", res.pvalues_csv(h))
    for row in res.rows:
        print(f"{row[0]:>20} {row[1]:>8} {row[2]:>4}  BS={row[3]:.4f}  IL={row[4]:.4f}")


def cmd_simulate(cfg: RunConfig) -> None:
    from .simulate import SyntheticWorld, generate, logit
    params = dict(cfg.extra.get("world", {}))
    goal_rate = params.pop("goal_rate", None)
    if goal_rate is not None:
        if not 0 < goal_rate < 1:
            raise ConfigurationError(f"goal rate must lie in (0, 1), got {goal_rate}")
        params["intercept"] = logit(goal_rate)
    world = SyntheticWorld(seed=cfg.seed, **params)
    data = generate(world)
    h = header(cfg, world=world.to_dict())
    for name, text in data.files(h).items():
        _write(cfg.out, name, text)
    print(f"simulated {len(data.matches)} matches, {len(data.possessions)} possessions")


def cmd_check(cfg: RunConfig) -> None:
    from .checks import oracle_agreement
    n = int(cfg.extra.get("instances", 10))
    failures = 0
    lines = ["instance,kind,n_rows,n_cols,objective,reference,difference,tolerance,converged,ok"]
    for row in oracle_agreement(n, cfg.seed):
        failures += not row["ok"]
        lines.append(",".join(str(row[k]) for k in ("instance", "kind", "n_rows", "n_cols",
                                                     "objective", "reference", "difference",
                                                     "tolerance", "converged", "ok")))
    _write(cfg.out, "check_report.csv", header(cfg) + "\n" + "\n".join(lines) + "\n")
    print(f"oracle agreement: {len(lines) - 1 - failures}/{len(lines) - 1} fits within tolerance")
    if failures:
        raise RatingError(f"{failures} fits disagree with the reference solver")


COMMANDS = {"ingest": cmd_ingest, "fit": cmd_fit, "rate": cmd_rate, "validate": cmd_validate,
            "simulate": cmd_simulate, "check": cmd_check}


# --- argument parsing -------------------------------------------------------------------

def _named_path(text):
    name, sep, path = text.partition("=")
    if not sep:
        return (os.path.splitext(os.path.basename(text))[0], text)
    return (name, path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="possession-ratings",
                                description="Player ratings from possession data.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=0)

    def fitting(sp):
        sp.add_argument("--possessions")
        sp.add_argument("--players", help="players.csv from ingest (positions, teams)")
        sp.add_argument("--penalty", default="ridge")
        sp.add_argument("--grouping", choices=("position", "position_team", "singleton", "single"))
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--lambda", dest="lam", type=float)
        g.add_argument("--lambda-grid", default="50:1e-4",
                       help="N[:RATIO] log-spaced from lambda_max, or a comma list")
        sp.add_argument("--cv-folds", type=int, default=10)
        sp.add_argument("--backend", choices=("splitting", "conic"), default="splitting")
        sp.add_argument("--adaptive", action="store_true", help="adaptive ranking-lasso weights")
        sp.add_argument("--split", type=int, default=280)

    sp = sub.add_parser("ingest", help="events + rosters -> possessions")
    common(sp)
    sp.add_argument("--events", required=True)
    sp.add_argument("--rosters", required=True)
    sp.add_argument("--players", help="Wyscout players.json (wyscout_v2 only)")
    sp.add_argument("--format", dest="event_format", choices=("simple_csv", "wyscout_v2"),
                    default="simple_csv")

    sp = sub.add_parser("fit", help="possessions -> fit and CV report")
    common(sp)
    fitting(sp)
    sp.add_argument("--rosters")
    sp.add_argument("--matches", help="matches CSV, used with --train-only")
    sp.add_argument("--train-only", action="store_true",
                    help="fit on possessions of the first --split matches only")
    sp.add_argument("--export-matrix", action="store_true")

    sp = sub.add_parser("rate", help="fit file(s) -> ratings and comparison data")
    common(sp)
    sp.add_argument("--fit", dest="fits", action="append", required=True)
    sp.add_argument("--combiner", choices=("sum", "std_avg"), default="sum")

    sp = sub.add_parser("validate", help="ratings + matches + ELO -> predictive losses")
    common(sp)
    fitting(sp)
    sp.add_argument("--rosters", required=True)
    sp.add_argument("--matches", required=True)
    sp.add_argument("--elo")
    sp.add_argument("--ratings", action="append", type=_named_path, default=[],
                    help="NAME=PATH of a ratings or fit file")
    sp.add_argument("--combiner", choices=("sum", "std_avg"), default="sum")
    sp.add_argument("--leaky-ratings", action="store_true",
                    help="allow ratings fitted on test-match possessions")

    sp = sub.add_parser("simulate", help="synthetic world -> fixture files")
    common(sp)
    sp.add_argument("--teams", type=int, default=2)
    sp.add_argument("--squad-size", type=int, default=11)
    sp.add_argument("--rounds", type=int, default=50)
    sp.add_argument("--possessions-per-match", type=int, default=100)
    sp.add_argument("--goal-rate", type=float, default=0.15)
    sp.add_argument("--sd-inv", type=float, default=0.5)
    sp.add_argument("--sd-of", type=float, default=0.05)
    sp.add_argument("--skew", type=float, default=0.75)
    sp.add_argument("--filler-rate", type=float, default=0.0)
    sp.add_argument("--subs", type=int, default=0)
    sp.add_argument("--zero-strength", action="store_true")

    sp = sub.add_parser("check", help="solver vs reference-solver agreement suite")
    common(sp)
    sp.add_argument("--instances", type=int, default=10)
    return p


def config_from_args(a) -> RunConfig:
    d = vars(a)
    extra = {}
    if a.subcommand == "simulate":
        extra["world"] = {"n_teams": a.teams, "squad_size": a.squad_size, "n_rounds": a.rounds,
                          "possessions_per_match": a.possessions_per_match,
                          "goal_rate": a.goal_rate, "sd_inv": a.sd_inv, "sd_of": a.sd_of,
                          "involvement_skew": a.skew, "filler_rate": a.filler_rate,
                          "subs_per_team": a.subs, "zero_strength": a.zero_strength}
    if a.subcommand == "check":
        extra["instances"] = a.instances
    if d.get("export_matrix"):
        extra["export_matrix"] = True
    penalty = d.get("penalty", "ridge")
    for kind in penalty.split(","):
        if kind not in KINDS:
            raise ConfigurationError(f"unknown penalty {kind!r}; choose from {', '.join(KINDS)}")
    return RunConfig(
        subcommand=a.subcommand, out=a.out, seed=a.seed,
        events=d.get("events"), event_format=d.get("event_format", "simple_csv"),
        rosters=d.get("rosters"), possessions=d.get("possessions"), players=d.get("players"),
        penalty=penalty, grouping=d.get("grouping"), lam=d.get("lam"),
        grid=GridSpec.parse(d.get("lambda_grid") or "50:1e-4"),
        cv_folds=d.get("cv_folds", 10), combiner=d.get("combiner", "sum"),
        split=d.get("split", 280), matches=d.get("matches"), elo=d.get("elo"),
        ratings=tuple(d.get("ratings") or ()), fits=tuple(d.get("fits") or ()),
        leaky_ratings=bool(d.get("leaky_ratings")), backend=d.get("backend", "splitting"),
        adaptive=bool(d.get("adaptive")), train_only=bool(d.get("train_only")), extra=extra)


def run(config: RunConfig) -> int:
    config.check_paths()
    COMMANDS[config.subcommand](config)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(config_from_args(args))
    except RatingError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"{exc.code}: {msg}", file=sys.stderr)
        return EXIT_CODES.get(exc.code, 1)


if __name__ == "__main__":
    sys.exit(main())
