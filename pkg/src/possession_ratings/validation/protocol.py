"""Relevance check: do the ratings forecast match outcomes?

Team strength is the mean combined rating of the eleven starters. The
home-minus-away difference drives OLR and BP models fitted on the first
``split`` matches and scored on the rest, next to a covariate-free Baseline
and an ELO model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import IntegrityError, PlanningError
from ..ratings import assemble_ratings
from .elo import EloTable
from .matches import MatchRecord
from .models import fit_bp, fit_olr
from .scoring import LossTable, paired_ttest, score_forecasts

PRED_MODELS = ("OLR", "BP")
CRITERIA = ("BS", "IL")


def team_strength(ratings: dict, lineup) -> float:
    """Mean rating over the lineup; every player must be rated."""
    if not lineup:
        raise IntegrityError("empty lineup")
    vals = []
    for p in lineup:
        if p not in ratings:
            raise IntegrityError(f"player {p} has no rating")
        vals.append(ratings[p])
    return float(np.mean(vals))


def strength_deltas(matches, ratings: dict) -> np.ndarray:
    return np.array([team_strength(ratings, m.home_lineup) - team_strength(ratings, m.away_lineup)
                     for m in matches])


def combined_ratings(pairs: dict, method: str) -> dict:
    """``player -> combined rating`` for ``sum`` or ``std_avg``."""
    return {r.player_id: r.combined(method) for r in assemble_ratings(pairs, method)}


def split_matches(matches, split: int):
    matches = sorted(matches, key=lambda m: m.index)
    if not 1 <= split < len(matches):
        raise PlanningError(f"split {split} outside [1, {len(matches)})")
    return matches[:split], matches[split:]


def _forecasts(train, test, d_train, d_test):
    yt = np.array([m.outcome_code for m in train])
    hg = np.array([m.home_goals for m in train])
    ag = np.array([m.away_goals for m in train])
    olr = fit_olr(yt, d_train)
    bp = fit_bp(hg, ag, d_train)
    return ({"OLR": [olr.forecast(d) for d in d_test], "BP": [bp.forecast(d) for d in d_test]},
            {"OLR": olr, "BP": bp})


def elo_deltas(matches, elo: EloTable) -> np.ndarray:
    return np.array([elo.delta(m.home_club or m.home_team, m.away_club or m.away_team, m.date)
                     for m in matches])


def reference_models(train, test, elo: EloTable | None = None) -> dict:
    """Forecasts for Baseline (no covariate) and, given ELO data, the ELO model."""
    out = {"Baseline": _forecasts(train, test, np.zeros(len(train)), np.zeros(len(test)))[0]}
    if elo is not None:
        out["ELO"] = _forecasts(train, test, elo_deltas(train, elo), elo_deltas(test, elo))[0]
    return out


@dataclass
class ProtocolResult:
    rows: list                     # (strength_model, combiner, pred_model, mean_BS, mean_IL)
    losses: dict                   # (label, pred_model) -> LossTable
    pvalues: list = field(default_factory=list)   # (model_a, model_b, pred_model, criterion, p)
    fitted: dict = field(default_factory=dict)

    def results_csv(self, header: str | None = None) -> str:
        lines = [header.rstrip("\n")] if header else []
        lines.append("strength_model,combiner,pred_model,mean_BS,mean_IL")
        for s, c, p, bs, il in self.rows:
            lines.append(f"{s},{c},{p},{bs!r},{il!r}")
        return "\n".join(lines) + "\n"

    def pvalues_csv(self, header: str | None = None) -> str:
        lines = [header.rstrip("\n")] if header else []
        lines.append("model_a,model_b,pred_model,criterion,p")
        for a, b, pm, crit, p in self.pvalues:
            lines.append(f"{a},{b},{pm},{crit},{p!r}")
        return "\n".join(lines) + "\n"

    def mean(self, label: str, pred_model: str, criterion: str) -> float:
        t = self.losses[(label, pred_model)]
        return t.mean_bs if criterion == "BS" else t.mean_il


def label(strength_model: str, combiner: str) -> str:
    return strength_model if combiner == "-" else f"{strength_model} {combiner}"


def run_protocol(matches, strength_models: dict, elo: EloTable | None = None,
                 split: int = 280, combiners=("sum", "std_avg")) -> ProtocolResult:
    """Score every (strength model x combiner x prediction model) on the test matches.

    ``strength_models`` maps a model name to ``player -> (beta_inv, beta_of)``.
    """
    train, test = split_matches(matches, split)
    outcomes = [m.outcome for m in test]
    rows, losses, fitted = [], {}, {}
    for name, fc in reference_models(train, test, elo).items():
        for pm in PRED_MODELS:
            t = score_forecasts(fc[pm], outcomes)
            losses[(label(name, "-"), pm)] = t
            rows.append((name, "-", pm, t.mean_bs, t.mean_il))
    for name, pairs in strength_models.items():
        for comb in combiners:
            r = combined_ratings(pairs, comb)
            fc, models = _forecasts(train, test, strength_deltas(train, r), strength_deltas(test, r))
            fitted[label(name, comb)] = models
            for pm in PRED_MODELS:
                t = score_forecasts(fc[pm], outcomes)
                losses[(label(name, comb), pm)] = t
                rows.append((name, comb, pm, t.mean_bs, t.mean_il))
    labels = list(dict.fromkeys(k[0] for k in losses))
    pvalues = []
    for pm in PRED_MODELS:
        for crit in CRITERIA:
            for i, a in enumerate(labels):
                for b in labels[i + 1:]:
                    la, lb = losses[(a, pm)], losses[(b, pm)]
                    va, vb = (la.bs, lb.bs) if crit == "BS" else (la.il, lb.il)
                    if np.all(np.isfinite(va)) and np.all(np.isfinite(vb)):
                        p = paired_ttest(va, vb).p
                    else:
                        p = float("nan")
                    pvalues.append((a, b, pm, crit, p))
    return ProtocolResult(rows, losses, pvalues, fitted)


def training_match_ids(matches, split: int) -> set:
    train, _ = split_matches(matches, split)
    return {m.match_id for m in train}


def check_no_leak(rating_match_ids, matches, split: int) -> None:
    """Raise when ratings were fitted on possessions from any test match."""
    _, test = split_matches(matches, split)
    overlap = sorted({m.match_id for m in test} & set(rating_match_ids))
    if overlap:
        raise IntegrityError(
            f"ratings use possessions from {len(overlap)} test matches (e.g. {overlap[0]})")
