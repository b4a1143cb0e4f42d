"""Player ratings from fitted (inv, of) coefficient pairs, and cross-penalty comparison."""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .design import id_sort_key
from .errors import ConfigurationError
from .events import POSITION_GROUPS
from .solvers import FitResult

METHODS = ("sum", "std_avg")
METHOD_ALIASES = {"sum": "sum", "std_avg": "std_avg", "standardized_avg": "std_avg", "avg": "std_avg"}
RATING_CSV_HEADER = ("player_id", "position", "beta_inv", "beta_of", "sum", "std_avg",
                     "rank_sum", "rank_avg", "penalty_kind", "lambda")


@dataclass(frozen=True)
class PlayerRating:
    player_id: str
    position: str
    beta_inv: float
    beta_of: float
    combined_sum: float
    combined_avg: float
    rank_sum: int
    rank_avg: int
    rank_sum_position: int
    rank_avg_position: int

    def combined(self, method: str) -> float:
        return self.combined_sum if METHOD_ALIASES[method] == "sum" else self.combined_avg

    def rank(self, method: str) -> int:
        return self.rank_sum if METHOD_ALIASES[method] == "sum" else self.rank_avg


def minmax(v) -> np.ndarray:
    """Scale to [0, 1]; an all-equal vector maps to 0.5."""
    v = np.asarray(v, dtype=float)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full_like(v, 0.5)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def dense_rank(values) -> np.ndarray:
    """Rank 1 for the highest value; equal values share a rank, no gaps."""
    v = np.asarray(values, dtype=float)
    uniq = np.unique(v)[::-1]
    return np.searchsorted(-uniq, -v) + 1


def _pairs(fit):
    if isinstance(fit, FitResult):
        pairs = fit.pairs()
    else:
        pairs = dict(fit)
    if not pairs:
        raise ConfigurationError("fit has no players")
    return pairs


def assemble_ratings(fit, method: str = "sum", positions: dict | None = None) -> list[PlayerRating]:
    """Ratings for every player, listed in the order of ``method``'s ranking.

    Ties in the listing are broken by player id. Both combinations are
    computed; ``method`` only sets the listing order.
    """
    if method not in METHOD_ALIASES:
        raise ConfigurationError(f"unknown combination method {method!r}")
    method = METHOD_ALIASES[method]
    pairs = _pairs(fit)
    if positions is None and isinstance(fit, FitResult):
        positions = fit.extra.get("positions")
    positions = positions or {}
    ids = sorted(pairs, key=id_sort_key)
    inv = np.array([pairs[p][0] for p in ids])
    of = np.array([pairs[p][1] for p in ids])
    s = inv + of
    avg = 0.5 * (minmax(inv) + minmax(of))
    r_sum, r_avg = dense_rank(s), dense_rank(avg)
    pos = [positions.get(p, "") for p in ids]
    r_sum_pos = np.zeros(len(ids), dtype=int)
    r_avg_pos = np.zeros(len(ids), dtype=int)
    for g in set(pos):
        m = np.array([q == g for q in pos])
        r_sum_pos[m] = dense_rank(s[m])
        r_avg_pos[m] = dense_rank(avg[m])
    out = [PlayerRating(p, pos[i], float(inv[i]), float(of[i]), float(s[i]), float(avg[i]),
                        int(r_sum[i]), int(r_avg[i]), int(r_sum_pos[i]), int(r_avg_pos[i]))
           for i, p in enumerate(ids)]
    key = (lambda r: (r.rank_sum, id_sort_key(r.player_id))) if method == "sum" \
        else (lambda r: (r.rank_avg, id_sort_key(r.player_id)))
    return sorted(out, key=key)


def write_ratings_csv(ratings, penalty_kind: str, lam: float, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(header.rstrip("\n") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATING_CSV_HEADER)
    for r in ratings:
        w.writerow([r.player_id, r.position, repr(r.beta_inv), repr(r.beta_of),
                    repr(r.combined_sum), repr(r.combined_avg), r.rank_sum, r.rank_avg,
                    penalty_kind, repr(float(lam))])
    return buf.getvalue()


def read_ratings_csv(text: str) -> dict:
    """``player_id -> (beta_inv, beta_of)`` plus positions, from a rating or fit file."""
    rows = list(csv.DictReader(ln for ln in text.splitlines() if not ln.startswith("#")))
    if not rows:
        raise ConfigurationError("empty ratings file")
    pairs = {r["player_id"]: (float(r["beta_inv"]), float(r["beta_of"])) for r in rows}
    positions = {r["player_id"]: r.get("position", "") for r in rows}
    return {"pairs": pairs, "positions": positions,
            "penalty_kind": rows[0].get("penalty_kind", ""), "lambda": float(rows[0].get("lambda", "nan"))}


# --- comparison --------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationCell:
    model_a: str
    model_b: str
    position: str
    quantity: str        # inv | of | sum | avg
    score_corr: float
    rank_corr: float
    n: int


def _corr(a, b, fn):
    if len(a) < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(fn(a, b)[0])


def compare_ratings(fits: dict, positions: dict) -> list[CorrelationCell]:
    """Pearson on scores and Spearman on ranks for every pair of fits, per
    (position group, quantity) cell."""
    names = list(fits)
    pairs = {n: _pairs(f) for n, f in fits.items()}
    universe = None
    for n in names:
        ids = set(pairs[n])
        universe = ids if universe is None else universe & ids
    if not universe:
        raise ConfigurationError("fits share no players")
    for n in names:
        if set(pairs[n]) != universe:
            raise ConfigurationError(f"fit {n!r} covers a different player universe")
    ids = sorted(universe, key=id_sort_key)
    quantities = {}
    for n in names:
        inv = np.array([pairs[n][p][0] for p in ids])
        of = np.array([pairs[n][p][1] for p in ids])
        quantities[n] = {"inv": inv, "of": of, "sum": inv + of,
                         "avg": 0.5 * (minmax(inv) + minmax(of))}
    groups = [g for g in POSITION_GROUPS if any(positions.get(p) == g for p in ids)]
    out = []
    for i, a in enumerate(names):
        for b in names[i + 1:] if len(names) > 1 else names:
            for g in groups:
                m = np.array([positions.get(p) == g for p in ids])
                for q in ("inv", "of", "sum", "avg"):
                    va, vb = quantities[a][q][m], quantities[b][q][m]
                    out.append(CorrelationCell(a, b, g, q, _corr(va, vb, stats.pearsonr),
                                               _corr(va, vb, stats.spearmanr), int(m.sum())))
    return out


def correlation_plot_data(cells) -> str:
    lines = ["model_a,model_b,position,quantity,score_corr,rank_corr,n"]
    for c in cells:
        lines.append(f"{c.model_a},{c.model_b},{c.position},{c.quantity},"
                     f"{c.score_corr!r},{c.rank_corr!r},{c.n}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FiveNumber:
    position: str
    block: str
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    n: int


def position_summaries(ratings) -> list[FiveNumber]:
    """Five-number summaries of beta_inv and beta_of per position group."""
    out = []
    for g in POSITION_GROUPS:
        members = [r for r in ratings if r.position == g]
        if not members:
            warnings.warn(f"position group {g} has no players; omitted", stacklevel=2)
            continue
        for block in ("inv", "of"):
            v = np.array([r.beta_inv if block == "inv" else r.beta_of for r in members])
            q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
            out.append(FiveNumber(g, block, *map(float, q), len(members)))
    return out


def summaries_plot_data(summaries) -> str:
    lines = ["position,block,min,q1,median,q3,max,n"]
    for s in summaries:
        lines.append(f"{s.position},{s.block},{s.minimum!r},{s.q1!r},{s.median!r},"
                     f"{s.q3!r},{s.maximum!r},{s.n}")
    return "\n".join(lines) + "\n"


def ratings_plot_data(ratings, model: str) -> str:
    """Long format: one row per (player, quantity)."""
    lines = ["model,player_id,position,quantity,value"]
    for r in ratings:
        for q, v in (("inv", r.beta_inv), ("of", r.beta_of), ("sum", r.combined_sum),
                     ("avg", r.combined_avg)):
            lines.append(f"{model},{r.player_id},{r.position},{q},{v!r}")
    return "\n".join(lines) + "\n"
