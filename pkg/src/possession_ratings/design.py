"""Sparse possession design matrix and grouping schemes.

Columns are ordered ``[inv block | of block]``, each block holding one column
per registered player in sorted-id order. Involvement entries are 0/1;
on-field entries are +1 for the attacking eleven and -1 for the defending
eleven. The intercept is not stored here; solvers append it.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, IntegrityError, RatingError
from .events import POSITION_GROUPS, MatchRoster, modal_positions, modal_teams


def id_sort_key(pid: str):
    return (0, int(pid), "") if pid.isdigit() else (1, 0, pid)


@dataclass(frozen=True)
class PlayerRegistry:
    players: tuple
    position: dict
    team: dict = field(default_factory=dict)

    @classmethod
    def from_rosters(cls, rosters: Iterable[MatchRoster]) -> "PlayerRegistry":
        rosters = list(rosters)
        pos = modal_positions(rosters)
        team = modal_teams(rosters)
        return cls(tuple(sorted(pos, key=id_sort_key)), pos, team)

    def __len__(self):
        return len(self.players)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["player_id", "position", "team_id"])
        for p in self.players:
            w.writerow([p, self.position[p], self.team.get(p, "")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PlayerRegistry":
        rows = list(csv.DictReader(ln for ln in text.splitlines() if not ln.startswith("#")))
        return cls(tuple(sorted((r["player_id"] for r in rows), key=id_sort_key)),
                   {r["player_id"]: r["position"] for r in rows},
                   {r["player_id"]: r["team_id"] for r in rows if r.get("team_id")})


@dataclass(frozen=True)
class PossessionMatrix:
    X: sparse.csc_matrix
    y: np.ndarray
    players: tuple
    row_ids: tuple

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def n_columns(self) -> int:
        return self.X.shape[1]

    def inv_column(self, player: str) -> int:
        return self.players.index(player)

    def of_column(self, player: str) -> int:
        return self.n_players + self.players.index(player)

    @property
    def rows(self) -> sparse.csr_matrix:
        return self.X.tocsr()

    def subset(self, rows) -> "PossessionMatrix":
        rows = np.asarray(rows)
        return PossessionMatrix(self.X[rows].tocsc(), self.y[rows], self.players,
                                tuple(self.row_ids[i] for i in rows))


def build_matrix(possessions: Sequence, registry: PlayerRegistry | Sequence[str]) -> PossessionMatrix:
    """Build ``X_mod = (X_inv, X_of)`` and the goal indicator."""
    if not possessions:
        raise RatingError("cannot build a design matrix from zero possessions")
    players = registry.players if isinstance(registry, PlayerRegistry) \
        else tuple(sorted(registry, key=id_sort_key))
    col = {p: j for j, p in enumerate(players)}
    k = len(players)
    rows, cols, vals = [], [], []
    for r, pos in enumerate(possessions):
        try:
            for p in pos.involved:
                rows.append(r); cols.append(col[p]); vals.append(1.0)
            for p in pos.onfield_attack:
                rows.append(r); cols.append(k + col[p]); vals.append(1.0)
            for p in pos.onfield_defense:
                rows.append(r); cols.append(k + col[p]); vals.append(-1.0)
        except KeyError as exc:
            raise IntegrityError(
                f"possession {pos.possession_id} references unregistered player {exc.args[0]}"
            ) from None
    X = sparse.csc_matrix((vals, (rows, cols)), shape=(len(possessions), 2 * k))
    X.sum_duplicates()
    X.sort_indices()
    y = np.array([pos.goal for pos in possessions], dtype=float)
    return PossessionMatrix(X, y, players, tuple(p.possession_id for p in possessions))


@dataclass(frozen=True)
class GroupingScheme:
    name: str
    groups: np.ndarray      # column -> group index
    labels: tuple           # group index -> label

    def __post_init__(self):
        g = np.asarray(self.groups)
        if g.ndim != 1 or (g.size and (g.min() < 0 or g.max() >= len(self.labels))):
            raise ConfigurationError("group assignment out of range")
        if np.any(np.bincount(g, minlength=len(self.labels)) == 0):
            raise ConfigurationError(f"grouping {self.name!r} has an empty group")

    @property
    def n_groups(self) -> int:
        return len(self.labels)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.groups, minlength=self.n_groups)

    def members(self) -> list:
        return [np.flatnonzero(self.groups == g) for g in range(self.n_groups)]

    def permuted(self, perm) -> "GroupingScheme":
        return GroupingScheme(self.name, np.asarray(self.groups)[perm], self.labels)

    @classmethod
    def singletons(cls, n: int) -> "GroupingScheme":
        return cls("singleton", np.arange(n), tuple(str(i) for i in range(n)))

    @classmethod
    def single(cls, n: int) -> "GroupingScheme":
        return cls("single", np.zeros(n, dtype=int), ("all",))

    @classmethod
    def from_labels(cls, name: str, labels: Sequence) -> "GroupingScheme":
        uniq = list(dict.fromkeys(labels))
        index = {u: i for i, u in enumerate(uniq)}
        return cls(name, np.array([index[l] for l in labels], dtype=int), tuple(uniq))


def position_grouping(registry: PlayerRegistry, split_by_team: bool = False) -> GroupingScheme:
    """Position x {Inv, OF} groups, optionally further split by team.

    Only non-empty groups are created.
    """
    labels = []
    for block in ("inv", "of"):
        for p in registry.players:
            pos = registry.position.get(p)
            if pos not in POSITION_GROUPS:
                raise ConfigurationError(f"player {p} has no position group")
            if split_by_team:
                team = registry.team.get(p)
                if not team:
                    raise ConfigurationError(f"player {p} has no team")
                labels.append(f"{block}:{pos}:{team}")
            else:
                labels.append(f"{block}:{pos}")
    return GroupingScheme.from_labels("position_team" if split_by_team else "position", labels)


def export_matrix(m: PossessionMatrix) -> dict[str, str]:
    """Coordinate triplets plus sidecar column-map and response files."""
    coo = m.X.tocoo()
    order = np.lexsort((coo.col, coo.row))
    triplets = "".join(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:g}\n" for i in order)
    colmap = "col,player_id,block\n" + "".join(
        f"{j},{p},inv\n" for j, p in enumerate(m.players)) + "".join(
        f"{m.n_players + j},{p},of\n" for j, p in enumerate(m.players))
    response = "row,possession_id,y\n" + "".join(
        f"{i},{pid},{int(v)}\n" for i, (pid, v) in enumerate(zip(m.row_ids, m.y)))
    return {"matrix.txt": triplets, "columns.csv": colmap, "response.csv": response}
