"""Match results with starting lineups, in chronological order."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from ..errors import DataFormatError, IntegrityError

MATCH_CSV_HEADER = ("match_id", "date", "home_team", "away_team", "home_goals", "away_goals")
OUTCOMES = ("A", "D", "H")   # ordinal order, A < D < H


@dataclass(frozen=True)
class MatchRecord:
    index: int
    match_id: str
    date: str
    home_team: str
    away_team: str
    home_goals: int
    away_goals: int
    home_lineup: tuple = ()
    away_lineup: tuple = ()
    home_club: str = ""
    away_club: str = ""

    def __post_init__(self):
        if self.home_goals < 0 or self.away_goals < 0:
            raise DataFormatError(f"match {self.match_id}: negative goals")
        for side in (self.home_lineup, self.away_lineup):
            if side and len(side) != 11:
                raise DataFormatError(f"match {self.match_id}: lineup of {len(side)} players")

    @property
    def outcome(self) -> str:
        if self.home_goals > self.away_goals:
            return "H"
        return "D" if self.home_goals == self.away_goals else "A"

    @property
    def outcome_code(self) -> int:
        return OUTCOMES.index(self.outcome)


def _lines(text):
    return [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def attach_lineups(matches, rosters) -> list[MatchRecord]:
    """Fill lineups from rosters keyed by match id; a missing roster is an error."""
    by_id = {r.match_id: r for r in rosters}
    out = []
    for m in matches:
        r = by_id.get(m.match_id)
        if r is None:
            raise IntegrityError(f"no roster for match {m.match_id}")
        out.append(MatchRecord(m.index, m.match_id, m.date, m.home_team, m.away_team,
                               m.home_goals, m.away_goals,
                               tuple(r.sheet(m.home_team).starters),
                               tuple(r.sheet(m.away_team).starters),
                               m.home_club, m.away_club))
    return out


def parse_matches(stream: bytes, rosters=None) -> list[MatchRecord]:
    """Matches CSV, optionally with ``home_club,away_club`` columns naming ELO clubs.

    Records are sorted by (date, file order) and re-indexed from 0.
    """
    rows = list(csv.reader(_lines(stream.decode("utf-8"))))
    if not rows or tuple(h.strip() for h in rows[0][:6]) != MATCH_CSV_HEADER:
        raise DataFormatError(f"expected header {','.join(MATCH_CSV_HEADER)}[,home_club,away_club]", 0)
    header = [h.strip() for h in rows[0]]
    raw = []
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, got {len(row)}", i)
        d = dict(zip(header, (c.strip() for c in row)))
        try:
            hg, ag = int(d["home_goals"]), int(d["away_goals"])
        except ValueError:
            raise DataFormatError("goals must be integers", i) from None
        raw.append((d["date"], i, MatchRecord(0, d["match_id"], d["date"], d["home_team"],
                                              d["away_team"], hg, ag,
                                              home_club=d.get("home_club") or d["home_team"],
                                              away_club=d.get("away_club") or d["away_team"])))
    raw.sort(key=lambda t: (t[0], t[1]))
    out = [MatchRecord(k, m.match_id, m.date, m.home_team, m.away_team, m.home_goals,
                       m.away_goals, home_club=m.home_club, away_club=m.away_club)
           for k, (_, _, m) in enumerate(raw)]
    return attach_lineups(out, rosters) if rosters is not None else out


def write_matches_csv(matches) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MATCH_CSV_HEADER + ("home_club", "away_club"))
    for m in matches:
        w.writerow([m.match_id, m.date, m.home_team, m.away_team, m.home_goals, m.away_goals,
                    m.home_club, m.away_club])
    return buf.getvalue()


def parse_wyscout_matches(matches: bytes, teams: bytes | None = None) -> list[MatchRecord]:
    """Results from a Wyscout ``matches_*.json`` file; club names from ``teams.json``."""
    try:
        match_list = json.loads(matches.decode("utf-8"))
        names = {str(t["wyId"]): t.get("name", "") for t in json.loads(teams.decode("utf-8"))} \
            if teams else {}
    except (json.JSONDecodeError, KeyError) as exc:
        raise DataFormatError(f"invalid JSON: {exc!r}") from None
    raw = []
    for i, m in enumerate(match_list):
        try:
            side = {td["side"]: (tid, td) for tid, td in m["teamsData"].items()}
            (h, hd), (a, ad) = side["home"], side["away"]
            date = str(m["dateutc"])[:10]
            raw.append((str(m["dateutc"]), i, str(m["wyId"]), date, str(h), str(a),
                        int(hd["score"]), int(ad["score"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"bad wyscout match: {exc!r}", i) from None
    raw.sort()
    return [MatchRecord(k, mid, date, h, a, hg, ag, home_club=names.get(h, h),
                        away_club=names.get(a, a))
            for k, (_, _, mid, date, h, a, hg, ag) in enumerate(raw)]
