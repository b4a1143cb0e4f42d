"""Event-stream and lineup ingest.

Two event formats are understood:

* ``wyscout_v2`` -- the nested JSON layout of the public Wyscout match event
  dataset (one list of event objects with ``eventId``/``subEventId``, ``tags``
  and ``positions``).
* ``simple_csv`` -- one event per row with header
  ``match_id,period,t,team_id,player_id,action,x,y,tags``.

Both normalise into :class:`EventRecord`. Coordinates are percentages of the
pitch measured toward the acting team's attacking direction and are passed
through unchanged.
"""
from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ConfigurationError, DataFormatError, IntegrityError

ACTIONS = (
    "pass", "shot", "duel", "touch", "clearance", "cross", "dribble",
    "free_kick", "corner_kick", "throw_in", "goal_kick", "foul", "offside",
    "save", "interruption", "other",
)
# referee actions: end a possession but never belong to one
NON_ON_BALL = frozenset({"foul", "offside", "interruption"})

POSITION_GROUPS = ("FW", "MF", "DF", "GK")
_POSITION_ALIASES = {
    "fw": "FW", "f": "FW", "forward": "FW", "striker": "FW", "attacker": "FW",
    "mf": "MF", "m": "MF", "midfielder": "MF", "midfield": "MF",
    "df": "DF", "d": "DF", "defender": "DF", "defence": "DF", "defense": "DF",
    "gk": "GK", "g": "GK", "goalkeeper": "GK", "keeper": "GK",
}

# Wyscout role codes that are not generic labels
_WYSCOUT_ROLES = {"MD": "MF"}

EVENT_CSV_HEADER = ("match_id", "period", "t", "team_id", "player_id",
                    "action", "x", "y", "tags")
ROSTER_CSV_HEADER = ("match_id", "team_id", "player_id", "position", "role",
                     "sub_minute")

# period start offsets in match seconds (1H, 2H, ET1, ET2)
PERIOD_OFFSET = {1: 0.0, 2: 45 * 60.0, 3: 90 * 60.0, 4: 105 * 60.0}


@dataclass(frozen=True)
class EventRecord:
    match_id: str
    period: int
    t: float
    team_id: str
    player_id: str
    action: str
    x: float
    y: float
    tags: frozenset = frozenset()
    seq: int = field(default=0, compare=False, repr=False)

    @property
    def on_ball(self) -> bool:
        return self.action not in NON_ON_BALL

    @property
    def match_seconds(self) -> float:
        return PERIOD_OFFSET.get(self.period, 105 * 60.0 + 15 * 60.0 * (self.period - 4)) + self.t

    def sort_key(self):
        return (self.period, self.t, self.seq)


def normalize_position(label: str) -> str:
    key = label.strip().lower()
    if key not in _POSITION_ALIASES:
        raise DataFormatError(f"unknown position label {label!r}")
    return _POSITION_ALIASES[key]


def _validated(ev: EventRecord, index: int) -> EventRecord:
    if ev.period < 1:
        raise DataFormatError(f"period must be >= 1, got {ev.period}", index)
    if not ev.t >= 0:
        raise DataFormatError(f"negative or missing timestamp {ev.t}", index)
    for name, v in (("x", ev.x), ("y", ev.y)):
        if not 0.0 <= v <= 100.0:
            raise DataFormatError(f"{name}={v} outside [0, 100]", index)
    if "goal" in ev.tags and "own_goal" in ev.tags:
        raise DataFormatError("event tagged both goal and own_goal", index)
    return ev


def _group_and_sort(events: Iterable[EventRecord]) -> dict[str, list[EventRecord]]:
    by_match: dict[str, list[EventRecord]] = defaultdict(list)
    for ev in events:
        by_match[ev.match_id].append(ev)
    return {m: sorted(evs, key=EventRecord.sort_key) for m, evs in by_match.items()}


def parse_events(stream: bytes, format: str = "simple_csv") -> dict[str, list[EventRecord]]:
    """Parse an event stream into chronologically sorted events per match.

    Parameters
    ----------
    stream : bytes
        Raw file contents.
    format : {"simple_csv", "wyscout_v2"}

    Returns
    -------
    dict
        ``match_id -> list of EventRecord`` sorted by (period, t, input index).
    """
    if format == "simple_csv":
        events = _parse_simple_csv(stream)
    elif format == "wyscout_v2":
        events = _parse_wyscout(stream)
    else:
        raise ConfigurationError(f"unknown event format {format!r}")
    return _group_and_sort(events)


def _data_lines(text: str):
    # header comments written by our own tools are skipped
    return [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def _parse_simple_csv(stream: bytes) -> list[EventRecord]:
    reader = csv.reader(_data_lines(stream.decode("utf-8")))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != EVENT_CSV_HEADER:
        raise DataFormatError(f"expected header {','.join(EVENT_CSV_HEADER)}", 0)
    out = []
    for i, row in enumerate(reader, start=1):
        if len(row) != len(EVENT_CSV_HEADER):
            raise DataFormatError(f"expected {len(EVENT_CSV_HEADER)} fields, got {len(row)}", i)
        match_id, period, t, team, player, action, x, y, tags = (c.strip() for c in row)
        try:
            ev = EventRecord(
                match_id=match_id, period=int(period), t=float(t), team_id=team,
                player_id=player, action=action if action in ACTIONS else "other",
                x=float(x), y=float(y),
                tags=frozenset(s for s in tags.split(";") if s), seq=i - 1,
            )
        except ValueError as exc:
            raise DataFormatError(str(exc), i) from None
        out.append(_validated(ev, i))
    return out


def write_events_csv(events: Iterable[EventRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_CSV_HEADER)
    for ev in events:
        w.writerow([ev.match_id, ev.period, repr(float(ev.t)), ev.team_id, ev.player_id,
                    ev.action, repr(float(ev.x)), repr(float(ev.y)), ";".join(sorted(ev.tags))])
    return buf.getvalue()


# --- Wyscout v2 -------------------------------------------------------------

_WY_PERIODS = {"1H": 1, "2H": 2, "E1": 3, "E2": 4}
_WY_EVENT = {1: "duel", 2: "foul", 4: "save", 5: "interruption", 6: "offside",
             9: "save", 10: "shot"}
_WY_SUBEVENT = {30: "corner_kick", 31: "free_kick", 32: "free_kick", 33: "free_kick",
                34: "goal_kick", 35: "shot", 36: "throw_in", 70: "dribble",
                71: "clearance", 72: "touch", 80: "cross"}
_WY_TAGS = {101: "goal", 102: "own_goal", 1801: "accurate"}


def _wyscout_action(event_id, sub_id) -> str:
    if sub_id in _WY_SUBEVENT:
        return _WY_SUBEVENT[sub_id]
    if event_id == 8:
        return "pass"
    return _WY_EVENT.get(event_id, "other")


def _parse_wyscout(stream: bytes) -> list[EventRecord]:
    try:
        raw = json.loads(stream.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise DataFormatError("expected a JSON list of events")
    out = []
    for i, rec in enumerate(raw):
        try:
            period_label = rec["matchPeriod"]
            if period_label not in _WY_PERIODS:
                continue  # shoot-outs are not open play
            event_id = int(rec["eventId"])
            sub_raw = rec.get("subEventId")
            sub_id = int(sub_raw) if sub_raw not in (None, "") else None
            action = _wyscout_action(event_id, sub_id)
            tags = {_WY_TAGS[t["id"]] for t in rec.get("tags", ()) if t["id"] in _WY_TAGS}
            if sub_id == 35:
                tags.add("penalty")
            if action == "save":
                # keeper events carry the goal tag when conceding
                tags.discard("goal")
            pos = rec.get("positions") or [{"x": 0, "y": 0}]
            ev = EventRecord(
                match_id=str(rec["matchId"]), period=_WY_PERIODS[period_label],
                t=float(rec["eventSec"]), team_id=str(rec["teamId"]),
                player_id=str(rec["playerId"]), action=action,
                x=float(pos[0]["x"]), y=float(pos[0]["y"]), tags=frozenset(tags), seq=i,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"bad wyscout event: {exc!r}", i) from None
        out.append(_validated(ev, i))
    return out


# --- rosters ----------------------------------------------------------------

@dataclass(frozen=True)
class Substitution:
    minute: float
    player_off: str
    player_on: str


@dataclass(frozen=True)
class TeamSheet:
    team_id: str
    starters: tuple
    substitutions: tuple = ()


@dataclass(frozen=True)
class MatchRoster:
    match_id: str
    teams: tuple  # two TeamSheets
    positions: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for sheet in self.teams:
            if len(sheet.starters) != 11 or len(set(sheet.starters)) != 11:
                raise DataFormatError(
                    f"match {self.match_id} team {sheet.team_id}: "
                    f"expected 11 distinct starters, got {len(set(sheet.starters))}")
            for sub in sheet.substitutions:
                if sub.player_on in sheet.starters:
                    raise DataFormatError(
                        f"match {self.match_id}: substitute {sub.player_on} is also a starter")

    def sheet(self, team_id: str) -> TeamSheet:
        for s in self.teams:
            if s.team_id == team_id:
                return s
        raise KeyError(team_id)

    def opponent(self, team_id: str) -> str:
        ids = [s.team_id for s in self.teams]
        if team_id not in ids:
            raise KeyError(team_id)
        return ids[1] if ids[0] == team_id else ids[0]

    @property
    def players(self) -> set:
        out = set()
        for s in self.teams:
            out.update(s.starters)
            out.update(sub.player_on for sub in s.substitutions)
        return out


def parse_rosters(stream: bytes, events: dict | None = None) -> list[MatchRoster]:
    """Parse the roster CSV.

    Columns: ``match_id,team_id,player_id,position,role,sub_minute`` plus an
    optional trailing ``replaces`` column naming the player taken off for a
    ``sub`` row. Substitute rows without ``replaces`` are recorded as
    appearances only (they affect position bookkeeping but not on-field sets).

    If ``events`` is given, every acting player must appear in some roster.
    """
    reader = csv.reader(_data_lines(stream.decode("utf-8")))
    header = [h.strip() for h in next(reader, [])]
    if tuple(header[:6]) != ROSTER_CSV_HEADER or len(header) > 7 or (
            len(header) == 7 and header[6] != "replaces"):
        raise DataFormatError(f"expected header {','.join(ROSTER_CSV_HEADER)}[,replaces]", 0)
    starters: dict = defaultdict(lambda: defaultdict(list))
    subs: dict = defaultdict(lambda: defaultdict(list))
    positions: dict = defaultdict(dict)
    order: list = []
    for i, row in enumerate(reader, start=1):
        if len(row) not in (6, 7) or len(row) > len(header):
            raise DataFormatError(f"expected {len(header)} fields, got {len(row)}", i)
        match_id, team, player, position, role, minute = (c.strip() for c in row[:6])
        replaces = row[6].strip() if len(row) == 7 else ""
        if match_id not in starters:
            order.append(match_id)
        positions[match_id][player] = normalize_position(position)
        teams_here = starters[match_id]
        teams_here.setdefault(team, [])
        subs[match_id].setdefault(team, [])
        if role == "start":
            teams_here[team].append(player)
        elif role == "sub":
            try:
                m = float(minute)
            except ValueError:
                raise DataFormatError(f"bad sub_minute {minute!r}", i) from None
            subs[match_id][team].append((m, replaces, player))
        else:
            raise DataFormatError(f"role must be start or sub, got {role!r}", i)
    rosters = []
    for match_id in order:
        teams = starters[match_id]
        if len(teams) != 2:
            raise DataFormatError(f"match {match_id}: expected 2 teams, got {len(teams)}")
        sheets = []
        for team in teams:
            sub_list = tuple(Substitution(m, off, on)
                             for m, off, on in sorted(subs[match_id][team], key=lambda s: s[0])
                             if off)
            sheets.append(TeamSheet(team, tuple(teams[team]), sub_list))
        rosters.append(MatchRoster(match_id, tuple(sheets), dict(positions[match_id])))
    if events is not None:
        check_orphans(events, rosters)
    return rosters


def check_orphans(events: dict, rosters: Iterable[MatchRoster]) -> None:
    known = set()
    for r in rosters:
        known.update(r.positions)
        known.update(r.players)
    orphans = sorted({ev.player_id for evs in events.values() for ev in evs
                      if ev.on_ball and ev.player_id not in known})
    if orphans:
        raise IntegrityError(f"players in events missing from all rosters: {', '.join(orphans)}")


def write_rosters_csv(rosters: Iterable[MatchRoster]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROSTER_CSV_HEADER + ("replaces",))
    for r in rosters:
        for sheet in r.teams:
            for p in sheet.starters:
                w.writerow([r.match_id, sheet.team_id, p, r.positions[p], "start", "", ""])
            for sub in sheet.substitutions:
                w.writerow([r.match_id, sheet.team_id, sub.player_on, r.positions[sub.player_on],
                            "sub", repr(float(sub.minute)), sub.player_off])
    return buf.getvalue()


def modal_positions(rosters: Iterable[MatchRoster]) -> dict[str, str]:
    """One position group per player: the modal listing, ties FW > MF > DF > GK."""
    counts: dict = defaultdict(Counter)
    for r in rosters:
        for p, pos in r.positions.items():
            counts[p][pos] += 1
    out = {}
    for p, c in counts.items():
        best = max(c.values())
        out[p] = next(g for g in POSITION_GROUPS if c.get(g, 0) == best)
    return out


def modal_teams(rosters: Iterable[MatchRoster]) -> dict[str, str]:
    """Team each player appeared for most often; ties broken by first appearance."""
    counts: dict = defaultdict(Counter)
    for r in rosters:
        for sheet in r.teams:
            for p in list(sheet.starters) + [s.player_on for s in sheet.substitutions]:
                counts[p][sheet.team_id] += 1
    return {p: c.most_common(1)[0][0] for p, c in counts.items()}


def parse_wyscout_rosters(matches: bytes, players: bytes) -> list[MatchRoster]:
    """Rosters from the Wyscout ``matches_*.json`` and ``players.json`` files."""
    try:
        match_list = json.loads(matches.decode("utf-8"))
        player_list = json.loads(players.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc}") from None
    role_of = {}
    for p in player_list:
        role = p.get("role") or {}
        label = role.get("code2") or role.get("name") or ""
        if label:
            role_of[str(p["wyId"])] = normalize_position(_WYSCOUT_ROLES.get(label, label))
    rosters = []
    for i, m in enumerate(match_list):
        try:
            sheets = []
            positions = {}
            for team_id, td in m["teamsData"].items():
                formation = td["formation"]
                start = tuple(str(x["playerId"]) for x in formation["lineup"])
                subs = tuple(
                    Substitution(float(s["minute"]), str(s["playerOut"]), str(s["playerIn"]))
                    for s in (formation.get("substitutions") or [])
                    if isinstance(s, dict) and s.get("playerIn")
                )
                for p in start + tuple(s.player_on for s in subs):
                    if p not in role_of:
                        raise DataFormatError(f"player {p} has no position in players file", i)
                    positions[p] = role_of[p]
                sheets.append(TeamSheet(str(team_id), start, subs))
            rosters.append(MatchRoster(str(m["wyId"]), tuple(sheets), positions))
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"bad wyscout match: {exc!r}", i) from None
    return rosters
