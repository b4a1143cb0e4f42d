"""Possession segmentation and the valuable-possession filter.

A possession is a maximal run of consecutive on-ball events by one team. It
ends when the other team makes an on-ball action, at a referee action (foul,
offside, interruption), at a dead-ball restart (free kick, corner, goal kick),
at the end of a period, or at a goal. Referee actions close possessions but
are not members of any possession. Throw-ins are ordinary on-ball events.
"""
from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import IntegrityError, RatingError
from .events import EventRecord, MatchRoster

LAST_THIRD_X = 200.0 / 3.0
SET_PIECE_EXEMPT = frozenset({"free_kick", "corner_kick"})
START_ACTIONS = frozenset({"free_kick", "corner_kick", "throw_in", "goal_kick"})
# dead-ball restarts that always open a new possession
RESTARTS = frozenset({"free_kick", "corner_kick", "goal_kick"})
START_REASONS = ("open_play", "free_kick", "corner_kick", "throw_in", "goal_kick", "kickoff")
END_REASONS = ("opponent_gain", "foul", "ball_out", "period_end", "goal")


@dataclass(frozen=True)
class Possession:
    possession_id: str
    match_id: str
    team_id: str
    n_events: int
    start_reason: str
    end_reason: str
    involved: frozenset
    onfield_attack: frozenset
    onfield_defense: frozenset
    ends_last_third: bool
    goal: int
    has_penalty: bool = False
    events: tuple = field(default=(), compare=False, repr=False)

    def to_record(self) -> dict:
        return {
            "possession_id": self.possession_id,
            "match_id": self.match_id,
            "team_id": self.team_id,
            "n_events": self.n_events,
            "start_reason": self.start_reason,
            "end_reason": self.end_reason,
            "goal": self.goal,
            "involved": ";".join(sorted(self.involved)),
            "onfield_attack": ";".join(sorted(self.onfield_attack)),
            "onfield_defense": ";".join(sorted(self.onfield_defense)),
            "ends_last_third": self.ends_last_third,
            "has_penalty": self.has_penalty,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Possession":
        def _set(s):
            return frozenset(p for p in s.split(";") if p)
        return cls(
            possession_id=rec["possession_id"], match_id=str(rec["match_id"]),
            team_id=str(rec["team_id"]), n_events=int(rec["n_events"]),
            start_reason=rec["start_reason"], end_reason=rec["end_reason"],
            involved=_set(rec["involved"]), onfield_attack=_set(rec["onfield_attack"]),
            onfield_defense=_set(rec["onfield_defense"]),
            ends_last_third=bool(rec.get("ends_last_third", True)), goal=int(rec["goal"]),
            has_penalty=bool(rec.get("has_penalty", False)),
        )


def _onfield(roster: MatchRoster, team_id: str, seconds: float) -> set:
    sheet = roster.sheet(team_id)
    players = set(sheet.starters)
    for sub in sheet.substitutions:
        if sub.minute * 60.0 <= seconds:
            if sub.player_off not in players:
                raise IntegrityError(
                    f"match {roster.match_id}: substitution removes {sub.player_off}, "
                    f"who is not on the field")
            players.discard(sub.player_off)
            players.add(sub.player_on)
    return players


def _reconcile(roster, team_id, players, actor, seconds, tolerance, ev):
    """Shift a substitution whose recorded minute disagrees with the event stream.

    Substitution minutes are rounded, so a substitute may act shortly before
    the recorded minute (or a replaced player shortly after). Only shifts of
    at most ``tolerance`` minutes are allowed.
    """
    sheet = roster.sheet(team_id)
    for sub in sheet.substitutions:
        start = sub.minute * 60.0
        if sub.player_on == actor and start - tolerance * 60.0 <= seconds < start \
                and sub.player_off in players:
            players.discard(sub.player_off)
            players.add(actor)
            return
        if sub.player_off == actor and start <= seconds <= start + tolerance * 60.0 \
                and sub.player_on in players:
            players.discard(sub.player_on)
            players.add(actor)
            return
    raise IntegrityError(
        f"match {ev.match_id} period {ev.period} t={ev.t}: acting player {actor} "
        f"of team {team_id} is not on the field")


def segment(match_events: Sequence[EventRecord], roster: MatchRoster,
            sub_tolerance: float = 1.0) -> list[Possession]:
    """Split one match's sorted events into possessions.

    ``sub_tolerance`` (minutes) bounds how far a substitution may be shifted
    to agree with the event stream; 0 makes any disagreement an error.
    """
    out: list[Possession] = []
    current: list[EventRecord] = []
    next_start = "kickoff"
    last_period = None
    counter = 0

    def close(end_reason):
        nonlocal counter, current
        first = current[0]
        team = first.team_id
        try:
            opp = roster.opponent(team)
        except KeyError:
            raise IntegrityError(
                f"match {first.match_id}: team {team} not in roster") from None
        secs = first.match_seconds
        attack = _onfield(roster, team, secs)
        defense = _onfield(roster, opp, secs)
        for ev in current:
            if ev.player_id not in attack:
                _reconcile(roster, team, attack, ev.player_id, ev.match_seconds,
                           sub_tolerance, ev)
        stray = {ev.player_id for ev in current} - attack
        if stray:
            raise IntegrityError(
                f"match {first.match_id}: players {sorted(stray)} act in one possession "
                f"on both sides of a substitution")
        if first.action in START_ACTIONS:
            start = first.action
        else:
            start = next_start
        last = current[-1]
        out.append(Possession(
            possession_id=f"{first.match_id}:{counter}",
            match_id=first.match_id, team_id=team, n_events=len(current),
            start_reason=start, end_reason=end_reason,
            involved=frozenset(ev.player_id for ev in current),
            onfield_attack=frozenset(attack), onfield_defense=frozenset(defense),
            ends_last_third=last.x >= LAST_THIRD_X,
            goal=int(end_reason == "goal"),
            has_penalty=any("penalty" in ev.tags for ev in current),
            events=tuple(current),
        ))
        counter += 1
        current = []

    for ev in match_events:
        if last_period is not None and ev.period != last_period:
            if current:
                close("period_end")
            next_start = "kickoff"
        last_period = ev.period
        if not ev.on_ball:
            if current:
                close("foul" if ev.action == "foul" else "ball_out")
                next_start = "open_play"
            continue
        if current and ev.team_id != current[0].team_id:
            close("opponent_gain")
            next_start = "open_play"
        elif current and ev.action in RESTARTS:
            close("foul" if ev.action == "free_kick" else "ball_out")
            next_start = "open_play"
        current.append(ev)
        if "goal" in ev.tags:
            close("goal")
            next_start = "kickoff"
        elif "own_goal" in ev.tags:
            close("ball_out")
            next_start = "kickoff"
    if current:
        close("period_end")
    return out


def is_valuable(p: Possession) -> bool:
    if p.has_penalty or not p.ends_last_third:
        return False
    return p.n_events >= 3 or p.start_reason in SET_PIECE_EXEMPT


def filter_valuable(possessions: Iterable[Possession]) -> list[Possession]:
    """Keep possessions that end in the final third and have at least three
    actions, or start from a free kick or corner. Any possession containing a
    penalty kick is dropped."""
    return [p for p in possessions if is_valuable(p)]


@dataclass(frozen=True)
class PossessionStats:
    count: int
    mean_length: float
    median_length: float
    goal_rate: float
    involvement_counts: dict
    mean_involvements: float


def possession_stats(possessions: Sequence[Possession]) -> PossessionStats:
    if not possessions:
        raise RatingError("possession_stats needs at least one possession")
    lengths = [p.n_events for p in possessions]
    counts = Counter(pid for p in possessions for pid in p.involved)
    return PossessionStats(
        count=len(possessions),
        mean_length=statistics.fmean(lengths),
        median_length=float(statistics.median(lengths)),
        goal_rate=sum(p.goal for p in possessions) / len(possessions),
        involvement_counts=dict(sorted(counts.items())),
        mean_involvements=statistics.fmean(counts.values()) if counts else 0.0,
    )


def write_possessions(possessions: Iterable[Possession], header: str | None = None) -> str:
    lines = [header] if header else []
    lines += [json.dumps(p.to_record(), sort_keys=True) for p in possessions]
    return "\n".join(lines) + "\n"


def read_possessions(text: str) -> list[Possession]:
    return [Possession.from_record(json.loads(ln)) for ln in text.splitlines()
            if ln.strip() and not ln.startswith("#")]
