"""Synthetic seasons with known player strengths.

A world is a set of teams playing each other repeatedly. Every match is a
sequence of possessions; each modelled possession scores with probability

    logistic(intercept + sum_{involved} s_inv + sum_{attack} s_of - sum_{defence} s_of)

and is written out as an event stream that segments back into exactly the
generated possessions. Filler possessions (short, midfield, never scoring)
pad the stream and are removed again by the valuable-possession filter.

Per-player involvement propensities are log-normal, which skews the
distribution of involvement counts to the right.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError
from .events import EventRecord, MatchRoster, Substitution, TeamSheet, write_events_csv, \
    write_rosters_csv
from .design import PlayerRegistry
from .possessions import LAST_THIRD_X, Possession, filter_valuable, write_possessions
from .validation.elo import write_elo_csv
from .validation.matches import MatchRecord, write_matches_csv

FORMATION = ("GK", "DF", "DF", "DF", "DF", "MF", "MF", "MF", "MF", "FW", "FW")
PERIOD_SECONDS = 2700.0


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class SyntheticWorld:
    n_teams: int = 2
    squad_size: int = 11
    n_rounds: int = 50                 # each round every pair of teams meets once
    possessions_per_match: int = 100
    intercept: float = logit(0.15)
    sd_inv: float = 0.5
    sd_of: float = 0.05
    position_inv_shift: dict = field(default_factory=lambda: {"FW": 0.0, "MF": 0.0, "DF": 0.0,
                                                              "GK": 0.0})
    involvement_skew: float = 0.75     # sigma of the log-normal propensities
    mean_length: float = 7.5
    filler_rate: float = 0.0
    subs_per_team: int = 0
    zero_strength: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_teams < 2:
            raise ConfigurationError("need at least two teams")
        if self.squad_size < 11:
            raise ConfigurationError("a squad needs at least 11 players")
        if self.subs_per_team > self.squad_size - 11:
            raise ConfigurationError("not enough bench players for the substitutions")
        if self.possessions_per_match < 2 or self.n_rounds < 1:
            raise ConfigurationError("need at least one round and two possessions per match")
        if not 0.0 <= self.filler_rate < 1.0:
            raise ConfigurationError("filler_rate must lie in [0, 1)")
        if self.mean_length < 3:
            raise ConfigurationError("mean_length must be at least 3")
        if not (math.isfinite(self.intercept) and self.sd_inv >= 0 and self.sd_of >= 0
                and self.involvement_skew >= 0):
            raise ConfigurationError("strength parameters must be finite and non-negative")

    @classmethod
    def from_goal_rate(cls, goal_rate: float, **kw) -> "SyntheticWorld":
        if not 0.0 < goal_rate < 1.0:
            raise ConfigurationError(f"goal rate must be a probability in (0, 1), got {goal_rate}")
        return cls(intercept=logit(goal_rate), **kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PlayerTruth:
    player_id: str
    team_id: str
    position: str
    s_inv: float
    s_of: float
    propensity: float


@dataclass
class SyntheticData:
    world: SyntheticWorld
    events: list
    rosters: list
    possessions: list        # every generated possession (modelled and filler)
    modelled: list           # possession ids drawn from the goal model
    truth: dict              # player_id -> PlayerTruth
    matches: list
    elo_rows: list

    def truth_csv(self) -> str:
        lines = ["player_id,team_id,position,s_inv,s_of,propensity"]
        for p in self.truth.values():
            lines.append(f"{p.player_id},{p.team_id},{p.position},{p.s_inv!r},{p.s_of!r},"
                         f"{p.propensity!r}")
        return "\n".join(lines) + "\n"

    def files(self, header: str = "") -> dict:
        h = header.rstrip("\n") + "\n" if header else ""
        return {
            "events.csv": h + write_events_csv(self.events),
            "rosters.csv": h + write_rosters_csv(self.rosters),
            "matches.csv": h + write_matches_csv(self.matches),
            "elo.csv": h + write_elo_csv(self.elo_rows),
            "truth.csv": h + self.truth_csv(),
            "players.csv": h + PlayerRegistry.from_rosters(self.rosters).to_csv(),
            "possessions.jsonl": write_possessions(filter_valuable(self.possessions),
                                                   header.rstrip("\n") or None),
            "all_possessions.jsonl": write_possessions(self.possessions,
                                                       header.rstrip("\n") or None),
        }


def _players(world, rng):
    truth = {}
    squads = {}
    for t in range(world.n_teams):
        team = f"T{t + 1}"
        squad = []
        for s in range(world.squad_size):
            pid = str(100 * (t + 1) + s + 1)
            pos = FORMATION[s % 11]
            if world.zero_strength:
                si = so = 0.0
            else:
                si = world.position_inv_shift.get(pos, 0.0) + rng.normal(0.0, world.sd_inv)
                so = rng.normal(0.0, world.sd_of)
            prop = float(np.exp(rng.normal(0.0, world.involvement_skew)))
            truth[pid] = PlayerTruth(pid, team, pos, float(si), float(so), prop)
            squad.append(pid)
        squads[team] = squad
    return truth, squads


def _team_sheet(team, squad, world, rng):
    idx = np.arange(len(squad))
    if world.squad_size > 11:
        # keep the formation: one player per formation slot, chosen among slot-mates
        starters = []
        for slot in range(11):
            mates = idx[idx % 11 == slot]
            starters.append(squad[int(rng.choice(mates))])
    else:
        starters = list(squad)
    bench = [p for p in squad if p not in starters]
    subs = []
    if world.subs_per_team:
        offs = rng.choice(np.arange(1, 11), size=world.subs_per_team, replace=False)
        ons = rng.choice(len(bench), size=world.subs_per_team, replace=False)
        minutes = np.sort(rng.uniform(46.0, 85.0, size=world.subs_per_team))
        for m, off, on in zip(minutes, offs, ons):
            subs.append(Substitution(float(np.round(m)), starters[int(off)], bench[int(on)]))
    return TeamSheet(team, tuple(starters), tuple(subs))


def _onfield(sheet: TeamSheet, seconds: float) -> list:
    on = list(sheet.starters)
    for s in sheet.substitutions:
        if s.minute * 60.0 <= seconds:
            on[on.index(s.player_off)] = s.player_on
    return on


def _schedule(world):
    pairs = [(a, b) for a in range(world.n_teams) for b in range(a + 1, world.n_teams)]
    out = []
    for r in range(world.n_rounds):
        for a, b in pairs:
            out.append((a, b) if r % 2 == 0 else (b, a))
    return out


def generate(world: SyntheticWorld) -> SyntheticData:
    """Draw a full synthetic season. Deterministic given ``world.seed``."""
    rng = np.random.default_rng(world.seed)
    truth, squads = _players(world, rng)
    teams = sorted(squads)
    events, rosters, possessions, modelled, matches = [], [], [], [], []
    for k, (hi, ai) in enumerate(_schedule(world)):
        mid = f"M{k + 1:04d}"
        home, away = teams[hi], teams[ai]
        sheets = (_team_sheet(home, squads[home], world, rng),
                  _team_sheet(away, squads[away], world, rng))
        positions = {p: truth[p].position for s in sheets for p in
                     list(s.starters) + [x.player_on for x in s.substitutions]}
        roster = MatchRoster(mid, sheets, positions)
        rosters.append(roster)
        m_events, m_poss, m_model, goals = _match(world, rng, mid, roster, truth)
        events.extend(m_events)
        possessions.extend(m_poss)
        modelled.extend(m_model)
        per_round = world.n_teams * (world.n_teams - 1) // 2
        date = np.datetime64("2020-08-01") + np.timedelta64(7 * (k // per_round), "D")
        matches.append(MatchRecord(k, mid, str(date), home, away, goals[home], goals[away],
                                   home_club=home, away_club=away))
    team_strength = {t: float(np.mean([truth[p].s_inv + truth[p].s_of for p in squads[t]]))
                     for t in teams}
    elo_rows = [(t, "2020-07-01", 1500.0 + 400.0 * team_strength[t]) for t in teams]
    return SyntheticData(world, events, rosters, possessions, modelled, truth, matches, elo_rows)


def _match(world, rng, mid, roster, truth):
    sheets = {s.team_id: s for s in roster.teams}
    teams = [s.team_id for s in roster.teams]
    n = world.possessions_per_match
    half = n // 2
    plan = []          # (period, team_index, filler)
    team = 0
    for i in range(n):
        period = 1 if i < half else 2
        if i == half:
            team = 1
        plan.append((period, team, bool(rng.random() < world.filler_rate)))
        team = int(rng.integers(0, 2))
    # durations per possession, scaled so each period fits in regulation time
    lengths = []
    for period, ti, filler in plan:
        if filler:
            lengths.append(2 if rng.random() < 0.5 else 1)
        else:
            lengths.append(3 + int(rng.poisson(world.mean_length - 3)))
    gaps = rng.uniform(1.0, 4.0, size=sum(lengths))
    pauses = rng.uniform(3.0, 12.0, size=n)
    t_events = []
    pos = 0
    clock = {1: 0.0, 2: 0.0}
    raw_times = []
    for i, (period, _, _) in enumerate(plan):
        clock[period] += pauses[i]
        ts = []
        for _ in range(lengths[i]):
            clock[period] += gaps[pos]; pos += 1
            ts.append(clock[period])
        raw_times.append(ts)
    scale = {p: min(1.0, (PERIOD_SECONDS - 60.0) / clock[p]) if clock[p] > 0 else 1.0
             for p in (1, 2)}
    for i, (period, _, _) in enumerate(plan):
        t_events.append([round(t * scale[period], 3) for t in raw_times[i]])

    out_events, out_poss, model_ids = [], [], []
    goals = {t: 0 for t in teams}
    next_start = "kickoff"
    seq = 0
    for i, (period, ti, filler) in enumerate(plan):
        if i == half:
            next_start = "kickoff"
        team_id = teams[ti]
        opp = teams[1 - ti]
        times = t_events[i]
        first_secs = (0.0 if period == 1 else PERIOD_SECONDS) + times[0]
        attack = _onfield(sheets[team_id], first_secs)
        defense = _onfield(sheets[opp], first_secs)
        nxt = plan[i + 1] if i + 1 < n else None
        period_ends = nxt is None or nxt[0] != period
        same_team_next = (not period_ends) and nxt[1] == ti
        # choose an opening action consistent with the previous ending
        start = next_start
        w = np.array([truth[p].propensity for p in attack])
        actors = [attack[j] for j in rng.choice(11, size=len(times), p=w / w.sum())]
        involved = frozenset(actors)
        if filler:
            goal = 0
            xs = np.sort(rng.uniform(20.0, 60.0, size=len(times)))
        else:
            eta = world.intercept + sum(truth[p].s_inv for p in involved) \
                + sum(truth[p].s_of for p in attack) - sum(truth[p].s_of for p in defense)
            goal = int(rng.random() < 1.0 / (1.0 + math.exp(-eta)))
            xs = np.sort(rng.uniform(25.0, 95.0, size=len(times)))
            xs[-1] = rng.uniform(LAST_THIRD_X + 1.0, 99.0)
            xs = np.sort(xs)
        first_action = {"kickoff": "pass", "open_play": "pass", "free_kick": "free_kick",
                        "throw_in": "throw_in", "corner_kick": "corner_kick",
                        "goal_kick": "goal_kick"}[start]
        if goal:
            end = "goal"
        elif period_ends:
            end = "period_end"
        elif same_team_next:
            end = "foul" if rng.random() < 0.5 else "ball_out"
        else:
            end = "opponent_gain"
        evs = []
        for j, (t, x, actor) in enumerate(zip(times, xs, actors)):
            if j == 0:
                action = first_action
            elif j == len(times) - 1 and (goal or rng.random() < 0.3):
                action = "shot"
            else:
                action = ("pass", "dribble", "cross", "touch", "duel")[int(rng.integers(0, 5))]
            tags = frozenset({"goal"}) if goal and j == len(times) - 1 else frozenset({"accurate"})
            evs.append(EventRecord(mid, period, float(t), team_id, actor, action,
                                   float(round(x, 2)), float(round(rng.uniform(0, 100), 2)),
                                   tags, seq))
            seq += 1
        out_events.extend(evs)
        # terminators and the next possession's opening
        # terminators sit between this possession and the next one
        t = round(0.5 * (times[-1] + t_events[i + 1][0]), 3) if nxt is not None \
            and not period_ends else round(times[-1] + 0.5, 3)
        if end == "foul":
            out_events.append(EventRecord(mid, period, t, opp, defense[int(rng.integers(0, 11))],
                                          "foul", float(round(100 - xs[-1], 2)), 50.0,
                                          frozenset(), seq))
            seq += 1
            next_start = "free_kick"
        elif end == "ball_out":
            out_events.append(EventRecord(mid, period, t, "", "", "interruption",
                                          float(round(xs[-1], 2)), 100.0, frozenset(), seq))
            seq += 1
            next_start = ("throw_in", "corner_kick")[int(rng.integers(0, 2))]
        elif end == "goal":
            next_start = "kickoff"
            goals[team_id] += 1
        else:
            next_start = "open_play" if end == "opponent_gain" else "kickoff"
        pid = f"{mid}:{i}"
        out_poss.append(Possession(
            possession_id=pid, match_id=mid, team_id=team_id, n_events=len(evs),
            start_reason=start, end_reason=end, involved=involved,
            onfield_attack=frozenset(attack), onfield_defense=frozenset(defense),
            ends_last_third=evs[-1].x >= LAST_THIRD_X, goal=goal, events=tuple(evs)))
        if not filler:
            model_ids.append(pid)
    return out_events, out_poss, model_ids, goals
