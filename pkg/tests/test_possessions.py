import pytest
from hypothesis import given, strategies as st

from conftest import GOLDEN_CASES, golden_case
from possession_ratings.errors import IntegrityError
from possession_ratings.events import EventRecord, MatchRoster, Substitution, TeamSheet
from possession_ratings.possessions import (END_REASONS, START_REASONS, filter_valuable,
                                            is_valuable, possession_stats, read_possessions,
                                            segment, write_possessions)


@pytest.mark.parametrize("name", GOLDEN_CASES)
def test_golden_sequences(name):
    events, roster, expected = golden_case(name)
    got = segment(events, roster)
    assert len(got) == len(expected)
    for p, e in zip(got, expected):
        assert p.team_id == e["team"]
        assert p.n_events == e["n_events"]
        assert p.start_reason == e["start"]
        assert p.end_reason == e["end"]
        assert p.goal == e["goal"]
        assert sorted(p.involved) == e["involved"]
        assert p.ends_last_third == e["last_third"]
        assert is_valuable(p) == e["valuable"]


@pytest.mark.parametrize("name", GOLDEN_CASES)
def test_golden_possessions_are_self_contained(name):
    events, roster, _ = golden_case(name)
    for p in segment(events, roster):
        (alone,) = segment(p.events, roster)
        assert alone.events == p.events


# random event streams over two full teams -----------------------------------

SHEETS = (TeamSheet("A", tuple(f"A{i}" for i in range(1, 12))),
          TeamSheet("B", tuple(f"B{i}" for i in range(1, 12))))
ROSTER = MatchRoster("m", SHEETS, {p: "MF" for s in SHEETS for p in s.starters})
ACTIONS = ["pass", "pass", "duel", "shot", "foul", "ball_out", "free_kick", "corner_kick",
           "throw_in", "goal_kick", "interruption"]

_raw = st.tuples(st.integers(1, 2), st.sampled_from("AB"), st.integers(1, 11),
                 st.sampled_from(ACTIONS), st.floats(0, 100, allow_nan=False),
                 st.sampled_from([(), ("goal",), ("own_goal",)]))


def _stream(raw):
    evs = []
    for i, (period, team, num, action, x, tags) in enumerate(sorted(raw, key=lambda r: r[0])):
        if action != "shot" and tags == ("goal",):
            tags = ()
        evs.append(EventRecord("m", period, float(i), team, f"{team}{num}", action, x, 50.0,
                               frozenset(tags), i))
    return evs


@given(st.lists(_raw, max_size=60))
def test_partition_of_on_ball_events(raw):
    evs = _stream(raw)
    poss = segment(evs, ROSTER)
    members = [ev for p in poss for ev in p.events]
    assert members == [ev for ev in evs if ev.on_ball]
    for p in poss:
        assert p.n_events == len(p.events) >= 1
        assert {ev.team_id for ev in p.events} == {p.team_id}
        assert len({ev.period for ev in p.events}) == 1
        assert p.start_reason in START_REASONS and p.end_reason in END_REASONS
        assert p.goal == (p.end_reason == "goal")
        assert p.involved <= p.onfield_attack
        assert len(p.onfield_attack) == len(p.onfield_defense) == 11
        assert not p.onfield_attack & p.onfield_defense


@given(st.lists(_raw, max_size=60))
def test_possessions_are_self_contained(raw):
    for p in segment(_stream(raw), ROSTER):
        (alone,) = segment(p.events, ROSTER)
        assert alone.events == p.events and alone.goal == p.goal


@given(st.lists(_raw, max_size=60))
def test_valuable_filter(raw):
    poss = segment(_stream(raw), ROSTER)
    kept = filter_valuable(poss)
    for p in kept:
        assert p.ends_last_third and not p.has_penalty
        assert p.n_events >= 3 or p.start_reason in {"free_kick", "corner_kick"}
    assert filter_valuable(kept) == kept


def test_serialisation_round_trip():
    events, roster, _ = golden_case("05_goal")
    poss = segment(events, roster)
    back = read_possessions(write_possessions(poss, header="# test"))
    assert back == poss


def test_stats():
    stats = possession_stats(segment(*golden_case("05_goal")[:2]))
    assert stats.count == 2 and stats.goal_rate == 0.5
    assert stats.mean_length == 2.5


# substitutions ---------------------------------------------------------------

def _sub_roster(minute):
    a = TeamSheet("A", SHEETS[0].starters, (Substitution(minute, "A5", "A12"),))
    pos = {p: "MF" for s in SHEETS for p in s.starters}
    pos["A12"] = "MF"
    return MatchRoster("m", (a, SHEETS[1]), pos)


def _ev(t, team, pid, action="pass", seq=0):
    return EventRecord("m", 2, t, team, pid, action, 80.0, 50.0, frozenset(), seq)


def test_lineup_follows_substitution():
    roster = _sub_roster(60)    # 15 minutes into the second half
    evs = [_ev(100, "A", "A5", seq=0), _ev(101, "B", "B2", seq=1),
           _ev(1000, "A", "A12", seq=2), _ev(1001, "A", "A3", seq=3)]
    p0, _, p2 = segment(evs, roster)
    assert "A5" in p0.onfield_attack and "A12" not in p0.onfield_attack
    assert "A12" in p2.onfield_attack and "A5" not in p2.onfield_attack
    assert p2.involved == {"A12", "A3"}


def test_substitute_acting_just_before_recorded_minute_is_reconciled():
    roster = _sub_roster(60)
    evs = [_ev(900 - 20, "A", "A12")]
    (p,) = segment(evs, roster)
    assert "A12" in p.onfield_attack and "A5" not in p.onfield_attack
    with pytest.raises(IntegrityError):
        segment(evs, roster, sub_tolerance=0.0)


def test_substitute_acting_far_too_early_is_integrity_error():
    with pytest.raises(IntegrityError, match="A12"):
        segment([_ev(300, "A", "A12")], _sub_roster(60))


def test_unknown_actor_is_integrity_error():
    with pytest.raises(IntegrityError):
        segment([_ev(10, "A", "B3")], ROSTER)
