import json

import pytest
from hypothesis import given, strategies as st

from possession_ratings.errors import ConfigurationError, DataFormatError, IntegrityError
from possession_ratings.events import (EventRecord, MatchRoster, Substitution, TeamSheet,
                                       check_orphans, modal_positions, normalize_position,
                                       parse_events, parse_rosters, parse_wyscout_rosters,
                                       write_events_csv, write_rosters_csv)

HEADER = "match_id,period,t,team_id,player_id,action,x,y,tags\n"


def _csv(*rows):
    return (HEADER + "".join(r + "\n" for r in rows)).encode()


def test_events_sorted_by_period_time_and_input_order():
    data = _csv("m,2,1.0,A,a,pass,10,10,",
                "m,1,5.0,A,b,pass,10,10,",
                "m,1,5.0,B,c,duel,10,10,",
                "m,1,0.5,A,d,pass,10,10,")
    evs = parse_events(data)["m"]
    assert [e.player_id for e in evs] == ["d", "b", "c", "a"]


def test_unknown_action_maps_to_other():
    evs = parse_events(_csv("m,1,1,A,a,bicycle_kick,10,10,"))["m"]
    assert evs[0].action == "other"


def test_tags_parsed_as_set():
    ev = parse_events(_csv("m,1,1,A,a,shot,90,50,goal;accurate"))["m"][0]
    assert ev.tags == frozenset({"goal", "accurate"})


@pytest.mark.parametrize("row, fragment", [
    ("m,1,1,A,a,pass,101,10,", "outside"),
    ("m,1,-1,A,a,pass,10,10,", "timestamp"),
    ("m,0,1,A,a,pass,10,10,", "period"),
    ("m,1,1,A,a,shot,10,10,goal;own_goal", "own_goal"),
    ("m,1,1,A,a,pass,10,10", "fields"),
])
def test_malformed_rows_raise_with_record_index(row, fragment):
    with pytest.raises(DataFormatError) as exc:
        parse_events(_csv("m,1,1,A,a,pass,10,10,", row))
    assert "record 2" in str(exc.value)
    assert fragment in str(exc.value)


def test_bad_header_and_format():
    with pytest.raises(DataFormatError):
        parse_events(b"a,b,c\n1,2,3\n")
    with pytest.raises(ConfigurationError):
        parse_events(_csv(), format="opta")


def test_comment_lines_skipped():
    data = b"# produced by a tool\n" + _csv("m,1,1,A,a,pass,10,10,")
    assert len(parse_events(data)["m"]) == 1


_action = st.sampled_from(["pass", "shot", "duel", "foul", "throw_in", "other"])
_event = st.tuples(st.integers(1, 2), st.floats(0, 2700, allow_nan=False), st.sampled_from("AB"),
                   st.sampled_from(["p1", "p2", "p3"]), _action,
                   st.floats(0, 100, allow_nan=False), st.floats(0, 100, allow_nan=False))


@given(st.lists(_event, min_size=1, max_size=30))
def test_csv_round_trip(rows):
    evs = [EventRecord("m", p, t, team, pid, a, x, y, frozenset(), i)
           for i, (p, t, team, pid, a, x, y) in enumerate(rows)]
    back = parse_events(write_events_csv(evs).encode())["m"]
    assert back == sorted(evs, key=EventRecord.sort_key)
    keys = [e.sort_key()[:2] for e in back]
    assert keys == sorted(keys)


def _roster_csv(extra=()):
    lines = ["match_id,team_id,player_id,position,role,sub_minute,replaces"]
    for t in "AB":
        for i in range(11):
            lines.append(f"m,{t},{t}{i},{'GK' if i == 0 else 'MF'},start,,")
    lines.extend(extra)
    return ("\n".join(lines) + "\n").encode()


def test_roster_parse_with_substitution():
    r = parse_rosters(_roster_csv(["m,A,A99,FW,sub,60,A5"]))[0]
    sheet = r.sheet("A")
    assert len(sheet.starters) == 11
    assert sheet.substitutions == (Substitution(60.0, "A5", "A99"),)
    assert r.positions["A99"] == "FW"
    assert r.opponent("A") == "B"


def test_roster_requires_eleven_starters():
    lines = _roster_csv().decode().splitlines()
    with pytest.raises(DataFormatError):
        parse_rosters(("\n".join(lines[:-1]) + "\n").encode())


def test_roster_round_trip():
    rosters = parse_rosters(_roster_csv(["m,B,B77,DF,sub,70.0,B3"]))
    again = parse_rosters(write_rosters_csv(rosters).encode())
    assert again == rosters
    assert again[0].positions == rosters[0].positions


def test_orphan_player_is_integrity_error():
    events = parse_events(_csv("m,1,1,A,ghost,pass,10,10,"))
    with pytest.raises(IntegrityError, match="ghost"):
        parse_rosters(_roster_csv(), events)


def test_non_on_ball_events_do_not_need_roster_entries():
    events = parse_events(_csv("m,1,1,,,interruption,10,10,"))
    check_orphans(events, parse_rosters(_roster_csv()))


@pytest.mark.parametrize("label, group", [("Forward", "FW"), ("gk", "GK"), ("Defender", "DF"),
                                          ("MD", None)])
def test_position_normalisation(label, group):
    if group is None:
        with pytest.raises(DataFormatError):
            normalize_position(label)
    else:
        assert normalize_position(label) == group


def test_modal_position_tie_order():
    sheets = (TeamSheet("A", tuple(f"a{i}" for i in range(11))),
              TeamSheet("B", tuple(f"b{i}" for i in range(11))))
    base = {p: "MF" for s in sheets for p in s.starters}
    r1 = MatchRoster("1", sheets, {**base, "a0": "DF"})
    r2 = MatchRoster("2", sheets, {**base, "a0": "FW"})
    pos = modal_positions([r1, r2])
    assert pos["a0"] == "FW"
    assert pos["b3"] == "MF"


def _wyscout_event(eid, sub, team, player, period, sec, x, tags=()):
    return {"eventId": eid, "subEventId": sub, "teamId": team, "playerId": player,
            "matchPeriod": period, "eventSec": sec, "matchId": 7,
            "positions": [{"x": x, "y": 50}], "tags": [{"id": t} for t in tags]}


def test_wyscout_events_mapping():
    raw = [
        _wyscout_event(8, 85, 1, 10, "1H", 1.0, 40, [1801]),
        _wyscout_event(10, 100, 1, 11, "1H", 3.0, 90, [101]),
        _wyscout_event(9, 90, 2, 20, "1H", 3.5, 5, [101]),
        _wyscout_event(3, 35, 1, 11, "2H", 5.0, 89, [101]),
        _wyscout_event(3, 30, 1, 12, "2H", 9.0, 99),
        _wyscout_event(2, 20, 2, 21, "2H", 12.0, 50),
        _wyscout_event(8, 80, 1, 12, "P", 1.0, 50),
    ]
    evs = parse_events(json.dumps(raw).encode(), format="wyscout_v2")["7"]
    assert [e.action for e in evs] == ["pass", "shot", "save", "shot", "corner_kick", "foul"]
    assert "goal" in evs[1].tags and "accurate" in evs[0].tags
    assert "goal" not in evs[2].tags
    assert {"penalty", "goal"} <= evs[3].tags
    assert evs[3].period == 2


def test_wyscout_rosters():
    ids = list(range(100, 111)) + list(range(200, 212))
    match = {"wyId": 7, "teamsData": {
        "1": {"formation": {"lineup": [{"playerId": i} for i in range(100, 111)],
                            "substitutions": []}},
        "2": {"formation": {"lineup": [{"playerId": i} for i in range(200, 211)],
                            "substitutions": [{"playerIn": 211, "playerOut": 205, "minute": 70}]}},
    }}

    def players(other):
        return json.dumps([{"wyId": i, "role": {"code2": "GK" if i % 100 == 0 else other}}
                           for i in ids]).encode()

    with pytest.raises(DataFormatError):
        parse_wyscout_rosters(json.dumps([match]).encode(), players("XX"))
    r = parse_wyscout_rosters(json.dumps([match]).encode(), players("MD"))[0]
    assert r.sheet("2").substitutions == (Substitution(70.0, "205", "211"),)
    assert r.positions["100"] == "GK" and r.positions["101"] == "MF"
