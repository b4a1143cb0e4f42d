import numpy as np
import pytest
from hypothesis import given, strategies as st

from possession_ratings.errors import ConfigurationError
from possession_ratings.ratings import (assemble_ratings, compare_ratings, correlation_plot_data,
                                        dense_rank, minmax, position_summaries, ratings_plot_data,
                                        read_ratings_csv, summaries_plot_data, write_ratings_csv)

# exact binary fractions keep affine transforms free of rounding
_coef = st.integers(-64, 64).map(lambda v: v / 16.0)
_pairs = st.lists(st.tuples(_coef, _coef), min_size=2, max_size=25).map(
    lambda vals: {f"p{i:02d}": v for i, v in enumerate(vals)})


def test_all_zero_fit():
    rs = assemble_ratings({"a": (0.0, 0.0), "b": (0.0, 0.0)}, "std_avg")
    assert [r.combined_sum for r in rs] == [0.0, 0.0]
    assert [r.combined_avg for r in rs] == [0.5, 0.5]
    assert [r.rank_avg for r in rs] == [1, 1]


def test_two_complementary_players():
    rs = assemble_ratings({"a": (1.0, 0.0), "b": (0.0, 1.0)}, "sum")
    assert [r.combined_sum for r in rs] == [1.0, 1.0]
    assert [r.combined_avg for r in rs] == [0.5, 0.5]


def test_unknown_method():
    with pytest.raises(ConfigurationError):
        assemble_ratings({"a": (1.0, 0.0)}, "median")


def test_dense_rank_and_minmax():
    assert dense_rank([0.3, 0.9, 0.3, -1.0]).tolist() == [2, 1, 2, 3]
    assert minmax([2.0, 4.0, 3.0]).tolist() == [0.0, 1.0, 0.5]
    assert minmax([7.0, 7.0]).tolist() == [0.5, 0.5]


def _is_dense(ranks):
    u = np.unique(ranks)
    return u[0] == 1 and np.array_equal(u, np.arange(1, u.size + 1))


@given(_pairs, st.sampled_from(["sum", "std_avg"]))
def test_rating_invariants(pairs, method):
    pos = {p: ("FW", "MF", "DF")[i % 3] for i, p in enumerate(sorted(pairs))}
    rs = assemble_ratings(pairs, method, pos)
    assert sorted(r.player_id for r in rs) == sorted(pairs)
    assert all(0.0 <= r.combined_avg <= 1.0 for r in rs)
    for attr in ("rank_sum", "rank_avg"):
        assert _is_dense([getattr(r, attr) for r in rs])
    for g in set(pos.values()):
        assert _is_dense([r.rank_sum_position for r in rs if r.position == g])
    # listing order follows the method's ranking, ties by id
    keys = [(r.rank(method), r.player_id) for r in rs]
    assert keys == sorted(keys)
    a, b = rs[0], rs[-1]
    assert a.combined_sum - b.combined_sum == (a.beta_inv - b.beta_inv) + (a.beta_of - b.beta_of)


@given(_pairs, st.sampled_from([0.25, 0.5, 2.0, 8.0]), st.sampled_from([0.25, 1.0, 4.0]),
       st.integers(-3, 3), st.integers(-3, 3))
def test_std_avg_ranking_invariant_to_affine_transforms(pairs, c1, c2, a1, a2):
    base = {r.player_id: r.rank_avg for r in assemble_ratings(pairs, "std_avg")}
    moved = {p: (c1 * i + a1, c2 * o + a2) for p, (i, o) in pairs.items()}
    assert {r.player_id: r.rank_avg for r in assemble_ratings(moved, "std_avg")} == base


def test_csv_round_trip():
    pairs = {"7": (0.1, -0.2), "12": (0.3, 0.05)}
    rs = assemble_ratings(pairs, "sum", {"7": "DF", "12": "FW"})
    text = write_ratings_csv(rs, "lasso", 0.01, header="# h")
    back = read_ratings_csv(text)
    assert back["pairs"] == pairs and back["positions"] == {"7": "DF", "12": "FW"}
    assert back["penalty_kind"] == "lasso" and back["lambda"] == 0.01
    assert text.splitlines()[1].split(",") == ["player_id", "position", "beta_inv", "beta_of", "sum",
                                               "std_avg", "rank_sum", "rank_avg", "penalty_kind",
                                               "lambda"]


def _fit(seed, n=30):
    rng = np.random.default_rng(seed)
    return {f"q{i}": (float(rng.normal()), float(rng.normal())) for i in range(n)}


POS = {f"q{i}": ("GK", "DF", "MF", "FW")[i % 4] for i in range(30)}


def test_compare_with_itself():
    f = _fit(0)
    cells = compare_ratings({"a": f, "b": dict(f)}, POS)
    assert len(cells) == 4 * 4
    assert all(c.score_corr == pytest.approx(1.0) and c.rank_corr == pytest.approx(1.0)
               for c in cells)


def test_compare_anticorrelated():
    f = _fit(1)
    neg = {p: (-i, -o) for p, (i, o) in f.items()}
    cells = compare_ratings({"a": f, "b": neg}, POS)
    for c in cells:
        if c.quantity in ("inv", "of", "sum"):
            assert c.score_corr == pytest.approx(-1.0) and c.rank_corr == pytest.approx(-1.0)
    assert correlation_plot_data(cells).startswith("model_a,model_b,position,quantity")


def test_compare_requires_common_universe():
    f = _fit(2)
    g = dict(f)
    g.pop("q0")
    with pytest.raises(ConfigurationError):
        compare_ratings({"a": f, "b": g}, POS)
    with pytest.raises(ConfigurationError):
        compare_ratings({"a": {"x": (0, 0)}, "b": {"y": (0, 0)}}, POS)


def test_position_summaries():
    rs = assemble_ratings({"a": (0.4, 0.1), "b": (0.1, 0.0), "c": (0.2, 0.3), "d": (-0.1, 0.0)},
                          positions={"a": "FW", "b": "DF", "c": "MF", "d": "GK"})
    sums = position_summaries(rs)
    fw = [s for s in sums if s.position == "FW" and s.block == "inv"][0]
    assert fw.minimum == fw.q1 == fw.median == fw.q3 == fw.maximum == 0.4
    assert summaries_plot_data(sums).count("\n") == 1 + 8


def test_empty_position_group_warns():
    rs = assemble_ratings({"a": (0.1, 0.0)}, positions={"a": "FW"})
    with pytest.warns(UserWarning, match="GK"):
        sums = position_summaries(rs)
    assert {s.position for s in sums} == {"FW"}


def test_offensive_players_load_higher_on_involvement():
    rng = np.random.default_rng(3)
    pairs, pos = {}, {}
    for i in range(80):
        g = ("GK", "DF", "MF", "FW")[i % 4]
        shift = {"GK": -0.2, "DF": -0.1, "MF": 0.1, "FW": 0.2}[g]
        pairs[f"x{i}"] = (shift + 0.05 * rng.normal(), 0.05 * rng.normal())
        pos[f"x{i}"] = g
    med = {(s.position, s.block): s.median
           for s in position_summaries(assemble_ratings(pairs, positions=pos))}
    assert min(med["FW", "inv"], med["MF", "inv"]) > max(med["DF", "inv"], med["GK", "inv"])


def test_ratings_plot_data():
    rs = assemble_ratings({"a": (0.1, 0.2)}, positions={"a": "MF"})
    assert ratings_plot_data(rs, "ridge").splitlines()[1] == "ridge,a,MF,inv,0.1"
