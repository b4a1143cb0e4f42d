import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import possession_design
from possession_ratings.errors import ConfigurationError
from possession_ratings.genlasso import (Cluster, DMatrixSpec, _min_inf_norm_lp, _ranking_flow_bound,
                                         adaptive_weights, build_ranking_D, extract_clusters,
                                         fit_generalized_lasso, generalized_lambda_max,
                                         write_cluster_csv)
from possession_ratings.oracle import reference_solve
from possession_ratings.solvers import FitResult, PenaltySpec, fit_lasso, lambda_max


def test_ranking_D_three_columns():
    D = build_ranking_D(3).toarray()
    assert D.tolist() == [[1, -1, 0], [1, 0, -1], [0, 1, -1]]


def test_ranking_D_row_count_at_season_scale():
    assert build_ranking_D(556).shape == (154290, 556)


def test_ranking_D_weighted_pair():
    assert build_ranking_D(2, 2.0).toarray().tolist() == [[2, -2]]


def test_ranking_D_errors():
    with pytest.raises(ConfigurationError):
        build_ranking_D(1)
    with pytest.raises(ConfigurationError):
        build_ranking_D(3, [1.0, -1.0, 1.0])


@given(st.integers(2, 40))
def test_ranking_blocks_annihilate_constants(k):
    d = DMatrixSpec.for_players(k)
    D = d.matrix()
    assert D.shape == (k * (k - 1), 2 * k)
    for start in (0, k):
        v = np.zeros(2 * k)
        v[start:start + k] = 1.0
        assert np.all(D @ v == 0)
    # block diagonal: no row touches both blocks
    Dd = D.toarray()
    assert not np.any((Dd[:, :k] != 0).any(1) & (Dd[:, k:] != 0).any(1))


@given(st.integers(2, 10), st.floats(-5, 5))
def test_shift_leaves_penalty_unchanged(k, c):
    rng = np.random.default_rng(k)
    b = rng.normal(size=2 * k)
    D = DMatrixSpec.for_players(k).matrix()
    shifted = b.copy()
    shifted[:k] += c
    assert np.abs(D @ shifted).sum() == pytest.approx(np.abs(D @ b).sum(), rel=1e-12, abs=1e-12)


def test_adaptive_weights():
    w = adaptive_weights([0.0, 1.0, 1.0])
    assert w == pytest.approx([1 / (1 + 1e-4), 1 / (1 + 1e-4), 1e4])


@given(st.integers(0, 10_000), st.integers(2, 9))
def test_flow_bound_matches_linear_program(seed, k):
    a = np.random.default_rng(seed).normal(size=k)
    a -= a.mean()
    assert _ranking_flow_bound(a) == pytest.approx(_min_inf_norm_lp(build_ranking_D(k), a),
                                                   rel=1e-7, abs=1e-10)


def _instance(seed, k=4, n=250):
    X, y = possession_design(np.random.default_rng(seed), k, n)
    return X, y, DMatrixSpec.for_players(k)


def test_identity_D_matches_lasso():
    X, y, _ = _instance(1)
    d = DMatrixSpec(((("identity", X.shape[1])),))
    lam = 0.2 * lambda_max(X, y)
    gl = fit_generalized_lasso(X, y, lam, d)
    la = fit_lasso(X, y, lam)
    assert gl.converged
    assert abs(gl.objective - la.objective) <= 1e-5
    assert np.allclose(gl.beta, la.beta, atol=1e-5)


def test_lambda_max_fuses_everything():
    X, y, d = _instance(2)
    k = X.shape[1] // 2
    lm = generalized_lambda_max(X, y, d)
    at = fit_generalized_lasso(X, y, lm * (1 + 1e-9), d)
    assert at.converged
    assert np.ptp(at.beta[:k]) <= 1e-8 and np.ptp(at.beta[k:2 * k]) <= 1e-8
    below = fit_generalized_lasso(X, y, 0.8 * lm, d)
    assert max(np.ptp(below.beta[:k]), np.ptp(below.beta[k:2 * k])) > 1e-6


def test_weighted_lambda_max_fuses_everything():
    X, y, _ = _instance(3)
    k = X.shape[1] // 2
    rng = np.random.default_rng(3)
    m = k * (k - 1) // 2
    d = DMatrixSpec.for_players(k, weights=(rng.uniform(0.5, 2, m), rng.uniform(0.5, 2, m)))
    lm = generalized_lambda_max(X, y, d)
    at = fit_generalized_lasso(X, y, lm * (1 + 1e-7), d)
    assert np.ptp(at.beta[:k]) <= 1e-7 and np.ptp(at.beta[k:2 * k]) <= 1e-7
    below = fit_generalized_lasso(X, y, 0.8 * lm, d)
    assert max(np.ptp(below.beta[:k]), np.ptp(below.beta[k:2 * k])) > 1e-6


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000), frac=st.floats(0.02, 0.6))
def test_backends_agree_and_certify(seed, frac):
    X, y, d = _instance(seed, k=int(np.random.default_rng(seed).integers(2, 6)))
    lam = frac * generalized_lambda_max(X, y, d)
    a = fit_generalized_lasso(X, y, lam, d, backend="splitting")
    b = fit_generalized_lasso(X, y, lam, d, backend="conic")
    assert a.converged and a.kkt_residual <= 1e-6
    assert abs(a.objective - b.objective) <= 1e-5 * (1 + abs(a.objective))


@pytest.mark.parametrize("seed", range(3))
def test_splitting_matches_reference(seed):
    X, y, d = _instance(10 + seed, k=5, n=200)
    lam = 0.1 * generalized_lambda_max(X, y, d)
    spec = PenaltySpec("generalized_lasso", lam, d_spec=d)
    ref = reference_solve(X, y, spec)
    assert ref.certified
    assert abs(fit_generalized_lasso(X, y, lam, d).objective - ref.objective) <= 1e-5


def _two_tier_world(seed=0, n=4000):
    rng = np.random.default_rng(seed)
    k = 6
    inv = (rng.random((n, k)) < 0.3).astype(float)
    truth = np.array([0.8, 0.8, 0.8, 0.0, 0.0, 0.0])
    y = (rng.random(n) < 1 / (1 + np.exp(-(inv @ truth - 2.0)))).astype(float)
    return inv, y, DMatrixSpec.single("ranking", k)


def test_two_tier_world_fuses_into_few_values():
    X, y, d = _two_tier_world()
    lm = generalized_lambda_max(X, y, d)
    found = []
    for frac in np.geomspace(0.5, 0.01, 25):
        a = fit_generalized_lasso(X, y, frac * lm, d, backend="splitting")
        values = {c.value for c in extract_clusters(a, players=tuple("abcdef"))}
        if 2 <= len(values) <= 3:
            b = fit_generalized_lasso(X, y, frac * lm, d, backend="conic")
            assert abs(a.objective - b.objective) <= 1e-5 * (1 + abs(a.objective))
            nb = len({c.value for c in extract_clusters(b, tol=1e-5, players=tuple("abcdef"))})
            found.append((frac, len(values), nb))
    assert found
    frac, na, nb = found[0]
    assert na == nb
    # the strong tier separates from the weak tier
    a = fit_generalized_lasso(X, y, frac * lm, d)
    assert a.beta[:3].min() > a.beta[3:6].max()


def _fit_with(beta, players):
    return FitResult(np.append(beta, 0.0), 0.1, "generalized_lasso", 0.0, 0, True, 0.0,
                     tuple(players))


def test_clusters_all_equal():
    cl = extract_clusters(_fit_with([0.3, 0.3, 0.3, 0.1, 0.1, 0.1], "abc"))
    assert [(c.block, c.members, c.rank) for c in cl] == [("inv", ("a", "b", "c"), 1),
                                                          ("of", ("a", "b", "c"), 1)]


def test_clusters_tolerance_semantics():
    cl = extract_clusters(_fit_with([0.5, 0.5 + 1e-9, -0.2, 0, 0, 0], "abc"))
    inv = [c for c in cl if c.block == "inv"]
    assert len(inv) == 2
    assert set(inv[0].members) == {"a", "b"} and inv[0].rank == 1
    assert inv[1].members == ("c",) and inv[1].value == -0.2


def test_cluster_csv():
    text = write_cluster_csv([Cluster("inv", 0.5, ("a", "b"), 1)], header="# h")
    assert text.splitlines() == ["# h", "cluster_id,block,value,members,rank", "0,inv,0.5,a;b,1"]


def test_mismatched_D_is_configuration_error():
    X, y, _ = _instance(4)
    with pytest.raises(ConfigurationError):
        fit_generalized_lasso(X, y, 0.1, DMatrixSpec.for_players(3))
    with pytest.raises(ConfigurationError):
        fit_generalized_lasso(X, y, 0.1, DMatrixSpec.for_players(4), backend="magic")
