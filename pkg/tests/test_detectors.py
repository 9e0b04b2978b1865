"""Five scorers and the shared interquartile thresholding."""

import numpy as np
import pytest
from scipy import stats

from specsentry.detectors import (
    DetectorModel,
    classify,
    classify_matrix,
    fit_iqr_threshold,
    score_matrix,
    train_detector,
    verdict_for,
)
from specsentry.detectors.autoencoder import (
    fit_autoencoder,
    init_params,
    loss_and_grads,
    score_autoencoder,
)
from specsentry.detectors.copod import fit_copod, sample_skewness, score_copod
from specsentry.detectors.iforest import fit_iforest, score_iforest
from specsentry.detectors.lof import fit_lof, score_lof
from specsentry.detectors.ocsvm import fit_ocsvm, score_ocsvm

import oracles


# ---------------------------------------------------------------------------
# interquartile thresholds


def test_iqr_reference_case():
    scores = list(range(1, 9)) + [100]
    lo, hi = fit_iqr_threshold(scores)
    assert lo == -3.0
    assert hi == 13.0


def test_iqr_degenerate_band_is_a_point():
    lo, hi = fit_iqr_threshold([5.0] * 40)
    assert lo == hi == 5.0
    assert not verdict_for(5.0, lo, hi).anomalous
    assert verdict_for(5.0 + 1e-9, lo, hi).anomalous
    assert verdict_for(5.0 - 1e-9, lo, hi).side == "below"


def test_iqr_matches_hand_quartiles_on_random_sets():
    rng = np.random.default_rng(20)
    makers = [
        lambda n: rng.normal(0.0, rng.uniform(0.5, 4.0), size=n),
        lambda n: rng.lognormal(1.0, 0.8, size=n),
        lambda n: rng.integers(0, 12, size=n).astype(float),  # heavy ties
        lambda n: rng.uniform(-100, 100, size=n),
    ]
    for i in range(50):
        n = int(rng.integers(4, 500))
        scores = makers[i % len(makers)](n)
        lo, hi = fit_iqr_threshold(scores)
        want_lo, want_hi = oracles.iqr_bounds_by_hand(scores)
        assert abs(lo - want_lo) < 1e-9
        assert abs(hi - want_hi) < 1e-9


def test_iqr_rejects_empty_and_non_finite():
    with pytest.raises(ValueError):
        fit_iqr_threshold([])
    with pytest.raises(ValueError):
        fit_iqr_threshold([1.0, np.nan])


def test_band_is_inclusive_at_both_edges():
    lo, hi = fit_iqr_threshold(list(range(1, 9)) + [100])
    assert not verdict_for(lo, lo, hi).anomalous
    assert not verdict_for(hi, lo, hi).anomalous
    assert verdict_for(np.nextafter(hi, np.inf), lo, hi).anomalous


# ---------------------------------------------------------------------------
# local outlier factor


def test_lof_matches_textbook_reference():
    rng = np.random.default_rng(21)
    X = rng.normal(0.0, 1.0, size=(120, 3))
    params = fit_lof(X, k=15)
    want = oracles.lof_by_hand(X, 15)
    got = params["train_scores"]
    assert np.max(np.abs(got - np.asarray(want))) < 1e-9


def test_lof_duplicates_score_exactly_one():
    rng = np.random.default_rng(22)
    X = np.vstack([np.tile([2.0, 2.0], (8, 1)), rng.normal(8.0, 0.5, size=(12, 2))])
    params = fit_lof(X, k=3)
    q = score_lof(params, np.array([[2.0, 2.0]]))
    assert q[0] == 1.0


def test_lof_flags_isolated_point():
    rng = np.random.default_rng(23)
    X = np.vstack([rng.normal(0.0, 0.5, size=(60, 2)), [[9.0, 9.0]]])
    params = fit_lof(X, k=10)
    scores = params["train_scores"]
    assert scores[-1] > 2.0
    assert np.median(scores[:-1]) < 1.3


def test_lof_input_validation():
    with pytest.raises(ValueError):
        fit_lof(np.zeros((1, 2)), k=3)
    # k larger than n-1 silently clamps
    params = fit_lof(np.random.default_rng(0).normal(size=(5, 2)), k=15)
    assert int(params["k"]) == 4


# ---------------------------------------------------------------------------
# autoencoder


def test_autoencoder_gradients_match_finite_differences():
    rng = np.random.default_rng(24)
    X = rng.uniform(0.0, 1.0, size=(16, 12))
    params = init_params(12, 8, seed=1)

    def loss_fn(p):
        return loss_and_grads(p, X, l2=1e-3)[0]

    _, grads = loss_and_grads(params, X, l2=1e-3)
    picks = []
    for key in ("W1", "b1", "W2", "b2"):
        size = params[key].size
        picks.extend((key, int(i)) for i in rng.choice(size, size=3, replace=False))
    assert len(picks) >= 5
    for key, idx in picks:
        numeric = oracles.central_difference(loss_fn, params, key, idx)
        analytic = grads[key].flat[idx]
        denom = max(abs(numeric) + abs(analytic), 1e-8)
        assert abs(numeric - analytic) / denom < 1e-4, (key, idx)


def test_autoencoder_training_reduces_loss():
    rng = np.random.default_rng(25)
    X = rng.uniform(0.2, 0.8, size=(120, 10))
    _, history = fit_autoencoder(X, epochs=40, lr=1e-2, batch_size=16, seed=2)
    assert history[-1] < history[0]


def test_autoencoder_scores_track_reconstruction_quality():
    rng = np.random.default_rng(26)
    X = rng.uniform(0.3, 0.7, size=(200, 8))
    params, _ = fit_autoencoder(X, epochs=120, lr=1e-2, batch_size=32, seed=3)
    train_scores = score_autoencoder(params, X)
    weird = score_autoencoder(params, np.full((5, 8), 4.0))
    assert weird.min() > train_scores.mean() * 5


def test_autoencoder_deterministic_per_seed():
    rng = np.random.default_rng(27)
    X = rng.uniform(size=(60, 6))
    p1, h1 = fit_autoencoder(X, epochs=10, seed=7)
    p2, h2 = fit_autoencoder(X, epochs=10, seed=7)
    assert np.array_equal(h1, h2)
    for k in p1:
        assert np.array_equal(p1[k], p2[k])


# ---------------------------------------------------------------------------
# one-class SVM


def test_ocsvm_converges_with_small_residual_and_bounded_outliers():
    rng = np.random.default_rng(28)
    X = rng.normal(0.0, 1.0, size=(160, 2))
    nu, tol = 0.1, 1e-5
    params = fit_ocsvm(X, nu=nu, gamma=0.5, tol=tol)
    assert float(params["kkt_residual"]) < 1e-3
    # boundary support vectors carry +-tol convergence noise around
    # f = 0, so "outlier" means more than one tolerance below zero
    outlier_fraction = float((params["train_scores"] < -tol).mean())
    assert outlier_fraction <= nu + 1.0 / X.shape[0]


def test_ocsvm_decisions_match_qp_reference():
    rng = np.random.default_rng(29)
    X = rng.normal(0.0, 1.0, size=(20, 2))
    nu, gamma = 0.2, 0.5
    params = fit_ocsvm(X, nu=nu, gamma=gamma, tol=1e-8)
    got = score_ocsvm(params, X)
    _, _, want = oracles.ocsvm_qp_reference(X, nu, gamma)
    assert np.max(np.abs(got - want)) < 1e-3


def test_ocsvm_far_point_scores_negative():
    rng = np.random.default_rng(30)
    X = rng.normal(0.0, 1.0, size=(100, 3))
    params = fit_ocsvm(X, nu=0.1, gamma=0.3, tol=1e-5)
    far = score_ocsvm(params, np.array([[25.0, 25.0, 25.0]]))
    assert far[0] < 0.0


def test_ocsvm_input_validation():
    rng = np.random.default_rng(31)
    with pytest.raises(ValueError):
        fit_ocsvm(rng.normal(size=(10, 2)), nu=0.0)
    with pytest.raises(ValueError):
        fit_ocsvm(rng.normal(size=(10, 2)), nu=1.5)
    with pytest.raises(ValueError):
        fit_ocsvm(rng.normal(size=(1, 2)))


# ---------------------------------------------------------------------------
# isolation forest


def test_iforest_isolates_planted_outlier():
    rng = np.random.default_rng(32)
    X = np.vstack([rng.normal(0.0, 1.0, size=(300, 4)), [[12.0, 12.0, 12.0, 12.0]]])
    params = fit_iforest(X, n_trees=100, subsample=128, seed=0)
    scores = score_iforest(params, X)
    assert np.all(scores > 0.0) and np.all(scores < 1.0)
    assert scores[-1] > scores[:-1].max()
    assert scores[-1] > 0.6


def test_iforest_deterministic_per_seed():
    rng = np.random.default_rng(33)
    X = rng.normal(size=(120, 3))
    s1 = score_iforest(fit_iforest(X, n_trees=50, seed=4), X)
    s2 = score_iforest(fit_iforest(X, n_trees=50, seed=4), X)
    s3 = score_iforest(fit_iforest(X, n_trees=50, seed=5), X)
    assert np.array_equal(s1, s2)
    assert not np.array_equal(s1, s3)


def test_iforest_constant_data_sits_at_midpoint():
    X = np.full((64, 3), 2.5)
    scores = score_iforest(fit_iforest(X, n_trees=40, seed=0), X)
    assert np.allclose(scores, 0.5)


# ---------------------------------------------------------------------------
# copula-based scorer


def test_copod_skewness_matches_scipy():
    rng = np.random.default_rng(34)
    X = rng.lognormal(0.0, 0.7, size=(250, 4))
    want = stats.skew(X, axis=0, bias=True)
    assert np.allclose(sample_skewness(X), want, atol=1e-12)
    flat = np.column_stack([X[:, 0], np.full(250, 3.0)])
    assert sample_skewness(flat)[1] == 0.0


def test_copod_tail_points_score_higher():
    rng = np.random.default_rng(35)
    X = rng.normal(0.0, 1.0, size=(400, 3))
    params = fit_copod(X)
    center = score_copod(params, np.zeros((1, 3)))
    tail = score_copod(params, np.full((1, 3), 6.0))
    assert tail[0] > center[0]
    # monotone in extremity along a ray
    mids = score_copod(params, np.full((1, 3), 2.0))
    assert center[0] < mids[0] < tail[0]


def test_copod_is_deterministic():
    rng = np.random.default_rng(36)
    X = rng.normal(size=(100, 2))
    q = rng.normal(size=(20, 2))
    assert np.array_equal(score_copod(fit_copod(X), q), score_copod(fit_copod(X), q))


# ---------------------------------------------------------------------------
# the shared wrapper


def _toy_model(kind, seed=0):
    rng = np.random.default_rng(40 + seed)
    X = rng.uniform(0.2, 0.8, size=(150, 6))
    names = tuple(f"f{i}" for i in range(6))
    raw_min = np.zeros(6)
    raw_max = np.ones(6) * 100.0
    model = train_detector(kind, X, names, raw_min, raw_max, seed=seed)
    return model, X


@pytest.mark.parametrize("kind", ["autoencoder", "lof", "ocsvm", "iforest", "copod"])
def test_train_classify_flags_far_point(kind):
    model, X = _toy_model(kind)
    assert model.threshold_lo <= model.threshold_hi
    inband = classify_matrix(model, X)
    assert inband.mean() < 0.2  # most training rows are inside the band
    far = np.full((1, 6), 6.0)
    assert classify_matrix(model, far)[0]
    v = classify(model, far[0])
    assert v.anomalous
    assert v.side in ("below", "above")


def test_classify_matrix_agrees_with_single_vector():
    model, X = _toy_model("copod")
    flags = classify_matrix(model, X[:10])
    for i in range(10):
        assert classify(model, X[i]).anomalous == bool(flags[i])


def test_score_matrix_promotes_single_vector():
    model, X = _toy_model("lof")
    one = score_matrix(model, X[0])
    many = score_matrix(model, X[:1])
    assert one.shape == (1,)
    assert np.array_equal(one, many)


def test_model_normalize_applies_train_scaling():
    model, _ = _toy_model("copod")
    raw = np.array([50.0] * 6)
    scaled = model.normalize(raw)
    assert np.allclose(scaled, 0.5)
    degenerate = DetectorModel(
        kind=model.kind,
        feature_names=model.feature_names,
        params=model.params,
        threshold_lo=model.threshold_lo,
        threshold_hi=model.threshold_hi,
        norm_min=np.zeros(6),
        norm_max=np.zeros(6),  # zero span guards to pass-through
        train_seed=0,
        train_rows=1,
        train_seconds=0.0,
    )
    assert np.allclose(degenerate.normalize(np.full(6, 3.0)), 3.0)


def test_train_detector_rejects_nonsense():
    rng = np.random.default_rng(41)
    X = rng.uniform(size=(30, 4))
    with pytest.raises(ValueError):
        train_detector("kmeans", X, ("a", "b", "c", "d"), np.zeros(4), np.ones(4))
    with pytest.raises(ValueError):
        train_detector("lof", X, ("a", "b"), np.zeros(2), np.ones(2))


def test_autoencoder_extras_record_loss_curve():
    model, _ = _toy_model("autoencoder")
    assert model.extras["loss_final"] < model.extras["loss_first_epoch"]


def test_ocsvm_extras_record_convergence():
    model, _ = _toy_model("ocsvm")
    assert model.extras["kkt_residual"] < 1e-3
