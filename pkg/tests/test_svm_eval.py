import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradpreserve.evaluation import (
    evaluate,
    format_report,
    hog_features,
    parity_report,
    pipeline_features,
    report_json,
    run_protocol,
    split_half,
    train_svm,
)
from gradpreserve.exceptions import InsufficientData, ShapeMismatch
from gradpreserve.hog import extract_hog
from gradpreserve.svm import LinearSVM
from gradpreserve.synth import grating, synth_dataset


def two_point_set(n=20):
    X = np.repeat([[-1.0], [1.0]], n, axis=0)
    y = np.repeat([0, 1], n)
    return X, y


def test_split_sizes_for_face_geometry():
    y = np.repeat(np.arange(38), 64)
    X = np.arange(len(y))[:, None]
    X_tr, X_te, y_tr, y_te = split_half(X, y, seed=0)
    assert len(y_tr) == len(y_te) == 38 * 32
    assert np.all(np.bincount(y_tr) == 32) and np.all(np.bincount(y_te) == 32)
    assert set(X_tr.ravel()).isdisjoint(X_te.ravel())


def test_split_odd_class_and_determinism():
    y = np.array([0, 0, 0, 1, 1])
    X = np.arange(5)[:, None]
    _, _, y_tr, y_te = split_half(X, y, seed=4)
    assert list(np.bincount(y_tr)) == [2, 1] and list(np.bincount(y_te)) == [1, 1]
    a = split_half(X, y, seed=9)
    b = split_half(X, y, seed=9)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)


def test_split_rejects_singleton_class():
    with pytest.raises(InsufficientData):
        split_half(np.zeros((3, 1)), [0, 0, 1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(2, 9), min_size=1, max_size=6), st.integers(0, 2**32 - 1))
def test_split_is_a_stratified_partition(counts, seed):
    y = np.repeat(np.arange(len(counts)), counts)
    X = np.arange(len(y))[:, None]
    X_tr, X_te, y_tr, y_te = split_half(X, y, seed)
    assert sorted(np.concatenate([X_tr, X_te]).ravel()) == list(range(len(y)))
    for k, c in enumerate(counts):
        assert np.sum(y_tr == k) == (c + 1) // 2


def test_separable_two_point_problem():
    X, y = two_point_set()
    model = train_svm(X, y)
    accuracy, confusion = evaluate(model, X, y)
    assert accuracy == 1.0
    np.testing.assert_array_equal(confusion, [[20, 0], [0, 20]])


def test_one_hot_problem():
    K = 7
    X = np.eye(K)
    model = LinearSVM().fit(X, np.arange(K))
    assert evaluate(model, X, np.arange(K))[0] == 1.0


def test_huge_regularization_shrinks_weights():
    X, y = two_point_set()
    model = LinearSVM(lam=1e6).fit(X, y)
    # Pegasos keeps |w| <= 1/sqrt(lam) for the augmented weight vector
    w = np.hypot(model.coef_[:, 0], model.intercept_)
    assert np.all(w <= 1 / np.sqrt(1e6) + 1e-12)
    # shrinkage rescales w but keeps its direction, so argmax is unaffected
    assert evaluate(model, X, y)[0] == 1.0


def test_constant_predictor_gets_chance():
    K = 4
    model = LinearSVM().fit(np.eye(K), np.arange(K))
    model.coef_ = np.zeros_like(model.coef_)
    model.intercept_ = np.array([1.0, 0.0, 0.0, 0.0])
    y = np.repeat(np.arange(K), 5)
    accuracy, confusion = evaluate(model, np.zeros((len(y), K)), y)
    assert accuracy == pytest.approx(1 / K)
    assert list(confusion[:, 0]) == [5] * K


def test_ties_go_to_lowest_class():
    model = LinearSVM().fit(np.eye(3), [5, 6, 7])
    model.coef_ = np.zeros_like(model.coef_)
    model.intercept_ = np.zeros(3)
    assert list(model.predict(np.ones((2, 3)))) == [5, 5]


def test_evaluate_errors():
    X, y = two_point_set()
    model = LinearSVM().fit(X, y)
    with pytest.raises(InsufficientData):
        evaluate(model, np.zeros((0, 1)), [])
    with pytest.raises(ShapeMismatch):
        evaluate(model, np.zeros((2, 3)), [0, 1])


def test_single_class_rejected():
    with pytest.raises(InsufficientData):
        LinearSVM().fit(np.zeros((4, 2)), [1, 1, 1, 1])


def test_training_is_deterministic():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(60, 5)), rng.integers(0, 3, 60)
    a = LinearSVM(random_state=3).fit(X, y)
    b = LinearSVM(random_state=3).fit(X, y)
    np.testing.assert_array_equal(a.coef_, b.coef_)
    np.testing.assert_array_equal(a.objective_history_, b.objective_history_)


def test_objective_moving_average_non_increasing():
    images, labels = synth_dataset(4, 20, 32, seed=2)
    X = hog_features(images)
    history = LinearSVM(epochs=60).fit(X, labels).objective_history_
    assert history.shape == (60, 4)
    window = np.ones(10) / 10
    for k in range(4):
        avg = np.convolve(history[:, k], window, mode="valid")
        assert np.all(np.diff(avg) <= 1e-12)


def test_confusion_rows_sum_to_class_counts():
    images, labels = synth_dataset(3, 9, 32, seed=1)
    row = run_protocol(hog_features(images), labels, "plain", seed=0)
    confusion = np.array(row["confusion"])
    assert list(confusion.sum(axis=1)) == [4, 4, 4]
    assert row["n_train"] == 15 and row["n_test"] == 12
    assert 0.0 <= row["accuracy"] <= 1.0


def test_synth_dataset_contract():
    images, labels = synth_dataset(5, 6, 32, seed=3)
    assert images.shape == (30, 32, 32)
    assert list(np.bincount(labels)) == [6] * 5
    assert images.min() >= 0 and images.max() <= 1
    again, _ = synth_dataset(5, 6, 32, seed=3)
    np.testing.assert_array_equal(images, again)
    with pytest.raises(ValueError):
        synth_dataset(17)
    with pytest.raises(ValueError):
        synth_dataset(4, size=31)


def test_noise_free_same_phase_features_identical():
    a = extract_hog(grating(32, np.pi / 4, 0.7))
    b = extract_hog(grating(32, np.pi / 4, 0.7))
    np.testing.assert_array_equal(a, b)
    images, _ = synth_dataset(4, 3, 32, noise_std=0.0, seed=0)
    assert np.all((images >= 0.1 - 1e-12) & (images <= 0.9 + 1e-12))


def test_parity_report_structure_and_determinism():
    images, labels = synth_dataset(3, 8, 32, seed=4)
    plain = pipeline_features("plain", images)
    report = parity_report({"plain": plain, "again": plain.copy()}, labels, seeds=[0, 1])
    rows = report["rows"]
    assert len(rows) == 4
    assert rows[0] == {**rows[2], "pipeline": "plain"}
    assert rows[1] == {**rows[3], "pipeline": "plain"}
    assert report["summary"]["plain"] == report["summary"]["again"]
    assert report["summary"]["plain"]["n"] == 2
    doc = json.loads(report_json(report))
    for key in ("pipeline", "seed", "accuracy", "n_train", "n_test", "confusion"):
        assert key in doc["rows"][0]
    assert "plain" in format_report(report)


def test_pipeline_features_names():
    images, _ = synth_dataset(2, 2, 32, seed=0)
    assert pipeline_features("weighted", images).shape == pipeline_features("plain", images).shape
    with pytest.raises(ValueError):
        pipeline_features("proposed", images)
    with pytest.raises(ValueError):
        pipeline_features("eigenface", images)
