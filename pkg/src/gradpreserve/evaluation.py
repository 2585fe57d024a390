"""Recognition protocol: stratified half split, linear SVM, accuracy tables."""
import json
import logging

import numpy as np
from joblib import Parallel, delayed

from .exceptions import InsufficientData, ShapeMismatch
from .gdm import GdmConfig
from .generator import OptimizerConfig, generate_protected
from .hog import HogConfig, Weighting, extract_hog
from .svm import LinearSVM

logger = logging.getLogger(__name__)

PIPELINES = ("proposed", "plain", "weighted")


def split_half(X, y, seed=0):
    """Per-class random 50/50 split; odd counts give the extra sample to train.

    Returns ``(X_train, X_test, y_train, y_test)`` with samples of each part in
    their original order.
    """
    X = np.asarray(X)
    y = np.asarray(y)
    if len(X) != len(y):
        raise ShapeMismatch(f"{len(X)} samples but {len(y)} labels")
    rng = np.random.default_rng(seed)
    train = np.zeros(len(y), dtype=bool)
    for label in np.unique(y):
        idx = np.flatnonzero(y == label)
        if len(idx) < 2:
            raise InsufficientData(f"class {label} has {len(idx)} sample(s); need >= 2")
        chosen = rng.permutation(idx)[: (len(idx) + 1) // 2]
        train[chosen] = True
    return X[train], X[~train], y[train], y[~train]


def train_svm(X, y, lam=1e-4, epochs=50, seed=0):
    return LinearSVM(lam=lam, epochs=epochs, random_state=seed).fit(X, y)


def evaluate(model, X, y):
    """Return ``(accuracy, confusion)``; confusion rows are true classes."""
    y = np.asarray(y)
    if len(y) == 0:
        raise InsufficientData("empty test set")
    pred = model.predict(X)
    classes = model.classes_
    index = {c: k for k, c in enumerate(classes.tolist())}
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    for true, guess in zip(y.tolist(), pred.tolist()):
        if true not in index:
            raise ShapeMismatch(f"test label {true} was not seen in training")
        confusion[index[true], index[guess]] += 1
    return float(np.mean(pred == y)), confusion


def protect_images(images, seed=0, opt=None, gdm_cfg=None, n_jobs=1):
    """Protect each image with seed ``seed + i``; returns images and reports."""
    opt = opt or OptimizerConfig()
    cfg = gdm_cfg or GdmConfig()

    def one(i, img):
        return generate_protected(img, _with_seed(opt, seed + i), cfg)

    results = Parallel(n_jobs=n_jobs)(delayed(one)(i, img) for i, img in enumerate(images))
    protected = np.stack([r[0] for r in results])
    return protected, [r[1] for r in results]


def _with_seed(opt, seed):
    return OptimizerConfig(**{**opt.to_dict(), "seed": seed})


def hog_features(images, weighting=Weighting.UNWEIGHTED, hog_cfg=None, gdm_cfg=None):
    base = hog_cfg or HogConfig()
    cfg = HogConfig(base.cell_size, base.bins, weighting)
    return np.stack([extract_hog(img, cfg, gdm_cfg) for img in images])


def pipeline_features(name, images, protected=None, hog_cfg=None, gdm_cfg=None):
    """Features for one of the named pipelines.

    ``proposed`` needs the protected images; ``plain`` and ``weighted`` use
    the originals with unweighted and magnitude-weighted HOG.
    """
    if name == "proposed":
        if protected is None:
            raise ValueError("the proposed pipeline needs protected images")
        return hog_features(protected, Weighting.UNWEIGHTED, hog_cfg, gdm_cfg)
    if name == "plain":
        return hog_features(images, Weighting.UNWEIGHTED, hog_cfg, gdm_cfg)
    if name == "weighted":
        return hog_features(images, Weighting.MAGNITUDE, hog_cfg, gdm_cfg)
    raise ValueError(f"unknown pipeline {name!r}; choose from {PIPELINES}")


def run_protocol(features, labels, pipeline, seed=0, lam=1e-4, epochs=50):
    """One split/train/evaluate round; returns a report row."""
    X_tr, X_te, y_tr, y_te = split_half(features, labels, seed)
    model = train_svm(X_tr, y_tr, lam, epochs, seed)
    accuracy, confusion = evaluate(model, X_te, y_te)
    return {
        "pipeline": pipeline,
        "seed": int(seed),
        "accuracy": accuracy,
        "n_train": int(len(y_tr)),
        "n_test": int(len(y_te)),
        "confusion": confusion.tolist(),
    }


def parity_report(feature_sets, labels, seeds=(0,), lam=1e-4, epochs=50):
    """Run the protocol for every ``{pipeline: features}`` entry and seed.

    Returns ``{"rows": [...], "summary": {pipeline: {"mean", "std", "n"}}}``.
    """
    rows = []
    for name, features in feature_sets.items():
        for seed in seeds:
            rows.append(run_protocol(features, labels, name, seed, lam, epochs))
    summary = {}
    for name in feature_sets:
        acc = np.array([r["accuracy"] for r in rows if r["pipeline"] == name])
        summary[name] = {"mean": float(acc.mean()), "std": float(acc.std()), "n": int(acc.size)}
    return {"rows": rows, "summary": summary}


def format_report(report):
    lines = [f"{'pipeline':<12} {'accuracy':>18}  runs"]
    for name, stats in report["summary"].items():
        lines.append(f"{name:<12} {stats['mean']:.4f} +- {stats['std']:.4f}  {stats['n']:>4}")
    return "\n".join(lines)


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True)
