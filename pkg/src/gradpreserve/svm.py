"""One-vs-rest linear SVM trained with Pegasos-style stochastic subgradient steps."""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import InsufficientData, ShapeMismatch


class LinearSVM(ClassifierMixin, BaseEstimator):
    """Linear multiclass SVM, one hinge-loss classifier per class.

    Each binary problem minimizes ``lam/2 * |w|^2 + mean(hinge)`` over the
    features augmented with a constant 1, so the bias is regularized together
    with the weights. The step at update ``t`` is ``1 / (lam * t)``. All K
    classifiers see the same sample order, drawn from ``random_state``.

    Attributes
    ----------
    coef_ : ndarray of shape (n_classes, n_features)
    intercept_ : ndarray of shape (n_classes,)
    objective_history_ : ndarray of shape (epochs, n_classes)
        Training objective of every binary problem after each epoch.
    """

    def __init__(self, lam=1e-4, epochs=50, random_state=0):
        self.lam = lam
        self.epochs = epochs
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if not self.lam > 0 or self.epochs < 1:
            raise ValueError("lam must be > 0 and epochs >= 1")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        n_classes = len(self.classes_)
        if n_classes < 2:
            raise InsufficientData("training data must contain at least two classes")

        n, d = X.shape
        Xa = np.hstack([X, np.ones((n, 1))])
        # targets[i, k] = +1 if sample i belongs to class k else -1
        targets = np.where(y_idx[:, None] == np.arange(n_classes), 1.0, -1.0)
        W = np.zeros((n_classes, d + 1))
        rng = np.random.default_rng(self.random_state)
        history = np.empty((self.epochs, n_classes))
        t = 0
        for epoch in range(self.epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (self.lam * t)
                yi = targets[i]
                active = yi * (W @ Xa[i]) < 1.0
                W *= 1.0 - eta * self.lam
                W[active] += (eta * yi[active])[:, None] * Xa[i]
            history[epoch] = self._objective(W, Xa, targets)

        self.coef_ = W[:, :-1].copy()
        self.intercept_ = W[:, -1].copy()
        self.objective_history_ = history
        self.n_features_in_ = d
        return self

    def _objective(self, W, Xa, targets):
        hinge = np.maximum(0.0, 1.0 - targets * (Xa @ W.T))
        return 0.5 * self.lam * np.sum(W * W, axis=1) + hinge.mean(axis=0)

    @property
    def final_objective_(self):
        check_is_fitted(self)
        return self.objective_history_[-1]

    def decision_function(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        # argmax returns the first maximum, so ties go to the lowest class id
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
