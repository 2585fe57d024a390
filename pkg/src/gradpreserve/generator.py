"""Generation of gradient-preserving images.

The protected image is parameterized as ``x' = sigmoid(s)`` for an
unconstrained latent field ``s``, which keeps every pixel inside (0, 1)
without clipping. ``s`` starts from seeded uniform noise and is moved by
steepest descent with a halving line search.

Two descent schedules are available:

``direct``
    Descend the squared norm ``||GDM(x) - GDM(sigmoid(s))||^2`` itself.
    The arctangent residual is discontinuous where ``H + eps`` changes sign,
    and the map is blind to the contrast of ``x'``; from a random start this
    stalls in poor local minima.

``staged`` (default)
    Descend two smooth objectives that vanish exactly where the residual
    above vanishes. Both are written in terms of the per-pixel cross product
    ``u = sin(t) * (H + eps) - cos(t) * V`` between the target direction ``t``
    and the difference vector of ``x'``:

    1. ``sum(u^2) / sum(H'^2 + V'^2)``, a generalized Rayleigh quotient in
       ``x'`` whose only minima are the exact solutions, which pulls the
       random start into alignment without getting trapped.
    2. ``sum(w * u^2 / (H'^2 + V'^2))``, i.e. a weighted ``sin^2`` of the
       per-pixel angle error. ``w = 1 + k * tan(t)^2`` grows near the
       +-pi/2 branch cut, where a small misalignment flips the sign of the
       arctangent and costs ~pi in raw angle.

The report always records the raw residual norm for each iteration in
``residual_trace``; ``objective_trace`` holds the value being descended.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import InvalidImage, InvalidLatent, ShapeMismatch
from .gdm import (
    MIN_SIDE,
    GdmConfig,
    _angles,
    _guarded_denominator,
    _differences,
    _differences_adjoint,
    check_image,
    gdm,
)

logger = logging.getLogger(__name__)

STEP_FLOOR = 1e-8
# keeps tan(t)^2 finite for targets at the edge of the codomain
COS2_FLOOR = 1e-3


class LineSearch(str, Enum):
    FIXED = "fixed"
    BACKTRACKING = "backtracking"


class Schedule(str, Enum):
    STAGED = "staged"
    DIRECT = "direct"


@dataclass(frozen=True)
class OptimizerConfig:
    seed: int = 0
    init_scale: float = 0.1
    learning_rate: float = 1.0
    max_iters: int = 2000
    tolerance: float = 1e-3
    use_squared_objective: bool = True
    line_search: LineSearch = LineSearch.BACKTRACKING
    schedule: Schedule = Schedule.STAGED
    align_fraction: float = 0.5
    branch_cut_weight: float = 0.1
    flat_floor: float = 0.01

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init_scale < 0 or self.tolerance < 0:
            raise ValueError("init_scale and tolerance must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if not 0.0 <= self.align_fraction <= 1.0:
            raise ValueError("align_fraction must be in [0, 1]")
        if self.branch_cut_weight < 0 or self.flat_floor < 0:
            raise ValueError("branch_cut_weight and flat_floor must be >= 0")
        object.__setattr__(self, "line_search", LineSearch(self.line_search))
        object.__setattr__(self, "schedule", Schedule(self.schedule))

    def to_dict(self):
        return {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(self).items()}


@dataclass
class ConvergenceReport:
    iterations: int
    final_objective: float
    final_mean_abs_error: float
    converged: bool
    seed: int
    objective_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def stage_traces(self):
        """Split ``objective_trace`` into one list per stage."""
        return [self.objective_trace[st["start"]:st["stop"]] for st in self.stages]


def _check_latent(s):
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2:
        raise InvalidLatent(f"latent field must be 2-D, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidLatent("latent field contains non-finite values")
    return s


def sigmoid_map(s):
    """Elementwise logistic function of the latent field."""
    return expit(_check_latent(s))


def init_latent(height, width, seed, init_scale=0.1):
    """Uniform noise on ``[-init_scale, init_scale]`` from a seeded PCG64 stream."""
    if height < MIN_SIDE or width < MIN_SIDE:
        raise InvalidImage(f"dimensions must be >= {MIN_SIDE}, got {height}x{width}")
    rng = np.random.default_rng(seed)
    return rng.uniform(-init_scale, init_scale, size=(height, width))


def _prepare(target, s):
    target = np.asarray(target, dtype=np.float64)
    s = _check_latent(s)
    if target.shape != s.shape:
        raise ShapeMismatch(f"target {target.shape} and latent {s.shape} differ")
    return target, s


def _residual(target, s, cfg):
    vdiff, hdiff = _differences(expit(s), cfg.border_policy)
    return target - _angles(vdiff, hdiff, cfg.epsilon)


def objective(target, s, cfg=None, squared=True):
    """Norm (or squared norm) of ``target - gdm(sigmoid(s))``."""
    cfg = cfg or GdmConfig()
    target, s = _prepare(target, s)
    r = _residual(target, s, cfg)
    sq = float(np.sum(r * r))
    return sq if squared else float(np.sqrt(sq))


def objective_gradient(target, s, cfg=None):
    """Analytic gradient of the squared objective with respect to ``s``."""
    cfg = cfg or GdmConfig()
    target, s = _prepare(target, s)
    return _ResidualObjective(target, cfg)(s)[1]


class _ResidualObjective:
    """Squared angle residual; returns ``(value, gradient)``."""

    def __init__(self, target, cfg):
        self.target = target
        self.cfg = cfg

    def __call__(self, s):
        x = expit(s)
        vdiff, hdiff = _differences(x, self.cfg.border_policy)
        hd = _guarded_denominator(hdiff, self.cfg.epsilon)
        r = self.target - _angles(vdiff, hdiff, self.cfg.epsilon)
        denom = hd * hd + vdiff * vdiff
        g_v = -2.0 * r * hd / denom
        g_h = 2.0 * r * vdiff / denom
        g_x = _differences_adjoint(g_v, g_h, self.cfg.border_policy)
        return float(np.sum(r * r)), g_x * x * (1.0 - x)


class _CrossProductObjective:
    """Alignment objectives built on ``u = sin(t) * (H + eps) - cos(t) * V``.

    ``per_pixel=False`` gives ``sum(u^2) / sum(rho^2)``; ``per_pixel=True``
    gives ``sum(w * u^2 / (rho^2 + floor * mean(rho^2)))`` with
    ``rho^2 = (H + eps)^2 + V^2``. The floor keeps nearly flat pixels of
    ``x'`` from dominating the gradient.
    """

    def __init__(self, target, cfg, per_pixel, branch_cut_weight=0.0, floor=0.0):
        self.cfg = cfg
        self.per_pixel = per_pixel
        self.floor = floor
        self.sin_t = np.sin(target)
        self.cos_t = np.cos(target)
        cos2 = self.cos_t ** 2
        self.weight = 1.0 + branch_cut_weight * (1.0 - cos2) / (cos2 + COS2_FLOOR)

    def __call__(self, s):
        x = expit(s)
        vdiff, hdiff = _differences(x, self.cfg.border_policy)
        hd = hdiff + self.cfg.epsilon
        u = self.sin_t * hd - self.cos_t * vdiff
        rho2 = hd * hd + vdiff * vdiff
        if self.per_pixel:
            q = rho2 + self.floor * rho2.mean()
            ratio = u / q
            value = float(np.sum(self.weight * u * ratio))
            d_u = 2.0 * self.weight * ratio
            a = self.weight * ratio * ratio
            d_rho2 = -a - self.floor * a.sum() / a.size
        else:
            num = float(np.sum(u * u))
            den = float(np.sum(rho2))
            value = num / den
            d_u = 2.0 * u / den
            d_rho2 = -num / (den * den)
        g_h = d_u * self.sin_t + 2.0 * d_rho2 * hd
        g_v = -d_u * self.cos_t + 2.0 * d_rho2 * vdiff
        g_x = _differences_adjoint(g_v, g_h, self.cfg.border_policy)
        return value, g_x * x * (1.0 - x)


def _descend(fun, s, opt, n_iters, raw_norm, trace, residuals, fixed=False):
    """Steepest descent on ``fun`` for at most ``n_iters`` accepted steps.

    Each iteration tries twice the previously accepted step (at most
    ``opt.learning_rate``) and halves it until the objective decreases; a step
    below ``STEP_FLOOR`` ends the stage.
    Stops early once ``raw_norm(s) <= opt.tolerance``.
    """
    value, grad = fun(s)
    step = opt.learning_rate
    trace.append(value)
    residuals.append(raw_norm(s))
    done = 0
    while done < n_iters and residuals[-1] > opt.tolerance:
        if fixed:
            s = s - opt.learning_rate * grad
            value, grad = fun(s)
        else:
            step = min(2.0 * step, opt.learning_rate)
            while step >= STEP_FLOOR:
                candidate = s - step * grad
                new_value, new_grad = fun(candidate)
                if new_value < value:
                    break
                step *= 0.5
            else:
                logger.debug("line search stalled after %d iterations", done)
                break
            s, value, grad = candidate, new_value, new_grad
        if not np.all(np.isfinite(s)):
            raise FloatingPointError("latent field diverged; lower the learning rate")
        done += 1
        trace.append(value)
        residuals.append(raw_norm(s))
    return s, done


def generate_protected(x, opt=None, cfg=None):
    """Produce a gradient-preserving image for ``x``.

    Returns ``(x_prime, report)``. Running out of iterations is not an error;
    ``report.converged`` and ``report.final_objective`` (the unsquared raw
    residual norm) tell the caller how close the result got.
    """
    opt = opt or OptimizerConfig()
    cfg = cfg or GdmConfig()
    x = check_image(x)
    target = gdm(x, cfg)
    s = init_latent(x.shape[0], x.shape[1], opt.seed, opt.init_scale)

    raw = _ResidualObjective(target, cfg)

    def raw_norm(latent):
        return float(np.linalg.norm(_residual(target, latent, cfg)))

    fixed = opt.line_search is LineSearch.FIXED
    if opt.schedule is Schedule.DIRECT:
        if opt.use_squared_objective:
            plan = [("residual", raw, opt.max_iters)]
        else:
            def unsquared(latent):
                value, grad = raw(latent)
                norm = np.sqrt(value)
                return norm, grad / (2.0 * norm) if norm > 0 else grad
            plan = [("residual_norm", unsquared, opt.max_iters)]
    else:
        n_align = int(round(opt.align_fraction * opt.max_iters))
        plan = [
            ("align", _CrossProductObjective(target, cfg, per_pixel=False), n_align),
            ("refine", _CrossProductObjective(
                target, cfg, True, opt.branch_cut_weight, opt.flat_floor),
             opt.max_iters - n_align),
        ]

    trace, residuals, stages = [], [], []
    iterations = 0
    for name, fun, budget in plan:
        if budget <= 0:
            continue
        if residuals and residuals[-1] <= opt.tolerance:
            break
        start = len(trace)
        s, done = _descend(fun, s, opt, budget, raw_norm, trace, residuals, fixed)
        iterations += done
        stages.append({"name": name, "start": start, "stop": len(trace), "iterations": done})

    x_prime = expit(s)
    final_mae = float(np.mean(np.abs(_residual(target, s, cfg))))
    report = ConvergenceReport(
        iterations=iterations,
        final_objective=residuals[-1],
        final_mean_abs_error=final_mae,
        converged=residuals[-1] <= opt.tolerance,
        seed=opt.seed,
        objective_trace=trace,
        residual_trace=residuals,
        stages=stages,
        config={
            "optimizer": opt.to_dict(),
            "gdm": {"epsilon": cfg.epsilon, "border_policy": cfg.border_policy.value},
        },
    )
    return x_prime, report


class GradientPreservingProtector(TransformerMixin, BaseEstimator):
    """Transformer mapping a stack of images to gradient-preserving images.

    Image ``i`` of a call to :meth:`transform` uses seed ``seed + i``.
    ``reports_`` holds the convergence report of each image of the last call.
    """

    def __init__(self, seed=0, init_scale=0.1, learning_rate=1.0, max_iters=2000,
                 tolerance=1e-3, line_search="backtracking", schedule="staged",
                 epsilon=1e-8, border_policy="replicate"):
        self.seed = seed
        self.init_scale = init_scale
        self.learning_rate = learning_rate
        self.max_iters = max_iters
        self.tolerance = tolerance
        self.line_search = line_search
        self.schedule = schedule
        self.epsilon = epsilon
        self.border_policy = border_policy

    def fit(self, X, y=None):
        return self

    def _configs(self, index):
        opt = OptimizerConfig(
            seed=self.seed + index,
            init_scale=self.init_scale,
            learning_rate=self.learning_rate,
            max_iters=self.max_iters,
            tolerance=self.tolerance,
            line_search=self.line_search,
            schedule=self.schedule,
        )
        return opt, GdmConfig(self.epsilon, self.border_policy)

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = X[np.newaxis]
        if X.ndim != 3:
            raise InvalidImage(f"expected (n_images, height, width), got {X.shape}")
        out = np.empty_like(X)
        self.reports_ = []
        for i, img in enumerate(X):
            out[i], report = generate_protected(img, *self._configs(i))
            self.reports_.append(report)
        return out
