"""Luminance gradient-direction maps.

A gradient-direction map (GDM) stores, for every pixel, the angle
``arctan(V / (H + eps))`` where ``V`` and ``H`` are the vertical and
horizontal central differences of the image. The single-argument arctangent
is used on purpose, so directions live in ``(-pi/2, pi/2)`` and are only
defined modulo pi.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import InvalidImage, ShapeMismatch

MIN_SIDE = 3


class BorderPolicy(str, Enum):
    REPLICATE_EDGE = "replicate"
    SKIP_BORDER = "skip"


@dataclass(frozen=True)
class GdmConfig:
    epsilon: float = 1e-8
    border_policy: BorderPolicy = BorderPolicy.REPLICATE_EDGE

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        object.__setattr__(self, "border_policy", BorderPolicy(self.border_policy))


def check_image(img, name="image"):
    """Validate a grayscale image and return it as a float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidImage(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < MIN_SIDE or arr.shape[1] < MIN_SIDE:
        raise InvalidImage(f"{name} must be at least {MIN_SIDE}x{MIN_SIDE}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidImage(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidImage(f"{name} values must lie in [0, 1]")
    return arr


def border_mask(shape):
    """Boolean mask that is True on the outermost ring of pixels."""
    mask = np.zeros(shape, dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask


def _diff_rows(x):
    out = np.empty_like(x)
    out[1:-1] = x[2:] - x[:-2]
    out[0] = x[1] - x[0]
    out[-1] = x[-1] - x[-2]
    return out


def _diff_rows_adjoint(g):
    out = np.zeros_like(g)
    out[1:] += g[:-1]
    out[-1] += g[-1]
    out[:-1] -= g[1:]
    out[0] -= g[0]
    return out


def _differences(x, policy):
    # No range validation; the optimizer calls this on sigmoid outputs.
    vdiff = _diff_rows(x)
    hdiff = _diff_rows(x.T).T
    if BorderPolicy(policy) is BorderPolicy.SKIP_BORDER:
        mask = border_mask(x.shape)
        vdiff[mask] = 0.0
        hdiff[mask] = 0.0
    return vdiff, hdiff


def _differences_adjoint(g_v, g_h, policy):
    """Pull gradients w.r.t. (vertical, horizontal) differences back to pixels."""
    if BorderPolicy(policy) is BorderPolicy.SKIP_BORDER:
        mask = border_mask(g_v.shape)
        g_v = np.where(mask, 0.0, g_v)
        g_h = np.where(mask, 0.0, g_h)
    return _diff_rows_adjoint(g_v) + _diff_rows_adjoint(g_h.T).T


def central_differences(img, policy=BorderPolicy.REPLICATE_EDGE):
    """Return ``(vertical_diff, horizontal_diff)`` of a grayscale image.

    ``vertical_diff[h, w] = x[h+1, w] - x[h-1, w]`` and
    ``horizontal_diff[h, w] = x[h, w+1] - x[h, w-1]``. On the border,
    ``ReplicateEdge`` clamps indices to the image and ``SkipBorder`` writes 0.
    """
    return _differences(check_image(img), policy)


# largest double below pi/2; arctan can round up to the float value of pi/2
_ANGLE_LIMIT = np.nextafter(np.pi / 2, 0.0)


def _guarded_denominator(hdiff, epsilon):
    hd = hdiff + epsilon
    # a horizontal difference of exactly -eps would divide by zero
    return np.where(hd == 0.0, epsilon, hd)


def _angles(vdiff, hdiff, epsilon):
    angles = np.arctan(vdiff / _guarded_denominator(hdiff, epsilon))
    return np.clip(angles, -_ANGLE_LIMIT, _ANGLE_LIMIT)


def gdm(img, cfg=None):
    """Gradient-direction map of ``img`` as an array of angles in (-pi/2, pi/2)."""
    cfg = cfg or GdmConfig()
    vdiff, hdiff = central_differences(img, cfg.border_policy)
    return _angles(vdiff, hdiff, cfg.epsilon)


def gradient_magnitude(img, cfg=None):
    cfg = cfg or GdmConfig()
    vdiff, hdiff = central_differences(img, cfg.border_policy)
    return np.hypot(vdiff, hdiff)


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"map shapes differ: {a.shape} vs {b.shape}")
    return a, b


def gdm_residual(a, b):
    """Frobenius norm of the raw (not wrap-aware) angle difference."""
    a, b = _check_pair(a, b)
    return float(np.linalg.norm(a - b))


def mean_abs_angle_error(a, b):
    a, b = _check_pair(a, b)
    return float(np.mean(np.abs(a - b)))
