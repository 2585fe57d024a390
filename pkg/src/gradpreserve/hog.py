"""HOG descriptors computed from gradient-direction maps.

The unweighted variant gives every pixel one vote in its orientation bin, so
it only needs the direction map and works on gradient-preserving images. The
magnitude-weighted variant votes with ``hypot(V, H)`` and serves as the
plain-image baseline. Both use hard binning and the same 2x2-cell block
normalization, so the vote weight is the only difference between them.
"""
import os
import struct
import tempfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ShapeMismatch
from .gdm import GdmConfig, _angles, central_differences, check_image

BLOCK_SPAN = 2


class Weighting(str, Enum):
    UNWEIGHTED = "unweighted"
    MAGNITUDE = "magnitude"


@dataclass(frozen=True)
class HogConfig:
    cell_size: int = 8
    bins: int = 9
    weighting: Weighting = Weighting.UNWEIGHTED

    def __post_init__(self):
        if self.cell_size < 1:
            raise ValueError("cell_size must be >= 1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        object.__setattr__(self, "weighting", Weighting(self.weighting))

    def feature_length(self, height, width):
        rows, cols = height // self.cell_size, width // self.cell_size
        return (rows - 1) * (cols - 1) * BLOCK_SPAN * BLOCK_SPAN * self.bins


def bin_edges(bins):
    return -np.pi / 2 + np.arange(bins + 1) * (np.pi / bins)


def bin_index(angles, bins):
    """Map angles to bins ``[edge_k, edge_k+1)``; an angle on an edge goes up."""
    idx = np.searchsorted(bin_edges(bins), angles, side="right") - 1
    return np.clip(idx, 0, bins - 1)


def cell_histograms(angles, cfg=None, magnitude=None):
    """Per-cell orientation histograms, shape ``(H/N_c, W/N_c, bins)``."""
    cfg = cfg or HogConfig()
    angles = np.asarray(angles, dtype=np.float64)
    n = cfg.cell_size
    if angles.ndim != 2 or angles.shape[0] % n or angles.shape[1] % n:
        raise ShapeMismatch(f"map shape {angles.shape} is not a multiple of cell size {n}")
    weighted = cfg.weighting is Weighting.MAGNITUDE
    if weighted != (magnitude is not None):
        raise ValueError("magnitude must be given exactly when weighting is 'magnitude'")
    if weighted:
        weights = np.asarray(magnitude, dtype=np.float64)
        if weights.shape != angles.shape:
            raise ShapeMismatch(f"magnitude {weights.shape} vs map {angles.shape}")
    else:
        weights = np.ones_like(angles)

    rows, cols = angles.shape[0] // n, angles.shape[1] // n
    cell_row = np.repeat(np.arange(rows), n)[:, None]
    cell_col = np.repeat(np.arange(cols), n)[None, :]
    flat = (cell_row * cols + cell_col) * cfg.bins + bin_index(angles, cfg.bins)
    hist = np.bincount(flat.ravel(), weights=weights.ravel(), minlength=rows * cols * cfg.bins)
    return hist.reshape(rows, cols, cfg.bins)


def assemble_blocks(hist):
    """Concatenate each 2x2 group of cells as h[i,j], h[i+1,j], h[i,j+1], h[i+1,j+1].

    Returns an array of shape ``(rows-1, cols-1, 4*bins)``; blocks overlap with
    a stride of one cell.
    """
    hist = np.asarray(hist, dtype=np.float64)
    rows, cols, _ = hist.shape
    if rows < BLOCK_SPAN or cols < BLOCK_SPAN:
        raise ShapeMismatch(f"need at least 2x2 cells, got {rows}x{cols}")
    return np.concatenate(
        [hist[:-1, :-1], hist[1:, :-1], hist[:-1, 1:], hist[1:, 1:]], axis=-1
    )


def normalize_block(block):
    """Divide by the L2 norm along the last axis; all-zero blocks stay zero."""
    block = np.asarray(block, dtype=np.float64)
    # divide by the max first so tiny or huge entries do not under/overflow the norm
    peak = np.max(np.abs(block), axis=-1, keepdims=True)
    scaled = np.divide(block, peak, out=np.zeros_like(block), where=peak > 0)
    norm = np.linalg.norm(scaled, axis=-1, keepdims=True)
    return np.divide(scaled, norm, out=np.zeros_like(block), where=norm > 0)


def crop_to_cells(img, cell_size):
    h, w = img.shape
    return img[: h - h % cell_size, : w - w % cell_size]


def extract_hog(img, hog_cfg=None, gdm_cfg=None):
    """HOG feature vector of a grayscale image.

    The image is cropped at the bottom/right to a multiple of the cell size.
    Output length is ``(H/N_c - 1) * (W/N_c - 1) * 4 * bins``.
    """
    hog_cfg = hog_cfg or HogConfig()
    gdm_cfg = gdm_cfg or GdmConfig()
    img = crop_to_cells(check_image(img), hog_cfg.cell_size)
    if min(img.shape) < BLOCK_SPAN * hog_cfg.cell_size:
        raise ShapeMismatch(
            f"image {img.shape} too small for {BLOCK_SPAN}x{BLOCK_SPAN} cells of {hog_cfg.cell_size}px"
        )
    vdiff, hdiff = central_differences(img, gdm_cfg.border_policy)
    angles = _angles(vdiff, hdiff, gdm_cfg.epsilon)
    magnitude = np.hypot(vdiff, hdiff) if hog_cfg.weighting is Weighting.MAGNITUDE else None
    blocks = assemble_blocks(cell_histograms(angles, hog_cfg, magnitude))
    return normalize_block(blocks).ravel()


class HogTransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer from ``(n_images, H, W)`` to ``(n_images, n_features)``."""

    def __init__(self, cell_size=8, bins=9, weighting="unweighted", epsilon=1e-8,
                 border_policy="replicate"):
        self.cell_size = cell_size
        self.bins = bins
        self.weighting = weighting
        self.epsilon = epsilon
        self.border_policy = border_policy

    def fit(self, X, y=None):
        X = np.asarray(X)
        if X.ndim != 3:
            raise ShapeMismatch(f"expected (n_images, height, width), got {X.shape}")
        self.image_shape_ = X.shape[1:]
        self.n_features_out_ = HogConfig(self.cell_size, self.bins).feature_length(*X.shape[1:])
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = X[np.newaxis]
        hog_cfg = HogConfig(self.cell_size, self.bins, self.weighting)
        gdm_cfg = GdmConfig(self.epsilon, self.border_policy)
        return np.stack([extract_hog(img, hog_cfg, gdm_cfg) for img in X])


def _write_bytes_atomic(path, data):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_features_binary(features, path):
    """Little-endian: uint64 element count, then float64 values."""
    values = np.ascontiguousarray(features, dtype="<f8").ravel()
    _write_bytes_atomic(path, struct.pack("<Q", values.size) + values.tobytes())


def read_features_binary(path):
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ValueError(f"{path}: missing length prefix")
    (count,) = struct.unpack("<Q", data[:8])
    if len(data) != 8 + 8 * count:
        raise ValueError(f"{path}: expected {count} values, found {(len(data) - 8) / 8:g}")
    return np.frombuffer(data, dtype="<f8", offset=8).astype(np.float64)


def write_features_csv(features, path):
    values = np.asarray(features, dtype=np.float64).ravel()
    _write_bytes_atomic(path, "".join(f"{v!r}\n" for v in values.tolist()).encode("ascii"))


def read_features_csv(path):
    lines = Path(path).read_text().split()
    return np.array([float(v) for v in lines], dtype=np.float64)
