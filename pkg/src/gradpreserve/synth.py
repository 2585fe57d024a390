"""Synthetic grating dataset used as a desk-scale stand-in for face images."""
import numpy as np

MAX_CLASSES = 16
MIN_SIZE = 32


def grating(size, angle, phase, period=8.0, contrast=0.4):
    """Sinusoidal grating whose intensity varies along direction ``angle``."""
    rows, cols = np.mgrid[:size, :size].astype(np.float64)
    along = cols * np.cos(angle) + rows * np.sin(angle)
    return 0.5 + contrast * np.sin(2.0 * np.pi * along / period + phase)


def synth_dataset(n_classes=8, n_per_class=40, size=64, noise_std=0.05, seed=0,
                  period=8.0, min_size=MIN_SIZE):
    """Balanced grating images; class ``k`` is oriented at ``k * pi / n_classes``.

    Each image gets a uniform random phase and additive Gaussian noise, then is
    clipped to [0, 1]. Returns ``(images, labels)`` with images of shape
    ``(n_classes * n_per_class, size, size)``, grouped by class.
    """
    if not 1 <= n_classes <= MAX_CLASSES:
        raise ValueError(f"n_classes must be in [1, {MAX_CLASSES}]")
    if size < min_size:
        raise ValueError(f"size must be >= {min_size}")
    if n_per_class < 1 or noise_std < 0:
        raise ValueError("n_per_class must be >= 1 and noise_std >= 0")
    rng = np.random.default_rng(seed)
    images = np.empty((n_classes * n_per_class, size, size))
    labels = np.repeat(np.arange(n_classes), n_per_class)
    for i, label in enumerate(labels):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        img = grating(size, label * np.pi / n_classes, phase, period)
        if noise_std > 0:
            img = img + rng.normal(0.0, noise_std, img.shape)
        images[i] = np.clip(img, 0.0, 1.0)
    return images, labels
