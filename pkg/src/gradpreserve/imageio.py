"""Image files, diagnostic renders and face-dataset directory ingestion."""
import logging
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import ImageIOError, InvalidImage
from .gdm import GdmConfig, check_image, gdm

logger = logging.getLogger(__name__)

FORMATS = {".pgm": "PPM", ".png": "PNG"}
LUMA = np.array([0.299, 0.587, 0.114])


def _format_for(path):
    suffix = Path(path).suffix.lower()
    if suffix not in FORMATS:
        raise ImageIOError(path, f"unsupported extension {suffix!r}; use .pgm or .png")
    return FORMATS[suffix]


def load_image(path):
    """Read a PGM or PNG file as a float image in [0, 1].

    8-bit data maps through ``v / 255``; 16-bit data through ``v / 65535``.
    Colour input is reduced to luma ``0.299 R + 0.587 G + 0.114 B`` with a
    warning.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("1", "L", "I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64)
                scale = 255.0 if mode in ("1", "L") else 65535.0
                if mode == "1":
                    arr = arr * 255.0
            else:
                warnings.warn(f"{path}: converting {mode} image to grayscale luma", stacklevel=2)
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                arr = rgb @ LUMA
                scale = 255.0
    except FileNotFoundError as exc:
        raise ImageIOError(path, "no such file") from exc
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageIOError(path, f"cannot decode image ({exc})") from exc
    try:
        return check_image(np.clip(arr / scale, 0.0, 1.0), name=str(path))
    except InvalidImage as exc:
        raise ImageIOError(path, str(exc)) from exc


def to_uint8(img):
    return np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def _write_atomic(path, writer):
    path = Path(path)
    if not path.parent.is_dir():
        raise ImageIOError(path, "parent directory does not exist")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def save_array_u8(arr, path):
    fmt = _format_for(path)
    image = Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="L")
    _write_atomic(path, lambda tmp: image.save(tmp, format=fmt))


def save_image(img, path):
    """Write an image in [0, 1] as 8-bit PGM (binary P5) or PNG."""
    save_array_u8(to_uint8(img), path)


def render_gdm(angles):
    """Affine map of angles (-pi/2, pi/2) onto gray levels [0, 255]."""
    angles = np.asarray(angles, dtype=np.float64)
    return np.clip(np.round((angles + np.pi / 2) / np.pi * 255.0), 0, 255).astype(np.uint8)


def visualize(data, path, kind="image"):
    """Render an image (``kind="image"``) or a direction map (``kind="gdm"``) to PNG."""
    if kind == "gdm":
        save_array_u8(render_gdm(data), path)
    elif kind == "image":
        save_image(check_image(data), path)
    else:
        raise ValueError(f"kind must be 'image' or 'gdm', got {kind!r}")


def structural_similarity(x, x_prime):
    """SSIM between two images in [0, 1]; a diagnostic only."""
    from skimage.metrics import structural_similarity as ssim

    return float(ssim(check_image(x), check_image(x_prime), data_range=1.0))


def three_panel(x, x_prime, path, cfg=None, gap=4):
    """Save ``x | x' | GDM(x')`` side by side and return the SSIM of x and x'."""
    x = check_image(x)
    x_prime = check_image(x_prime)
    if x.shape != x_prime.shape:
        raise InvalidImage(f"shapes differ: {x.shape} vs {x_prime.shape}")
    h, w = x.shape
    canvas = np.full((h, 3 * w + 2 * gap), 255, dtype=np.uint8)
    canvas[:, :w] = to_uint8(x)
    canvas[:, w + gap:2 * w + gap] = to_uint8(x_prime)
    canvas[:, 2 * (w + gap):] = render_gdm(gdm(x_prime, cfg or GdmConfig()))
    save_array_u8(canvas, path)
    return structural_similarity(x, x_prime)


@dataclass
class DatasetManifest:
    """Images found under ``root/<identity>/<image>``.

    Identities are sorted lexicographically and numbered from 0. ``skipped``
    lists files that could not be used, with the reason.
    """

    root: str
    entries: list = field(default_factory=list)
    identities: list = field(default_factory=list)
    format: str = ""
    skipped: list = field(default_factory=list)

    def to_dict(self):
        return {
            "root": self.root,
            "format": self.format,
            "identities": self.identities,
            "entries": [{"path": p, "label": c} for p, c in self.entries],
            "skipped": [{"path": p, "reason": r} for p, r in self.skipped],
        }


def load_dataset(root):
    """Scan and decode a dataset tree; returns ``(images, labels, manifest)``.

    Corrupt files and files whose size differs from the first decoded image
    are skipped with a warning. Identities left without images are dropped
    before class ids are assigned, so ids stay contiguous.
    """
    root = Path(root)
    if not root.is_dir():
        raise ImageIOError(root, "dataset root is not a directory")
    manifest = DatasetManifest(root=str(root))
    per_identity = []
    shape = None
    for ident in sorted(p for p in root.iterdir() if p.is_dir()):
        loaded = []
        for f in sorted(ident.iterdir()):
            if f.suffix.lower() not in FORMATS:
                continue
            rel = f.relative_to(root).as_posix()
            try:
                img = load_image(f)
            except ImageIOError as exc:
                warnings.warn(f"skipping {rel}: {exc}", stacklevel=2)
                manifest.skipped.append((rel, str(exc)))
                continue
            if shape is None:
                shape = img.shape
            if img.shape != shape:
                reason = f"shape {img.shape} differs from {shape}"
                warnings.warn(f"skipping {rel}: {reason}", stacklevel=2)
                manifest.skipped.append((rel, reason))
                continue
            loaded.append((rel, img))
        if loaded:
            per_identity.append((ident.name, loaded))

    images, labels = [], []
    for label, (name, loaded) in enumerate(per_identity):
        manifest.identities.append(name)
        for rel, img in loaded:
            manifest.entries.append((rel, label))
            images.append(img)
            labels.append(label)
    if not images:
        raise ImageIOError(root, "no readable .pgm or .png images found")
    suffixes = {Path(p).suffix.lower().lstrip(".") for p, _ in manifest.entries}
    manifest.format = suffixes.pop().upper() if len(suffixes) == 1 else "MIXED"
    return np.stack(images), np.array(labels), manifest
