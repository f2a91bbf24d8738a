"""Scalogram rendering and image-space augmentation.

A rendered scalogram is a 224 x 224 x 3 uint8 RGB raster: coefficient
magnitudes are log-compressed, rescaled to [0, 1], bilinearly resized,
and passed through a 256-entry colormap. PNG round-trips are lossless
over the decoded pixel buffer.
"""
from __future__ import annotations

import io
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from scalonet import cwt as cwt_mod
from scalonet.dataset import (
    PROVENANCE_AUGMENTED,
    DatasetManifest,
    ManifestEntry,
    Signal,
)
from scalonet.errors import DataError
from scalonet.util import atomic_write_bytes, stream_rng

IMG_SIZE = 224


def log_normalize(m: np.ndarray) -> np.ndarray:
    """log(1 + x) then affine rescale to [0, 1]; constant input maps to zeros."""
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise DataError("log_normalize expects a non-negative matrix")
    y = np.log1p(m)
    lo, hi = y.min(), y.max()
    if hi == lo:
        return np.zeros_like(y)
    return (y - lo) / (hi - lo)


def resize_bilinear(m: np.ndarray, out_h: int = IMG_SIZE, out_w: int = IMG_SIZE) -> np.ndarray:
    """Corner-aligned bilinear resize of a 2-D real matrix."""
    m = np.asarray(m, dtype=np.float64)
    h, w = m.shape
    if h < 2 or w < 2:
        raise DataError("resize input must be at least 2x2")
    ys = np.arange(out_h) * ((h - 1) / (out_h - 1))
    xs = np.arange(out_w) * ((w - 1) / (out_w - 1))
    y0 = np.minimum(ys.astype(np.int64), h - 2)
    x0 = np.minimum(xs.astype(np.int64), w - 2)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    tl = m[np.ix_(y0, x0)]
    tr = m[np.ix_(y0, x0 + 1)]
    bl = m[np.ix_(y0 + 1, x0)]
    br = m[np.ix_(y0 + 1, x0 + 1)]
    top = tl + (tr - tl) * wx
    bot = bl + (br - bl) * wx
    return top + (bot - top) * wy


def default_colormap() -> np.ndarray:
    """Jet-style 256 x 3 uint8 table; ends at dark blue and dark red."""
    x = np.arange(256) / 255.0
    r = np.clip(np.minimum(4 * x - 1.5, -4 * x + 4.5), 0, 1)
    g = np.clip(np.minimum(4 * x - 0.5, -4 * x + 3.5), 0, 1)
    b = np.clip(np.minimum(4 * x + 0.5, -4 * x + 2.5), 0, 1)
    return np.rint(np.stack([r, g, b], axis=1) * 255).astype(np.uint8)


def load_colormap(path) -> np.ndarray:
    """Read a colormap file: 256 lines of 'r g b' integers in 0..255."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            rows = [line.split() for line in fh if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read colormap {path}: {exc}") from exc
    if len(rows) != 256 or any(len(r) != 3 for r in rows):
        raise DataError(f"colormap {path} must have 256 'r g b' lines")
    table = np.array([[int(v) for v in row] for row in rows], dtype=np.int64)
    if table.min() < 0 or table.max() > 255:
        raise DataError(f"colormap {path} entries must be within 0..255")
    return table.astype(np.uint8)


def apply_colormap(m: np.ndarray, colormap: np.ndarray) -> np.ndarray:
    """Per-pixel lookup colormap[round(v * 255)] over a 224 x 224 [0, 1] matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (IMG_SIZE, IMG_SIZE):
        raise DataError(f"colormap input must be {IMG_SIZE}x{IMG_SIZE}, got {m.shape}")
    if m.min() < 0.0 or m.max() > 1.0:
        raise DataError("colormap input values must lie in [0, 1]")
    idx = np.rint(m * 255).astype(np.intp)
    return colormap[idx]


def require_rgb_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.shape != (IMG_SIZE, IMG_SIZE, 3) or img.dtype != np.uint8:
        raise DataError(
            f"expected a {IMG_SIZE}x{IMG_SIZE}x3 uint8 image, got {img.dtype} {img.shape}"
        )
    return img


def write_image(path, img: np.ndarray):
    require_rgb_image(img)
    buf = io.BytesIO()
    Image.fromarray(img, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_image(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except (OSError, UnidentifiedImageError, SyntaxError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    return require_rgb_image(arr)


def scalogram_image(
    signal: Signal,
    grid=None,
    wavelet=None,
    norm: str = cwt_mod.NORM_L1,
    colormap: np.ndarray | None = None,
    max_cols: int = 1024,
) -> np.ndarray:
    """Full render: CWT magnitudes -> log-normalize -> resize -> colormap.

    Columns are decimated to a uniform stride keeping at least max_cols
    positions before the resize; the resized raster is unchanged within
    interpolation tolerance and the transform cost drops sharply.
    """
    n = signal.samples.size
    if grid is None:
        grid = cwt_mod.default_scales(n, signal.fs)
    if wavelet is None:
        wavelet = cwt_mod.Wavelet()
    if colormap is None:
        colormap = default_colormap()
    stride = max(1, n // max_cols)
    coeffs = cwt_mod.cwt_fast(signal, grid, wavelet, norm=norm, col_stride=stride)
    mag = cwt_mod.magnitude(coeffs)
    field = resize_bilinear(log_normalize(mag))
    return apply_colormap(field, colormap)


def augment_flip(img: np.ndarray, apply: bool) -> np.ndarray:
    """Horizontal mirror when apply is set, identity otherwise."""
    img = require_rgb_image(img)
    if not apply:
        return img.copy()
    return img[:, ::-1, :].copy()


def augment_rotate(img: np.ndarray, factor: float, u: float) -> np.ndarray:
    """Rotate about the image center by u * factor * 360 degrees.

    Bilinear resampling; coordinates outside the frame clamp to the
    nearest edge pixel. factor is a fraction of a full turn, so the
    augmentation value 0.2 means angles in [-72, +72] degrees.
    """
    img = require_rgb_image(img)
    if factor < 0:
        raise DataError("rotation factor must be >= 0")
    theta = np.deg2rad(u * factor * 360.0)
    if theta == 0.0:
        return img.copy()
    c0 = (IMG_SIZE - 1) / 2.0
    rows, cols = np.meshgrid(
        np.arange(IMG_SIZE, dtype=np.float64) - c0,
        np.arange(IMG_SIZE, dtype=np.float64) - c0,
        indexing="ij",
    )
    ct, st = np.cos(-theta), np.sin(-theta)
    src_r = ct * rows - st * cols + c0
    src_c = st * rows + ct * cols + c0
    src_r = np.clip(src_r, 0.0, IMG_SIZE - 1)
    src_c = np.clip(src_c, 0.0, IMG_SIZE - 1)
    r0 = np.minimum(src_r.astype(np.int64), IMG_SIZE - 2)
    c0i = np.minimum(src_c.astype(np.int64), IMG_SIZE - 2)
    wr = (src_r - r0)[..., None]
    wc = (src_c - c0i)[..., None]
    pix = img.astype(np.float64)
    tl = pix[r0, c0i]
    tr = pix[r0, c0i + 1]
    bl = pix[r0 + 1, c0i]
    br = pix[r0 + 1, c0i + 1]
    out = (tl + (tr - tl) * wc) * (1 - wr) + (bl + (br - bl) * wc) * wr
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def augment_record(img: np.ndarray, factor: float, rng: np.random.Generator) -> np.ndarray:
    """One augmented copy: random horizontal flip, then random rotation."""
    flipped = augment_flip(img, bool(rng.random() < 0.5))
    u = rng.uniform(-1.0, 1.0)
    return augment_rotate(flipped, factor, u)


def augment_dataset(
    manifest: DatasetManifest,
    images_dir,
    copies_per_record: int = 2,
    factor: float = 0.2,
    seed: int = 0,
) -> DatasetManifest:
    """Materialize augmented copies of every original record.

    Each original contributes copies_per_record new PNGs written next to
    the source image. Per-record rng streams derive from (seed,
    record_id), so record order and parallelism cannot change results.
    """
    images_dir = os.fspath(images_dir)
    originals = manifest.originals()
    entries = list(originals)
    for entry in originals:
        src_path = os.path.join(images_dir, entry.path)
        if not os.path.isfile(src_path):
            raise DataError(f"missing source image {src_path}")
        img = read_image(src_path)
        rng = stream_rng(seed, entry.record_id)
        for i in range(copies_per_record):
            out = augment_record(img, factor, rng)
            rid = f"{entry.record_id}_aug{i}"
            rel = f"{rid}.png"
            write_image(os.path.join(images_dir, rel), out)
            entries.append(ManifestEntry(rid, rel, entry.label, PROVENANCE_AUGMENTED))
    return DatasetManifest(entries)
