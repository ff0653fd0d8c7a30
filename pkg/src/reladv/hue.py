"""Hue-shift relation on images stored as (height, width, 3) float arrays."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import kernels
from .errors import ChannelOutOfRange, ReladvError

HUE_TOL = 1e-9


def _check_unit(img: np.ndarray, channels, what: str) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ReladvError(f"{what} image must have shape (height, width, 3)")
    part = img[..., channels]
    if not np.isfinite(img).all() or (part < 0).any() or (part > 1).any():
        raise ChannelOutOfRange(f"{what} channels must lie in [0, 1]")
    return img


def rgb_to_hsv(img) -> np.ndarray:
    """RGB in [0,1] to HSV with hue in [0,1); achromatic pixels get hue 0."""
    img = _check_unit(img, [0, 1, 2], "RGB")
    flat = np.ascontiguousarray(img.reshape(-1, 3))
    return kernels.rgb_to_hsv(flat).reshape(img.shape)


def hsv_to_rgb(img) -> np.ndarray:
    img = _check_unit(img, [1, 2], "HSV")
    flat = np.ascontiguousarray(img.reshape(-1, 3))
    return kernels.hsv_to_rgb(flat).reshape(img.shape)


def wrap_hue(h):
    """Reduce hue mod 1 into [0, 1); a rounding result of exactly 1 maps to 0."""
    h = np.mod(h, 1.0)
    return np.where(h >= 1.0, 0.0, h)


def hue_shift(img, delta: float) -> np.ndarray:
    out = np.array(img, dtype=np.float64, copy=True)
    out[..., 0] = wrap_hue(out[..., 0] + delta)
    return out


def _anchor(img: np.ndarray, anchor: str):
    if anchor == "top_left":
        return (0, 0) if img[0, 0, 1] > 0 else None
    if anchor == "first_chromatic":
        hits = np.argwhere(img[..., 1] > 0)
        return tuple(hits[0]) if len(hits) else None
    raise ReladvError(f"unknown anchor {anchor!r}")


def hue_normalize(img, anchor: str = "top_left") -> np.ndarray:
    """Rotate hues so the anchor pixel has hue 0 (the same point as 1 on the circle).

    With the default anchor an achromatic top-left pixel leaves the image
    unchanged. ``anchor="first_chromatic"`` instead uses the first pixel in
    raster order with positive saturation, which keeps the result constant on
    every shift orbit.
    """
    img = np.asarray(img, dtype=np.float64)
    pos = _anchor(img, anchor)
    if pos is None:
        return img.copy()
    return hue_shift(img, (1.0 - img[pos][0]) % 1.0)


def hue_distance(a, b) -> np.ndarray:
    """Circular distance between hue arrays."""
    d = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(d, 1.0 - d)


def hsv_close(a, b, tol: float = HUE_TOL) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return bool(
        a.shape == b.shape
        and (hue_distance(a[..., 0], b[..., 0]) <= tol).all()
        and (np.abs(a[..., 1:] - b[..., 1:]) <= tol).all()
    )


def shift_grid(n_shifts: int = 20) -> np.ndarray:
    """Evenly spaced shifts 0, 1/n, ..., (n-1)/n."""
    if n_shifts < 1:
        raise ReladvError("n_shifts must be positive")
    return np.arange(n_shifts) / n_shifts


def hue_shift_attack(loss_fn, img, n_shifts: int = 20):
    """Try every grid shift and return ``(delta, shifted image, loss)`` of the worst one.

    ``loss_fn`` maps an HSV image to a scalar loss; ties keep the smallest shift.
    """
    best = None
    for delta in shift_grid(n_shifts):
        cand = hue_shift(img, delta)
        value = float(loss_fn(cand))
        if best is None or value > best[2]:
            best = (float(delta), cand, value)
    return best


def write_image(img, path) -> None:
    """Text format: a ``width height`` header, then one row of 3*width floats per line."""
    img = np.asarray(img, dtype=np.float64)
    h, w, _ = img.shape
    lines = [f"{w} {h}"]
    lines += [" ".join(repr(float(v)) for v in row.reshape(-1)) for row in img]
    Path(path).write_text("\n".join(lines) + "\n")


def read_image(path) -> np.ndarray:
    rows = Path(path).read_text().split("\n")
    w, h = (int(t) for t in rows[0].split())
    data = [[float(t) for t in r.split()] for r in rows[1:1 + h]]
    arr = np.array(data, dtype=np.float64)
    if arr.shape != (h, 3 * w):
        raise ReladvError("image body does not match its header")
    return arr.reshape(h, w, 3)
