"""Polar normalization of the iris annulus and ROI preparation.

The annulus between the pupil and limbic circles maps to a fixed 50x300
strip (radius x angle), which removes pupil-dilation and camera-distance
scale from everything downstream. The region of interest is the lower-iris
wedge least troubled by lids and lashes; it is contrast-enhanced by
background subtraction and compressed by pairwise row averaging to 16x160.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError
from .image import bilinear, box_mean
from .segmentation import IrisGeometry

__all__ = [
    "STRIP_ROWS",
    "STRIP_COLS",
    "DEG_PER_COL",
    "unwrap",
    "extract_roi",
    "enhance_roi",
    "compress_roi",
    "hist_equalize",
]

STRIP_ROWS = 50
STRIP_COLS = 300
DEG_PER_COL = 360.0 / STRIP_COLS  # 1.2 degrees


def unwrap(
    img: np.ndarray,
    geom: IrisGeometry,
    rows: int = STRIP_ROWS,
    cols: int = STRIP_COLS,
) -> np.ndarray:
    """Rubber-sheet map of the iris annulus to a rows x cols polar strip.

    Row k samples radius r_p + (k+0.5)*(r_l-r_p)/rows (mid-cell offsets keep
    samples off the pupil edge); column k samples angle k*(360/cols) degrees
    from the +x axis, increasing clockwise in image coordinates, so columns
    sweep right -> down -> left -> up. Samples are bilinear. Raises
    DegenerateInputError when the annulus leaves the image.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    p = geom.pupil
    if geom.limbic_r <= p.r:
        raise DegenerateInputError("limbic radius must exceed pupil radius")
    if (
        p.cx - geom.limbic_r < 0
        or p.cy - geom.limbic_r < 0
        or p.cx + geom.limbic_r > w - 1
        or p.cy + geom.limbic_r > h - 1
    ):
        raise DegenerateInputError("iris annulus extends outside the image")
    rho = p.r + (np.arange(rows) + 0.5) * (geom.limbic_r - p.r) / rows
    theta = np.deg2rad(np.arange(cols) * (360.0 / cols))
    xs = p.cx + rho[:, None] * np.cos(theta)[None, :]
    ys = p.cy + rho[:, None] * np.sin(theta)[None, :]
    return bilinear(arr, xs, ys)


def extract_roi(
    strip: np.ndarray,
    row_start: int = 0,
    col_start: int = 15,
    rows: int = 32,
    cols: int = 160,
) -> np.ndarray:
    """Cut the lower-iris wedge from the strip: by default the innermost 32
    radial rows and angular columns 15..174. The inner rows are the least
    occluded band and the column window keeps clear of the upper lid."""
    s = np.asarray(strip, dtype=np.float64)
    if s.ndim != 2:
        raise DimensionMismatchError("strip must be 2-D")
    if row_start + rows > s.shape[0] or col_start + cols > s.shape[1]:
        raise DimensionMismatchError(
            f"ROI {rows}x{cols} at ({row_start},{col_start}) does not fit strip {s.shape}"
        )
    return s[row_start : row_start + rows, col_start : col_start + cols].copy()


def enhance_roi(roi: np.ndarray, w: int = 7, beta: float = 0.9) -> np.ndarray:
    """Background subtraction: out = roi - beta * slidingmean(roi).

    The sliding mean over the (2w+1)^2 edge-replicated window acts as the
    slowly varying background; subtracting most of it strengthens the
    rapid texture changes that carry identity.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    if not (0.0 <= beta <= 1.0):
        raise ValueError("beta must be in [0, 1]")
    arr = np.asarray(roi, dtype=np.float64)
    return arr - beta * box_mean(arr, w, w)


def compress_roi(roi: np.ndarray) -> np.ndarray:
    """Average each pair of adjacent rows into one: out(a,j) =
    (roi(2a,j) + roi(2a+1,j)) / 2. Requires an even row count."""
    arr = np.asarray(roi, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] % 2 != 0:
        raise DimensionMismatchError("compress_roi needs a 2-D array with even rows")
    return 0.5 * (arr[0::2, :] + arr[1::2, :])


def hist_equalize(roi: np.ndarray) -> np.ndarray:
    """256-bin histogram equalization onto [0, 255] (ablation toggle only)."""
    arr = np.asarray(roi, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    if hi <= lo:
        return np.zeros_like(arr)
    idx = np.clip(((arr - lo) / (hi - lo) * 255.0).astype(int), 0, 255)
    hist = np.bincount(idx.ravel(), minlength=256)
    cdf = np.cumsum(hist).astype(np.float64)
    cdf = (cdf - cdf[0]) / (cdf[-1] - cdf[0]) * 255.0
    return cdf[idx]
