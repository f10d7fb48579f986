"""Image containers, file I/O and the low-level kernels used by every stage.

Grayscale images are plain 2-D float64 arrays indexed [row, col] (y down,
x right). Loaded files hold values in [0, 255]; intermediate images are
kept as reals because later stages add masks whose sums exceed 255 before
being clamped. Edge maps are 2-D bool arrays of the same shape.
"""

from __future__ import annotations

import math
import os
import struct

import numpy as np
from scipy import ndimage

from .errors import (
    CorruptImageError,
    DegenerateInputError,
    UnsupportedFormatError,
)

__all__ = [
    "load_gray",
    "save_pgm",
    "box_mean",
    "gaussian_kernel",
    "canny",
    "hysteresis",
    "draw_circle",
]


# ---------------------------------------------------------------------------
# File I/O: PGM (P2/P5) and 8-bit uncompressed BMP readers, PGM P5 writer.
# ---------------------------------------------------------------------------

def load_gray(path) -> np.ndarray:
    """Load an 8-bit grayscale image (PGM P2/P5 or palette BMP) as float64.

    Dimensions come from the file header, never assumed. Raises
    FileNotFoundError for a missing file, UnsupportedFormatError for
    formats this reader does not handle, CorruptImageError for files
    whose payload does not match their header.
    """
    with open(os.fspath(path), "rb") as fh:
        data = fh.read()
    if data[:2] in (b"P2", b"P5"):
        return _parse_pgm(data)
    if data[:2] == b"BM":
        return _parse_bmp(data)
    raise UnsupportedFormatError(f"{path}: not a PGM (P2/P5) or BMP file")


def _pgm_tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c.isspace():
            i += 1
        elif c == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            yield i, data[i:j]
            i = j


def _parse_pgm(data: bytes) -> np.ndarray:
    toks = _pgm_tokens(data)
    try:
        _, magic = next(toks)
        _, w_tok = next(toks)
        _, h_tok = next(toks)
        pos, maxval_tok = next(toks)
    except StopIteration:
        raise CorruptImageError("PGM header truncated") from None
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    except ValueError:
        raise CorruptImageError("PGM header is not numeric") from None
    if width < 1 or height < 1 or maxval < 1:
        raise CorruptImageError("PGM header values out of range")
    if maxval > 255:
        raise UnsupportedFormatError("only 8-bit PGM is supported (maxval <= 255)")

    if magic == b"P5":
        start = pos + len(maxval_tok) + 1  # single whitespace after maxval
        payload = data[start : start + width * height]
        if len(payload) < width * height:
            raise CorruptImageError("P5 payload shorter than width*height")
        img = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
        return img.reshape(height, width)

    # P2: remaining tokens are ASCII sample values
    vals = []
    for _, tok in toks:
        try:
            vals.append(int(tok))
        except ValueError:
            raise CorruptImageError("P2 sample is not an integer") from None
        if len(vals) == width * height:
            break
    if len(vals) < width * height:
        raise CorruptImageError("P2 payload shorter than width*height")
    arr = np.array(vals, dtype=np.float64)
    if arr.min() < 0 or arr.max() > maxval:
        raise CorruptImageError("P2 sample outside [0, maxval]")
    return arr.reshape(height, width)


def _parse_bmp(data: bytes) -> np.ndarray:
    if len(data) < 54:
        raise CorruptImageError("BMP header truncated")
    pix_offset = struct.unpack_from("<I", data, 10)[0]
    hdr_size = struct.unpack_from("<I", data, 14)[0]
    if hdr_size < 40:
        raise UnsupportedFormatError("BMP core headers are not supported")
    width, height = struct.unpack_from("<ii", data, 18)
    planes, bpp = struct.unpack_from("<HH", data, 26)
    compression = struct.unpack_from("<I", data, 30)[0]
    clr_used = struct.unpack_from("<I", data, 46)[0]
    if bpp != 8 or compression != 0:
        raise UnsupportedFormatError("only 8-bit uncompressed BMP is supported")
    if width < 1 or planes != 1:
        raise CorruptImageError("BMP header values out of range")
    top_down = height < 0
    height = abs(height)
    if height < 1:
        raise CorruptImageError("BMP header values out of range")

    n_colors = clr_used or 256
    pal_off = 14 + hdr_size
    pal_end = pal_off + 4 * n_colors
    if pal_end > len(data):
        raise CorruptImageError("BMP palette truncated")
    pal = np.frombuffer(data[pal_off:pal_end], dtype=np.uint8).reshape(-1, 4)
    if not (np.array_equal(pal[:, 0], pal[:, 1]) and np.array_equal(pal[:, 1], pal[:, 2])):
        raise UnsupportedFormatError("BMP palette is not grayscale")
    gray = np.zeros(256, dtype=np.float64)
    gray[: len(pal)] = pal[:, 0]

    stride = (width + 3) & ~3
    need = stride * height
    if pix_offset + need > len(data):
        raise CorruptImageError("BMP pixel data shorter than header promises")
    rows = np.frombuffer(data[pix_offset : pix_offset + need], dtype=np.uint8)
    rows = rows.reshape(height, stride)[:, :width]
    if not top_down:
        rows = rows[::-1]
    return gray[rows]


def save_pgm(path, img: np.ndarray) -> None:
    """Write a binary (P5) 8-bit PGM; values are rounded and clamped to [0, 255]."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise DegenerateInputError("save_pgm expects a 2-D array")
    h, w = arr.shape
    payload = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    with open(os.fspath(path), "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(payload.tobytes())


# ---------------------------------------------------------------------------
# Spatial kernels. Border policy is edge replication throughout.
# ---------------------------------------------------------------------------

def box_mean(img: np.ndarray, half_h: int, half_w: int) -> np.ndarray:
    """Mean over the (2*half_h+1) x (2*half_w+1) window centred on each pixel.

    Borders replicate the edge sample, so every window holds the full
    (2*half_h+1)*(2*half_w+1) values and a constant image maps to itself.
    """
    if half_h < 0 or half_w < 0:
        raise ValueError("half window sizes must be >= 0")
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DegenerateInputError("box_mean expects a nonempty 2-D array")
    kernel = np.full((2 * half_h + 1, 2 * half_w + 1), 1.0)
    kernel /= kernel.size
    return ndimage.correlate(arr, kernel, mode="nearest")


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps truncated at +-3*sigma and renormalised to unit sum."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


def hysteresis(mag: np.ndarray, low: float, high: float) -> np.ndarray:
    """Keep magnitude pixels >= low that are 8-connected to a pixel >= high."""
    weak = mag >= low
    if not weak.any():
        return np.zeros_like(weak)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    strong_labels = np.unique(labels[mag >= high])
    strong_labels = strong_labels[strong_labels > 0]
    if strong_labels.size == 0:
        return np.zeros_like(weak)
    return np.isin(labels, strong_labels)


def canny(
    img: np.ndarray,
    sigma: float = 1.0,
    low_ratio: float = 0.1,
    high_ratio: float = 0.2,
) -> np.ndarray:
    """Canny edge detection: Gaussian smoothing, Sobel gradients,
    non-maximum suppression, hysteresis at low_ratio/high_ratio of the
    maximum gradient magnitude.

    Returns a bool edge map of the input shape. Edges are one pixel thick
    along the gradient direction (exact gradient ties keep both pixels,
    which keeps the output symmetric under 180-degree rotation).
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if not (0.0 < low_ratio < high_ratio <= 1.0):
        raise ValueError("need 0 < low_ratio < high_ratio <= 1")
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise DegenerateInputError("canny expects a 2-D array")
    support = 2 * int(math.ceil(3.0 * sigma)) + 1
    if min(arr.shape) < support:
        raise DegenerateInputError(
            f"image {arr.shape} smaller than the {support}-tap Gaussian support"
        )

    k = gaussian_kernel(sigma)
    sm = ndimage.correlate1d(arr, k, axis=0, mode="nearest")
    sm = ndimage.correlate1d(sm, k, axis=1, mode="nearest")
    gx = ndimage.correlate(sm, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(sm, _SOBEL_Y, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0.0:
        return np.zeros(arr.shape, dtype=bool)

    # Non-maximum suppression against the two neighbours along the gradient,
    # quantised to 4 directions. Neighbours outside the image count as 0.
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    padded = np.pad(mag, 1, mode="constant")

    def shifted(dy, dx):
        return padded[1 + dy : 1 + dy + mag.shape[0], 1 + dx : 1 + dx + mag.shape[1]]

    sector = np.zeros(mag.shape, dtype=np.uint8)
    sector[(ang >= 22.5) & (ang < 67.5)] = 1
    sector[(ang >= 67.5) & (ang < 112.5)] = 2
    sector[(ang >= 112.5) & (ang < 157.5)] = 3
    # (dy, dx) neighbour offsets per sector, y pointing down
    fwd = [shifted(0, 1), shifted(1, 1), shifted(1, 0), shifted(1, -1)]
    bwd = [shifted(0, -1), shifted(-1, -1), shifted(-1, 0), shifted(-1, 1)]
    q = np.choose(sector, fwd)
    r = np.choose(sector, bwd)
    keep = (mag >= q) & (mag >= r) & (mag > 0)
    nms = np.where(keep, mag, 0.0)

    return hysteresis(nms, low_ratio * peak, high_ratio * peak)


def bilinear(img: np.ndarray, xs, ys) -> np.ndarray:
    """Bilinear samples of img at float coordinates (x right, y down).

    Coordinates are clamped to the image, so callers that need strict
    bounds must check before sampling.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    x = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = arr[y0, x0] * (1.0 - fx) + arr[y0, x1] * fx
    bot = arr[y1, x0] * (1.0 - fx) + arr[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


# ---------------------------------------------------------------------------
# Debug rendering
# ---------------------------------------------------------------------------

def draw_circle(img: np.ndarray, cx: float, cy: float, r: float, value: float = 255.0) -> np.ndarray:
    """Return a copy of img with a 1-px circle drawn at the given value."""
    out = np.asarray(img, dtype=np.float64).copy()
    h, w = out.shape
    n = max(16, int(math.ceil(2.0 * math.pi * r * 2)))
    th = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    xs = np.rint(cx + r * np.cos(th)).astype(int)
    ys = np.rint(cy + r * np.sin(th)).astype(int)
    ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    out[ys[ok], xs[ok]] = value
    return out
