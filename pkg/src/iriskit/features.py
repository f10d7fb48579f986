"""Stationary wavelet features and 2-bit template codes.

A two-level undecimated 2-D wavelet decomposition (a trous: filters dilated
by 2^(level-1), no downsampling) turns the 16x160 compressed ROI into
same-sized coefficient planes. The first row of the level-2 approximation
and vertical planes gives 320 features; each is quantized to 2 bits (sign,
magnitude vs the per-half median), packing to an 80-byte code.

Angular columns use periodic extension because the strip closes on itself;
that makes every coefficient plane exactly covariant with circular column
shifts, which is what lets the matcher absorb head rotation by shifting.
Radial rows use half-sample symmetric extension.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    LevelUnavailableError,
    MatrixTooSmallError,
    UnknownFamilyError,
    UnknownSelectionError,
)

__all__ = [
    "FilterPair",
    "make_filters",
    "FAMILY_NAMES",
    "SwtLevel",
    "swt2",
    "select_features",
    "first_row_reduce",
    "quantize_2bit",
    "IrisTemplate",
    "pack_levels",
    "unpack_levels",
    "extract_template",
]

_RT2 = math.sqrt(2.0)
_S3 = math.sqrt(3.0)
_S7 = math.sqrt(7.0)


def _qmf(lo):
    """Analysis high-pass from the low-pass: g[k] = (-1)^k * lo[L-1-k]."""
    lo = np.asarray(lo, dtype=np.float64)
    sign = np.where(np.arange(lo.size) % 2 == 0, 1.0, -1.0)
    return sign * lo[::-1]


# Analysis taps from the standard constructions. db2 and coif1 are exact
# closed forms; sym4 is the published least-asymmetric table; bior5.5 is the
# 9/11 near-orthogonal pair; rbio2.2 is the reversed 5/3 spline pair (exact
# dyadic rationals). All are checked against sum/orthogonality/perfect-
# reconstruction identities in the test suite.
_DB2_LO = np.array([1 + _S3, 3 + _S3, 3 - _S3, 1 - _S3]) / (4.0 * _RT2)

_SYM4_LO = np.array([
    -0.07576571478927333, -0.02963552764599851, 0.49761866763201545,
    0.8037387518059161, 0.29785779560527736, -0.09921954357684722,
    -0.012603967262037833, 0.0322231006040427,
])

_COIF1_LO = (_RT2 / 32.0) * np.array(
    [_S7 - 3.0, 1.0 - _S7, 14.0 - 2.0 * _S7, 14.0 + 2.0 * _S7, 5.0 + _S7, 1.0 - _S7]
)

_BIOR55_LO = np.array([
    0.03968708834740544, 0.007948108637240322, -0.05446378846823691,
    0.34560528195603346, 0.7366601814282105, 0.34560528195603346,
    -0.05446378846823691, 0.007948108637240322, 0.03968708834740544,
])
_BIOR55_HI = np.array([
    -0.013456709459118716, -0.002694966880111507, 0.13670658466432914,
    -0.09350469740093886, -0.47680326579848425, 0.8995061097486484,
    -0.47680326579848425, -0.09350469740093886, 0.13670658466432914,
    -0.002694966880111507, -0.013456709459118716,
])

_RBIO22_LO = _RT2 * np.array([0.25, 0.5, 0.25])
_RBIO22_HI = _RT2 * np.array([-0.125, -0.25, 0.75, -0.25, -0.125])


@dataclass(frozen=True)
class FilterPair:
    """Analysis low/high-pass taps of one wavelet family."""

    name: str
    lo: np.ndarray
    hi: np.ndarray
    orthogonal: bool


_FAMILIES = {
    "symlet4": (_SYM4_LO, None, True),
    "daubechies2": (_DB2_LO, None, True),
    "coiflet1": (_COIF1_LO, None, True),
    "biorthogonal5.5": (_BIOR55_LO, _BIOR55_HI, False),
    "reverse-biorthogonal2.2": (_RBIO22_LO, _RBIO22_HI, False),
}

_ALIASES = {
    "sym4": "symlet4",
    "db2": "daubechies2",
    "coif1": "coiflet1",
    "bior5.5": "biorthogonal5.5",
    "rbio2.2": "reverse-biorthogonal2.2",
}

FAMILY_NAMES = tuple(_FAMILIES)


def make_filters(family: str) -> FilterPair:
    """Analysis filter pair for one of the five supported families.

    Orthogonal families derive the high-pass from the low-pass by the
    quadrature relation; biorthogonal families carry explicit analysis
    high-pass taps.
    """
    key = _ALIASES.get(family.lower(), family.lower())
    if key not in _FAMILIES:
        raise UnknownFamilyError(
            f"unknown wavelet family {family!r}; supported: {', '.join(FAMILY_NAMES)}"
        )
    lo, hi, orth = _FAMILIES[key]
    lo = np.asarray(lo, dtype=np.float64)
    hi = _qmf(lo) if hi is None else np.asarray(hi, dtype=np.float64)
    return FilterPair(key, lo, hi, orth)


@dataclass(frozen=True)
class SwtLevel:
    """One undecimated level: approximation plus horizontal/vertical/diagonal
    detail, all the size of the transform input."""

    ca: np.ndarray
    ch: np.ndarray
    cv: np.ndarray
    cd: np.ndarray

    def band(self, name: str) -> np.ndarray:
        return getattr(self, name)


def _filter_axis(m: np.ndarray, taps: np.ndarray, dilation: int, axis: int, periodic: bool) -> np.ndarray:
    """Correlate one axis with a dilated filter.

    Output(n) = sum_k taps[k] * x(n + dilation*(k - L//2)); the anchor L//2
    keeps a centred impulse response. Periodic axes wrap; others use
    half-sample symmetric extension.
    """
    L = taps.size
    anchor = L // 2
    out = np.zeros_like(m)
    if periodic:
        for k in range(L):
            out += taps[k] * np.roll(m, -dilation * (k - anchor), axis=axis)
        return out
    margin = dilation * (L - 1)
    pad = [(0, 0), (0, 0)]
    pad[axis] = (margin, margin)
    ext = np.pad(m, pad, mode="symmetric")
    n = m.shape[axis]
    for k in range(L):
        start = margin + dilation * (k - anchor)
        sl = [slice(None), slice(None)]
        sl[axis] = slice(start, start + n)
        out += taps[k] * ext[tuple(sl)]
    return out


def swt2(m: np.ndarray, filt: FilterPair, levels: int = 2) -> list[SwtLevel]:
    """Undecimated 2-D wavelet decomposition.

    Per level j (1-based) the filters are dilated by 2^(j-1); rows (axis 0,
    radial) are filtered with symmetric extension, columns (axis 1,
    angular) with periodic extension, in the four lo/hi combinations:
    ca = lo/lo, ch = hi rows, cv = hi columns, cd = hi/hi. The level's ca
    feeds the next level. All outputs keep the input shape.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise MatrixTooSmallError("swt2 expects a nonempty 2-D matrix")
    out = []
    approx = arr
    for j in range(levels):
        d = 2**j
        lo_rows = _filter_axis(approx, filt.lo, d, 0, False)
        hi_rows = _filter_axis(approx, filt.hi, d, 0, False)
        level = SwtLevel(
            ca=_filter_axis(lo_rows, filt.lo, d, 1, True),
            cv=_filter_axis(lo_rows, filt.hi, d, 1, True),
            ch=_filter_axis(hi_rows, filt.lo, d, 1, True),
            cd=_filter_axis(hi_rows, filt.hi, d, 1, True),
        )
        out.append(level)
        approx = level.ca
    return out


_SELECTION_TOKEN = re.compile(r"(ca|ch|cv|cd)(\d+)")


def select_features(decomposition: list[SwtLevel], selection: str = "ca2cv2") -> list[np.ndarray]:
    """Pick named coefficient planes, e.g. "ca2cv2" -> [level-2 ca, level-2 cv].

    Any concatenation of ca/ch/cv/cd tokens with level suffixes parses, so
    every combination the ablation harness needs is a valid name.
    """
    name = selection.strip().lower()
    pos = 0
    picks = []
    for match in _SELECTION_TOKEN.finditer(name):
        if match.start() != pos:
            raise UnknownSelectionError(f"cannot parse selection {selection!r}")
        picks.append((match.group(1), int(match.group(2))))
        pos = match.end()
    if pos != len(name) or not picks:
        raise UnknownSelectionError(f"cannot parse selection {selection!r}")
    mats = []
    for band, level in picks:
        if not (1 <= level <= len(decomposition)):
            raise LevelUnavailableError(
                f"selection {selection!r} wants level {level}, decomposition has {len(decomposition)}"
            )
        mats.append(decomposition[level - 1].band(band))
    return mats


def first_row_reduce(mats: list[np.ndarray]) -> np.ndarray:
    """Concatenate row 0 of each matrix; 320 features for ca2+cv2 of a 16x160
    input. The rows of each plane repeat the same angular structure, so one
    row carries the information of the whole plane."""
    rows = []
    for m in mats:
        a = np.asarray(m, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1:
            raise MatrixTooSmallError("first_row_reduce needs 2-D matrices")
        rows.append(a[0])
    return np.concatenate(rows)


def quantize_2bit(v: np.ndarray, segments: tuple[int, ...] | None = None) -> np.ndarray:
    """Quantize features to levels {0,1,2,3}: level = 2*[x >= 0] + [|x| >= m]
    with m the median magnitude of the feature's segment.

    Segments default to two equal halves (the ca half and the cv half),
    each quantized independently so neither plane's scale dominates. The
    median threshold makes the code invariant to positive rescaling.
    """
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("quantize_2bit expects a nonempty 1-D vector")
    if segments is None:
        if x.size % 2 != 0:
            raise ValueError("default segmentation needs an even-length vector")
        segments = (x.size // 2, x.size // 2)
    if sum(segments) != x.size:
        raise ValueError(f"segments {segments} do not sum to {x.size}")
    out = np.empty(x.size, dtype=np.uint8)
    start = 0
    for seg in segments:
        part = x[start : start + seg]
        m = np.median(np.abs(part))
        levels = 2 * (part >= 0.0).astype(np.uint8) + (np.abs(part) >= m).astype(np.uint8)
        out[start : start + seg] = levels
        start += seg
    return out


@dataclass(frozen=True)
class IrisTemplate:
    """Quantized iris code: per-feature levels in {0,1,2,3} plus identity
    metadata. The canonical pipeline yields 320 levels in two 160-wide
    angular segments (640 bits, 80 bytes packed)."""

    levels: np.ndarray
    subject_id: str | None = None
    eye: str = "left"
    sample: int = 0
    segments: tuple[int, ...] = (160, 160)

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.levels, dtype=np.uint8))
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("template levels must be a nonempty 1-D array")
        if arr.max(initial=0) > 3:
            raise ValueError("template levels must be in {0,1,2,3}")
        if sum(self.segments) != arr.size:
            raise ValueError("segments must sum to the level count")
        object.__setattr__(self, "levels", arr)
        arr.setflags(write=False)

    @property
    def n_bits(self) -> int:
        return 2 * self.levels.size

    def packed(self) -> bytes:
        return pack_levels(self.levels)


def pack_levels(levels: np.ndarray) -> bytes:
    """Bit-pack 2-bit levels little-endian: feature k sits at stream bits
    [2k, 2k+1], bit j of the stream is bit j%8 of byte j//8."""
    arr = np.asarray(levels, dtype=np.uint8)
    pad = (-arr.size) % 4
    if pad:
        arr = np.concatenate([arr, np.zeros(pad, dtype=np.uint8)])
    quads = arr.reshape(-1, 4)
    shifts = np.array([0, 2, 4, 6], dtype=np.uint8)
    return (quads << shifts).astype(np.uint8).sum(axis=1, dtype=np.uint8).tobytes()


def unpack_levels(data: bytes, count: int) -> np.ndarray:
    """Inverse of pack_levels for the first count features."""
    raw = np.frombuffer(data, dtype=np.uint8)
    if raw.size * 4 < count:
        raise ValueError(f"{raw.size} bytes cannot hold {count} 2-bit levels")
    shifts = np.array([0, 2, 4, 6], dtype=np.uint8)
    quads = (raw[:, None] >> shifts) & 0x3
    return quads.reshape(-1)[:count].copy()


def extract_template(img: np.ndarray, cfg=None, subject_id: str | None = None,
                     eye: str = "left", sample: int = 0) -> IrisTemplate:
    """Full image-to-template pipeline: segment, unwrap, ROI, enhance,
    compress, 2-level decomposition, first-row reduction, 2-bit quantization.

    cfg is an AppConfig (defaults apply when omitted); the ablation toggles
    it carries (histogram equalization, full-strip ROI, enhancement window,
    compression) all act here.
    """
    from .config import AppConfig
    from .normalization import compress_roi, enhance_roi, extract_roi, hist_equalize, unwrap
    from .segmentation import segment

    cfg = cfg or AppConfig()
    cfg.validate()
    geom = segment(img, cfg.segmentation)
    strip = unwrap(img, geom)
    n = cfg.normalization
    if n.full_roi:
        roi = strip
    else:
        roi = extract_roi(strip, n.roi_row_start, n.roi_col_start, n.roi_rows, n.roi_cols)
    if n.hist_equalize:
        roi = hist_equalize(roi)
    if n.enhance:
        roi = enhance_roi(roi, n.window_w, n.beta)
    if n.compress:
        roi = compress_roi(roi)
    filt = make_filters(cfg.features.family)
    dec = swt2(roi, filt, cfg.features.levels)
    mats = select_features(dec, cfg.features.selection)
    vec = first_row_reduce(mats)
    segments = tuple(m.shape[1] for m in mats)
    levels = quantize_2bit(vec, segments)
    return IrisTemplate(levels, subject_id=subject_id, eye=eye, sample=sample, segments=segments)
