"""Pupil and limbic localization.

The pupil is found on a weighted-mask image in which everything except the
dark pupil saturates at a threshold, leaving a single ring for the edge
detector. A chord construction estimates the circle from five boundary
points, a directional pass nudges it onto the boundary, and the pupil
interior is flattened to kill specular highlights. The limbic radius is
then read off an edge map by scanning outward along the lower half, with
an intensity-ladder keep-out zone and ratio clamps for implausible values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import ndimage

from .errors import (
    ConfigError,
    DegenerateChordsError,
    DimensionMismatchError,
    NoLimbicPointsError,
    ParallelChordsError,
    StageError,
    TooFewEdgePointsError,
)
from .image import bilinear, canny, draw_circle

__all__ = [
    "PupilCircle",
    "IrisGeometry",
    "SegmentationConfig",
    "weighted_mask",
    "highlight_pupil",
    "chord_center",
    "estimate_pupil",
    "refine_pupil",
    "fill_pupil",
    "clean_radius",
    "clamp_limbic",
    "limbic_radius",
    "segment",
    "geometry_overlay",
]


@dataclass(frozen=True)
class PupilCircle:
    """Pupil circle in image coordinates (x right, y down), radius in pixels."""

    cx: float
    cy: float
    r: float

    def inside(self, shape) -> bool:
        h, w = shape
        return (
            self.r > 0
            and self.cx - self.r >= 0
            and self.cy - self.r >= 0
            and self.cx + self.r <= w - 1
            and self.cy + self.r <= h - 1
        )


@dataclass(frozen=True)
class IrisGeometry:
    """Pupil circle plus the concentric limbic radius."""

    pupil: PupilCircle
    limbic_r: float
    flags: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "cx": self.pupil.cx,
            "cy": self.pupil.cy,
            "r_pupil": self.pupil.r,
            "r_limbic": self.limbic_r,
            "flags": list(self.flags),
        }


@dataclass
class SegmentationConfig:
    """Tunables for the localization stage.

    a_fraction scales the weighted mask (fraction of the global mean),
    threshold_t is the saturation level, and the canny_* values drive both
    edge-detection passes. refine_radius gates the +-1 radius updates of
    the boundary refinement.
    """

    a_fraction: float = 0.02
    threshold_t: float = 256.0
    fill_enabled: bool = True
    canny_sigma: float = 1.0
    canny_low: float = 0.1
    canny_high: float = 0.2
    max_refine_iters: int = 10
    refine_radius: bool = True
    fill_mult: float = 1.0
    scan_band: float = 0.9
    scan_offset: float = 2.0

    def validate(self) -> "SegmentationConfig":
        if not (0.0 < self.a_fraction < 1.0):
            raise ConfigError(f"a_fraction must be in (0,1), got {self.a_fraction}")
        if not (200.0 < self.threshold_t <= 256.0):
            raise ConfigError(f"threshold_t must be in (200,256], got {self.threshold_t}")
        if self.canny_sigma <= 0:
            raise ConfigError("canny_sigma must be > 0")
        if not (0.0 < self.canny_low < self.canny_high <= 1.0):
            raise ConfigError("need 0 < canny_low < canny_high <= 1")
        if self.max_refine_iters < 0:
            raise ConfigError("max_refine_iters must be >= 0")
        if self.fill_mult <= 0:
            raise ConfigError("fill_mult must be > 0")
        return self


def weighted_mask(img: np.ndarray, a_fraction: float = 0.02) -> np.ndarray:
    """Row/column-mean mask: out(i,j) = (a/2) * (rowmean(i) + colmean(j)),
    with a = a_fraction * mean(img).

    Rows and columns through the dark pupil get a smaller boost than the
    rest of the image, which is what lets the later threshold isolate it.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionMismatchError("weighted_mask expects a nonempty 2-D array")
    a = a_fraction * arr.mean()
    s_r = arr.mean(axis=1)
    s_c = arr.mean(axis=0)
    return (a / 2.0) * (s_r[:, None] + s_c[None, :])


def highlight_pupil(img: np.ndarray, mask: np.ndarray, t: float = 256.0) -> np.ndarray:
    """Add the mask and saturate at t: bright regions flatten out, the dark
    pupil stays below the ceiling and keeps its boundary."""
    a = np.asarray(img, dtype=np.float64)
    b = np.asarray(mask, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image {a.shape} vs mask {b.shape}")
    return np.minimum(a + b, float(t))


def chord_center(p1, p2, p3, p4):
    """Intersection of the perpendicular bisectors of segments p1p2 and p3p4.

    Points are (x, y) pairs. Solved as a 2x2 linear system on the chord
    direction vectors, so vertical chords need no special casing. Raises
    ParallelChordsError when the normalized directions are parallel within
    1e-9 (no unique intersection).
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    p3 = np.asarray(p3, dtype=np.float64)
    p4 = np.asarray(p4, dtype=np.float64)
    d1 = p2 - p1
    d2 = p4 - p3
    n1 = np.hypot(*d1)
    n2 = np.hypot(*d2)
    if n1 == 0.0 or n2 == 0.0:
        raise ParallelChordsError("chord endpoints coincide")
    u1 = d1 / n1
    u2 = d2 / n2
    cross = u1[0] * u2[1] - u1[1] * u2[0]
    if abs(cross) < 1e-9:
        raise ParallelChordsError("perpendicular bisectors are parallel")
    m1 = 0.5 * (p1 + p2)
    m2 = 0.5 * (p3 + p4)
    # bisector of p1p2: points x with u1 . (x - m1) = 0; same for the other
    a = np.array([u1, u2])
    b = np.array([u1 @ m1, u2 @ m2])
    x = np.linalg.solve(a, b)
    return float(x[0]), float(x[1])


def estimate_pupil(edges: np.ndarray) -> PupilCircle:
    """Circle estimate from five points of the largest connected edge component.

    The five points are the left/right/top/bottom extremes plus the pixel
    whose direction from the component centroid is nearest 45 degrees.
    Every pair of chords among those points contributes a bisector
    intersection; failures are discarded and the survivors averaged. The
    radius is the mean distance from that center to the points.
    """
    e = np.asarray(edges, dtype=bool)
    labels, n = ndimage.label(e, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        raise TooFewEdgePointsError("edge map is empty")
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    biggest = int(counts.argmax())
    ys, xs = np.nonzero(labels == biggest)
    if xs.size < 5:
        raise TooFewEdgePointsError(
            f"largest edge component has {xs.size} pixels, need >= 5"
        )

    def extreme(vals, other, want_max):
        # the extreme is a run of tied pixels along the ring; take its middle
        # so the pick is not biased toward the scan order
        target = vals.max() if want_max else vals.min()
        ties = other[vals == target]
        return float(target), float(np.median(ties))

    lx, lyy = extreme(xs, ys, False)
    rx, ryy = extreme(xs, ys, True)
    ty, txx = extreme(ys, xs, False)
    by, bxx = extreme(ys, xs, True)
    pts = [(lx, lyy), (rx, ryy), (txx, ty), (bxx, by)]
    cx, cy = xs.mean(), ys.mean()
    ang = np.degrees(np.arctan2(ys - cy, xs - cx)) % 360.0
    diff = np.abs((ang - 45.0 + 180.0) % 360.0 - 180.0)
    k = int(diff.argmin())
    pts.append((float(xs[k]), float(ys[k])))

    uniq = sorted(set(pts))
    chords = list(combinations(uniq, 2))
    centers = []
    for (a, b), (c, d) in combinations(chords, 2):
        # near-parallel chords put the bisector intersection arbitrarily far
        # away; treat them as failed constructions, not just exact parallels
        u = np.subtract(b, a)
        v = np.subtract(d, c)
        nu = np.hypot(*u)
        nv = np.hypot(*v)
        if nu == 0.0 or nv == 0.0:
            continue
        if abs(u[0] * v[1] - u[1] * v[0]) / (nu * nv) < 0.2:
            continue
        try:
            centers.append(chord_center(a, b, c, d))
        except ParallelChordsError:
            continue
    if not centers:
        raise DegenerateChordsError("all chord pairs were degenerate")
    centers = np.asarray(centers)
    ocx, ocy = centers.mean(axis=0)
    pts_arr = np.asarray(uniq)
    r = float(np.hypot(pts_arr[:, 0] - ocx, pts_arr[:, 1] - ocy).mean())
    return PupilCircle(float(ocx), float(ocy), r)


# small arc around each compass direction; averaging along the arc keeps a
# single radius while damping sensor noise
_ARC = np.array([-0.15, -0.075, 0.0, 0.075, 0.15])
_DIRS = {"up": -np.pi / 2, "down": np.pi / 2, "left": np.pi, "right": 0.0}


def _arc_mean(img, cx, cy, rad, base_angle):
    th = base_angle + _ARC
    return float(np.mean(bilinear(img, cx + rad * np.cos(th), cy + rad * np.sin(th))))


def refine_pupil(
    img: np.ndarray,
    circle: PupilCircle,
    pupil_mean: float,
    max_iters: int = 10,
    adjust_radius: bool = True,
) -> tuple[PupilCircle, bool]:
    """Nudge the circle onto the pupil boundary in 1-px steps.

    For each opposite direction pair: when the rim just inside the circle
    on one side is brighter than the pupil while the rim just outside the
    opposite side is darker, the circle moves toward the violated side.
    Once translation settles, the radius shrinks by 1 when both opposite
    inner rims are bright and grows by 1 when both outer rims are dark
    (adjust_radius gates this). Stops at a fixed point or after max_iters;
    returns (circle, converged). The result never leaves the image.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    cx, cy, r = circle.cx, circle.cy, circle.r
    # "brighter than the pupil" needs daylight over the pupil mean, or sensor
    # noise at the boundary turns the fixed point into a random walk
    thresh = 1.15 * pupil_mean + 1.0
    converged = False
    for _ in range(max_iters):
        inner = {k: _arc_mean(arr, cx, cy, r - 2.5, a) for k, a in _DIRS.items()}
        outer = {k: _arc_mean(arr, cx, cy, r + 2.5, a) for k, a in _DIRS.items()}
        dx = dy = dr = 0
        if inner["up"] > thresh and outer["down"] < thresh:
            dy += 1
        if inner["down"] > thresh and outer["up"] < thresh:
            dy -= 1
        if inner["left"] > thresh and outer["right"] < thresh:
            dx += 1
        if inner["right"] > thresh and outer["left"] < thresh:
            dx -= 1
        if adjust_radius and dx == 0 and dy == 0:
            rim_in = {k: _arc_mean(arr, cx, cy, r - 1.5, a) for k, a in _DIRS.items()}
            rim_out = {k: _arc_mean(arr, cx, cy, r + 1.5, a) for k, a in _DIRS.items()}
            if (rim_in["up"] > thresh and rim_in["down"] > thresh) or (
                rim_in["left"] > thresh and rim_in["right"] > thresh
            ):
                dr -= 1
            elif (rim_out["up"] < thresh and rim_out["down"] < thresh) or (
                rim_out["left"] < thresh and rim_out["right"] < thresh
            ):
                dr += 1
        if dx == 0 and dy == 0 and dr == 0:
            converged = True
            break
        cx += dx
        cy += dy
        r = max(2.0, r + dr)
        cx = min(max(cx, r), w - 1 - r)
        cy = min(max(cy, r), h - 1 - r)
    return PupilCircle(cx, cy, r), converged


def inscribed_square_mean(img: np.ndarray, circle: PupilCircle) -> float:
    """Mean intensity over the axis-aligned square inscribed in the circle."""
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    half = circle.r / math.sqrt(2.0)
    x0 = max(0, int(math.ceil(circle.cx - half)))
    x1 = min(w - 1, int(math.floor(circle.cx + half)))
    y0 = max(0, int(math.ceil(circle.cy - half)))
    y1 = min(h - 1, int(math.floor(circle.cy + half)))
    if x1 < x0 or y1 < y0:
        yc = min(max(int(round(circle.cy)), 0), h - 1)
        xc = min(max(int(round(circle.cx)), 0), w - 1)
        return float(arr[yc, xc])
    return float(arr[y0 : y1 + 1, x0 : x1 + 1].mean())


def fill_pupil(img: np.ndarray, circle: PupilCircle, mult: float = 1.0) -> np.ndarray:
    """Replace every pixel strictly inside the circle with the mean of the
    inscribed square (times mult), wiping specular highlights. Pixels at
    distance >= r, including exactly r, are untouched.
    """
    arr = np.asarray(img, dtype=np.float64).copy()
    value = mult * inscribed_square_mean(arr, circle)
    h, w = arr.shape
    yy, xx = np.ogrid[:h, :w]
    inside = (xx - circle.cx) ** 2 + (yy - circle.cy) ** 2 < circle.r**2
    arr[inside] = value
    return arr


# (threshold, factor) ladder for the edge keep-out radius around the pupil;
# rows are checked strictly in order, first match wins
_CLEAN_LADDER = (
    (lambda r: r < 33, 2.85),
    (lambda r: r <= 35, 2.65),
    (lambda r: r <= 36, 2.69),
    (lambda r: r < 41, 2.38),
    (lambda r: r < 47, 2.15),
    (lambda r: r < 51, 1.92),
    (lambda r: r < 55, 1.70),
)


def clean_radius(r_p: float) -> float:
    """Keep-out radius: edges closer than this to the pupil center are
    collarette/spot clutter, not the limbic boundary."""
    if r_p <= 0:
        raise ValueError("pupil radius must be > 0")
    for cond, k in _CLEAN_LADDER:
        if cond(r_p):
            return float(math.ceil(k * r_p))
    return float(math.ceil(1.5 * r_p))


# (r_p low, r_p high, ratio threshold, clamp factor); first match wins
_CLAMP_RULES = (
    (47.0, 52.0, 2.6, 2.0),
    (44.0, 47.0, 2.7, 2.1),
    (41.0, 44.0, 2.8, 2.3),
    (35.0, 41.0, 3.0, 3.0),
    (35.0, 41.0, 3.3, 2.6),
    (31.0, 35.0, 3.4, 3.4),
    (23.0, 31.0, 3.5, 3.6),
)


def clamp_limbic(r_p: float, r_l: float) -> float:
    """Cap implausibly large limbic radii relative to the pupil radius."""
    for lo, hi, ratio, factor in _CLAMP_RULES:
        if lo < r_p < hi and r_l > ratio * r_p:
            r_l = factor * r_p
            break
    return min(r_l, 3.6 * r_p)


def limbic_radius(
    img: np.ndarray, pupil: PupilCircle, cfg: SegmentationConfig | None = None
) -> float:
    """Limbic radius from an outward edge scan over the lower half-iris.

    Edge pixels inside clean_radius(r_p) of the pupil center are erased,
    then each row in [cy, cy + 0.9*r_p] is scanned left and right from
    just outside the pupil to the first surviving edge pixel. Distances
    beyond 1.5*IQR of their median are dropped; the mean of the rest,
    passed through the ratio clamps, is the limbic radius. Raises
    NoLimbicPointsError when fewer than 3 scan hits survive.
    """
    cfg = (cfg or SegmentationConfig()).validate()
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    edges = canny(arr, cfg.canny_sigma, cfg.canny_low, cfg.canny_high)
    yy, xx = np.ogrid[:h, :w]
    dist = np.hypot(xx - pupil.cx, yy - pupil.cy)
    edges = edges & (dist >= clean_radius(pupil.r))

    y0 = max(0, int(math.ceil(pupil.cy)))
    y1 = min(h - 1, int(math.floor(pupil.cy + cfg.scan_band * pupil.r)))
    x_right = int(math.ceil(pupil.cx + pupil.r + cfg.scan_offset))
    x_left = int(math.floor(pupil.cx - pupil.r - cfg.scan_offset))
    hits = []
    for y in range(y0, y1 + 1):
        row = edges[y]
        if x_right < w:
            idx = np.flatnonzero(row[x_right:])
            if idx.size:
                x = x_right + idx[0]
                hits.append(math.hypot(x - pupil.cx, y - pupil.cy))
        if x_left >= 0:
            idx = np.flatnonzero(row[: x_left + 1])
            if idx.size:
                x = idx[-1]
                hits.append(math.hypot(x - pupil.cx, y - pupil.cy))
    if len(hits) < 3:
        raise NoLimbicPointsError(f"only {len(hits)} limbic scan hits")
    d = np.asarray(hits)
    med = np.median(d)
    q1, q3 = np.percentile(d, [25.0, 75.0])
    keep = np.abs(d - med) <= 1.5 * (q3 - q1)
    r_l = float(d[keep].mean())
    return clamp_limbic(pupil.r, r_l)


def segment(img: np.ndarray, cfg: SegmentationConfig | None = None) -> IrisGeometry:
    """Full localization: mask, threshold, edge detection, five-point circle
    estimate, directional refinement, pupil fill, limbic scan.

    Stage failures propagate as StageError carrying the stage name. A
    failed limbic scan falls back to 3*r_p and flags the result.
    """
    cfg = (cfg or SegmentationConfig()).validate()
    arr = np.asarray(img, dtype=np.float64)
    flags: list[str] = []

    def run(stage, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except Exception as exc:
            raise StageError(stage, exc) from exc

    mask = run("weighted_mask", weighted_mask, arr, cfg.a_fraction)
    lit = run("highlight_pupil", highlight_pupil, arr, mask, cfg.threshold_t)
    edges = run("canny", canny, lit, cfg.canny_sigma, cfg.canny_low, cfg.canny_high)
    est = run("estimate_pupil", estimate_pupil, edges)
    pupil_mu = inscribed_square_mean(arr, est)
    pupil, converged = run(
        "refine_pupil",
        refine_pupil,
        arr,
        est,
        pupil_mu,
        cfg.max_refine_iters,
        cfg.refine_radius,
    )
    if not converged:
        flags.append("refine-nonconverged")
    work = arr
    if cfg.fill_enabled:
        work = run("fill_pupil", fill_pupil, arr, pupil, cfg.fill_mult)
    try:
        r_l = limbic_radius(work, pupil, cfg)
    except NoLimbicPointsError:
        r_l = 3.0 * pupil.r
        flags.append("limbic-fallback")
    except Exception as exc:
        raise StageError("limbic_radius", exc) from exc
    return IrisGeometry(pupil, r_l, tuple(flags))


def geometry_overlay(img: np.ndarray, geom: IrisGeometry) -> np.ndarray:
    """Copy of img with both circles drawn at maximum intensity."""
    out = draw_circle(img, geom.pupil.cx, geom.pupil.cy, geom.pupil.r, 255.0)
    return draw_circle(out, geom.pupil.cx, geom.pupil.cy, geom.limbic_r, 255.0)
