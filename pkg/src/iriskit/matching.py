"""Template distances and the nearest-neighbour identification decision.

The working distance is a shift-minimized mean absolute difference
("semi-correlation"): the probe code is compared against every circular
shift of the gallery code within a small window, and the best shift wins.
Head rotation moves the iris texture along the angular axis, and the
periodic wavelet extension makes that an exact circular shift of the code,
so a +-4 window absorbs realistic rotation at a fraction of the cost of a
full correlation.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ConfigError, EmptyGalleryError, LengthMismatchError
from .features import IrisTemplate

__all__ = [
    "MatchScore",
    "MatchConfig",
    "abs_distance",
    "semi_correlation",
    "cross_correlation",
    "aknn_decide",
    "identify",
    "verify",
]


@dataclass(frozen=True)
class MatchScore:
    """Best distance over the shift window, the shift that achieved it, and
    which gallery entry was compared."""

    d_min: float
    best_shift: int
    gallery_ref: str | None = None


@dataclass
class MatchConfig:
    """Matching tunables: shift window, AKNN neighbourhood, verify threshold."""

    max_shift: int = 4
    k: int = 5
    a: int = 3
    tau: float = 0.55

    def validate(self) -> "MatchConfig":
        if self.max_shift < 0:
            raise ConfigError("max_shift must be >= 0")
        if not (1 <= self.a <= self.k):
            raise ConfigError("need 1 <= a <= k")
        if self.tau < 0:
            raise ConfigError("tau must be >= 0")
        return self


def _levels_and_segments(t) -> tuple[np.ndarray, tuple[int, ...]]:
    if isinstance(t, IrisTemplate):
        return t.levels.astype(np.int16), t.segments
    arr = np.asarray(t)
    if arr.ndim != 1:
        raise LengthMismatchError("feature sequence must be 1-D")
    return arr.astype(np.int16), (arr.size,)


def abs_distance(a, b) -> float:
    """Unnormalized sum of absolute feature differences."""
    av, _ = _levels_and_segments(a)
    bv, _ = _levels_and_segments(b)
    if av.size != bv.size:
        raise LengthMismatchError(f"length {av.size} vs {bv.size}")
    return float(np.abs(av - bv).sum())


def _roll_segments(v: np.ndarray, segments: tuple[int, ...], s: int) -> np.ndarray:
    """Circularly shift each segment by the same s (segments share one
    angular axis, so they rotate together)."""
    if s == 0:
        return v
    parts = []
    start = 0
    for seg in segments:
        parts.append(np.roll(v[start : start + seg], s))
        start += seg
    return np.concatenate(parts)


def semi_correlation(a, b, max_shift: int = 4, gallery_ref: str | None = None) -> MatchScore:
    """Shift-minimized mean absolute difference between two codes.

    d(s) = mean |a - roll_s(b)| where roll_s circularly shifts every
    segment of b by s columns; the result is min over s in
    [-max_shift, +max_shift]. Ties keep the most negative shift (scan
    order). If b equals a shifted by +s, the minimum sits at best_shift=-s.
    """
    av, seg_a = _levels_and_segments(a)
    bv, seg_b = _levels_and_segments(b)
    if av.size != bv.size:
        raise LengthMismatchError(f"length {av.size} vs {bv.size}")
    if seg_a != seg_b:
        raise LengthMismatchError(f"segments {seg_a} vs {seg_b}")
    n = av.size
    best_d = None
    best_s = 0
    for s in range(-max_shift, max_shift + 1):
        d = float(np.abs(av - _roll_segments(bv, seg_b, s)).sum()) / n
        if best_d is None or d < best_d:
            best_d = d
            best_s = s
    return MatchScore(best_d, best_s, gallery_ref)


def cross_correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full 2-D cross-correlation (the expensive high-accuracy alternative;
    the default pipeline never calls it).

    out[i, j] = sum_{m,n} a[m, n] * b[m + i - (Ma-1), n + j - (Na-1)] with b
    taken as zero outside its bounds; output shape (Ma+Mb-1, Na+Nb-1). A
    unit-impulse a embeds b at the impulse offset.
    """
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    if av.ndim != 2 or bv.ndim != 2 or av.size == 0 or bv.size == 0:
        raise LengthMismatchError("cross_correlation expects nonempty 2-D matrices")
    return signal.correlate2d(bv, av, mode="full")


def aknn_decide(scores, k: int = 5, a: int = 3):
    """AKNN decision: among the k nearest scores, any label reaching a votes
    wins (most frequent; frequency ties go to the label holding the
    smallest distance). With no label reaching a, the single nearest
    neighbour decides. Distance ties keep gallery enumeration order.
    """
    items = list(scores)
    if not items:
        raise EmptyGalleryError("no scores to decide on")
    order = sorted(range(len(items)), key=lambda i: items[i][1])
    top = [items[i] for i in order[:k]]
    counts = Counter(label for label, _ in top)
    best_count = max(counts.values())
    if best_count >= a:
        tied = [label for label, c in counts.items() if c == best_count]
        if len(tied) == 1:
            return tied[0]
        best = {label: min(d for lab, d in top if lab == label) for label in tied}
        return min(tied, key=lambda label: best[label])
    return top[0][0]


def identify(probe, gallery, cfg: MatchConfig | None = None):
    """1:N identification: semi-correlation against every gallery template,
    AKNN on the scores. Returns (subject label, winning MatchScore); the
    winning score is the decided label's best-distance entry.
    """
    cfg = (cfg or MatchConfig()).validate()
    gallery = list(gallery)
    if not gallery:
        raise EmptyGalleryError("gallery is empty")
    scores = []
    for i, g in enumerate(gallery):
        if isinstance(g, IrisTemplate) and g.subject_id is not None:
            label = g.subject_id
            ref = f"{g.subject_id}:{g.eye}:{g.sample}"
        else:
            label = ref = f"#{i}"
        scores.append((label, semi_correlation(probe, g, cfg.max_shift, gallery_ref=ref)))
    label = aknn_decide([(lab, sc.d_min) for lab, sc in scores], cfg.k, cfg.a)
    winner = min(
        (sc for lab, sc in scores if lab == label),
        key=lambda sc: sc.d_min,
    )
    return label, winner


def verify(probe, claimed, tau: float, max_shift: int = 4) -> tuple[bool, float]:
    """1:1 verification: accept when the best semi-correlation distance over
    the claimed subject's templates is <= tau. Returns (accepted, d_min)."""
    claimed = list(claimed)
    if not claimed:
        raise EmptyGalleryError("no enrolled templates for the claimed subject")
    best = min(semi_correlation(probe, t, max_shift).d_min for t in claimed)
    return best <= tau, best
