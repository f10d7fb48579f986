"""Deterministic synthetic eye images with exact ground-truth geometry.

Each identity owns a band-limited angular texture painted on rubber-sheet
coordinates (angle, relative depth into the annulus), so pupil dilation
between captures leaves the normalized strip unchanged — the same property
real irises approximate. Captures of one identity share the texture and
differ by sensor noise, rotation, dilation, occlusion and speculars.

Intensity defaults are tuned so the default localization settings work:
the weighted-mask threshold stage needs the scene mean low enough that
rows and columns through the pupil stay below the saturation ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadSpecError
from .segmentation import IrisGeometry, PupilCircle

__all__ = ["SynthEyeSpec", "synth_eye", "cohort_specs", "write_cohort"]


@dataclass(frozen=True)
class SynthEyeSpec:
    """Recipe for one synthetic capture.

    identity seeds the iris texture (shared by captures of one eye);
    capture seeds the per-shot noise. freq_band bounds the angular
    harmonics of the texture. occlusion is the fraction of the iris disc
    covered by the upper lid; speculars count bright dots inside the pupil.
    upper_half_noise replaces the upper-half texture with per-capture noise
    (for region-information studies).
    """

    identity: int = 0
    capture: int = 0
    eye: str = "left"
    width: int = 320
    height: int = 280
    cx: float = 160.0
    cy: float = 140.0
    pupil_r: float = 40.0
    limbic_r: float = 102.0
    freq_band: tuple[int, int] = (8, 56)
    occlusion: float = 0.0
    speculars: int = 0
    noise: float = 0.0
    rotation_deg: float = 0.0
    upper_half_noise: bool = False
    pupil_level: float = 10.0
    iris_level: float = 100.0
    iris_amplitude: float = 12.0
    sclera_level: float = 148.0
    skin_level: float = 94.0
    lid_level: float = 105.0

    def validate(self) -> "SynthEyeSpec":
        if not (0 < self.pupil_r < self.limbic_r):
            raise BadSpecError("need 0 < pupil_r < limbic_r")
        if not (0.0 <= self.occlusion < 1.0):
            raise BadSpecError("occlusion must be in [0, 1)")
        if self.noise < 0 or self.speculars < 0:
            raise BadSpecError("noise and speculars must be >= 0")
        if self.freq_band[0] < 1 or self.freq_band[1] < self.freq_band[0]:
            raise BadSpecError("freq_band must be an increasing positive pair")
        if (
            self.cx - self.limbic_r < 0
            or self.cy - self.limbic_r < 0
            or self.cx + self.limbic_r > self.width - 1
            or self.cy + self.limbic_r > self.height - 1
        ):
            raise BadSpecError("iris annulus must fit inside the image")
        return self


def _texture_rng(spec: SynthEyeSpec) -> np.random.Generator:
    eye_bit = 0 if spec.eye == "left" else 1
    return np.random.default_rng((0x5EED, spec.identity, eye_bit))


def _capture_rng(spec: SynthEyeSpec) -> np.random.Generator:
    eye_bit = 0 if spec.eye == "left" else 1
    return np.random.default_rng((0xCAFE, spec.identity, eye_bit, spec.capture))


def _angular_profile(rng: np.random.Generator, band: tuple[int, int]):
    ks = np.arange(band[0], band[1] + 1)
    amps = rng.normal(0.0, 1.0, ks.size)
    phases = rng.uniform(0.0, 2.0 * math.pi, ks.size)
    norm = math.sqrt((amps**2).sum() / 2.0) or 1.0
    amps = amps / norm  # unit-variance profile over the circle
    return ks, amps, phases


def synth_eye(spec: SynthEyeSpec) -> tuple[np.ndarray, IrisGeometry]:
    """Render the capture; bit-identical for equal specs.

    Returns (image, exact geometry). Scene: dark pupil disc, textured iris
    annulus, a sclera ring fading into the surrounding skin, optional
    upper-lid band, specular dots inside the pupil, additive sensor noise.
    """
    spec.validate()
    h, w = spec.height, spec.width
    yy, xx = np.indices((h, w), dtype=np.float64)
    dx = xx - spec.cx
    dy = yy - spec.cy
    dist = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)

    img = np.full((h, w), spec.skin_level, dtype=np.float64)

    sclera_outer = 1.35 * spec.limbic_r
    sclera = (dist >= spec.limbic_r) & (dist < sclera_outer)
    img[sclera] = spec.sclera_level
    # soften the sclera/skin transition so it does not dominate edge maps
    fade = (dist >= sclera_outer) & (dist < sclera_outer + 10.0)
    t_fade = (dist[fade] - sclera_outer) / 10.0
    img[fade] = spec.sclera_level + (spec.skin_level - spec.sclera_level) * t_fade

    iris = (dist >= spec.pupil_r) & (dist < spec.limbic_r)
    depth = (dist - spec.pupil_r) / (spec.limbic_r - spec.pupil_r)

    t_rng = _texture_rng(spec)
    ks, amps, phases = _angular_profile(t_rng, spec.freq_band)
    r_ks = np.arange(1, 4)
    r_amps = t_rng.normal(0.0, 1.0, r_ks.size)
    r_amps /= math.sqrt((r_amps**2).sum() / 2.0) or 1.0
    r_phases = t_rng.uniform(0.0, 2.0 * math.pi, r_ks.size)

    th = theta[iris] - math.radians(spec.rotation_deg)
    tex = np.zeros(th.size)
    for k, a, p in zip(ks, amps, phases):
        tex += a * np.cos(k * th + p)
    radial = np.zeros(th.size)
    dd = depth[iris]
    for k, a, p in zip(r_ks, r_amps, r_phases):
        radial += a * np.cos(2.0 * math.pi * k * dd + p)
    tex = 0.85 * tex + 0.35 * radial
    tex = np.clip(tex, -1.8, 1.8) * spec.iris_amplitude
    img[iris] = spec.iris_level + tex

    cap_rng = _capture_rng(spec)
    if spec.upper_half_noise:
        upper = iris & (dy < 0)
        img[upper] = spec.iris_level + np.clip(
            cap_rng.normal(0.0, 1.0, int(upper.sum())), -1.8, 1.8
        ) * spec.iris_amplitude

    # soft pupillary border: a hard cliff would make the innermost strip row
    # hypersensitive to sub-pixel radius error
    pupil = dist < spec.pupil_r - 1.0
    img[pupil] = spec.pupil_level
    border = (dist >= spec.pupil_r - 1.0) & (dist < spec.pupil_r + 1.0)
    t_b = (dist[border] - (spec.pupil_r - 1.0)) / 2.0
    img[border] = spec.pupil_level + (img[border] - spec.pupil_level) * t_b

    if spec.occlusion > 0.0:
        # lid covers the top of the iris disc down to this cut line
        y_cut = spec.cy - spec.limbic_r + 2.0 * spec.limbic_r * spec.occlusion
        img[yy < y_cut] = spec.lid_level

    for _ in range(spec.speculars):
        ang = cap_rng.uniform(0.0, 2.0 * math.pi)
        rad = cap_rng.uniform(0.0, 0.45 * spec.pupil_r)
        sx = spec.cx + rad * math.cos(ang)
        sy = spec.cy + rad * math.sin(ang)
        dot_r = cap_rng.uniform(1.0, 1.6)
        dot = np.hypot(xx - sx, yy - sy) <= dot_r
        img[dot] = 250.0

    if spec.noise > 0.0:
        img = img + cap_rng.normal(0.0, spec.noise, (h, w))

    img = np.clip(img, 0.0, 255.0)
    geom = IrisGeometry(PupilCircle(spec.cx, spec.cy, spec.pupil_r), spec.limbic_r)
    return img, geom


def cohort_specs(
    subjects: int,
    samples: int,
    seed: int = 0,
    eyes: tuple[str, ...] = ("left",),
    noise: float = 3.0,
    rotation_jitter: float = 2.4,
    dilation_jitter: float = 0.05,
    occlusion: float = 0.0,
    speculars: int = 0,
    upper_half_noise: bool = False,
):
    """Yield (subject_label, eye, sample_index, spec) for a whole cohort.

    Geometry is drawn per identity inside the band the limbic clamps leave
    untouched (pupil radius 37..44, limbic/pupil ratio 2.52..2.65); captures
    jitter rotation and pupil dilation and carry fresh sensor noise.
    """
    master = np.random.default_rng((0xC040, seed))
    for s in range(subjects):
        label = f"s{s:03d}"
        for eye in eyes:
            id_seed = int(master.integers(1, 2**31))
            id_rng = np.random.default_rng((0x1D, seed, s, 0 if eye == "left" else 1))
            cx = 160.0 + id_rng.uniform(-8.0, 8.0)
            cy = 140.0 + id_rng.uniform(-8.0, 8.0)
            base_r = id_rng.uniform(37.0, 44.0)
            ratio = id_rng.uniform(2.52, 2.65)
            for c in range(samples):
                cap_rng = np.random.default_rng((0x0C, seed, s, 0 if eye == "left" else 1, c))
                r_p = base_r * (1.0 + cap_rng.uniform(-dilation_jitter, dilation_jitter))
                spec = SynthEyeSpec(
                    identity=id_seed,
                    capture=c,
                    eye=eye,
                    cx=cx,
                    cy=cy,
                    pupil_r=r_p,
                    limbic_r=base_r * ratio,
                    noise=noise,
                    rotation_deg=cap_rng.uniform(-rotation_jitter, rotation_jitter),
                    occlusion=occlusion if cap_rng.uniform() < 0.7 else 0.0,
                    speculars=speculars,
                    upper_half_noise=upper_half_noise,
                )
                yield label, eye, c, spec


def write_cohort(out_dir, subjects: int, samples: int, seed: int = 0,
                 eyes: tuple[str, ...] = ("left",), **kwargs) -> list:
    """Render a cohort to out_dir/subject/subject_E##.pgm with ground-truth
    .circles sidecars (cx cy r_pupil r_limbic). Returns the written paths."""
    import os

    from .image import save_pgm

    paths = []
    for label, eye, c, spec in cohort_specs(subjects, samples, seed, eyes, **kwargs):
        img, geom = synth_eye(spec)
        sub_dir = os.path.join(os.fspath(out_dir), label)
        os.makedirs(sub_dir, exist_ok=True)
        stem = f"{label}_{'L' if eye == 'left' else 'R'}{c:02d}"
        img_path = os.path.join(sub_dir, stem + ".pgm")
        save_pgm(img_path, img)
        with open(os.path.join(sub_dir, stem + ".circles"), "w", encoding="ascii") as fh:
            fh.write(
                f"{geom.pupil.cx:.3f} {geom.pupil.cy:.3f} "
                f"{geom.pupil.r:.3f} {geom.limbic_r:.3f}\n"
            )
        paths.append(img_path)
    return paths
