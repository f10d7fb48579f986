"""One place for every pipeline tunable, with a flat key=value text format.

Keys are module-prefixed (segmentation.a_fraction=0.02, matching.max_shift=4,
...). parse/serialize round-trip exactly, command-line overrides reuse the
same KEY=VALUE syntax, and the effective config can be echoed into reports
so results stay reproducible. Named ablation presets bundle the
preprocessing variants the evaluation harness sweeps.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .matching import MatchConfig
from .segmentation import SegmentationConfig

__all__ = [
    "NormalizationConfig",
    "FeatureConfig",
    "AppConfig",
    "parse_config",
    "serialize_config",
    "load_config",
    "apply_overrides",
    "ABLATIONS",
]


@dataclass
class NormalizationConfig:
    """ROI window, background-subtraction enhancement, and the ablation
    toggles (histogram equalization, compression, full-strip ROI)."""

    window_w: int = 7
    beta: float = 0.9
    enhance: bool = True
    hist_equalize: bool = False
    compress: bool = True
    full_roi: bool = False
    roi_row_start: int = 0
    roi_col_start: int = 15
    roi_rows: int = 32
    roi_cols: int = 160

    def validate(self) -> "NormalizationConfig":
        if self.window_w < 1:
            raise ConfigError("window_w must be >= 1")
        if not (0.0 <= self.beta <= 1.0):
            raise ConfigError("beta must be in [0, 1]")
        if self.roi_rows < 2 or self.roi_cols < 2:
            raise ConfigError("ROI must be at least 2x2")
        if self.roi_row_start < 0 or self.roi_col_start < 0:
            raise ConfigError("ROI offsets must be >= 0")
        if self.compress and self.roi_rows % 2 != 0:
            raise ConfigError("compression needs an even ROI row count")
        return self


@dataclass
class FeatureConfig:
    family: str = "symlet4"
    selection: str = "ca2cv2"
    levels: int = 2

    def validate(self) -> "FeatureConfig":
        from .features import FAMILY_NAMES, _ALIASES  # deferred: avoid cycle at import

        key = _ALIASES.get(self.family.lower(), self.family.lower())
        if key not in FAMILY_NAMES:
            raise ConfigError(f"unknown wavelet family {self.family!r}")
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        return self


@dataclass
class AppConfig:
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    matching: MatchConfig = field(default_factory=MatchConfig)

    def validate(self) -> "AppConfig":
        self.segmentation.validate()
        self.normalization.validate()
        self.features.validate()
        self.matching.validate()
        return self

    def copy(self) -> "AppConfig":
        return AppConfig(
            dataclasses.replace(self.segmentation),
            dataclasses.replace(self.normalization),
            dataclasses.replace(self.features),
            dataclasses.replace(self.matching),
        )


def _coerce(current, text: str):
    if isinstance(current, bool):
        low = text.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if isinstance(current, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"expected an integer, got {text!r}") from None
    if isinstance(current, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"expected a number, got {text!r}") from None
    return text.strip()


def _set_key(cfg: AppConfig, key: str, value: str) -> None:
    try:
        section_name, attr = key.strip().split(".", 1)
    except ValueError:
        raise ConfigError(f"config key {key!r} is not module-prefixed") from None
    section = getattr(cfg, section_name, None)
    if section is None or not dataclasses.is_dataclass(section):
        raise ConfigError(f"unknown config section {section_name!r}")
    if attr not in {f.name for f in fields(section)}:
        raise ConfigError(f"unknown config key {key!r}")
    setattr(section, attr, _coerce(getattr(section, attr), value))


def apply_overrides(cfg: AppConfig, pairs) -> AppConfig:
    """Apply KEY=VALUE strings in order; later pairs win."""
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not KEY=VALUE")
        key, value = pair.split("=", 1)
        _set_key(cfg, key, value)
    return cfg


def parse_config(text: str) -> AppConfig:
    """Parse key=value lines ('#' starts a comment) into a validated config."""
    cfg = AppConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected KEY=VALUE, got {raw!r}")
        key, value = line.split("=", 1)
        _set_key(cfg, key, value)
    return cfg.validate()


def serialize_config(cfg: AppConfig) -> str:
    """Emit every key, one per line, sorted: parse(serialize(cfg)) == cfg."""
    lines = []
    for section_field in fields(cfg):
        section = getattr(cfg, section_field.name)
        for f in fields(section):
            lines.append(f"{section_field.name}.{f.name}={getattr(section, f.name)}")
    return "\n".join(sorted(lines)) + "\n"


def load_config(path) -> AppConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# Named preprocessing variants for the ablation sweep: each maps to plain
# config overrides, not separate code paths.
ABLATIONS: dict[str, tuple[str, ...]] = {
    "baseline": (),
    "histeq-compress": (
        "normalization.enhance=false",
        "normalization.hist_equalize=true",
    ),
    "w7-b90-nocompress": ("normalization.compress=false",),
    "w7-b90-histeq-compress": ("normalization.hist_equalize=true",),
    "w7-b60-compress": ("normalization.beta=0.6",),
    "w4-b90-compress": ("normalization.window_w=4",),
    "w7-b85-compress": ("normalization.beta=0.85",),
    "w7-b95-compress": ("normalization.beta=0.95",),
    "full-roi": (
        "normalization.full_roi=true",
        "normalization.roi_rows=50",
        "normalization.roi_cols=300",
    ),
}
