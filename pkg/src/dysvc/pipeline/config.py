"""Pipeline configuration, read from and written to a small TOML file."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..dcgan.model import GanHyper
from ..errors import ConfigError


@dataclass(frozen=True)
class VocoderConfig:
    frame_shift: float = 0.005
    fft_size: int = 1024
    f0_floor: float = 50.0
    f0_ceil: float = 500.0
    warp: float = 0.42


@dataclass(frozen=True)
class EvaluationConfig:
    dp_trials: int = 50
    dp_max_rows: int = 1000
    svm_lambda: float = 1e-3
    svm_epochs: int = 200
    noise_snr_db: float = 10.0
    k_max: int = -1          # -1: every simulated speaker


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    jobs: int = 1
    rate_factor: float = 2.0
    train_phrases: Tuple[int, ...] = tuple(range(1, 71))
    test_phrases: Tuple[int, ...] = tuple(range(71, 81))
    vocoder: VocoderConfig = field(default_factory=VocoderConfig)
    dcgan: GanHyper = field(default_factory=GanHyper)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    source_text: Optional[str] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not 0.25 <= self.rate_factor <= 4.0:
            raise ConfigError("rate_factor must lie in [0.25, 4]")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if set(self.train_phrases) & set(self.test_phrases):
            raise ConfigError("train and test phrases overlap")
        v = self.vocoder
        if not 0 < v.f0_floor < v.f0_ceil:
            raise ConfigError("need 0 < f0_floor < f0_ceil")
        if v.fft_size & (v.fft_size - 1) or v.fft_size < 256:
            raise ConfigError("fft_size must be a power of two >= 256")
        if not 0.0 <= v.warp < 0.6:
            raise ConfigError("warp must lie in [0, 0.6)")
        d = self.dcgan
        if d.lr <= 0 or d.batch < 1 or d.epochs < 1:
            raise ConfigError("dcgan lr, batch and epochs must be positive")
        if d.l1_weight < 0:
            raise ConfigError("l1_weight must be >= 0")
        if self.evaluation.dp_trials < 1:
            raise ConfigError("dp_trials must be >= 1")

    def with_overrides(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        return replace(self, source_text=None, **kw)

    # -- serialisation -----------------------------------------------------

    def to_toml(self) -> str:
        """Exact file contents to snapshot: the original text when loaded from disk."""
        if self.source_text is not None:
            return self.source_text
        lines = [
            f"seed = {self.seed}",
            f"jobs = {self.jobs}",
            f"rate_factor = {_fmt(self.rate_factor)}",
            "",
            "[split]",
            f'train_phrases = "{_ranges(self.train_phrases)}"',
            f'test_phrases = "{_ranges(self.test_phrases)}"',
        ]
        for name in ("vocoder", "dcgan", "evaluation"):
            lines += ["", f"[{name}]"]
            for k, v in asdict(getattr(self, name)).items():
                lines.append(f"{k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _ranges(ids) -> str:
    ids = sorted(ids)
    parts, i = [], 0
    while i < len(ids):
        j = i
        while j + 1 < len(ids) and ids[j + 1] == ids[j] + 1:
            j += 1
        parts.append(str(ids[i]) if i == j else f"{ids[i]}-{ids[j]}")
        i = j + 1
    return ",".join(parts)


def parse_phrases(v) -> Tuple[int, ...]:
    """``"1-70"``, ``"1-3,5"`` or a list of ints."""
    if isinstance(v, list):
        return tuple(int(x) for x in v)
    out = []
    for part in str(v).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out += range(int(lo), int(hi) + 1)
        else:
            out.append(int(part))
    return tuple(out)


def _section(cls, data: dict, name: str):
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def parse_config(text: str) -> PipelineConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    top = {k: raw.pop(k) for k in ("seed", "jobs", "rate_factor") if k in raw}
    split = raw.pop("split", {})
    sections = {name: raw.pop(name, {}) for name in ("vocoder", "dcgan", "evaluation")}
    if raw:
        raise ConfigError(f"unknown config keys: {sorted(raw)}")
    kw = dict(top)
    if "train_phrases" in split:
        kw["train_phrases"] = parse_phrases(split.pop("train_phrases"))
    if "test_phrases" in split:
        kw["test_phrases"] = parse_phrases(split.pop("test_phrases"))
    if split:
        raise ConfigError(f"unknown keys in [split]: {sorted(split)}")
    kw["vocoder"] = _section(VocoderConfig, sections["vocoder"], "vocoder")
    kw["dcgan"] = _section(GanHyper, sections["dcgan"], "dcgan")
    kw["evaluation"] = _section(EvaluationConfig, sections["evaluation"], "evaluation")
    return PipelineConfig(source_text=text, **kw)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text())
