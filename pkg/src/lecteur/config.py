"""Run configuration: one JSON or YAML file drives every command.

Schema (all sections optional, every key overrides the preset default):

    {
      "preset": "toy" | "full",
      "seed": 0,
      "enhancement": "identity",
      "paths": {"corpus": ..., "lexicon": ..., "features": ...,
                "checkpoints": ..., "output": ...},
      "segmentation": {"min_len": ..., "max_len": ..., "min_dialogue_chars": ...},
      "acoustic": {...},        "optimizer": {...},
      "training": {...},        "adapt": {...},
      "vocoder": {...},         "vocoder_training": {...},
      "context": {"embedding_dim": ..., "d_ctx": ...},
      "frontend": {"epochs": ..., "emotion_epochs": ..., "lr": ..., "holdout": ...}
    }

Relative paths inside the file resolve against the file's directory so a
config can travel with its corpus. Unknown sections or keys are usage
errors, not silent no-ops.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .acoustic import AcousticConfig
from .corpus import SegmentationConfig
from .errors import UsageError
from .training.loop import AdaptConfig, OptimizerConfig, TrainConfig
from .vocoder import VocoderConfig, VocoderTrainConfig

PRESETS = ("toy", "full")


@dataclass
class ContextConfig:
    embedding_dim: int = 32
    d_ctx: int = 32


@dataclass
class FrontendTrainConfig:
    epochs: int = 60
    emotion_epochs: int = 200
    lr: float = 0.05
    holdout: float = 0.1


@dataclass
class RunConfig:
    preset: str = "toy"
    seed: int = 0
    enhancement: str = "identity"
    corpus_dir: Path = Path("corpus")
    lexicon_path: Path | None = None  # default: corpus_dir/lexicon.tsv
    features_dir: Path = Path("features")
    checkpoints_dir: Path = Path("checkpoints")
    output_dir: Path = Path("output")
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    vocoder: VocoderConfig = field(default_factory=VocoderConfig)
    vocoder_training: VocoderTrainConfig = field(default_factory=VocoderTrainConfig)
    context: ContextConfig = field(default_factory=ContextConfig)
    frontend: FrontendTrainConfig = field(default_factory=FrontendTrainConfig)

    @property
    def lexicon(self) -> Path:
        return self.lexicon_path or self.corpus_dir / "lexicon.tsv"


def preset_defaults(preset: str) -> RunConfig:
    """Baseline RunConfig for a preset; individual keys override on top."""
    if preset == "toy":
        return RunConfig(
            preset="toy",
            segmentation=SegmentationConfig(min_len=1.0, max_len=5.0),
            acoustic=AcousticConfig.toy(),
            optimizer=OptimizerConfig(peak_lr=2e-3, warmup_steps=250),
            training=TrainConfig(steps=2000, batch_max_frames=1200),
            adapt=AdaptConfig(steps=200, lr=1e-3),
            vocoder=VocoderConfig.toy(),
            vocoder_training=VocoderTrainConfig(steps=500),
        )
    if preset == "full":
        return RunConfig(
            preset="full",
            segmentation=SegmentationConfig(),
            acoustic=AcousticConfig(),
            optimizer=OptimizerConfig(),
            training=TrainConfig(steps=200000, checkpoint_every=5000),
            adapt=AdaptConfig(),
            vocoder=VocoderConfig(),
            vocoder_training=VocoderTrainConfig(steps=20000),
        )
    raise UsageError(f"unknown preset {preset!r}; choose from {PRESETS}")


_SECTIONS = {
    "segmentation": SegmentationConfig,
    "acoustic": AcousticConfig,
    "optimizer": OptimizerConfig,
    "training": TrainConfig,
    "adapt": AdaptConfig,
    "vocoder": VocoderConfig,
    "vocoder_training": VocoderTrainConfig,
    "context": ContextConfig,
    "frontend": FrontendTrainConfig,
}

_PATH_KEYS = {
    "corpus": "corpus_dir",
    "lexicon": "lexicon_path",
    "features": "features_dir",
    "checkpoints": "checkpoints_dir",
    "output": "output_dir",
}


def _apply_section(base, cls, values: dict, section: str):
    clean = {}
    for key, val in values.items():
        if key not in cls.__dataclass_fields__:
            raise UsageError(f"config section {section!r} has no key {key!r}")
        clean[key] = tuple(val) if isinstance(val, list) else val
    try:
        return dataclasses.replace(base, **clean)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config section {section!r}: {exc}") from exc


def load_run_config(
    path: str | Path | None = None,
    preset: str | None = None,
    seed: int | None = None,
) -> RunConfig:
    """Build a RunConfig from preset defaults, a JSON file, and overrides.

    Precedence, lowest to highest: preset defaults, file keys, the explicit
    preset/seed arguments (CLI flags).
    """
    raw: dict = {}
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        base_dir = path.parent
        text = path.read_text(encoding="utf-8")
        if path.suffix in (".yaml", ".yml"):
            import yaml

            try:
                raw = yaml.safe_load(text) or {}
            except yaml.YAMLError as exc:
                raise UsageError(f"config file {path} is not valid YAML: {exc}") from exc
        else:
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise UsageError(f"config file {path} must hold a mapping at top level")

    chosen = preset or raw.get("preset", "toy")
    if chosen not in PRESETS:
        raise UsageError(f"unknown preset {chosen!r}; choose from {PRESETS}")
    cfg = preset_defaults(chosen)

    known_top = {"preset", "seed", "enhancement", "paths", *_SECTIONS}
    for key in raw:
        if key not in known_top:
            raise UsageError(f"config has no section or key {key!r}")

    if "seed" in raw:
        if not isinstance(raw["seed"], int):
            raise UsageError("config key 'seed' must be an integer")
        cfg.seed = raw["seed"]
    if "enhancement" in raw:
        cfg.enhancement = str(raw["enhancement"])

    paths = raw.get("paths", {})
    if not isinstance(paths, dict):
        raise UsageError("config key 'paths' must be an object")
    for key, val in paths.items():
        if key not in _PATH_KEYS:
            raise UsageError(f"config paths has no key {key!r}")
        p = Path(val)
        if not p.is_absolute():
            p = base_dir / p
        setattr(cfg, _PATH_KEYS[key], p)

    for section, cls in _SECTIONS.items():
        if section in raw:
            if not isinstance(raw[section], dict):
                raise UsageError(f"config section {section!r} must be an object")
            setattr(
                cfg, section, _apply_section(getattr(cfg, section), cls, raw[section], section)
            )

    if seed is not None:
        cfg.seed = seed
    return cfg
