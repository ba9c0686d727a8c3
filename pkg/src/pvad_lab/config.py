"""Dataclass configs for features, corpus, augmentation, models and training.

Every experiment is fully described by one :class:`ExperimentConfig`; its
canonical JSON form is hashed so run directories can be keyed by
(config hash, seed) and reruns are byte-reproducible.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


@dataclass(frozen=True)
class FeatureConfig:
    """Acoustic front-end settings (log mel + deltas + context stacking)."""

    sample_rate: int = 16000
    frame_length_ms: float = 20.0
    frame_shift_ms: float = 10.0
    n_mels: int = 40
    context: int = 3
    delta_window: int = 2
    log_floor: float = 1e-10
    mean_norm: bool = False  # off by default; per-utterance mean subtraction

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if self.frame_shift_ms <= 0 or self.frame_length_ms < self.frame_shift_ms:
            raise ConfigError("need frame_length_ms >= frame_shift_ms > 0")
        if self.n_mels < 1:
            raise ConfigError("n_mels must be >= 1")
        if self.context < 0:
            raise ConfigError("context must be >= 0")

    @property
    def win_samples(self) -> int:
        return int(round(self.frame_length_ms * self.sample_rate / 1000.0))

    @property
    def hop_samples(self) -> int:
        return int(round(self.frame_shift_ms * self.sample_rate / 1000.0))

    @property
    def static_dim(self) -> int:
        return self.n_mels

    @property
    def delta_dim(self) -> int:
        return 3 * self.n_mels

    @property
    def stacked_dim(self) -> int:
        return (2 * self.context + 1) * 3 * self.n_mels


@dataclass(frozen=True)
class AugConfig:
    """Enrollment augmentation: frequency masking + embedding dropout."""

    fraction: float = 1.0 / 3.0
    dropout_p: float = 0.5
    mask_stage: str = "pre_delta"  # or "post_stack" (ablation)
    mask_shape: str = "contiguous"  # or "scattered" (ablation)

    def __post_init__(self):
        if not 0.0 <= self.fraction < 1.0:
            raise ConfigError("aug.fraction must be in [0, 1)")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("aug.dropout_p must be in [0, 1)")
        if self.mask_stage not in ("pre_delta", "post_stack"):
            raise ConfigError(f"unknown aug.mask_stage {self.mask_stage!r}")
        if self.mask_shape not in ("contiguous", "scattered"):
            raise ConfigError(f"unknown aug.mask_shape {self.mask_shape!r}")


@dataclass(frozen=True)
class NoiseConfig:
    """Noise bank composition and SNR policy."""

    train_kinds: tuple[str, ...] = ("white", "pink", "hum", "machine")
    test_kinds: tuple[str, ...] = ("crowd", "brown")
    clips_per_kind: int = 2
    clip_duration_s: float = 8.0
    train_prob: float = 0.5  # probability an example is noise-mixed in training
    snr_min_db: float = 5.0
    snr_max_db: float = 30.0
    test_snrs_db: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0)

    def __post_init__(self):
        if not 0.0 <= self.train_prob <= 1.0:
            raise ConfigError("noise.train_prob must be in [0, 1]")
        if self.snr_min_db > self.snr_max_db:
            raise ConfigError("noise.snr_min_db must be <= snr_max_db")


@dataclass(frozen=True)
class CorpusConfig:
    """Synthetic speaker corpus layout."""

    n_speakers: int = 20
    utts_per_speaker: int = 50
    duration_min_s: float = 0.9
    duration_max_s: float = 1.4
    gap_min_s: float = 0.0
    gap_max_s: float = 0.3
    train_utts_per_speaker: int = 35
    val_utts_per_speaker: int = 5
    # remainder of each speaker's utterances goes to the test split
    strict_speaker_split: bool = False  # hold out whole speakers for testing

    def __post_init__(self):
        if self.n_speakers < 2:
            raise ConfigError("corpus.n_speakers must be >= 2")
        if self.duration_min_s < 0.5:
            raise ConfigError("corpus.duration_min_s must be >= 0.5")
        held = self.train_utts_per_speaker + self.val_utts_per_speaker
        if held >= self.utts_per_speaker:
            raise ConfigError("train+val utterances must leave a test remainder")


@dataclass(frozen=True)
class TrainConfig:
    """One optimizer run (used for both speaker pretraining and PVAD)."""

    lr: float = 1e-4
    batch_size: int = 16
    max_epochs: int = 100
    patience: int = 5
    clip_norm: float = 5.0
    examples_per_epoch: int = 0  # 0 = one example per available source item
    val_examples: int = 60

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one matrix run needs, including the seed list."""

    seed: int = 0
    seeds: tuple[int, ...] = (0, 1, 2)
    speaker_hidden: int = 32
    pvad_hidden: int = 32
    n_test_examples: int = 60
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    aug: AugConfig = field(default_factory=AugConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    speaker_train: TrainConfig = field(
        default_factory=lambda: TrainConfig(lr=1e-3, max_epochs=100)
    )
    pvad_train: TrainConfig = field(default_factory=lambda: TrainConfig(lr=1e-4))

    @property
    def embedding_dim(self) -> int:
        return 2 * self.speaker_hidden

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return _experiment_from_dict(raw)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(raw)


# Flat convenience keys accepted at the top level of a JSON config, mapped to
# their dataclass destinations.  "hidden" sets both model widths; "lr",
# "batch_size", "max_epochs" and "patience" set the PVAD run (the speaker run
# is configured via the "speaker_train" section).
_FLAT_KEYS = {
    "n_mels": ("feature", "n_mels"),
    "context": ("feature", "context"),
    "sample_rate": ("feature", "sample_rate"),
    "lr": ("pvad_train", "lr"),
    "batch_size": ("pvad_train", "batch_size"),
    "max_epochs": ("pvad_train", "max_epochs"),
    "patience": ("pvad_train", "patience"),
}

_SECTIONS = {
    "feature": FeatureConfig,
    "aug": AugConfig,
    "noise": NoiseConfig,
    "corpus": CorpusConfig,
    "speaker_train": TrainConfig,
    "pvad_train": TrainConfig,
}

_TOP_FIELDS = ("seed", "seeds", "speaker_hidden", "pvad_hidden", "n_test_examples")


def _build_section(cls, raw: dict, section: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"unknown key {section}.{key}")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad section {section!r}: {exc}") from exc


def _experiment_from_dict(raw: dict) -> ExperimentConfig:
    sections: dict[str, dict] = {name: {} for name in _SECTIONS}
    top: dict[str, object] = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be an object")
            sections[key].update(value)
        elif key in _FLAT_KEYS:
            section, name = _FLAT_KEYS[key]
            sections[section][name] = value
        elif key == "hidden":
            top["speaker_hidden"] = value
            top["pvad_hidden"] = value
        elif key in _TOP_FIELDS:
            top[key] = tuple(value) if isinstance(value, list) else value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    kwargs: dict[str, object] = dict(top)
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build_section(cls, sections[name], name)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc


def desk_scale_config(**overrides) -> ExperimentConfig:
    """Small-but-meaningful defaults used by the acceptance experiments."""

    base = {
        "feature": FeatureConfig(n_mels=16, context=1),
        "speaker_hidden": 32,
        "pvad_hidden": 32,
        "n_test_examples": 60,
        "corpus": CorpusConfig(),
        "speaker_train": TrainConfig(
            lr=1e-3, batch_size=16, max_epochs=20, patience=5, val_examples=100
        ),
        "pvad_train": TrainConfig(
            lr=3e-4,
            batch_size=16,
            max_epochs=15,
            patience=5,
            examples_per_epoch=240,
            val_examples=60,
        ),
    }
    base.update(overrides)
    return ExperimentConfig(**base)
