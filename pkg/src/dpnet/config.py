"""Experiment configuration: one JSON file drives gen/train/screen/eval.

The file is versioned (schema_version) and round-trips losslessly, so
a stored config fully determines every artifact the commands write.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

__all__ = [
    "SCHEMA_VERSION",
    "OodSourceConfig",
    "DatasetConfig",
    "ModelConfig",
    "RoleConfig",
    "ScreeningConfig",
    "EvalConfig",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "save_config",
]

SCHEMA_VERSION = "dpn-exp-v1"

# Names the training command can resolve to an OOD exposure set.
KNOWN_SOURCES = ("far_ood", "shifted_train")


def _require(mapping: dict, key: str, where: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ValueError(f"config: missing key {key!r} in {where}")
    return mapping[key]


def _num(mapping: dict, key: str, where: str) -> float:
    value = _require(mapping, key, where)
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ValueError(f"config: {where}.{key} must be a finite number")
    return float(value)


def _int(mapping: dict, key: str, where: str) -> int:
    value = _require(mapping, key, where)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValueError(f"config: {where}.{key} must be an integer")
    return value


@dataclass(frozen=True)
class OodSourceConfig:
    name: str
    gamma: float
    lambda_out: float

    def __post_init__(self) -> None:
        if self.name not in KNOWN_SOURCES:
            raise ValueError(f"config: unknown OOD source {self.name!r}")
        if self.gamma < 0.0:
            raise ValueError("config: gamma must be >= 0")


@dataclass(frozen=True)
class DatasetConfig:
    classes: int = 3
    train: int = 3000
    val: int = 500
    test: int = 500
    seed: int = 7
    shift: float = 2.0
    scale: float = 1.0
    shifted_test: int = 500
    shifted_seed: int = 8
    shifted_train: int = 200
    shifted_train_seed: int = 9
    far_ood: int = 1000
    far_ood_seed: int = 10

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise ValueError("config: dataset.classes must be >= 2")
        for name in ("train", "val", "test", "shifted_test", "shifted_train", "far_ood"):
            if getattr(self, name) < 1:
                raise ValueError(f"config: dataset.{name} must be >= 1")
        if self.scale <= 0.0:
            raise ValueError("config: dataset.scale must be positive")


@dataclass(frozen=True)
class ModelConfig:
    hidden: tuple[int, ...] = (32, 32)
    activation: str = "relu"

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("config: model.hidden must be positive layer widths")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"config: unknown activation {self.activation!r}")


@dataclass(frozen=True)
class RoleConfig:
    lambda_in: float
    ood_sources: tuple[OodSourceConfig, ...]
    epochs: int
    batch_size: int
    learning_rate: float
    momentum: float
    seed: int
    init_seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "ood_sources", tuple(self.ood_sources))
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("config: bad epochs/batch_size")
        if self.learning_rate <= 0.0 or not 0.0 <= self.momentum < 1.0:
            raise ValueError("config: bad learning_rate/momentum")


@dataclass(frozen=True)
class ScreeningConfig:
    drop_fraction_detector: float = 0.05
    drop_fraction_classifier: float = 0.01

    def __post_init__(self) -> None:
        for p in (self.drop_fraction_detector, self.drop_fraction_classifier):
            if not 0.0 < p < 1.0:
                raise ValueError("config: screening fractions must lie in (0, 1)")


@dataclass(frozen=True)
class EvalConfig:
    drop_fractions: tuple[float, ...] = (0.05, 0.07, 0.1)

    def __post_init__(self) -> None:
        object.__setattr__(self, "drop_fractions", tuple(float(p) for p in self.drop_fractions))
        if not self.drop_fractions or any(not 0.0 < p < 1.0 for p in self.drop_fractions):
            raise ValueError("config: eval fractions must lie in (0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    out_dir: str
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    classifier: RoleConfig | None = None
    detector: RoleConfig | None = None
    screening: ScreeningConfig = field(default_factory=ScreeningConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    def role(self, name: str) -> RoleConfig:
        if name == "classifier" and self.classifier is not None:
            return self.classifier
        if name == "detector" and self.detector is not None:
            return self.detector
        raise ValueError(f"config: no settings for role {name!r}")


def default_config(out_dir: str = "runs/default") -> ExperimentConfig:
    """Defaults sized so the full experiment runs in well under a minute."""
    return ExperimentConfig(
        out_dir=out_dir,
        classifier=RoleConfig(
            lambda_in=0.1,
            ood_sources=(OodSourceConfig("far_ood", 0.1, -1.0),),
            epochs=40,
            batch_size=64,
            learning_rate=0.05,
            momentum=0.9,
            seed=11,
            init_seed=101,
        ),
        detector=RoleConfig(
            lambda_in=0.5,
            ood_sources=(
                OodSourceConfig("far_ood", 0.5, -1.0),
                OodSourceConfig("shifted_train", 0.5, -0.2),
            ),
            epochs=40,
            batch_size=64,
            learning_rate=0.05,
            momentum=0.9,
            seed=12,
            init_seed=202,
        ),
    )


def _role_to_dict(role: RoleConfig) -> dict:
    return {
        "lambda_in": role.lambda_in,
        "ood_sources": [
            {"name": s.name, "gamma": s.gamma, "lambda_out": s.lambda_out}
            for s in role.ood_sources
        ],
        "epochs": role.epochs,
        "batch_size": role.batch_size,
        "learning_rate": role.learning_rate,
        "momentum": role.momentum,
        "seed": role.seed,
        "init_seed": role.init_seed,
    }


def _role_from_dict(d: dict, where: str) -> RoleConfig:
    sources = _require(d, "ood_sources", where)
    if not isinstance(sources, list):
        raise ValueError(f"config: {where}.ood_sources must be a list")
    parsed = tuple(
        OodSourceConfig(
            str(_require(s, "name", f"{where}.ood_sources")),
            _num(s, "gamma", f"{where}.ood_sources"),
            _num(s, "lambda_out", f"{where}.ood_sources"),
        )
        for s in sources
    )
    return RoleConfig(
        lambda_in=_num(d, "lambda_in", where),
        ood_sources=parsed,
        epochs=_int(d, "epochs", where),
        batch_size=_int(d, "batch_size", where),
        learning_rate=_num(d, "learning_rate", where),
        momentum=_num(d, "momentum", where),
        seed=_int(d, "seed", where),
        init_seed=_int(d, "init_seed", where),
    )


def to_dict(cfg: ExperimentConfig) -> dict:
    ds = cfg.dataset
    out = {
        "schema_version": SCHEMA_VERSION,
        "out_dir": cfg.out_dir,
        "dataset": {
            "classes": ds.classes,
            "train": ds.train,
            "val": ds.val,
            "test": ds.test,
            "seed": ds.seed,
            "shift": ds.shift,
            "scale": ds.scale,
            "shifted_test": ds.shifted_test,
            "shifted_seed": ds.shifted_seed,
            "shifted_train": ds.shifted_train,
            "shifted_train_seed": ds.shifted_train_seed,
            "far_ood": ds.far_ood,
            "far_ood_seed": ds.far_ood_seed,
        },
        "model": {"hidden": list(cfg.model.hidden), "activation": cfg.model.activation},
        "screening": {
            "drop_fraction_detector": cfg.screening.drop_fraction_detector,
            "drop_fraction_classifier": cfg.screening.drop_fraction_classifier,
        },
        "evaluation": {"drop_fractions": list(cfg.evaluation.drop_fractions)},
    }
    if cfg.classifier is not None:
        out["classifier"] = _role_to_dict(cfg.classifier)
    if cfg.detector is not None:
        out["detector"] = _role_to_dict(cfg.detector)
    return out


def from_dict(d: dict) -> ExperimentConfig:
    version = _require(d, "schema_version", "config")
    if version != SCHEMA_VERSION:
        raise ValueError(f"config: unsupported schema_version {version!r}")
    ds = _require(d, "dataset", "config")
    where = "dataset"
    dataset = DatasetConfig(
        classes=_int(ds, "classes", where),
        train=_int(ds, "train", where),
        val=_int(ds, "val", where),
        test=_int(ds, "test", where),
        seed=_int(ds, "seed", where),
        shift=_num(ds, "shift", where),
        scale=_num(ds, "scale", where),
        shifted_test=_int(ds, "shifted_test", where),
        shifted_seed=_int(ds, "shifted_seed", where),
        shifted_train=_int(ds, "shifted_train", where),
        shifted_train_seed=_int(ds, "shifted_train_seed", where),
        far_ood=_int(ds, "far_ood", where),
        far_ood_seed=_int(ds, "far_ood_seed", where),
    )
    md = _require(d, "model", "config")
    model = ModelConfig(tuple(_require(md, "hidden", "model")), str(_require(md, "activation", "model")))
    sc = _require(d, "screening", "config")
    screening = ScreeningConfig(
        _num(sc, "drop_fraction_detector", "screening"),
        _num(sc, "drop_fraction_classifier", "screening"),
    )
    ev = _require(d, "evaluation", "config")
    evaluation = EvalConfig(tuple(_require(ev, "drop_fractions", "evaluation")))
    classifier = _role_from_dict(d["classifier"], "classifier") if "classifier" in d else None
    detector = _role_from_dict(d["detector"], "detector") if "detector" in d else None
    return ExperimentConfig(
        out_dir=str(_require(d, "out_dir", "config")),
        dataset=dataset,
        model=model,
        classifier=classifier,
        detector=detector,
        screening=screening,
        evaluation=evaluation,
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    return from_dict(raw)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
