"""Configuration objects and the plain-text `key = value` format they load from.

Example config file:

    # desk run
    profile = desk
    variant = mman
    seed = 7
    lambda1 = 25
    scales = 0.8, 1.0, 1.2
"""
import dataclasses
import hashlib
import logging
import types
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, TypeVar

import chardet

logger = logging.getLogger(__name__)

PROFILES = {
    "desk": {"image_size": 64, "num_classes": 7, "resize_short": 72, "crop": 64},
    "full": {"image_size": 256, "num_classes": 20, "resize_short": 288, "crop": 256},
}
"""resolution profiles: desk-scale synthetic runs and the full 256x256 setting"""

SCHEDULES = {
    "lip": {"epochs": 30, "decay_epoch": 15},
    "pascal": {"epochs": 50, "decay_epoch": 25},
}
"""learning-rate schedule profiles"""

PRECISIONS = ("float32", "float64")


@dataclass
class LossWeights:
    lambda1: float = 25.0
    """low-resolution cross-entropy weight"""
    lambda2: float = 1.0
    """micro adversarial weight"""
    lambda3: float = 100.0
    """high-resolution cross-entropy weight"""
    lam: float = 0.01
    """single-adversary mixing weight, relative to the high-resolution cross-entropy it is added to"""

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"Loss weight `{f.name}` must be nonnegative. Got {getattr(self, f.name)}.")

    def weight(self, name: str) -> float:
        """`one` stands for the unweighted macro term"""
        if name == "one":
            return 1.0
        if name not in {f.name for f in dataclasses.fields(self)}:
            raise KeyError(f"Unknown loss weight `{name}`.")
        return float(getattr(self, name))


@dataclass
class TrainConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    lr: float = 0.0002
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    weight_decay: float = 0.0001
    batch: int = 1
    schedule: str = "lip"
    epochs: int = 30
    decay_epoch: int = 15
    max_iterations: int | None = None
    """stops the run early; desk smoke runs use this instead of full epochs"""
    d_steps: int = 1
    seed: int = 0
    precision: str = "float32"
    variant: str = "mman"
    dropout: float = 0.5
    init_std: float = 0.001
    scales: tuple[float, ...] = (0.8, 1.0, 1.2)
    workers: int = 0
    log_every: int = 50
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.adam_epsilon <= 0:
            raise ValueError(f"`lr` and `adam_epsilon` must be positive. Got {self.lr}, {self.adam_epsilon}.")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"`beta1`/`beta2` must lie in [0, 1). Got {self.beta1}, {self.beta2}.")
        if self.weight_decay < 0:
            raise ValueError(f"`weight_decay` must be nonnegative. Got {self.weight_decay}.")
        if self.batch != 1:
            raise ValueError(f"`batch` is fixed at 1. Got {self.batch}.")
        if not 0 < self.decay_epoch < self.epochs:
            raise ValueError(f"`decay_epoch` must fall inside (0, epochs={self.epochs}). Got {self.decay_epoch}.")
        if self.d_steps < 1:
            raise ValueError(f"`d_steps` must be at least 1. Got {self.d_steps}.")
        if self.precision not in PRECISIONS:
            raise ValueError(f"`precision` must be one of {PRECISIONS}. Got `{self.precision}`.")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"`dropout` must lie in [0, 1). Got {self.dropout}.")
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValueError(f"`scales` must be a nonempty list of positive numbers. Got {self.scales}.")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"`max_iterations` must be positive. Got {self.max_iterations}.")


@dataclass
class DataConfig:
    profile: str = "desk"
    image_size: int = 64
    num_classes: int = 7
    resize_short: int = 72
    crop: int = 64
    augment: bool = True
    flip: bool = True
    count: int = 8
    """synthetic samples generated when no manifest is given"""
    holdout: int = 0
    """extra synthetic samples kept out of training for evaluation"""
    data_seed: int = 0
    manifest: str | None = None
    low_res_rule: str = "majority"
    swap_table: str | None = None
    """flip swap config file; the desk table is used when empty and num_classes is 7"""
    taxonomy: str | None = None
    """taxonomy merge config applied to manifest labels before training"""

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"`profile` must be one of {tuple(PROFILES)}. Got `{self.profile}`.")
        if self.image_size < 32 or self.image_size % 16:
            raise ValueError(f"`image_size` must be a multiple of 16 and at least 32. Got {self.image_size}.")
        if self.num_classes < 2:
            raise ValueError(f"`num_classes` must be at least 2. Got {self.num_classes}.")
        if self.crop > self.resize_short:
            raise ValueError(f"`crop` ({self.crop}) cannot exceed `resize_short` ({self.resize_short}).")
        if self.count < 1 or self.holdout < 0:
            raise ValueError(f"`count` must be positive and `holdout` nonnegative. Got {self.count}, {self.holdout}.")
        if self.augment and self.crop != self.image_size:
            raise ValueError(f"`crop` ({self.crop}) must equal `image_size` ({self.image_size}).")
        if self.crop % 16:
            raise ValueError(f"`crop` must be a multiple of 16. Got {self.crop}.")
        if self.low_res_rule not in ("majority", "nearest"):
            raise ValueError(f"`low_res_rule` must be `majority` or `nearest`. Got `{self.low_res_rule}`.")


@dataclass
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    out: str = "runs/default"

    def to_mapping(self) -> dict[str, Any]:
        """flat `key: value` view, the same keys a config file uses"""
        mapping: dict[str, Any] = {"out": self.out}
        mapping.update(dataclasses.asdict(self.train.weights))
        for section in (self.train, self.data):
            for f in dataclasses.fields(section):
                if f.name != "weights":
                    mapping[f.name] = getattr(section, f.name)
        return mapping

    def to_text(self) -> str:
        return "".join(f"{key} = {_format_value(value)}\n" for key, value in sorted(self.to_mapping().items()))

    def digest(self) -> str:
        """sha256 over the canonical text; `out` is excluded so moving a run keeps its digest"""
        text = "".join(
            f"{key} = {_format_value(value)}\n" for key, value in sorted(self.to_mapping().items()) if key != "out"
        )
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "ExperimentConfig":
        """builds a config from flat keys; profile and schedule defaults apply first

        Raises ValueError naming the key for unknown keys or values that cannot be coerced.
        """
        values = dict(values)
        profile = str(values.get("profile", "desk"))
        schedule = str(values.get("schedule", "lip"))
        if profile not in PROFILES:
            raise ValueError(f"`profile` must be one of {tuple(PROFILES)}. Got `{profile}`.")
        if schedule not in SCHEDULES:
            raise ValueError(f"`schedule` must be one of {tuple(SCHEDULES)}. Got `{schedule}`.")
        merged: dict[str, Any] = {**PROFILES[profile], **SCHEDULES[schedule], **values}

        sections: dict[str, dict[str, Any]] = {"weights": {}, "train": {}, "data": {}}
        targets = {
            "weights": LossWeights, "train": TrainConfig, "data": DataConfig,
        }
        field_types = {
            name: {f.name: f.type for f in dataclasses.fields(target)} for name, target in targets.items()
        }
        out = str(merged.pop("out", "runs/default"))
        for key, raw in merged.items():
            section = next((name for name, types in field_types.items() if key in types and key != "weights"), None)
            if section is None:
                raise ValueError(f"Unknown config key `{key}`.")
            try:
                sections[section][key] = _coerce(raw, field_types[section][key])
            except (TypeError, ValueError) as e:
                raise ValueError(f"Config field `{key}` has an invalid value `{raw}`: {e}") from None

        try:
            weights = LossWeights(**sections["weights"])
            train = TrainConfig(weights=weights, **sections["train"])
            data = DataConfig(**sections["data"])
        except ValueError as e:
            raise ValueError(f"Invalid config: {e}") from None
        return cls(train=train, data=data, out=out)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        """inverse of `to_text`"""
        return cls.from_mapping(parse_key_values(text))

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict[str, Any] | None = None) -> "ExperimentConfig":
        values = read_key_values(path)
        values.update(overrides or {})
        return cls.from_mapping(values)


ExperimentConfigType = TypeVar('ExperimentConfigType', bound=ExperimentConfig)
"""Object type ExperimentConfig"""


def read_key_values(path: str | Path) -> dict[str, str]:
    """parses `key = value` lines; `#` starts a comment, blank lines are skipped"""
    if isinstance(path, str):
        path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file `{path}` does not exist.")
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        encoding = chardet.detect(raw)["encoding"] or "latin-1"
        logger.warning(f"{path.name} is not utf-8, decoding as {encoding}")
        text = raw.decode(encoding)
    return parse_key_values(text, source=path.name)


def parse_key_values(text: str, source: str = "<text>") -> dict[str, str]:
    values: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{number} is not a `key = value` line: `{line}`")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"{source}:{number} has an empty key.")
        values[key] = value
    return values


def packaged_config(name: str) -> Path:
    """path to a config file shipped inside `mman/configs/`"""
    return Path(str(resources.files("mman") / "configs" / name))


def _format_value(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(_format_value(v) for v in value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _coerce(raw: Any, annotation: Any) -> Any:
    """turns config text into the dataclass field's type"""
    if not isinstance(raw, str):
        return tuple(raw) if isinstance(raw, list) else raw
    text = raw.strip()
    if isinstance(annotation, types.UnionType):
        if text.lower() in ("", "none"):
            return None
        annotation = next(arg for arg in typing.get_args(annotation) if arg is not type(None))

    if annotation is tuple or typing.get_origin(annotation) is tuple:
        return tuple(float(part) for part in text.split(",") if part.strip())
    match annotation.__name__:
        case "bool":
            if text.lower() in ("true", "yes", "1", "on"):
                return True
            if text.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError("expected true/false")
        case "int":
            return int(text)
        case "float":
            return float(text)
    return text


def resolve_config_path(name: str | Path) -> Path:
    """a file path, or the name of a config shipped with the package"""
    path = Path(name)
    return path if path.exists() else packaged_config(str(name))
