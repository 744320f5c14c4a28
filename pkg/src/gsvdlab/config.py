"""Strict JSON run configuration. Unknown keys are errors."""
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from . import jsonio
from .errors import ConfigError


@dataclass
class DatasetSpec:
    kind: str = "blobs"  # "blobs" | "idx"
    classes: int = 2
    per_class: int = 1000
    dim: int = 2
    separation: float = 10.0
    images: str | None = None
    labels: str | None = None
    limit: int | None = None


@dataclass
class SplitSpec:
    train: int = 400
    construct: int = 1000
    holdout: int = 500


@dataclass
class NetSpec:
    hidden: list = field(default_factory=lambda: [32])
    encode_dim: int | None = None
    activation: str = "tanh"
    code_scale: float = 1.0


@dataclass
class TrainSpec:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    on_value: float = 10.0
    off_value: float = 0.1
    sv_cutoff: float = 4.0
    loss_weights: list = field(default_factory=lambda: [1.0, 1.0, 1.0])


@dataclass
class ConstructionSpec:
    epsilon: float = 0.1
    gain_search: bool = True
    seeds_per_coord: int = 3
    steps: int = 200
    lr: float | None = None
    fd_eps: float | None = None
    anchor: str = "auto"  # "auto" | "none" | "mean"
    canonical: bool = False  # rotate logits into K's singular basis (ground-truth gains)


@dataclass
class AttackSpec:
    step: float = 0.25
    budget: float = 20.0
    fd_eps: float = 1e-3
    clip: list | None = field(default_factory=lambda: [0.0, 1.0])
    central: bool = False
    fixed_target: int | None = None
    samples: int = 100


@dataclass
class BiasSpec:
    target_class: int = 0
    ratios: list = field(default_factory=lambda: [1.0, 0.3, 0.1, 0.03])


@dataclass
class TraverseSpec:
    class_idx: int = 0
    noise_scale: float = 1.0
    samples: int = 8
    steps: int = 8
    y1_class: int = 0
    y2_class: int = 1
    scale_by_on_value: bool = False


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs/default"
    timing: bool = True
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    split: SplitSpec = field(default_factory=SplitSpec)
    net: NetSpec = field(default_factory=NetSpec)
    train: TrainSpec = field(default_factory=TrainSpec)
    construction: ConstructionSpec = field(default_factory=ConstructionSpec)
    attack: AttackSpec = field(default_factory=AttackSpec)
    bias: BiasSpec = field(default_factory=BiasSpec)
    traverse: TraverseSpec = field(default_factory=TraverseSpec)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        cfg = _build(cls, d, "config")
        cfg.check()
        return cfg

    def check(self):
        if self.dataset.kind not in ("blobs", "idx"):
            raise ConfigError(f"dataset.kind must be 'blobs' or 'idx', got {self.dataset.kind!r}")
        if self.dataset.kind == "idx" and not self.dataset.images:
            raise ConfigError("dataset.images is required for idx datasets")
        if self.construction.anchor not in ("auto", "none", "mean"):
            raise ConfigError("construction.anchor must be auto, none or mean")
        if not 0 < self.construction.epsilon < 1:
            raise ConfigError("construction.epsilon must lie in (0, 1)")
        for name in ("train", "construct", "holdout"):
            if getattr(self.split, name) < 1:
                raise ConfigError(f"split.{name} must be >= 1")
        if any(not 0 < r <= 1 for r in self.bias.ratios):
            raise ConfigError("bias.ratios must lie in (0, 1]")
        if self.attack.clip is not None and len(self.attack.clip) != 2:
            raise ConfigError("attack.clip must be [lo, hi] or null")

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


_NESTED = {
    "dataset": DatasetSpec, "split": SplitSpec, "net": NetSpec, "train": TrainSpec,
    "construction": ConstructionSpec, "attack": AttackSpec, "bias": BiasSpec, "traverse": TraverseSpec,
}


def _check_type(value, default, where):
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
    return value


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    obj = cls()
    for k, v in d.items():
        if cls is RunConfig and k in _NESTED:
            setattr(obj, k, _build(_NESTED[k], v, f"{where}.{k}"))
        else:
            setattr(obj, k, _check_type(v, getattr(obj, k), f"{where}.{k}"))
    return obj


def load_config(path):
    try:
        raw = jsonio.load(path)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config ({e.strerror})") from e
    return RunConfig.from_dict(raw)


def dump_config(cfg, path):
    jsonio.dump(cfg.to_dict(), path)
