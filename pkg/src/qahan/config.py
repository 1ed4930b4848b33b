"""Run configuration schema. Defaults follow the published experiment table.

A config is one JSON document::

    {"dataset": {...}, "network": {...}, "solver": {...},
     "noise": {...}, "seed": 0, "output_dir": "runs/x"}

Dataset-dependent defaults (batch size 32/64, epochs 70/100, input shape)
are filled in from ``dataset.name`` when not given explicitly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .solvers import QA_SIM_MAX_N, Solver, make_solver

DATASET_DEFAULTS = {
    "mnist": {"in_channels": 1, "image_size": 28, "batch_size": 32, "epochs": 70},
    "cifar10": {"in_channels": 3, "image_size": 32, "batch_size": 64, "epochs": 100},
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConvConfig(_Strict):
    out_channels: int = Field(gt=0)
    kernel: int = Field(5, gt=0)
    stride: int = Field(2, gt=0)
    padding: int = Field(2, ge=0)

    def out_size(self, size: int) -> int:
        return (size + 2 * self.padding - self.kernel) // self.stride + 1


class QahamConfig(_Strict):
    lambda1: float = Field(1.0, ge=0)
    lambda2: float = Field(1.0, ge=0)
    k: int = Field(100, ge=0)
    cadence: Literal["per_epoch", "per_batch"] = "per_epoch"
    # (l, m) blocks; None means a square grid over the flattened features
    grid: Optional[tuple[int, int]] = None
    block: tuple[int, int] = (1, 1)
    # scale the Gram matrix to unit max-abs before adding penalties
    normalize_q: bool = True


class NetworkConfig(_Strict):
    in_channels: int = Field(1, gt=0)
    image_size: int = Field(28, gt=0)
    conv1: ConvConfig = ConvConfig(out_channels=32)
    conv2: ConvConfig = ConvConfig(out_channels=64)
    dropout_rate: float = Field(0.5, ge=0, lt=1)
    fc_in: Optional[int] = None
    fc_out: int = Field(10, gt=0)
    lr: float = Field(0.001, gt=0)
    batch_size: int = Field(32, gt=0)
    epochs: int = Field(70, ge=0)
    qaham: QahamConfig = QahamConfig()

    @property
    def feature_shape(self) -> tuple[int, int, int]:
        s = self.conv2.out_size(self.conv1.out_size(self.image_size))
        return self.conv2.out_channels, s, s

    @property
    def features(self) -> int:
        c, h, w = self.feature_shape
        return c * h * w

    @property
    def grid(self) -> tuple[int, int]:
        if self.qaham.grid is not None:
            return self.qaham.grid
        bh, bw = self.qaham.block
        side = math.isqrt(self.features // (bh * bw))
        return side, side

    @property
    def n_vars(self) -> int:
        l, m = self.grid
        return l * m

    @model_validator(mode="after")
    def _check_dimensions(self):
        c, h, w = self.feature_shape
        if h < 1:
            raise ValueError("convolutions shrink the input below one pixel")
        if self.fc_in is not None and self.fc_in != self.features:
            raise ValueError(
                f"fc_in={self.fc_in} but two convolutions produce {c}x{h}x{w}={self.features}"
            )
        l, m = self.grid
        bh, bw = self.qaham.block
        if l * m * bh * bw != self.features:
            raise ValueError(
                f"qaham grid {l}x{m} of {bh}x{bw} blocks does not cover {self.features} features"
            )
        if self.qaham.k > l * m:
            raise ValueError(f"qaham.k={self.qaham.k} exceeds the {l * m} mask variables")
        return self


class SolverConfig(_Strict):
    backend: Literal["exact", "sa", "qa_sim"] = "sa"
    sweeps: int = Field(1000, gt=0)
    restarts: int = Field(4, gt=0)
    t_initial: Optional[float] = Field(None, gt=0)
    t_final: Optional[float] = Field(None, gt=0)
    total_time: float = Field(20.0, gt=0)
    steps: Optional[int] = Field(None, gt=0)
    shots: int = Field(1000, gt=0)

    def build(self) -> Solver:
        if self.backend == "exact":
            return make_solver("exact")
        if self.backend == "sa":
            return make_solver(
                "sa",
                sweeps=self.sweeps,
                restarts=self.restarts,
                t_initial=self.t_initial,
                t_final=self.t_final,
            )
        return make_solver("qa_sim", total_time=self.total_time, steps=self.steps, shots=self.shots)


class DatasetConfig(_Strict):
    name: Literal["mnist", "cifar10"] = "mnist"
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    train_batches: list[str] = []
    test_batches: list[str] = []
    train_size: int = Field(50000, gt=0)
    test_size: int = Field(1000, gt=0)

    @model_validator(mode="after")
    def _check_paths(self):
        if self.name == "mnist":
            missing = [
                f
                for f in ("train_images", "train_labels", "test_images", "test_labels")
                if getattr(self, f) is None
            ]
            if missing:
                raise ValueError(f"mnist dataset needs paths for {', '.join(missing)}")
        elif not self.train_batches or not self.test_batches:
            raise ValueError("cifar10 dataset needs train_batches and test_batches")
        return self

    def paths(self) -> list[str]:
        if self.name == "mnist":
            return [self.train_images, self.train_labels, self.test_images, self.test_labels]
        return [*self.train_batches, *self.test_batches]


class NoiseConfig(_Strict):
    enabled: bool = False
    intensity: float = Field(0.2, ge=0)


class RunConfig(_Strict):
    dataset: DatasetConfig
    network: NetworkConfig = NetworkConfig()
    solver: SolverConfig = SolverConfig()
    noise: NoiseConfig = NoiseConfig()
    seed: int = 0
    output_dir: str = "runs/default"

    @model_validator(mode="before")
    @classmethod
    def _dataset_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        ds = data.get("dataset") or {}
        name = ds.get("name", "mnist") if isinstance(ds, dict) else "mnist"
        net = dict(data.get("network") or {})
        for key, value in DATASET_DEFAULTS.get(name, {}).items():
            net.setdefault(key, value)
        return {**data, "network": net}

    @model_validator(mode="after")
    def _check_backend(self):
        if self.solver.backend == "qa_sim" and self.network.n_vars > QA_SIM_MAX_N:
            raise ValueError(
                f"solver.backend qa_sim supports at most {QA_SIM_MAX_N} mask variables, "
                f"network grid has {self.network.n_vars}"
            )
        return self

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict, **overrides) -> RunConfig:
    """Validate a config dict; ``overrides`` replace top-level keys when not None."""
    data = dict(data)
    for key, value in overrides.items():
        if value is not None:
            if key == "backend":
                data["solver"] = {**(data.get("solver") or {}), "backend": value}
            else:
                data[key] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return parse_config(data, **overrides)
