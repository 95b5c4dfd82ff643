"""Experiment configuration: JSON documents with per-field CLI overrides.

Unknown keys anywhere in the document are a hard error; a silent typo in a
sweep configuration would corrupt every cell downstream.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .datasets import (
    CsvFileSpec,
    DatasetSpec,
    GaussianMixtureSpec,
    GridSpec,
    RingSpec,
)
from .forward import AuxPolicy, FixedPerSample, Marginalized
from .sampler import TimeGrid

ENV_SEED = "HOLDLAB_SEED"

_POLICY_NAMES = ("fixed", "marginalized", "both")


class ConfigError(ValueError):
    """Malformed or contradictory experiment configuration."""


@dataclass
class ExperimentConfig:
    orders: list[int] = field(default_factory=lambda: [1, 2, 3])
    dataset: DatasetSpec = field(
        default_factory=lambda: GaussianMixtureSpec(k=8, spread=6.0, dim=2)
    )
    n_train: list[int] = field(default_factory=lambda: [8])
    runs: int = 512
    tau: float = 0.333
    l_inv: float = 1.0
    alpha: float = 1.0
    ou_xi: float = 1.0
    grid: TimeGrid = field(default_factory=TimeGrid)
    aux_policy: str = "fixed"
    seed: int = 0
    out_dir: str = "out"

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not (0.0 < self.tau < 1.0):
            raise ConfigError("tau must lie in (0, 1)")
        if self.l_inv <= 0 or self.alpha <= 0 or self.ou_xi <= 0:
            raise ConfigError("l_inv, alpha, and ou_xi must be positive")
        if not self.orders or any(o < 1 for o in self.orders):
            raise ConfigError("orders must be a nonempty list of integers >= 1")
        if not self.n_train or any(m < 1 for m in self.n_train):
            raise ConfigError("n_train must be a positive integer or list of them")
        if self.aux_policy not in _POLICY_NAMES:
            raise ConfigError(f"aux_policy must be one of {_POLICY_NAMES}")

    def policies(self) -> list[tuple[str, AuxPolicy]]:
        fixed = ("fixed", FixedPerSample(seed=self.seed))
        marg = ("marginalized", Marginalized())
        if self.aux_policy == "fixed":
            return [fixed]
        if self.aux_policy == "marginalized":
            return [marg]
        return [fixed, marg]

    def to_json_dict(self) -> dict:
        return {
            "orders": list(self.orders),
            "dataset": _dataset_to_dict(self.dataset),
            "n_train": list(self.n_train),
            "runs": self.runs,
            "tau": self.tau,
            "l_inv": self.l_inv,
            "alpha": self.alpha,
            "ou_xi": self.ou_xi,
            "grid": {
                "t_start": self.grid.t_start,
                "t_end": self.grid.t_end,
                "steps": self.grid.steps,
                "spacing": self.grid.spacing,
            },
            "aux_policy": self.aux_policy,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }


_DATASET_KINDS = {
    "gaussian_mixture": (GaussianMixtureSpec, {"k": int, "spread": float, "dim": int}),
    "ring": (RingSpec, {"radius": float, "noise": float, "dim": int}),
    "grid": (GridSpec, {"side": int, "dim": int}),
    "csv": (CsvFileSpec, {"path": str}),
}


def _dataset_to_dict(spec: DatasetSpec) -> dict:
    for kind, (cls, fields) in _DATASET_KINDS.items():
        if isinstance(spec, cls):
            return {"kind": kind, **{f: getattr(spec, f) for f in fields}}
    raise TypeError(f"unknown dataset spec {spec!r}")


def parse_dataset(value) -> DatasetSpec:
    """Parse a dataset spec from a JSON dict or a ``kind:key=val,...`` string."""
    if isinstance(value, (GaussianMixtureSpec, RingSpec, GridSpec, CsvFileSpec)):
        return value
    if isinstance(value, str):
        kind, _, rest = value.partition(":")
        payload: dict = {"kind": kind.strip()}
        if rest:
            for item in rest.split(","):
                key, _, raw = item.partition("=")
                if not _:
                    raise ConfigError(f"bad dataset field {item!r} (want key=value)")
                payload[key.strip()] = raw.strip()
        value = payload
    if not isinstance(value, dict):
        raise ConfigError(f"dataset spec must be a dict or string, got {value!r}")
    payload = dict(value)
    kind = payload.pop("kind", None)
    if kind not in _DATASET_KINDS:
        raise ConfigError(
            f"unknown dataset kind {kind!r}; expected one of {sorted(_DATASET_KINDS)}"
        )
    cls, fields = _DATASET_KINDS[kind]
    unknown = set(payload) - set(fields)
    if unknown:
        raise ConfigError(f"unknown dataset keys for {kind}: {sorted(unknown)}")
    kwargs = {}
    for name, conv in fields.items():
        if name in payload:
            try:
                kwargs[name] = conv(payload[name])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for dataset.{name}: {exc}") from None
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _parse_grid(value) -> TimeGrid:
    if isinstance(value, TimeGrid):
        return value
    if not isinstance(value, dict):
        raise ConfigError("grid must be an object")
    allowed = {"t_start": float, "t_end": float, "steps": int, "spacing": str}
    unknown = set(value) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
    kwargs = {k: allowed[k](v) for k, v in value.items()}
    try:
        return TimeGrid(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _as_int_list(value, name: str) -> list[int]:
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        try:
            return [int(v) for v in value]
        except (TypeError, ValueError):
            pass
    raise ConfigError(f"{name} must be an integer or list of integers")


def config_from_dict(doc: dict) -> ExperimentConfig:
    allowed = {
        "orders",
        "dataset",
        "n_train",
        "runs",
        "tau",
        "l_inv",
        "alpha",
        "ou_xi",
        "grid",
        "aux_policy",
        "seed",
        "out_dir",
    }
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    if "orders" in doc:
        kwargs["orders"] = _as_int_list(doc["orders"], "orders")
    if "dataset" in doc:
        kwargs["dataset"] = parse_dataset(doc["dataset"])
    if "n_train" in doc:
        kwargs["n_train"] = _as_int_list(doc["n_train"], "n_train")
    for name, conv in (
        ("runs", int),
        ("tau", float),
        ("l_inv", float),
        ("alpha", float),
        ("ou_xi", float),
        ("seed", int),
        ("out_dir", str),
        ("aux_policy", str),
    ):
        if name in doc:
            try:
                kwargs[name] = conv(doc[name])
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {name}: {doc[name]!r}") from None
    if "grid" in doc:
        kwargs["grid"] = _parse_grid(doc["grid"])
    if "seed" not in kwargs and ENV_SEED in os.environ:
        try:
            kwargs["seed"] = int(os.environ[ENV_SEED])
        except ValueError:
            raise ConfigError(f"{ENV_SEED} must be an integer") from None
    return ExperimentConfig(**kwargs)


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    """Load a JSON config file (optional) and apply CLI overrides on top."""
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("grid.t_start", "grid.t_end", "grid.steps", "grid.spacing"):
            grid = dict(doc.get("grid", {})) if isinstance(doc.get("grid"), dict) else {}
            grid[key.split(".", 1)[1]] = value
            doc["grid"] = grid
        else:
            doc[key] = value
    return config_from_dict(doc)


def write_resolved_config(config: ExperimentConfig, out_dir: Path) -> None:
    text = json.dumps(config.to_json_dict(), indent=2, sort_keys=True)
    (out_dir / "resolved_config.json").write_text(text + "\n", encoding="utf-8")
