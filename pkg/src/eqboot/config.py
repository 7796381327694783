"""Experiment configuration: JSON schema validation, defaults and object construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .bootstrap import BootstrapConfig
from .core import NoiseModel
from .groups import GroupAction
from .operators import LinearOperator, box_kernel, circular_blur, gaussian_cs, inpainting_mask

__all__ = ["ConfigError", "load_schema", "load_config", "resolve_config", "Experiment",
           "bundled_configs", "bundled_config_path"]


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


def load_schema() -> dict:
    text = resources.files("eqboot").joinpath("schema/experiment.schema.json").read_text()
    return json.loads(text)


def bundled_configs() -> list[str]:
    root = resources.files("eqboot").joinpath("configs")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def bundled_config_path(name: str) -> Path:
    path = Path(str(resources.files("eqboot").joinpath("configs", name)))
    if not path.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return path


def _field(error: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in error.absolute_path) or "<root>"


def _fill_defaults(schema: dict, node: dict, root: dict) -> None:
    for key, sub in schema.get("properties", {}).items():
        if "$ref" in sub:
            sub = root["$defs"][sub["$ref"].rsplit("/", 1)[-1]]
        if key not in node and "default" in sub:
            node[key] = copy.deepcopy(sub["default"])
        if sub.get("type") == "object":
            node.setdefault(key, {})
            _fill_defaults(sub, node[key], root)
        if sub.get("type") == "array" and isinstance(sub.get("items"), dict) and key in node:
            for item in node[key]:
                if isinstance(item, dict):
                    _fill_defaults(sub["items"], item, root)


def resolve_config(raw: dict) -> dict:
    """Validate ``raw`` and return a fully resolved copy with every default filled in."""
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"field '{_field(e)}': {e.message}")
    cfg = copy.deepcopy(raw)
    _fill_defaults(schema, cfg, schema)
    H, W = cfg["image_shape"]
    n = H * W
    op = cfg["operator"]
    problem = cfg["problem"]
    if problem == "compressed_sensing":
        op.setdefault("m", max(1, n // 3))
    elif problem == "inpainting":
        op.setdefault("p", 0.5)
    else:
        op.setdefault("kernel_shape", [7, 1])
        kh, kw = op["kernel_shape"]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ConfigError(f"field 'operator.kernel_shape': dimensions must be odd, got {[kh, kw]}")
        if kh > H or kw > W:
            raise ConfigError("field 'operator.kernel_shape': kernel larger than the image")
    extra = set(op) - {"compressed_sensing": {"m"}, "inpainting": {"p"}, "deblur": {"kernel_shape"}}[problem]
    if extra:
        raise ConfigError(f"field 'operator': {sorted(extra)} not used by problem {problem!r}")
    if "arms" not in cfg:
        arms = [{"name": "naive", "max_shift": 0, "rotations": False}]
        g = cfg["group"]
        if g["max_shift"] > 0 or g["rotations"]:
            arms.append({"name": "equivariant", **g})
        cfg["arms"] = arms
    names = [a["name"] for a in cfg["arms"]]
    if len(set(names)) != len(names):
        raise ConfigError(f"field 'arms': duplicate arm names {names}")
    groups = [cfg["group"]] + cfg["arms"]
    if H != W and any(g["rotations"] for g in groups):
        raise ConfigError(f"field 'group.rotations': rotations need a square image, got {[H, W]}")
    levels = cfg["levels"]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("field 'levels': must be strictly ascending")
    sig = cfg["signal"]
    if sig["invariance"] == "auto":
        shifts = any(g["max_shift"] > 0 for g in groups)
        rots = any(g["rotations"] for g in groups)
        sig["invariance"] = {(False, False): "none", (True, False): "shifts",
                             (False, True): "rotations", (True, True): "shifts_rotations"}[(shifts, rots)]
    if H != W and sig["invariance"] in ("rotations", "shifts_rotations"):
        raise ConfigError("field 'signal.invariance': rotations need a square image")
    return cfg


def load_config(path) -> dict:
    """Read, validate and resolve a config file; every failure is a ``ConfigError``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return resolve_config(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _action(shape, desc: dict) -> GroupAction | None:
    if desc["max_shift"] == 0 and not desc["rotations"]:
        return None
    return GroupAction(shape, desc["max_shift"], desc["rotations"])


@dataclass
class Experiment:
    """Objects built from a resolved config; random pieces come from the master seed's streams."""

    config: dict
    operator: LinearOperator
    noise: NoiseModel
    model: object
    estimator: object
    arms: dict

    @classmethod
    def from_config(cls, cfg: dict) -> "Experiment":
        from .experiments import (build_estimator, make_invariant_model, model_stream,
                                  operator_stream, train_stream)

        shape = tuple(cfg["image_shape"])
        seed = cfg["master_seed"]
        op = cfg["operator"]
        if cfg["problem"] == "compressed_sensing":
            A = gaussian_cs(shape[0] * shape[1], op["m"], operator_stream(seed), shape)
        elif cfg["problem"] == "inpainting":
            A = inpainting_mask(shape, op["p"], operator_stream(seed))
        else:
            A = circular_blur(shape, box_kernel(*op["kernel_shape"]))
        sig = cfg["signal"]
        inv = sig["invariance"]
        action = GroupAction(shape, max_shift=1 if "shifts" in inv else 0,
                             rotations=inv in ("rotations", "shifts_rotations"))
        model = make_invariant_model(action, shape, sig["k"], model_stream(seed), sig["cutoff"],
                                     sig["coeff_sigma"])
        noise = NoiseModel(cfg["noise"]["sigma"])
        est = build_estimator(cfg["estimator"], A, model, noise, train_stream(seed))
        bs = cfg["bootstrap"]
        arms = {a["name"]: BootstrapConfig(bs["n_samples"], bs["error_mode"], _action(shape, a))
                for a in cfg["arms"]}
        return cls(cfg, A, noise, model, est, arms)

    def primary_config(self) -> BootstrapConfig:
        """Bootstrap settings from the top-level ``group`` field."""
        bs = self.config["bootstrap"]
        return BootstrapConfig(bs["n_samples"], bs["error_mode"],
                               _action(self.operator.image_shape, self.config["group"]))
