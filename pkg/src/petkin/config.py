"""Experiment configuration: JSON files validated against a versioned schema."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .kinetics import FengCoefficients, FrameSchedule, InputFunction, KineticParams, Tracer

SCHEMA_VERSION = 1
PRESETS = ("task1", "task2", "task3", "desk")


class ConfigError(ValueError):
    pass


def _obj(props: dict, required=()):
    return {"type": "object", "properties": props, "additionalProperties": False, "required": list(required)}


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_int0 = {"type": "integer", "minimum": 0}
_bool = {"type": "boolean"}

SCHEMA = _obj(
    {
        "version": {"const": SCHEMA_VERSION},
        "task": {"type": "string"},
        "tracer": {"type": "string"},
        "phantom": _obj(
            {
                "kind": {"enum": ["brain", "thorax"]},
                "size": {"type": "integer", "minimum": 16},
                "n_rois": {"type": ["integer", "null"], "minimum": 1},
                "warp": _nonneg,
            }
        ),
        "schedule": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
        },
        "roi_means": {
            "type": ["array", "null"],
            "items": {"type": "array", "items": _nonneg, "minItems": 4, "maxItems": 5},
        },
        "param_cv": _nonneg,
        "noise": _obj({"level": _pos, "base_counts": _pos}),
        "osem": _obj({"iterations": _int1, "subsets": _int1}),
        "dataset": _obj({"n_train": _int0, "n_test": _int0}),
        "input_frames": _int1,
        "fit_window": {"type": "integer", "minimum": 2},
        "network": _obj(
            {
                "blocks": _int0,
                "hidden": _int1,
                "layers": _int1,
                "slope": _nonneg,
                "sigma": _pos,
                "param_scale": {"type": "array", "items": _pos, "minItems": 4, "maxItems": 4},
            }
        ),
        "train": _obj(
            {
                "epochs": _int1,
                "batch_size": _int1,
                "lr": _pos,
                "halve_every": _int1,
                "betas": {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2},
                "eps": _pos,
                "weights": {"type": "array", "items": _nonneg, "minItems": 3, "maxItems": 3},
                "losses": _obj({"L2": _bool, "L3": _bool, "L4": _bool}),
                "aux_weight": _nonneg,
                "fd_step": _pos,
                "swap_l1_l2": _bool,
            }
        ),
        "seed": _int0,
        "threads": {"type": ["integer", "null"], "minimum": 1},
        "out": {"type": "string"},
    }
)

DEFAULTS = {
    "version": SCHEMA_VERSION,
    "task": "custom",
    "tracer": "FDG",
    "phantom": {"kind": "brain", "size": 128, "n_rois": None, "warp": 0.04},
    "schedule": [[4, 30], [4, 120], [10, 300]],
    "roi_means": None,
    "param_cv": 0.2,
    "noise": {"level": 0.2, "base_counts": 1e6},
    "osem": {"iterations": 6, "subsets": 5},
    "dataset": {"n_train": 180, "n_test": 20},
    "input_frames": 12,
    "fit_window": 10,
    "network": {
        "blocks": 6,
        "hidden": 32,
        "layers": 4,
        "slope": 0.01,
        "sigma": 2.0,
        "param_scale": [0.1, 0.1, 0.1, 0.1],
    },
    "train": {
        "epochs": 300,
        "batch_size": 1,
        "lr": 1e-4,
        "halve_every": 50,
        "betas": [0.9, 0.999],
        "eps": 1e-8,
        "weights": [1.2, 1.0, 1.0],
        "losses": {"L2": True, "L3": True, "L4": True},
        "aux_weight": 1.0,
        "fd_step": 1e-4,
        "swap_l1_l2": False,
    },
    "seed": 0,
    "threads": None,
    "out": "runs/custom",
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _tracer_presets() -> dict:
    text = resources.files("petkin").joinpath("presets/tracers.json").read_text(encoding="utf-8")
    return {k: v for k, v in json.loads(text).items() if not k.startswith("_")}


class ExperimentConfig:
    """Validated experiment settings with typed accessors."""

    def __init__(self, data: dict | None = None):
        data = data or {}
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config error at {where}: {exc.message}") from exc
        self.data = _merge(DEFAULTS, data)
        presets = _tracer_presets()
        if self.data["tracer"] not in presets:
            raise ConfigError(f"unknown tracer {self.data['tracer']!r}; known: {sorted(presets)}")
        self._tracer_preset = presets[self.data["tracer"]]
        if self.data["fit_window"] > self.schedule.n_frames:
            raise ConfigError("fit_window exceeds the number of frames")
        if self.data["input_frames"] > self.schedule.n_frames:
            raise ConfigError("input_frames exceeds the number of frames")

    def __getitem__(self, key):
        return self.data[key]

    def with_overrides(self, **overrides) -> ExperimentConfig:
        data = _merge(self.data, overrides)
        return ExperimentConfig(data)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    @property
    def tracer(self) -> Tracer:
        p = self._tracer_preset
        return Tracer.from_half_life(self.data["tracer"], p["half_life_min"], p["reversible"])

    @property
    def input_function(self) -> InputFunction:
        return InputFunction(feng=FengCoefficients(**self._tracer_preset["feng"]))

    @property
    def schedule(self) -> FrameSchedule:
        return FrameSchedule.from_durations([(int(n), float(s)) for n, s in self.data["schedule"]])

    @property
    def graphical_mode(self) -> str:
        return "logan" if self.tracer.reversible else "patlak"

    @property
    def roi_means(self) -> list[KineticParams]:
        rows = self.data["roi_means"]
        if rows is None:
            rows = self._tracer_preset["roi_means"][self.data["phantom"]["kind"]]
        means = [KineticParams.from_array(r) for r in rows]
        if not self.tracer.reversible and any(m.k4 != 0 for m in means):
            raise ConfigError("irreversible tracers need k4 means of 0")
        return means

    @property
    def seed(self) -> int:
        return int(self.data["seed"])


def load_config(source=None) -> ExperimentConfig:
    """Load a config from a JSON path, a preset name (``task1``..``task3``, ``desk``) or a dict."""
    if source is None:
        return ExperimentConfig({})
    if isinstance(source, dict):
        return ExperimentConfig(source)
    if isinstance(source, ExperimentConfig):
        return source
    name = str(source)
    if name in PRESETS:
        text = resources.files("petkin").joinpath(f"presets/{name}.json").read_text(encoding="utf-8")
    else:
        path = Path(name)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return ExperimentConfig(data)
