"""Run configuration and model loading from YAML."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from . import dephasing as dp

ANALYSES = ("robustness", "witness", "n_beta", "n_blp", "n_rhp", "tomo_sim", "fit")
DYNAMICS = ("global", "local")
SINGLE_DEFAULT_T2 = 60.0


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 1."""


@dataclass(frozen=True)
class Division:
    """``half`` (t1 = t2/2), an explicit ``t1``, or a uniform ``grid`` of divisions."""

    mode: str = "half"
    t1: float | None = None
    points: int = 50

    @classmethod
    def parse(cls, value: Any, points: int = 50) -> "Division":
        if isinstance(value, Division):
            return value
        if value is None or value == "half":
            return cls("half", points=points)
        if value == "grid":
            return cls("grid", points=points)
        try:
            return cls("explicit", float(value), points)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid division {value!r}; expected 'half', 'grid' or a number") from None

    def times(self, t2: float) -> list[float]:
        if self.mode == "half":
            return [t2 / 2.0]
        if self.mode == "explicit":
            return [float(self.t1)]
        # open at t2 itself, where the intermediate map is the identity
        return [t2 * k / self.points for k in range(self.points)]

    def describe(self) -> str | float:
        return self.t1 if self.mode == "explicit" else self.mode


@dataclass(frozen=True)
class RunConfig:
    model: dp.SinglePhotonModel | dp.TwoPhotonModel
    t2: float
    division: Division = field(default_factory=Division)
    analysis: tuple[str, ...] = ("robustness",)
    dynamics: str = "global"
    shots: int | None = None
    seed: int | None = None
    output_dir: Path | None = None
    beta_method: str = "sdp"
    noise: float = 0.01

    def __post_init__(self):
        if not self.analysis:
            raise ConfigError("at least one analysis is required")
        bad = [a for a in self.analysis if a not in ANALYSES]
        if bad:
            raise ConfigError(f"unknown analysis {bad[0]!r}; choose from {', '.join(ANALYSES)}")
        if self.dynamics not in DYNAMICS:
            raise ConfigError(f"dynamics must be one of {DYNAMICS}, got {self.dynamics!r}")
        if not self.t2 > 0:
            raise ConfigError(f"t2 must be positive, got {self.t2}")
        if self.division.mode == "explicit" and not 0 <= self.division.t1 < self.t2:
            raise ConfigError(f"explicit division needs 0 <= t1 < t2, got t1={self.division.t1}, t2={self.t2}")
        if self.division.points < 2:
            raise ConfigError("a division grid needs at least 2 points")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be a positive integer")
        if self.beta_method not in ("sdp", "spectral"):
            raise ConfigError("beta_method must be 'sdp' or 'spectral'")
        if self.is_two_photon and self.t2 > 2 * self.model.switchover:
            raise ConfigError(f"t2 must not exceed {2 * self.model.switchover:g} for the two-plate model")

    @property
    def is_two_photon(self) -> bool:
        return isinstance(self.model, dp.TwoPhotonModel)

    @property
    def t1_values(self) -> list[float]:
        return self.division.times(self.t2)

    def to_record(self) -> dict:
        return {
            "model": model_record(self.model),
            "t2": self.t2,
            "division": self.division.describe(),
            "analysis": list(self.analysis),
            "dynamics": self.dynamics,
            "shots": self.shots,
            "seed": self.seed,
            "beta_method": self.beta_method,
        }


def default_t2(model) -> float:
    return 2.0 * model.switchover if isinstance(model, dp.TwoPhotonModel) else SINGLE_DEFAULT_T2


def model_record(m) -> dict:
    if isinstance(m, dp.TwoPhotonModel):
        return {"type": "two_photon", "name": m.name, "K": m.K, "omega0": m.omega0,
                "delta_fwhm": m.delta_fwhm, "C": m.C, "delta_n": m.delta_n, "switchover": m.switchover}
    return {"type": "single_photon", "name": m.name, "delta_n": m.delta_n,
            "peaks": [{"weight": p.weight, "center": p.center, "width": p.width} for p in m.peaks]}


def model_from_mapping(d: Mapping[str, Any]):
    if not isinstance(d, Mapping):
        raise ConfigError("model must be a preset name or a mapping")
    if "preset" in d:
        base = _preset(d["preset"])
        extra = {k: v for k, v in d.items() if k != "preset"}
        return _override(base, extra) if extra else base
    kind = d.get("type")
    try:
        if kind in ("single", "single_photon"):
            peaks = tuple(dp.SpectrumPeak(float(p["weight"]), float(p["center"]), float(p["width"]))
                          for p in d["peaks"])
            return dp.SinglePhotonModel(peaks, float(d["delta_n"]), str(d.get("name", "custom")))
        if kind in ("two", "two_photon"):
            return dp.TwoPhotonModel(
                float(d["K"]), float(d.get("omega0", 390.0)), float(d["delta_fwhm"]), float(d["C"]),
                float(d["delta_n"]), float(d.get("switchover", dp.DEFAULT_SWITCHOVER)),
                str(d.get("name", "custom")),
            )
    except KeyError as e:
        raise ConfigError(f"model is missing field {e.args[0]!r}") from None
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid model: {e}") from None
    raise ConfigError(f"model type must be 'single_photon' or 'two_photon', got {kind!r}")


def _override(m, extra: Mapping[str, Any]):
    rec = model_record(m)
    rec.update(extra)
    return model_from_mapping(rec)


def _preset(name: str):
    try:
        return dp.preset(str(name))
    except KeyError as e:
        raise ConfigError(e.args[0]) from None


def load_yaml(path: str | Path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML ({e})") from None
    if data is None:
        raise ConfigError(f"{path}: empty configuration")
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return dict(data)


def load_model(spec: str):
    """A preset name, or a YAML file holding a model (bare or under ``model:``)."""
    p = Path(spec)
    if p.suffix.lower() in (".yaml", ".yml", ".cfg") or p.exists():
        data = load_yaml(p)
        return model_from_mapping(data.get("model", data))
    return _preset(spec)


def build_config(mapping: Mapping[str, Any]) -> RunConfig:
    """Validate a plain mapping (YAML contents merged with CLI flags)."""
    known = {"model", "preset", "t2", "division", "grid_points", "analysis", "dynamics", "shots", "seed",
             "output_dir", "beta_method", "noise"}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    if "model" in mapping and mapping["model"] is not None:
        raw = mapping["model"]
        model = _preset(raw) if isinstance(raw, str) else model_from_mapping(raw)
    elif mapping.get("preset"):
        model = _preset(mapping["preset"])
    else:
        raise ConfigError("no model given; use --preset, --model or a config with a 'model' entry")
    analysis = mapping.get("analysis")
    if analysis is None:
        analysis = ["robustness"]
    if isinstance(analysis, str):
        analysis = [a.strip() for a in analysis.split(",") if a.strip()]
    try:
        t2 = float(mapping["t2"]) if mapping.get("t2") is not None else default_t2(model)
        shots = int(mapping["shots"]) if mapping.get("shots") is not None else None
        seed = int(mapping["seed"]) if mapping.get("seed") is not None else None
        points = int(mapping.get("grid_points", 50))
        noise = float(mapping.get("noise", 0.01))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid numeric setting: {e}") from None
    out = mapping.get("output_dir")
    return RunConfig(
        model=model,
        t2=t2,
        division=Division.parse(mapping.get("division"), points),
        analysis=tuple(analysis),
        dynamics=str(mapping.get("dynamics", "global")),
        shots=shots,
        seed=seed,
        output_dir=Path(out) if out else None,
        beta_method=str(mapping.get("beta_method", "sdp")),
        noise=noise,
    )
