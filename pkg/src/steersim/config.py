"""Experiment configuration schema.

Configs are JSON documents; every physical field carries its unit in the
name (``_rad_s``, ``_m``, ``_s``, ``_hz``).  Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigInvalid

__all__ = ["ExperimentConfig", "load_config", "parse_config", "canonical_json",
           "config_hash"]

Infinity = Union[float, Literal["inf"]]


def _inf(v) -> float:
    return math.inf if v == "inf" else float(v)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SourceConfig(_Strict):
    pump_center_rad_s: float = Field(4.65e15, gt=0)
    pump_bandwidth_sigma_rad_s: float = Field(0.0, ge=0)
    signal_center_rad_s: float | None = Field(None, gt=0)
    phase_matching_sigma_rad_s: float = Field(1e13, gt=0)
    coherence_gamma: float = Field(1.0, ge=0, le=1)
    center_rad_s: float | None = Field(None, gt=0)


class GridConfig(_Strict):
    omega_min_rad_s: float | None = None
    omega_max_rad_s: float | None = None
    n_points: int | None = Field(None, ge=2)
    half_width_sigmas: float = Field(8.0, gt=0)


class FilterConfig(_Strict):
    kind: Literal["none", "constant", "gaussian", "rectangular", "step"] = "none"
    value: float = Field(1.0, ge=0, le=1)
    center_rad_s: float | None = None
    sigma_rad_s: float | None = Field(None, gt=0)
    peak: float = Field(1.0, ge=0, le=1)
    low_rad_s: float | None = None
    high_rad_s: float | None = None
    edge_rad_s: float | None = None
    pass_above: bool = True

    @model_validator(mode="after")
    def _needs(self):
        need = {"gaussian": ("sigma_rad_s",), "rectangular": ("low_rad_s", "high_rad_s"),
                "step": ("edge_rad_s",)}.get(self.kind, ())
        missing = [n for n in need if getattr(self, n) is None]
        if missing:
            raise ValueError(f"{self.kind} filter needs {', '.join(missing)}")
        return self


class LayoutConfig(_Strict):
    path_s_bd_m: float = Field(27.0, ge=0)
    dist_f_bd_m: float = Field(12.0, ge=0)
    path_s_f_m: float | None = Field(10.0, ge=0)
    path_s_ad_m: float | None = Field(None, ge=0)
    path_f_bd_m: float | None = Field(None, ge=0)
    light_speed_m_s: float = Field(299_792_458.0, gt=0)
    collapse_transit: Literal["spatial", "optical"] = "spatial"


class ModelConfig(_Strict):
    kind: Literal["unitary_qm", "finite_speed_collapse"] = "unitary_qm"
    kappa_model_m_s: Infinity = "inf"
    d_tau_m: Infinity = "inf"
    weighting: Literal["equal", "probability"] = "equal"
    pre_collapse_gamma: float | None = Field(None, ge=0, le=1)

    @model_validator(mode="after")
    def _positive(self):
        if _inf(self.kappa_model_m_s) <= 0:
            raise ValueError("kappa_model_m_s must be > 0")
        if _inf(self.d_tau_m) < 0:
            raise ValueError("d_tau_m must be >= 0")
        return self


class DelaysConfig(_Strict):
    """Either explicit ``values_s`` or ``n`` points over ``span_periods``
    fringe periods starting at ``start_s``."""

    values_s: list[float] | None = None
    start_s: float = 5e-13
    n: int = Field(21, ge=1)
    span_periods: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _increasing(self):
        v = self.values_s
        if v is not None and (not v or any(b <= a for a, b in zip(v, v[1:]))):
            raise ValueError("values_s must be non-empty and strictly increasing")
        return self


class RunSection(_Strict):
    mode: Literal["cw", "pulsed"] = "cw"
    pair_rate_hz: float = Field(1e5, ge=0)
    pairs_per_pulse: float = Field(0.01, ge=0)
    pulse_rate_hz: float = Field(1e6, ge=0)
    dwell_s: float = Field(0.5, gt=0)
    detector_efficiency_a: float = Field(1.0, ge=0, le=1)
    detector_efficiency_b: float = Field(1.0, ge=0, le=1)
    dark_rate_a_hz: float = Field(0.0, ge=0)
    dark_rate_b_hz: float = Field(0.0, ge=0)
    timing_jitter_sigma_s: float = Field(1e-10, ge=0)
    coincidence_window_s: float = Field(2e-9, gt=0)
    coincidence_mode: Literal["nearest", "all"] = "nearest"
    herald_gate_width_s: float | None = Field(None, ge=0)
    seed: int = Field(0, ge=0, lt=2 ** 64)


class ScanGrid(_Strict):
    start_m: float = Field(ge=0)
    stop_m: float = Field(ge=0)
    step_m: float = Field(gt=0)


class AnalysisConfig(_Strict):
    alpha: float = Field(0.01, gt=0, lt=1)
    power: float = Field(0.99, gt=0, lt=1)
    scan_path_m: list[float] | None = None
    scan_grid: ScanGrid | None = None

    def scan_paths(self) -> list[float]:
        if self.scan_path_m is not None:
            return list(self.scan_path_m)
        if self.scan_grid is None:
            return []
        g = self.scan_grid
        n = int(math.floor((g.stop_m - g.start_m) / g.step_m + 1e-9)) + 1
        return [g.start_m + i * g.step_m for i in range(max(n, 0))]


class ExperimentConfig(_Strict):
    scheme: Literal["kc_coincidence", "energy_singles", "polarization", "heralded"]
    herald_scheme: Literal["energy", "polarization"] = "energy"
    source: SourceConfig = SourceConfig()
    grid: GridConfig = GridConfig()
    filter: FilterConfig = FilterConfig()
    layout: LayoutConfig = LayoutConfig()
    model: ModelConfig = ModelConfig()
    delays: DelaysConfig = DelaysConfig()
    run: RunSection = RunSection()
    analysis: AnalysisConfig = AnalysisConfig()

    @property
    def physics_scheme(self) -> str:
        if self.scheme == "heralded":
            return self.herald_scheme
        return "polarization" if self.scheme == "polarization" else "energy"

    @property
    def has_coincidence(self) -> bool:
        return self.scheme == "kc_coincidence"

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def _key_line(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate; raises ConfigInvalid with line and field diagnostics."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"])
            keys = [p for p in err["loc"] if isinstance(p, str)]
            line = _key_line(text, keys[-1]) if keys else None
            where = f"{source}:{line}" if line else source
            lines.append(f"{where}: field '{loc}': {err['msg']}")
        raise ConfigInvalid("\n".join(lines))


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False,
                      allow_nan=False) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(cfg.echo()).encode("utf-8")).hexdigest()
