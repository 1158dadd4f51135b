"""Declarative experiment descriptions (versioned JSON) and their validation.

Physical inputs use the units people quote: decay rates as kappa/2pi in MHz,
carrier and resonator frequencies in GHz, windows in units of 1/kappa.
Conversion to rad/ns happens once, in the ``resolved_*`` helpers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .linkmodel import (LinearDispersion, QuadraticDispersion, RectangularGuideDispersion,
                        build_link)
from .units import C_LIGHT, WR90_WIDTH, ghz_to_rad_ns, mhz_to_rad_ns

SCHEMA_VERSION = 1
STRATEGIES = ("ideal_sech", "markov_corrected", "nonmarkov_corrected")
KINDS = ("transfer", "emission")


class ConfigError(ValueError):
    """Scenario document is malformed or inconsistent."""


@dataclass(frozen=True)
class DispersionSpec:
    kind: str = "rectangular_guide"
    group_velocity_m_per_ns: Optional[float] = None
    omega0_ghz: float = 0.0
    omega_c_ghz: Optional[float] = None
    curvature_m2_per_ns: float = 0.0
    k_center_per_m: Optional[float] = None
    width_m: float = WR90_WIDTH
    c_light_m_per_ns: float = C_LIGHT

    def build(self):
        if self.kind == "rectangular_guide":
            return RectangularGuideDispersion(self.c_light_m_per_ns, self.width_m)
        if self.kind == "linear":
            return LinearDispersion(self.group_velocity_m_per_ns, ghz_to_rad_ns(self.omega0_ghz))
        return QuadraticDispersion(ghz_to_rad_ns(self.omega_c_ghz), self.group_velocity_m_per_ns,
                                   self.curvature_m2_per_ns, self.k_center_per_m)


@dataclass(frozen=True)
class LinkSpec:
    length_m: float
    n_modes: int
    carrier_ghz: float
    coupling_law: str = "sqrt_omega"
    dispersion: DispersionSpec = field(default_factory=DispersionSpec)


@dataclass(frozen=True)
class NodeSpec:
    kappa_mhz: float
    omega_r_ghz: Optional[float] = None


@dataclass(frozen=True)
class ProtocolSpec:
    window_kappa: float = 40.0
    steps: int = 2000
    strategies: tuple = STRATEGIES
    distortion_share: float = 0.5
    predistortion_order: str = "exact"
    control_samples: int = 8001
    calibration: str = "pilot"
    pilot_window_kappa: float = 12.0
    pilot_steps: int = 5000
    estimator: str = "lsq"
    c_threshold: float = 1e-3
    cdot_threshold: float = 1e-2
    non_markov: Optional[tuple] = None
    lamb_shift_mhz: Optional[float] = None
    step_doubling: bool = True
    doubling_tol: float = 1e-6
    max_doublings: int = 3
    field_window_kappa: float = 15.0
    field_samples: int = 3001


@dataclass(frozen=True)
class OutputSpec:
    controls_csv: bool = False
    trajectory_csv: bool = False
    calibration_csv: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    link: LinkSpec
    nodes: NodeSpec
    kind: str = "transfer"
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    sweep_kappa_mhz: tuple = ()
    outputs: OutputSpec = field(default_factory=OutputSpec)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        validate(self)

    @property
    def kappa_points(self) -> tuple:
        return tuple(self.sweep_kappa_mhz) or (self.nodes.kappa_mhz,)

    def with_steps(self, steps: int) -> "ScenarioConfig":
        return replace(self, protocol=replace(self.protocol, steps=int(steps)))

    def with_kappa(self, kappa_mhz: float) -> "ScenarioConfig":
        return replace(self, nodes=replace(self.nodes, kappa_mhz=float(kappa_mhz)), sweep_kappa_mhz=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["protocol"]["strategies"] = list(self.protocol.strategies)
        if self.protocol.non_markov is not None:
            d["protocol"]["non_markov"] = list(self.protocol.non_markov)
        d["sweep"] = {"kappa_mhz": list(d.pop("sweep_kappa_mhz"))}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def build_link(self, kappa_mhz: Optional[float] = None):
        k = resolved_kappa(self if kappa_mhz is None else self.with_kappa(kappa_mhz))
        omega_r = None if self.nodes.omega_r_ghz is None else ghz_to_rad_ns(self.nodes.omega_r_ghz)
        return build_link(self.link.length_m, self.link.n_modes, self.link.dispersion.build(),
                          ghz_to_rad_ns(self.link.carrier_ghz), k, self.link.coupling_law, omega_r)


def resolved_kappa(cfg: ScenarioConfig) -> float:
    return mhz_to_rad_ns(cfg.nodes.kappa_mhz)


def _positive(name, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def validate(cfg: ScenarioConfig) -> None:
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg.schema_version}; expected {SCHEMA_VERSION}")
    if not cfg.id or not isinstance(cfg.id, str):
        raise ConfigError("scenario id must be a non-empty string")
    if cfg.kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}")
    ln, d, p = cfg.link, cfg.link.dispersion, cfg.protocol
    _positive("link.length_m", ln.length_m)
    _positive("link.carrier_ghz", ln.carrier_ghz)
    if not isinstance(ln.n_modes, int) or ln.n_modes < 3:
        raise ConfigError("link.n_modes must be an integer >= 3")
    if ln.coupling_law not in ("sqrt_omega", "flat"):
        raise ConfigError("link.coupling_law must be 'sqrt_omega' or 'flat'")
    if d.kind == "rectangular_guide":
        _positive("dispersion.width_m", d.width_m)
        _positive("dispersion.c_light_m_per_ns", d.c_light_m_per_ns)
    elif d.kind == "linear":
        _positive("dispersion.group_velocity_m_per_ns", d.group_velocity_m_per_ns)
    elif d.kind == "quadratic":
        _positive("dispersion.group_velocity_m_per_ns", d.group_velocity_m_per_ns)
        _positive("dispersion.omega_c_ghz", d.omega_c_ghz)
        if d.k_center_per_m is None:
            raise ConfigError("quadratic dispersion needs k_center_per_m")
    else:
        raise ConfigError(f"unknown dispersion kind {d.kind!r}")
    _positive("nodes.kappa_mhz", cfg.nodes.kappa_mhz)
    for k in cfg.sweep_kappa_mhz:
        _positive("sweep.kappa_mhz entry", k)
    if len(set(cfg.sweep_kappa_mhz)) != len(cfg.sweep_kappa_mhz):
        raise ConfigError("sweep.kappa_mhz has duplicates")
    _positive("protocol.window_kappa", p.window_kappa)
    _positive("protocol.field_window_kappa", p.field_window_kappa)
    if not isinstance(p.steps, int) or p.steps < 2:
        raise ConfigError("protocol.steps must be an integer >= 2")
    if not isinstance(p.control_samples, int) or p.control_samples < 5 or p.control_samples % 2 == 0:
        raise ConfigError("protocol.control_samples must be an odd integer >= 5 (symmetric grid)")
    if not p.strategies or any(s not in STRATEGIES for s in p.strategies):
        raise ConfigError(f"protocol.strategies must be a non-empty subset of {STRATEGIES}")
    if len(set(p.strategies)) != len(p.strategies):
        raise ConfigError("protocol.strategies has duplicates")
    if not 0.0 <= p.distortion_share <= 1.0:
        raise ConfigError("protocol.distortion_share must lie in [0, 1]")
    if p.predistortion_order not in ("exact", "quadratic"):
        raise ConfigError("protocol.predistortion_order must be 'exact' or 'quadratic'")
    if p.calibration not in ("pilot", "none"):
        raise ConfigError("protocol.calibration must be 'pilot' or 'none'")
    if p.estimator not in ("lsq", "average"):
        raise ConfigError("protocol.estimator must be 'lsq' or 'average'")
    if p.calibration == "pilot":
        _positive("protocol.pilot_window_kappa", p.pilot_window_kappa)
        if not isinstance(p.pilot_steps, int) or p.pilot_steps < 2:
            raise ConfigError("protocol.pilot_steps must be an integer >= 2")
    elif "nonmarkov_corrected" in p.strategies and p.non_markov is None:
        raise ConfigError("nonmarkov_corrected needs calibration='pilot' or an explicit protocol.non_markov")
    if p.non_markov is not None:
        if len(p.non_markov) != 2 or abs(complex(*p.non_markov)) >= 1:
            raise ConfigError("protocol.non_markov must be [re, im] with modulus below 1")
    _positive("protocol.doubling_tol", p.doubling_tol)
    if not isinstance(p.max_doublings, int) or p.max_doublings < 0:
        raise ConfigError("protocol.max_doublings must be a non-negative integer")
    if not (0 < p.c_threshold < 1 and 0 < p.cdot_threshold < 1):
        raise ConfigError("estimator thresholds must lie in (0, 1)")


def _build(cls, data, path):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {', '.join(unknown)}")
    return data


def from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    allowed = {"schema_version", "id", "kind", "link", "nodes", "protocol", "sweep", "outputs"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    for key in ("id", "link", "nodes"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")
    try:
        link_doc = dict(_build(LinkSpec, doc["link"], "link"))
        disp = DispersionSpec(**_build(DispersionSpec, link_doc.pop("dispersion", {}), "link.dispersion"))
        link = LinkSpec(dispersion=disp, **link_doc)
        nodes = NodeSpec(**_build(NodeSpec, doc["nodes"], "nodes"))
        proto_doc = dict(_build(ProtocolSpec, doc.get("protocol", {}), "protocol"))
        if "strategies" in proto_doc:
            proto_doc["strategies"] = tuple(proto_doc["strategies"])
        if proto_doc.get("non_markov") is not None:
            proto_doc["non_markov"] = tuple(float(v) for v in proto_doc["non_markov"])
        protocol = ProtocolSpec(**proto_doc)
        sweep = doc.get("sweep", {}) or {}
        if set(sweep) - {"kappa_mhz"}:
            raise ConfigError("sweep only accepts 'kappa_mhz'")
        outputs = OutputSpec(**_build(OutputSpec, doc.get("outputs", {}), "outputs"))
        return ScenarioConfig(id=doc["id"], link=link, nodes=nodes, kind=doc.get("kind", "transfer"),
                              protocol=protocol, sweep_kappa_mhz=tuple(float(k) for k in sweep.get("kappa_mhz", ())),
                              outputs=outputs, schema_version=doc.get("schema_version", SCHEMA_VERSION))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load(path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc)
