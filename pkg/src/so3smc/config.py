"""Scenario documents (JSON) and their validation.

Field names carry units, e.g. ``dt_s`` or ``omega_rad_s``. Every error is
reported with the dotted path of the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .controllers import GainError, QuatSmcConfig, S1Variant, SmcConfig
from .dynamics import BENCHMARK_INERTIA, BodyState, Inertia, QuatState, Reference
from .sim import AttitudeUpdate, DisturbanceSpec, SimConfig
from .so3 import is_rotation, quat_to_rot, random_rotation, rodrigues

_MISSING = object()


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ScenarioKind(str, Enum):
    UNWINDING = "unwinding_comparison"
    TRACKING = "tracking"
    REGULATION = "regulation"
    CYLINDER_PORTRAIT = "cylinder_portrait"
    PROPERTY_SUITE = "property_suite"


@dataclass(frozen=True)
class PortraitSpec:
    variants: tuple = (S1Variant.WRAPPED, S1Variant.SMOOTH)
    n_theta: int = 8
    omega_range: tuple = (-math.pi, math.pi)
    n_omega: int = 5
    workers: int = 4
    converge_tol: float = 1e-2


@dataclass(frozen=True)
class SuiteSpec:
    samples: int = 1000
    flow_samples: int = 20
    flow_T: float = 20.0
    flow_dt: float = 1e-3


@dataclass
class Scenario:
    kind: ScenarioKind
    name: str = "scenario"
    seed: int = 0
    output_prefix: str = "out/scenario"
    inertia: Inertia = field(default_factory=lambda: Inertia.diag(*BENCHMARK_INERTIA))
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec.benchmark)
    smc: SmcConfig | None = None
    quat_smc: QuatSmcConfig = field(default_factory=QuatSmcConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    initial: BodyState | None = None
    quat_initial: QuatState | None = None
    reference: Reference | None = None
    portrait: PortraitSpec = field(default_factory=PortraitSpec)
    suite: SuiteSpec = field(default_factory=SuiteSpec)
    expect: dict = field(default_factory=dict)


# thresholds a scenario may override; see the experiments runners
EXPECT_KEYS = {
    ScenarioKind.UNWINDING: ("quaternion_unwinds", "so3_unwinds", "quaternion_final_tr_min",
                             "so3_min_tr_min"),
    ScenarioKind.TRACKING: ("final_tr_min", "final_omega_e_max", "min_tr_min"),
    ScenarioKind.REGULATION: ("final_tr_min", "final_omega_e_max", "min_tr_min"),
    ScenarioKind.CYLINDER_PORTRAIT: (),
    ScenarioKind.PROPERTY_SUITE: (),
}
_BOOL_EXPECT = ("quaternion_unwinds", "so3_unwinds")


class _Node:
    def __init__(self, data, path: str = ""):
        if not isinstance(data, dict):
            raise ConfigError(path, "expected an object")
        self.data = data
        self.path = path

    def allow(self, *keys: str) -> "_Node":
        """Reject keys outside ``keys`` so typos do not fall back to defaults."""
        for k in self.data:
            if k not in keys:
                raise ConfigError(self.sub(k), f"unknown field; expected one of {', '.join(keys)}")
        return self

    def sub(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def has(self, key: str) -> bool:
        return key in self.data

    def node(self, key: str):
        if key not in self.data:
            return None
        return _Node(self.data[key], self.sub(key))

    def raw(self, key: str, default=_MISSING):
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError(self.sub(key), "required field is missing")
            return default
        return self.data[key]

    def number(self, key: str, default=_MISSING, lo=None, lo_open=False) -> float:
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(self.sub(key), f"expected a finite number, got {v!r}")
        if lo is not None and (v <= lo if lo_open else v < lo):
            raise ConfigError(self.sub(key), f"must be {'>' if lo_open else '>='} {lo}, got {v}")
        return float(v)

    def integer(self, key: str, default=_MISSING, lo=None) -> int:
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(self.sub(key), f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise ConfigError(self.sub(key), f"must be >= {lo}, got {v}")
        return v

    def vector(self, key: str, n: int = 3, default=_MISSING) -> np.ndarray:
        v = self.raw(key, default)
        try:
            a = np.array(v, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(self.sub(key), f"expected {n} numbers") from None
        if a.shape != (n,) or not np.all(np.isfinite(a)):
            raise ConfigError(self.sub(key), f"expected {n} finite numbers, got {v!r}")
        return a

    def matrix(self, key: str) -> np.ndarray:
        v = self.raw(key)
        try:
            a = np.array(v, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(self.sub(key), "expected a 3x3 matrix") from None
        if a.shape != (3, 3) or not np.all(np.isfinite(a)):
            raise ConfigError(self.sub(key), "expected a 3x3 matrix of finite numbers")
        return a

    def choice(self, key: str, enum, default=_MISSING):
        v = self.raw(key, default)
        try:
            return enum(v)
        except ValueError:
            allowed = ", ".join(e.value for e in enum)
            raise ConfigError(self.sub(key), f"must be one of {allowed}; got {v!r}") from None


def _attitude(node: _Node, key: str, rng: np.random.Generator) -> np.ndarray:
    spec = node.raw(key, "identity")
    path = node.sub(key)
    if spec == "identity":
        return np.eye(3)
    if spec == "random":
        return random_rotation(rng)
    if isinstance(spec, str):
        raise ConfigError(path, f"expected identity, random or an object; got {spec!r}")
    n = _Node(spec, path).allow("matrix", "quaternion", "axis", "angle_rad")
    if n.has("matrix"):
        R = n.matrix("matrix")
        if not is_rotation(R):
            raise ConfigError(n.sub("matrix"), "not a rotation matrix (R R^T = I, det R = 1)")
        return R
    if n.has("quaternion"):
        q = n.vector("quaternion", 4)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ConfigError(n.sub("quaternion"), "quaternion must have unit norm")
        return quat_to_rot(q)
    axis = n.vector("axis")
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ConfigError(n.sub("axis"), "axis must be nonzero")
    return rodrigues(axis / norm, n.number("angle_rad"))


def _disturbance(node: _Node | None) -> DisturbanceSpec:
    if node is None:
        return DisturbanceSpec.benchmark()
    node.allow("amplitudes_N_m", "freqs_rad_s", "freqs_pi_rad_s", "kinds")
    amps = node.vector("amplitudes_N_m")
    if node.has("freqs_rad_s") and node.has("freqs_pi_rad_s"):
        raise ConfigError(node.path, "give only one of freqs_rad_s, freqs_pi_rad_s")
    if node.has("freqs_pi_rad_s"):
        freqs = math.pi * node.vector("freqs_pi_rad_s")
    else:
        freqs = node.vector("freqs_rad_s", default=(0.0, 0.0, 0.0))
    kinds = node.raw("kinds", ["sin", "sin", "sin"])
    try:
        return DisturbanceSpec(tuple(amps), tuple(freqs), tuple(kinds))
    except (ValueError, TypeError) as exc:
        raise ConfigError(node.path, str(exc)) from None


def _smc(node: _Node | None, dist: DisturbanceSpec, J: Inertia) -> SmcConfig:
    node = (node or _Node({}, "smc")).allow(
        "d_bar_N_m", "k_0", "delta", "c_omega2", "c_omega_e", "eps_layer"
    )
    d_bar = node.number("d_bar_N_m", dist.d_bar, lo=0.0)
    if d_bar < dist.d_bar - 1e-12:
        raise ConfigError(
            node.sub("d_bar_N_m"), f"must bound the disturbance (|d(t)| <= {dist.d_bar:.6g})"
        )
    k_0 = node.number("k_0", 1.8)
    if not node.has("delta") and k_0 <= d_bar:
        raise ConfigError(
            node.sub("k_0"),
            f"gain violates k_0 >= d_bar + delta with delta > 0 (k_0 = {k_0}, d_bar = {d_bar:.6g})",
        )
    delta = node.number("delta", k_0 - d_bar)
    try:
        cfg = SmcConfig(
            delta=delta,
            d_bar=d_bar,
            c_omega2=node.number("c_omega2", 7.0),
            c_omega_e=node.number("c_omega_e", 2.0),
            k_0=k_0,
            eps_layer=node.number("eps_layer", 1e-3, lo=0.0),
        )
        cfg.check_inertia(J)
    except GainError as exc:
        raise ConfigError(node.path, str(exc)) from None
    return cfg


def _reference(node: _Node | None, rng) -> Reference:
    if node is None:
        return Reference.regulation()
    node.allow("offset_rad_s", "amplitude_rad_s", "freq_rad_s", "phase_rad", "R_d0")
    zero = (0.0, 0.0, 0.0)
    try:
        return Reference(
            offset=node.vector("offset_rad_s", default=zero),
            amplitude=node.vector("amplitude_rad_s", default=zero),
            freq=node.vector("freq_rad_s", default=zero),
            phase=node.vector("phase_rad", default=zero),
            R_d0=_attitude(node, "R_d0", rng),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(node.path, str(exc)) from None


def scenario_from_dict(doc: dict, seed: int | None = None, output_prefix: str | None = None) -> Scenario:
    """Build and validate a :class:`Scenario`; ``seed``/``output_prefix`` override the document."""
    root = _Node(doc).allow(
        "kind", "name", "seed", "output_prefix", "plant", "disturbance", "smc", "quaternion",
        "initial", "reference", "sim", "portrait", "suite", "expect", "description",
    )
    kind = root.choice("kind", ScenarioKind)
    seed = root.integer("seed", 0) if seed is None else seed
    rng = np.random.default_rng(seed)
    name = str(root.raw("name", kind.value))
    prefix = output_prefix or str(root.raw("output_prefix", f"out/{name}"))

    plant = root.node("plant")
    if plant:
        plant.allow("inertia_kg_m2")
    try:
        J = Inertia(plant.matrix("inertia_kg_m2")) if plant and plant.has("inertia_kg_m2") \
            else Inertia.diag(*BENCHMARK_INERTIA)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("plant.inertia_kg_m2", str(exc)) from None

    simn = (root.node("sim") or _Node({}, "sim")).allow(
        "dt_s", "T_s", "attitude_update", "record_stride"
    )
    dt = simn.number("dt_s", 1e-4, lo=0.0, lo_open=True)
    T = simn.number("T_s", 10.0, lo=0.0, lo_open=True)
    if dt > T:
        raise ConfigError("sim.dt_s", "must not exceed sim.T_s")
    sim = SimConfig(
        dt=dt,
        T=T,
        attitude_update=simn.choice("attitude_update", AttitudeUpdate, "expmap"),
        seed=seed,
        record_stride=simn.integer("record_stride", 100, lo=1),
    )

    dist = _disturbance(root.node("disturbance"))
    sc = Scenario(kind=kind, name=name, seed=seed, output_prefix=prefix, inertia=J,
                  disturbance=dist, sim=sim)

    if kind in (ScenarioKind.UNWINDING, ScenarioKind.TRACKING, ScenarioKind.REGULATION):
        sc.smc = _smc(root.node("smc"), dist, J)
        init = (root.node("initial") or _Node({}, "initial")).allow("attitude", "omega_rad_s")
        sc.initial = BodyState(_attitude(init, "attitude", rng), init.vector("omega_rad_s", default=(0.0, 0.0, 0.0)))
        sc.reference = _reference(root.node("reference"), rng)
    if kind is ScenarioKind.TRACKING and root.node("reference") is None:
        raise ConfigError("reference", "tracking scenarios need a reference profile")
    if kind is ScenarioKind.UNWINDING:
        qn = (root.node("quaternion") or _Node({}, "quaternion")).allow(
            "initial_q", "omega_rad_s", "k_q", "eps_layer"
        )
        q = qn.vector("initial_q", 4, default=(-1.0, 0.0, 0.0, 0.0))
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ConfigError(qn.sub("initial_q"), "quaternion must have unit norm")
        try:
            sc.quat_smc = QuatSmcConfig(
                k_q=qn.number("k_q", 5.0), eps_layer=qn.number("eps_layer", 1e-3, lo=0.0)
            )
        except GainError as exc:
            raise ConfigError(qn.path, str(exc)) from None
        sc.quat_initial = QuatState(q, qn.vector("omega_rad_s", default=(0.0, 0.0, 0.0)))
    if kind is ScenarioKind.CYLINDER_PORTRAIT:
        pn = (root.node("portrait") or _Node({}, "portrait")).allow(
            "variants", "n_theta", "omega_range_rad_s", "n_omega", "workers", "converge_tol"
        )
        variants = pn.raw("variants", ["wrapped", "smooth"])
        if not isinstance(variants, list):
            raise ConfigError(pn.sub("variants"), "expected a list")
        try:
            variants = tuple(S1Variant(v) for v in variants)
        except ValueError:
            raise ConfigError(pn.sub("variants"), "entries must be standard, wrapped or smooth") from None
        sc.portrait = PortraitSpec(
            variants=variants,
            n_theta=pn.integer("n_theta", 8, lo=1),
            omega_range=tuple(pn.vector("omega_range_rad_s", 2, default=(-math.pi, math.pi))),
            n_omega=pn.integer("n_omega", 5, lo=1),
            workers=pn.integer("workers", 4, lo=1),
            converge_tol=pn.number("converge_tol", 1e-2, lo=0.0, lo_open=True),
        )
    if kind is ScenarioKind.PROPERTY_SUITE:
        sn = (root.node("suite") or _Node({}, "suite")).allow(
            "samples", "flow_samples", "flow_T_s", "flow_dt_s"
        )
        sc.suite = SuiteSpec(
            samples=sn.integer("samples", 1000, lo=0),
            flow_samples=sn.integer("flow_samples", 20, lo=0),
            flow_T=sn.number("flow_T_s", 20.0, lo=0.0, lo_open=True),
            flow_dt=sn.number("flow_dt_s", 1e-3, lo=0.0, lo_open=True),
        )
    en = (root.node("expect") or _Node({}, "expect")).allow(*EXPECT_KEYS[kind])
    for key, value in en.data.items():
        if key in _BOOL_EXPECT:
            if not isinstance(value, bool):
                raise ConfigError(en.sub(key), f"expected true or false, got {value!r}")
        else:
            en.number(key)
    sc.expect = dict(en.data)
    return sc


def load_scenario(path, seed: int | None = None, output_prefix: str | None = None) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(doc, seed=seed, output_prefix=output_prefix)


SHIPPED = {
    "unwinding": "unwinding.json",
    "tracking": "tracking.json",
    "tracking-halfturn": "tracking_halfturn.json",
    "regulation": "regulation.json",
    "portrait": "portrait.json",
    "verify": "verify.json",
}


def shipped_path(name: str) -> Path:
    """Path of a scenario document shipped with the package."""
    return Path(str(resources.files("so3smc") / "scenarios" / SHIPPED[name]))


def with_sim(sc: Scenario, **changes) -> Scenario:
    """Copy of ``sc`` with fields of its :class:`SimConfig` replaced."""
    return replace(sc, sim=replace(sc.sim, **changes))
