"""Deployment description: nodes, sensing mode, targets, environment objects.

Covers the six sensing modes (BS/UE monostatic and bistatic pairs),
per-link LOS/NLOS state draws, and single-bounce specular reflection paths
off type-2 planes via the image method. Scenario files are TOML; see
load_scenario for the schema.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import microdoppler, rcs

SPEED_OF_LIGHT = 299792458.0


class NodeKind(str, enum.Enum):
    BS = "bs"
    UE = "ue"


class SensingMode(str, enum.Enum):
    """The six sensing modes: tx-kind / rx-kind, monostatic or bistatic."""

    BS_BS_BISTATIC = "bs-bs"
    BS_MONOSTATIC = "bs-mono"
    BS_UE_BISTATIC = "bs-ue"
    UE_BS_BISTATIC = "ue-bs"
    UE_UE_BISTATIC = "ue-ue"
    UE_MONOSTATIC = "ue-mono"

    @property
    def tx_kind(self) -> NodeKind:
        return NodeKind.BS if self.value.startswith("bs") else NodeKind.UE

    @property
    def rx_kind(self) -> NodeKind:
        if self.is_monostatic:
            return self.tx_kind
        return NodeKind.BS if self.value.endswith("bs") else NodeKind.UE

    @property
    def is_monostatic(self) -> bool:
        return self.value.endswith("mono")


class LosState(str, enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class LosModel:
    """LOS/NLOS decision law: fixed state or distance-exponential draw."""

    kind: str  # "fixed-los" | "fixed-nlos" | "exponential"
    d0: float = 0.0  # reference distance (m) for the exponential law

    def __post_init__(self):
        if self.kind not in ("fixed-los", "fixed-nlos", "exponential"):
            raise ValueError(f"unknown LOS model kind {self.kind!r}")
        if self.kind == "exponential" and self.d0 <= 0:
            raise ValueError("exponential LOS model requires d0 > 0")


def _vec3(v: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))


@dataclass(frozen=True)
class Target:
    """A sensing target: point kinematics plus an RCS description.

    rcs is either a scalar cross section (m^2), a PrimitiveShape segmented
    on demand, or a prebuilt SegmentedObject.
    """

    id: str
    position: np.ndarray
    velocity: np.ndarray
    rcs: Union[float, rcs.PrimitiveShape, rcs.SegmentedObject] = 1.0
    micro_motion: microdoppler.MicroMotionProfile = field(default_factory=microdoppler.NoMotion)
    orientation: float = 0.0  # body rotation about the vertical axis, rad

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))
        if isinstance(self.rcs, (int, float)) and self.rcs < 0:
            raise ValueError(f"scalar rcs must be >= 0, got {self.rcs}")


@dataclass(frozen=True)
class EoType1:
    """Environment object modeled like a target, with no micro motion."""

    id: str
    position: np.ndarray
    velocity: np.ndarray
    rcs: Union[float, rcs.PrimitiveShape, rcs.SegmentedObject] = 1.0
    orientation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))


@dataclass(frozen=True)
class EoType2:
    """Specular reflecting plane (ground, wall, ceiling): point + unit normal."""

    id: str
    point: np.ndarray
    normal: np.ndarray
    reflection_coeff: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "point", _vec3(self.point, "point"))
        normal = _vec3(self.normal, "normal")
        norm = float(np.linalg.norm(normal))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"type-2 normal must be unit length, |n| = {norm}")
        object.__setattr__(self, "normal", normal)
        if not 0.0 <= self.reflection_coeff <= 1.0:
            raise ValueError(f"reflection coefficient must be in [0, 1], got {self.reflection_coeff}")


EnvironmentObject = Union[EoType1, EoType2]


@dataclass(frozen=True)
class Scenario:
    carrier_hz: float
    nodes: tuple[Node, ...]
    mode: SensingMode
    tx_node_id: str
    rx_node_id: str
    targets: tuple[Target, ...] = ()
    environment_objects: tuple[EnvironmentObject, ...] = ()
    los_model: LosModel = LosModel(kind="fixed-los")
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "environment_objects", tuple(self.environment_objects))

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"no node with id {node_id!r}")

    @property
    def tx(self) -> Node:
        return self.node(self.tx_node_id)

    @property
    def rx(self) -> Node:
        return self.node(self.rx_node_id)


def validate(scenario: Scenario) -> list[str]:
    """Check a scenario for structural violations; empty list means valid."""
    violations = []
    if not scenario.carrier_hz > 0:
        violations.append(f"invalid-carrier: carrier_hz = {scenario.carrier_hz}")

    node_ids = [n.id for n in scenario.nodes]
    for nid in sorted({i for i in node_ids if node_ids.count(i) > 1}):
        violations.append(f"duplicate-node-id: {nid}")

    resolved = {}
    for role, nid in (("tx", scenario.tx_node_id), ("rx", scenario.rx_node_id)):
        try:
            resolved[role] = scenario.node(nid)
        except KeyError:
            violations.append(f"unresolved-node: {role} id {nid!r}")

    mode = scenario.mode
    if mode.is_monostatic and scenario.tx_node_id != scenario.rx_node_id:
        violations.append(
            f"monostatic-node-mismatch: mode {mode.value} requires tx == rx, "
            f"got {scenario.tx_node_id!r} and {scenario.rx_node_id!r}"
        )
    if not mode.is_monostatic and scenario.tx_node_id == scenario.rx_node_id:
        violations.append(f"bistatic-same-node: mode {mode.value} requires distinct tx and rx nodes")
    for role, want in (("tx", mode.tx_kind), ("rx", mode.rx_kind)):
        node = resolved.get(role)
        if node is not None and node.kind != want:
            violations.append(
                f"mode-kind-mismatch: mode {mode.value} requires {role} kind "
                f"{want.value}, node {node.id!r} is {node.kind.value}"
            )

    target_ids = [t.id for t in scenario.targets]
    for tid in sorted({i for i in target_ids if target_ids.count(i) > 1}):
        violations.append(f"duplicate-target-id: {tid}")

    return violations


class ScenarioValidationError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


def los_state(link_distance: float, los_model: LosModel, rng: np.random.Generator) -> LosState:
    """Draw the LOS/NLOS state of one link.

    The exponential law is LOS with probability exp(-d / d0); fixed models
    ignore the distance and never consume randomness.
    """
    if link_distance < 0:
        raise ValueError(f"link_distance must be >= 0, got {link_distance}")
    if los_model.kind == "fixed-los":
        return LosState.LOS
    if los_model.kind == "fixed-nlos":
        return LosState.NLOS
    p_los = math.exp(-link_distance / los_model.d0)
    return LosState.LOS if rng.uniform() < p_los else LosState.NLOS


@dataclass(frozen=True)
class SpecularPath:
    """Single-bounce reflection path off a type-2 plane (image method)."""

    eo_id: str
    delay_s: float
    gain: float  # linear field amplitude, reflection coeff x free space
    aod: tuple[float, float]  # (azimuth, zenith) of departure, rad
    aoa: tuple[float, float]  # (azimuth, zenith) of arrival, rad


def _angles_of(direction: np.ndarray) -> tuple[float, float]:
    d = direction / np.linalg.norm(direction)
    azimuth = float(np.arctan2(d[1], d[0]))
    zenith = float(np.arccos(np.clip(d[2], -1.0, 1.0)))
    return azimuth, zenith


def specular_paths(scenario: Scenario) -> list[SpecularPath]:
    """Single-bounce Tx->plane->Rx paths for every type-2 environment plane.

    The Tx is mirrored across the plane; a path exists when both endpoints
    lie strictly on the positive-normal side (the reflecting face) and the
    reflection coefficient is non-zero. Amplitude is the free-space factor
    wavelength / (4 pi d_total) scaled by the reflection coefficient.
    """
    tx = scenario.tx.position
    rx = scenario.rx.position
    lam = scenario.wavelength
    paths = []
    for eo in scenario.environment_objects:
        if not isinstance(eo, EoType2):
            continue
        if eo.reflection_coeff == 0.0:
            continue
        h_tx = float(np.dot(tx - eo.point, eo.normal))
        h_rx = float(np.dot(rx - eo.point, eo.normal))
        if h_tx <= 0.0 or h_rx <= 0.0:
            continue  # plane behind an endpoint: no reflecting face hit
        image = tx - 2.0 * h_tx * eo.normal
        d_total = float(np.linalg.norm(rx - image))
        # Reflection point: where the image->rx segment crosses the plane.
        seg = rx - image
        t = h_tx / (h_tx + h_rx)
        hit = image + t * seg
        gain = eo.reflection_coeff * lam / (4.0 * math.pi * d_total)
        paths.append(
            SpecularPath(
                eo_id=eo.id,
                delay_s=d_total / SPEED_OF_LIGHT,
                gain=gain,
                aod=_angles_of(hit - tx),
                aoa=_angles_of(hit - rx),
            )
        )
    return paths


# ---------------------------------------------------------------------------
# Scenario file loading (TOML). Unknown keys are a load-time error; every key
# is listed in the README with units and defaults.
# ---------------------------------------------------------------------------

_SHAPE_KEYS = {
    "rect-plate": {"kind", "a_m", "b_m", "reflectivity"},
    "circ-plate": {"kind", "radius_m", "reflectivity"},
    "sphere": {"kind", "radius_m", "reflectivity"},
    "cylinder": {"kind", "radius_m", "height_m", "reflectivity"},
}


class ScenarioLoadError(ValueError):
    pass


def _reject_unknown(table: dict, allowed: set[str], where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ScenarioLoadError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _parse_shape(table: dict, where: str) -> rcs.PrimitiveShape:
    kind = table.get("kind")
    if kind not in _SHAPE_KEYS:
        raise ScenarioLoadError(f"{where}: unknown shape kind {kind!r}")
    _reject_unknown(table, _SHAPE_KEYS[kind], where)
    rho = float(table.get("reflectivity", 1.0))
    if kind == "rect-plate":
        return rcs.RectangularPlate(a=float(table["a_m"]), b=float(table["b_m"]), reflectivity=rho)
    if kind == "circ-plate":
        return rcs.CircularPlate(radius=float(table["radius_m"]), reflectivity=rho)
    if kind == "sphere":
        return rcs.Sphere(radius=float(table["radius_m"]), reflectivity=rho)
    return rcs.Cylinder(radius=float(table["radius_m"]), height=float(table["height_m"]), reflectivity=rho)


_MICRO_KEYS = {
    "none": {"kind"},
    "sinusoid": {"kind", "peak_doppler_hz", "mod_freq_hz", "phase_rad"},
    "sawtooth": {"kind", "peak_doppler_hz", "period_s", "phase_rad"},
    "rotor": {"kind", "n_blades", "blade_length_m", "rpm"},
    "pendulum-arm": {"kind", "period_s", "peak_speed_mps", "orientation_rad"},
    "vital": {"kind", "amp_displacement_m", "rate_hz"},
}


def _parse_micro(table: dict, where: str) -> microdoppler.MicroMotionProfile:
    kind = table.get("kind", "none")
    if kind not in _MICRO_KEYS:
        raise ScenarioLoadError(f"{where}: unknown micro-motion kind {kind!r}")
    _reject_unknown(table, _MICRO_KEYS[kind], where)
    md = microdoppler
    if kind == "none":
        return md.NoMotion()
    if kind == "sinusoid":
        return md.SinusoidDoppler(
            peak_doppler_hz=float(table["peak_doppler_hz"]),
            mod_freq_hz=float(table["mod_freq_hz"]),
            phase_rad=float(table.get("phase_rad", 0.0)),
        )
    if kind == "sawtooth":
        return md.SawtoothDoppler(
            peak_doppler_hz=float(table["peak_doppler_hz"]),
            period_s=float(table["period_s"]),
            phase_rad=float(table.get("phase_rad", 0.0)),
        )
    if kind == "rotor":
        return md.Rotor(
            n_blades=int(table["n_blades"]),
            blade_length_m=float(table["blade_length_m"]),
            rpm=float(table["rpm"]),
        )
    if kind == "pendulum-arm":
        return md.PendulumArm(
            period_s=float(table.get("period_s", 1.0)),
            peak_speed_mps=float(table["peak_speed_mps"]),
            orientation_rad=float(table.get("orientation_rad", 0.0)),
        )
    return md.VitalSign(amp_displacement_m=float(table["amp_displacement_m"]), rate_hz=float(table["rate_hz"]))


_SCENARIO_KEYS = {"carrier_hz", "mode", "tx", "rx", "seed", "los"}
_LOS_KEYS = {"model", "d0_m"}
_NODE_KEYS = {"id", "kind", "position_m", "velocity_mps"}
_TARGET_KEYS = {"id", "position_m", "velocity_mps", "rcs_m2", "shape", "orientation_rad", "micro_motion"}
_EO_KEYS = {
    "type1": {"kind", "id", "position_m", "velocity_mps", "rcs_m2", "shape", "orientation_rad"},
    "type2": {"kind", "id", "point_m", "normal", "reflection_coeff"},
}
_TOP_KEYS = {"scenario", "nodes", "targets", "environment", "ofdm", "background", "armswing", "sweep"}


def parse_scenario_dict(data: dict) -> Scenario:
    """Build a Scenario from a parsed TOML document; unknown keys error."""
    _reject_unknown(data, _TOP_KEYS, "top level")
    if "scenario" not in data:
        raise ScenarioLoadError("missing [scenario] section")
    sc = data["scenario"]
    _reject_unknown(sc, _SCENARIO_KEYS, "[scenario]")

    los_table = sc.get("los", {"model": "fixed-los"})
    _reject_unknown(los_table, _LOS_KEYS, "[scenario.los]")
    los = LosModel(kind=los_table.get("model", "fixed-los"), d0=float(los_table.get("d0_m", 0.0)))

    try:
        mode = SensingMode(sc["mode"])
    except (KeyError, ValueError) as exc:
        raise ScenarioLoadError(f"[scenario] mode: {exc}") from exc

    nodes = []
    for i, tab in enumerate(data.get("nodes", [])):
        _reject_unknown(tab, _NODE_KEYS, f"[[nodes]] #{i}")
        nodes.append(
            Node(
                id=str(tab["id"]),
                kind=NodeKind(tab["kind"]),
                position=tab["position_m"],
                velocity=tab.get("velocity_mps", (0.0, 0.0, 0.0)),
            )
        )

    targets = []
    for i, tab in enumerate(data.get("targets", [])):
        _reject_unknown(tab, _TARGET_KEYS, f"[[targets]] #{i}")
        if "shape" in tab and "rcs_m2" in tab:
            raise ScenarioLoadError(f"[[targets]] #{i}: give either rcs_m2 or shape, not both")
        rcs_val: Union[float, rcs.PrimitiveShape]
        if "shape" in tab:
            rcs_val = _parse_shape(tab["shape"], f"[[targets]] #{i} shape")
        else:
            rcs_val = float(tab.get("rcs_m2", 1.0))
        targets.append(
            Target(
                id=str(tab["id"]),
                position=tab["position_m"],
                velocity=tab.get("velocity_mps", (0.0, 0.0, 0.0)),
                rcs=rcs_val,
                micro_motion=_parse_micro(tab.get("micro_motion", {"kind": "none"}), f"[[targets]] #{i} micro_motion"),
                orientation=float(tab.get("orientation_rad", 0.0)),
            )
        )

    eos: list[EnvironmentObject] = []
    for i, tab in enumerate(data.get("environment", [])):
        kind = tab.get("kind")
        if kind not in _EO_KEYS:
            raise ScenarioLoadError(f"[[environment]] #{i}: kind must be 'type1' or 'type2', got {kind!r}")
        _reject_unknown(tab, _EO_KEYS[kind], f"[[environment]] #{i}")
        if kind == "type1":
            rcs_val = (
                _parse_shape(tab["shape"], f"[[environment]] #{i} shape")
                if "shape" in tab
                else float(tab.get("rcs_m2", 1.0))
            )
            eos.append(
                EoType1(
                    id=str(tab["id"]),
                    position=tab["position_m"],
                    velocity=tab.get("velocity_mps", (0.0, 0.0, 0.0)),
                    rcs=rcs_val,
                    orientation=float(tab.get("orientation_rad", 0.0)),
                )
            )
        else:
            eos.append(
                EoType2(
                    id=str(tab["id"]),
                    point=tab["point_m"],
                    normal=tab["normal"],
                    reflection_coeff=float(tab.get("reflection_coeff", 1.0)),
                )
            )

    return Scenario(
        carrier_hz=float(sc["carrier_hz"]),
        nodes=tuple(nodes),
        mode=mode,
        tx_node_id=str(sc["tx"]),
        rx_node_id=str(sc["rx"]),
        targets=tuple(targets),
        environment_objects=tuple(eos),
        los_model=los,
        seed=int(sc.get("seed", 0)),
    )


def load_scenario_file(path) -> tuple[Scenario, dict]:
    """Load a TOML scenario file; returns (scenario, raw document dict)."""
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioLoadError(f"{path}: {exc}") from exc
    return parse_scenario_dict(data), data
