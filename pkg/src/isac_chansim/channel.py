"""ISAC channel realization builder.

Background clusters with zero Doppler, concatenated Tx-target-Rx sensing
clusters carrying radar-equation path loss and bulk Doppler, optional
micro-Doppler phase injection on a seeded subset of rays, and an
angle-dependent gain hook for the fast-fading RCS component. The frequency
response H[k, m] spans subcarriers k and slow-time repetitions m and keeps
the target and background contributions separately retrievable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from . import microdoppler, rcs
from .scenario import (
    EoType1,
    LosState,
    Scenario,
    ScenarioValidationError,
    SpecularPath,
    Target,
    los_state,
    specular_paths,
    validate,
)
from .sensing import OfdmConfig

SPEED_OF_LIGHT = 299792458.0

#: Distinguished "no echo" path loss for zero cross section.
NO_ECHO_DB = math.inf

#: Half-opening of the uniform per-ray azimuth offset distribution (rad).
RAY_OFFSET_HALF_WIDTH = math.radians(5.0)


class DegenerateGeometryError(ValueError):
    """Target co-located with the transmitter or receiver."""


@dataclass(frozen=True)
class Cluster:
    """One propagation cluster: delay, normalized power and ray geometry.

    power is a fraction of the realization total (all clusters of a
    realization sum to 1 before path loss). kind is "background",
    "sensing" (with target_id) or "eo".
    """

    delay_s: float
    power: float
    aod: float
    zod: float
    aoa: float
    zoa: float
    n_rays: int = 20
    ray_angle_offsets: np.ndarray = None
    kind: str = "background"
    target_id: str | None = None
    doppler_hz: float = 0.0

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("cluster power must be >= 0")
        if self.n_rays < 1:
            raise ValueError("n_rays must be >= 1")
        offsets = self.ray_angle_offsets
        offsets = np.zeros(self.n_rays) if offsets is None else np.asarray(offsets, dtype=float)
        if offsets.shape != (self.n_rays,):
            raise ValueError(f"ray_angle_offsets must have shape ({self.n_rays},)")
        object.__setattr__(self, "ray_angle_offsets", offsets)
        if self.kind not in ("background", "sensing", "eo"):
            raise ValueError(f"unknown cluster kind {self.kind!r}")


def generate_background(
    n_clusters: int,
    delay_spread_s: float,
    rng: np.random.Generator,
    n_rays: int = 20,
) -> list[Cluster]:
    """Environmental clusters with zero Doppler.

    Delays are exponential with the given spread, sorted ascending and
    shifted so the first is 0; powers decay exponentially over delay and
    are normalized to sum to 1 within the returned set (the realization
    builder rescales them against the target cluster). All angles uniform.
    """
    if n_clusters < 0:
        raise ValueError("n_clusters must be >= 0")
    if n_clusters == 0:
        return []
    if delay_spread_s <= 0:
        raise ValueError("delay_spread_s must be > 0")
    delays = np.sort(rng.exponential(delay_spread_s, n_clusters))
    delays = delays - delays[0]
    aod = rng.uniform(-math.pi, math.pi, n_clusters)
    zod = rng.uniform(0.0, math.pi, n_clusters)
    aoa = rng.uniform(-math.pi, math.pi, n_clusters)
    zoa = rng.uniform(0.0, math.pi, n_clusters)
    offsets = rng.uniform(-RAY_OFFSET_HALF_WIDTH, RAY_OFFSET_HALF_WIDTH, (n_clusters, n_rays))
    weights = np.exp(-delays / delay_spread_s)
    weights = weights / weights.sum()
    return [
        Cluster(
            delay_s=float(delays[i]),
            power=float(weights[i]),
            aod=float(aod[i]),
            zod=float(zod[i]),
            aoa=float(aoa[i]),
            zoa=float(zoa[i]),
            n_rays=n_rays,
            ray_angle_offsets=offsets[i],
            kind="background",
        )
        for i in range(n_clusters)
    ]


def sensing_pathloss(d_tx: float, d_rx: float, wavelength: float, sigma_slow: float) -> float:
    """Bistatic radar-equation path loss in dB.

    PL = 10 log10((4 pi)^3 d_tx^2 d_rx^2 / (sigma lambda^2)); a zero cross
    section returns the distinguished NO_ECHO_DB (+inf).
    """
    if d_tx <= 0 or d_rx <= 0 or wavelength <= 0:
        raise ValueError("distances and wavelength must be > 0")
    if sigma_slow < 0:
        raise ValueError("sigma_slow must be >= 0")
    if sigma_slow == 0.0:
        return NO_ECHO_DB
    num = (4.0 * math.pi) ** 3 * d_tx**2 * d_rx**2
    return float(10.0 * math.log10(num / (sigma_slow * wavelength**2)))


def _angles_of(direction: np.ndarray) -> tuple[float, float]:
    d = direction / np.linalg.norm(direction)
    return float(np.arctan2(d[1], d[0])), float(np.arccos(np.clip(d[2], -1.0, 1.0)))


def slow_sigma(target_rcs: Union[float, rcs.PrimitiveShape, rcs.SegmentedObject], wavelength: float) -> float:
    """Slow-fading (orientation-averaged) cross section in m^2.

    Scalars pass through. Shapes and segmented objects are averaged in dB
    over a monostatic aspect sweep, matching the slow/fast decomposition.
    """
    if isinstance(target_rcs, (int, float)):
        return float(target_rcs)
    angles = np.radians(np.arange(0.0, 90.5, 1.0))
    if isinstance(target_rcs, rcs.SegmentedObject):
        r_ref = 10.0 * rcs.far_field_distance(target_rcs.d_max, wavelength) + 1.0
        sweep = []
        for theta in angles:
            pos = r_ref * np.array([math.sin(theta), 0.0, math.cos(theta)])
            sweep.append((rcs.monostatic_aspect(float(theta)), rcs.object_rcs(target_rcs, pos, pos, wavelength)))
    else:
        sweep = rcs.sweep_plate_monostatic(target_rcs, wavelength, angles)
    decomp = rcs.decompose_slow_fast(sweep)
    return float(10.0 ** (decomp.slow_db / 10.0))


def fast_gain_hook(
    shape: rcs.PrimitiveShape, wavelength: float, orientation: float
) -> Callable[[float, float, float, float], float]:
    """Angle-dependent linear gain from the fast-fading RCS component.

    The returned hook maps per-ray (aod, zod, aoa, zoa) to
    sigma(aspect) / sigma_slow, where the aspect angles are measured
    between the back-propagated ray directions and the body facing normal
    (cos orientation, sin orientation, 0).
    """
    sigma_avg = slow_sigma(shape, wavelength)
    normal = np.array([math.cos(orientation), math.sin(orientation), 0.0])

    def hook(aod: float, zod: float, aoa: float, zoa: float) -> float:
        def aspect_from(az: float, zen: float) -> float:
            d = np.array([math.sin(zen) * math.cos(az), math.sin(zen) * math.sin(az), math.cos(zen)])
            return float(np.arccos(np.clip(np.dot(-d, normal), -1.0, 1.0)))

        aspect = rcs.AspectAngles(incidence=aspect_from(aod, zod), scattering=aspect_from(aoa, zoa))
        return rcs.primitive_rcs(shape, wavelength, aspect) / sigma_avg

    return hook


@dataclass(frozen=True)
class LinkBudget:
    """Per-target link terms from the Tx-target / target-Rx concatenation."""

    d_tx_m: float
    d_rx_m: float
    delay_s: float
    doppler_hz: float
    sigma_slow_m2: float
    pathloss_db: float  # includes any NLOS penalty
    los_tx: LosState
    los_rx: LosState

    @property
    def path_gain(self) -> float:
        if math.isinf(self.pathloss_db):
            return 0.0
        return 10.0 ** (-self.pathloss_db / 10.0)


def concatenate_target_link(
    scenario: Scenario,
    target: Union[Target, EoType1],
    los_states: tuple[LosState, LosState] = (LosState.LOS, LosState.LOS),
    rng: np.random.Generator | None = None,
    n_rays: int = 20,
    nlos_extra_loss_db: float = 10.0,
) -> tuple[Cluster, LinkBudget]:
    """Concatenate the Tx-target and target-Rx links into a sensing cluster.

    Delay is the total path length over c; departure angles follow the
    Tx-target geometry and arrival angles the target-Rx geometry. The bulk
    Doppler projects the target velocity on both link directions (positive
    when receding; the monostatic boresight case reduces to 2 v / lambda).
    Each NLOS link adds nlos_extra_loss_db to the radar-equation path loss.
    """
    tx = scenario.tx.position
    rx = scenario.rx.position
    lam = scenario.wavelength
    pos = target.position
    d_tx = float(np.linalg.norm(pos - tx))
    d_rx = float(np.linalg.norm(pos - rx))
    if d_tx == 0.0 or d_rx == 0.0:
        raise DegenerateGeometryError(f"target {target.id!r} co-located with tx or rx")

    u_tx = (pos - tx) / d_tx  # from tx toward the target
    u_rx = (pos - rx) / d_rx  # from rx toward the target
    doppler = float(np.dot(target.velocity, u_tx) + np.dot(target.velocity, u_rx)) / lam

    sigma = slow_sigma(target.rcs, lam)
    pl = sensing_pathloss(d_tx, d_rx, lam, sigma)
    pl += nlos_extra_loss_db * sum(1 for s in los_states if s is LosState.NLOS)

    aod, zod = _angles_of(pos - tx)
    aoa, zoa = _angles_of(pos - rx)
    offsets = (
        rng.uniform(-RAY_OFFSET_HALF_WIDTH, RAY_OFFSET_HALF_WIDTH, n_rays) if rng is not None else None
    )
    cluster = Cluster(
        delay_s=(d_tx + d_rx) / SPEED_OF_LIGHT,
        power=1.0,
        aod=aod,
        zod=zod,
        aoa=aoa,
        zoa=zoa,
        n_rays=n_rays,
        ray_angle_offsets=offsets,
        kind="sensing" if isinstance(target, Target) else "eo",
        target_id=target.id,
        doppler_hz=doppler,
    )
    budget = LinkBudget(
        d_tx_m=d_tx,
        d_rx_m=d_rx,
        delay_s=cluster.delay_s,
        doppler_hz=doppler,
        sigma_slow_m2=sigma,
        pathloss_db=pl,
        los_tx=los_states[0],
        los_rx=los_states[1],
    )
    return cluster, budget


def cluster_from_specular(path: SpecularPath) -> Cluster:
    """Single-ray zero-Doppler cluster for a type-2 reflection path.

    power holds the absolute power gain (amplitude squared); the
    realization builder renormalizes it against the other clusters.
    """
    return Cluster(
        delay_s=path.delay_s,
        power=path.gain**2,
        aod=path.aod[0],
        zod=path.aod[1],
        aoa=path.aoa[0],
        zoa=path.aoa[1],
        n_rays=1,
        kind="eo",
        target_id=path.eo_id,
    )


def normalize_cluster_powers(clusters: Sequence[Cluster]) -> list[Cluster]:
    """Rescale cluster powers to sum to exactly 1."""
    total = sum(c.power for c in clusters)
    if total <= 0:
        raise ValueError("total cluster power must be > 0")
    return [replace(c, power=c.power / total) for c in clusters]


RcsFastHook = Callable[[float, float, float, float], float]


@dataclass(frozen=True)
class ChannelRealization:
    """Frequency response H[k, m] split by cluster kind.

    h_by_kind maps "sensing" / "background" / "eo" to partial responses;
    h is their sum. path_gain_db is the common amplitude reference applied
    on top of the normalized cluster power fractions.
    """

    clusters: tuple[Cluster, ...]
    h_by_kind: Mapping[str, np.ndarray]
    config: OfdmConfig
    path_gain_db: float = 0.0

    @property
    def h(self) -> np.ndarray:
        out = None
        for part in self.h_by_kind.values():
            out = part.copy() if out is None else out + part
        return out

    @property
    def h_target(self) -> np.ndarray:
        return self.h_by_kind["sensing"]

    @property
    def h_background(self) -> np.ndarray:
        """Everything that is not the sensing target (background + EO)."""
        return self.h_by_kind["background"] + self.h_by_kind["eo"]


def freq_response(
    clusters: Sequence[Cluster],
    ofdm_config: OfdmConfig,
    micro_phases: Mapping[str, microdoppler.PhaseSeries] | None = None,
    rcs_fast: Union[RcsFastHook, Mapping[str, RcsFastHook], None] = None,
    rng: np.random.Generator | None = None,
    path_gain_db: float = 0.0,
    micro_subset_size: int | None = None,
) -> ChannelRealization:
    """Generate H[k, m] from a cluster set.

    Per cluster: n_rays rays of amplitude sqrt(power G_fast / n_rays) with
    random initial phases, a common delay phase across subcarriers, the
    cluster Doppler phase across repetitions, and (for sensing clusters
    with a phase series in micro_phases) the micro-Doppler phase applied to
    a ray subset drawn once per realization (default half the rays).
    rcs_fast is an angle gain hook, or a mapping target_id -> hook, applied
    to sensing clusters.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    micro_phases = micro_phases or {}
    n_sc, n_reps = ofdm_config.n_sc, ofdm_config.n_reps
    k = np.arange(n_sc)
    m = np.arange(n_reps)
    amp_scale = 10.0 ** (path_gain_db / 20.0)

    h_by_kind = {kind: np.zeros((n_sc, n_reps), dtype=complex) for kind in ("sensing", "background", "eo")}
    for cluster in clusters:
        psi = rng.uniform(0.0, 2.0 * math.pi, cluster.n_rays)
        gains = np.ones(cluster.n_rays)
        if cluster.kind == "sensing" and rcs_fast is not None:
            hook = rcs_fast.get(cluster.target_id) if isinstance(rcs_fast, Mapping) else rcs_fast
            if hook is not None:
                gains = np.array(
                    [
                        hook(cluster.aod + off, cluster.zod, cluster.aoa + off, cluster.zoa)
                        for off in cluster.ray_angle_offsets
                    ]
                )
        amps = np.sqrt(cluster.power * gains / cluster.n_rays) * np.exp(1j * psi)

        doppler = np.exp(1j * 2.0 * math.pi * cluster.doppler_hz * m * ofdm_config.pri_s)
        phases = micro_phases.get(cluster.target_id) if cluster.kind == "sensing" else None
        if phases is not None:
            if phases.samples.size < n_reps:
                raise ValueError(
                    f"micro phase series for {cluster.target_id!r} has "
                    f"{phases.samples.size} samples, need {n_reps}"
                )
            subset_size = max(1, cluster.n_rays // 2) if micro_subset_size is None else micro_subset_size
            subset_size = min(subset_size, cluster.n_rays)
            chosen = rng.choice(cluster.n_rays, size=subset_size, replace=False)
            in_subset = np.zeros(cluster.n_rays, dtype=bool)
            in_subset[chosen] = True
            micro = np.exp(1j * phases.samples[:n_reps])
            slow = np.where(in_subset[:, None], doppler[None, :] * micro[None, :], doppler[None, :])
            ray_sum = amps @ slow
        else:
            ray_sum = amps.sum() * doppler

        delay_phase = np.exp(-1j * 2.0 * math.pi * k * ofdm_config.scs_hz * cluster.delay_s)
        h_by_kind[cluster.kind] += amp_scale * np.outer(delay_phase, ray_sum)

    return ChannelRealization(
        clusters=tuple(clusters),
        h_by_kind=h_by_kind,
        config=ofdm_config,
        path_gain_db=path_gain_db,
    )


@dataclass(frozen=True)
class BackgroundConfig:
    """Environment cluster defaults; rel_power_db sets the total background
    power relative to the sensing-target echo power."""

    n_clusters: int = 5
    delay_spread_s: float = 100e-9
    rel_power_db: float = 15.0
    n_rays: int = 20
    micro_subset: int | None = None
    nlos_extra_loss_db: float = 10.0


def micro_geometry_factor(scenario: Scenario, target: Target) -> float:
    """|u_tx . m| + |u_rx . m| for the fine-motion axis m.

    The pendulum-arm profile swings along the body facing axis; every other
    profile defaults to motion along the Tx-target line of sight, which
    gives the standard two-way factor 2 for monostatic sensing.
    """
    pos = target.position
    u_tx = pos - scenario.tx.position
    u_tx = u_tx / np.linalg.norm(u_tx)
    u_rx = pos - scenario.rx.position
    u_rx = u_rx / np.linalg.norm(u_rx)
    if isinstance(target.micro_motion, microdoppler.PendulumArm):
        o = target.micro_motion.orientation_rad
        axis = np.array([math.cos(o), math.sin(o), 0.0])
    else:
        axis = u_tx
    return float(abs(np.dot(u_tx, axis)) + abs(np.dot(u_rx, axis)))


def build_realization(
    scenario: Scenario,
    ofdm: OfdmConfig,
    background: BackgroundConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[ChannelRealization, list[LinkBudget]]:
    """Assemble the full ISAC channel for a scenario.

    Draw order from the single rng stream: per-target LOS states and ray
    offsets (scenario order, targets then type-1 objects), background
    clusters, then ray phases and micro subsets inside freq_response.
    Cluster power fractions are proportional to each contribution's
    absolute power gain; the background total sits rel_power_db above the
    summed sensing echoes.
    """
    violations = validate(scenario)
    if violations:
        raise ScenarioValidationError(violations)
    background = background or BackgroundConfig()
    rng = rng if rng is not None else np.random.default_rng(scenario.seed)
    lam = scenario.wavelength

    sensing_clusters: list[Cluster] = []
    budgets: list[LinkBudget] = []
    echo_like = list(scenario.targets) + [eo for eo in scenario.environment_objects if isinstance(eo, EoType1)]
    for tgt in echo_like:
        d_tx = float(np.linalg.norm(tgt.position - scenario.tx.position))
        d_rx = float(np.linalg.norm(tgt.position - scenario.rx.position))
        states = (
            los_state(d_tx, scenario.los_model, rng),
            los_state(d_rx, scenario.los_model, rng),
        )
        cluster, budget = concatenate_target_link(
            scenario,
            tgt,
            states,
            rng=rng,
            n_rays=background.n_rays,
            nlos_extra_loss_db=background.nlos_extra_loss_db,
        )
        sensing_clusters.append(replace(cluster, power=budget.path_gain))
        budgets.append(budget)

    eo_clusters = [cluster_from_specular(p) for p in specular_paths(scenario)]
    bg_clusters = generate_background(background.n_clusters, background.delay_spread_s, rng, background.n_rays)

    echo_total = sum(c.power for c in sensing_clusters if c.kind == "sensing") or 1.0
    bg_total = echo_total * 10.0 ** (background.rel_power_db / 10.0)
    bg_clusters = [replace(c, power=c.power * bg_total) for c in bg_clusters]

    clusters = sensing_clusters + eo_clusters + bg_clusters
    total_gain = sum(c.power for c in clusters)
    if total_gain <= 0:
        raise ValueError("scene has no propagation paths (no clusters or all no-echo)")
    clusters = normalize_cluster_powers(clusters)

    micro_phases = {}
    for tgt in scenario.targets:
        if isinstance(tgt.micro_motion, microdoppler.NoMotion):
            continue
        micro_phases[tgt.id] = microdoppler.micro_phase_series(
            tgt.micro_motion,
            lam,
            duration=ofdm.n_reps * ofdm.pri_s,
            sample_interval=ofdm.pri_s,
            geometry_factor=micro_geometry_factor(scenario, tgt),
        )

    hooks: dict[str, RcsFastHook] = {}
    for tgt in scenario.targets:
        if isinstance(tgt.rcs, (rcs.RectangularPlate, rcs.CircularPlate, rcs.Sphere, rcs.Cylinder)):
            hooks[tgt.id] = fast_gain_hook(tgt.rcs, lam, tgt.orientation)

    realization = freq_response(
        clusters,
        ofdm,
        micro_phases=micro_phases,
        rcs_fast=hooks or None,
        rng=rng,
        path_gain_db=10.0 * math.log10(total_gain),
        micro_subset_size=background.micro_subset,
    )
    return realization, budgets


def write_realization_csv(path, realization: ChannelRealization) -> None:
    """CSV export: one row per subcarrier, re/im pairs per repetition."""
    h = realization.h
    n_sc, n_reps = h.shape
    header = "subcarrier," + ",".join(f"rep{m}_re,rep{m}_im" for m in range(n_reps))
    lines = [header]
    for ki in range(n_sc):
        cells = []
        for mi in range(n_reps):
            cells.append(f"{h[ki, mi].real:.9g}")
            cells.append(f"{h[ki, mi].imag:.9g}")
        lines.append(f"{ki}," + ",".join(cells))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
