"""Command-line front end.

Subcommands: validate, rcs-sweep, microdoppler, simulate. Each run loads a
TOML scenario (bundled defaults available), applies --set overrides, emits
CSV/PGM artifacts under --out, and writes a manifest of artifact digests.
Figure presets reproduce the reference plots: fig2 (RCS sweeps at several
separation distances), fig3 (arm-swing velocity-distance and Doppler-time
pair), fig4 (link-level pre/post-notch delay-Doppler maps), fig5
(arm-swing spectrograms at four orientations).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import channel, microdoppler, rcs, sensing
from .scenario import (
    Scenario,
    ScenarioLoadError,
    ScenarioValidationError,
    parse_scenario_dict,
    validate,
)

THREADS_ENV = "ISAC_CHANSIM_THREADS"

_OFDM_KEYS = {"carrier_hz", "scs_hz", "n_sc", "pri_symbols", "n_reps", "snr_db", "window"}
_BACKGROUND_KEYS = {"n_clusters", "delay_spread_s", "rel_power_db", "n_rays", "micro_subset", "nlos_extra_loss_db"}
_ARMSWING_KEYS = {
    "orientation_deg",
    "duration_s",
    "sample_rate_hz",
    "window_len",
    "hop",
    "radar_position_m",
    "body_position_m",
    "period_s",
    "peak_speed_mps",
    "arm_amplitudes",
    "shoulder_halfwidth_m",
}
_SWEEP_KEYS = {"start_deg", "stop_deg", "step_deg", "distances_m"}


@dataclass
class RunConfig:
    subcommand: str
    scenario_path: Path | None = None
    output_dir: Path = Path("out")
    seed: int | None = None
    preset: str | None = None
    overrides: list[str] = field(default_factory=list)


def bundled_scenario(name: str) -> Path:
    with resources.as_file(resources.files("isac_chansim") / "scenarios" / f"{name}.toml") as p:
        return Path(p)


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = max(1, int(cap)) if cap else (os.cpu_count() or 1)
    return max(1, min(n_tasks, limit))


def _parallel_map(fn: Callable, items: Sequence) -> list:
    workers = worker_count(len(items))
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def parse_override_value(text: str):
    """Parse an override value as a TOML literal, falling back to a string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(doc: dict, path: str, value) -> None:
    """Set a dotted-path key in a nested dict/list document."""
    parts = path.split(".")
    node = doc
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        else:
            node = node.setdefault(part, {})
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def _reject_unknown(table: dict, allowed: set[str], where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ScenarioLoadError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def ofdm_from_doc(doc: dict, scenario: Scenario) -> tuple[sensing.OfdmConfig, str]:
    table = doc.get("ofdm", {})
    _reject_unknown(table, _OFDM_KEYS, "[ofdm]")
    window = table.get("window", "rect")
    cfg = sensing.OfdmConfig(
        carrier_hz=float(table.get("carrier_hz", scenario.carrier_hz)),
        scs_hz=float(table.get("scs_hz", 30e3)),
        n_sc=int(table.get("n_sc", 600)),
        pri_symbols=int(table.get("pri_symbols", 14)),
        n_reps=int(table.get("n_reps", 50)),
        snr_db=float(table.get("snr_db", 30.0)),
    )
    return cfg, window


def background_from_doc(doc: dict) -> channel.BackgroundConfig:
    table = doc.get("background", {})
    _reject_unknown(table, _BACKGROUND_KEYS, "[background]")
    return channel.BackgroundConfig(
        n_clusters=int(table.get("n_clusters", 5)),
        delay_spread_s=float(table.get("delay_spread_s", 100e-9)),
        rel_power_db=float(table.get("rel_power_db", 15.0)),
        n_rays=int(table.get("n_rays", 20)),
        micro_subset=(int(table["micro_subset"]) if "micro_subset" in table else None),
        nlos_extra_loss_db=float(table.get("nlos_extra_loss_db", 10.0)),
    )


@dataclass(frozen=True)
class ArmSwingSetup:
    orientation_rad: float = 0.0
    duration_s: float = 3.0
    sample_rate_hz: float = 500.0
    window_len: int = 128
    hop: int = 16
    radar_position: tuple = (0.0, 0.0, 1.0)
    body_position: tuple = (3.0, 0.0, 1.4)
    period_s: float = 1.0
    peak_speed_mps: float = 2.0
    arm_amplitudes: tuple = (0.6, 1.0)
    shoulder_halfwidth_m: float = 0.2


def armswing_from_doc(doc: dict) -> ArmSwingSetup:
    table = doc.get("armswing", {})
    _reject_unknown(table, _ARMSWING_KEYS, "[armswing]")
    return ArmSwingSetup(
        orientation_rad=math.radians(float(table.get("orientation_deg", 0.0))),
        duration_s=float(table.get("duration_s", 3.0)),
        sample_rate_hz=float(table.get("sample_rate_hz", 500.0)),
        window_len=int(table.get("window_len", 128)),
        hop=int(table.get("hop", 16)),
        radar_position=tuple(table.get("radar_position_m", (0.0, 0.0, 1.0))),
        body_position=tuple(table.get("body_position_m", (3.0, 0.0, 1.4))),
        period_s=float(table.get("period_s", 1.0)),
        peak_speed_mps=float(table.get("peak_speed_mps", 2.0)),
        arm_amplitudes=tuple(table.get("arm_amplitudes", (0.6, 1.0))),
        shoulder_halfwidth_m=float(table.get("shoulder_halfwidth_m", 0.2)),
    )


def sweep_from_doc(doc: dict) -> dict:
    table = doc.get("sweep", {})
    _reject_unknown(table, _SWEEP_KEYS, "[sweep]")
    return {
        "start_deg": float(table.get("start_deg", 0.0)),
        "stop_deg": float(table.get("stop_deg", 60.0)),
        "step_deg": float(table.get("step_deg", 1.0)),
        "distances_m": [float(d) for d in table.get("distances_m", (5.0, 15.0, 50.0))],
    }


class _ArtifactSink:
    """Collects emitted files and writes the digest manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.paths: list[Path] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.paths.append(p)
        return p

    def write_manifest(self) -> Path:
        lines = []
        for p in sorted(self.paths):
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            lines.append(f"{p.relative_to(self.out_dir)}\t{digest}")
        manifest = self.out_dir / "manifest.txt"
        manifest.write_text("\n".join(lines) + ("\n" if lines else ""), newline="\n")
        return manifest


# ---------------------------------------------------------------------------
# Workflows
# ---------------------------------------------------------------------------


def _load(config: RunConfig, default_bundle: str) -> tuple[Scenario, dict]:
    path = config.scenario_path or bundled_scenario(default_bundle)
    raw = Path(path).read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioLoadError(f"{path}: {exc}") from exc
    for item in config.overrides:
        if "=" not in item:
            raise ScenarioLoadError(f"override must look like section.key=value, got {item!r}")
        key, _, value = item.partition("=")
        apply_override(doc, key.strip(), parse_override_value(value.strip()))
    scenario = parse_scenario_dict(doc)
    if config.seed is not None:
        scenario = dataclasses.replace(scenario, seed=config.seed)
    return scenario, doc


def run_validate(config: RunConfig) -> int:
    scenario, _ = _load(config, "table1")
    violations = validate(scenario)
    if violations:
        for v in violations:
            print(v)
        return 2
    print("scenario valid")
    sink = _ArtifactSink(config.output_dir)
    sink.write_manifest()
    return 0


def _first_shape(scenario: Scenario) -> rcs.PrimitiveShape:
    for tgt in scenario.targets:
        if not isinstance(tgt.rcs, (int, float)):
            shape = tgt.rcs
            if isinstance(shape, rcs.SegmentedObject):
                raise ScenarioLoadError("rcs-sweep needs a primitive shape target")
            return shape
    raise ScenarioLoadError("rcs-sweep needs a target with a shape (not scalar rcs)")


def run_rcs_sweep(config: RunConfig) -> int:
    scenario, doc = _load(config, "plate")
    shape = _first_shape(scenario)
    sw = sweep_from_doc(doc)
    angles = np.radians(np.arange(sw["start_deg"], sw["stop_deg"] + sw["step_deg"] / 2, sw["step_deg"]))
    sink = _ArtifactSink(config.output_dir)

    if config.preset == "fig2":
        lam = scenario.wavelength

        def one_distance(dist: float):
            r_min = dist - shape.max_dimension
            if r_min <= 0:
                raise ScenarioLoadError(f"fig2 distance {dist} m too close for this shape")
            obj = rcs.segment_object(shape, lam, r_min)
            sweep = []
            for theta in angles:
                pos = dist * np.array([math.sin(theta), 0.0, math.cos(theta)])
                sweep.append(
                    (rcs.monostatic_aspect(float(theta)), rcs.object_rcs(obj, pos, pos, lam, "coherent"))
                )
            decomp = rcs.decompose_slow_fast(sweep)
            rcs.write_sweep_csv(sink.path(f"fig2_d{dist:g}m.csv"), sweep, decomp)
            return obj.n_segments

        counts = _parallel_map(one_distance, sw["distances_m"])
        for dist, n in zip(sw["distances_m"], counts):
            print(f"fig2: distance {dist:g} m -> {n} segments")
    else:
        sweep = rcs.sweep_plate_monostatic(shape, scenario.wavelength, angles)
        decomp = rcs.decompose_slow_fast(sweep)
        rcs.write_sweep_csv(sink.path("rcs_sweep.csv"), sweep, decomp)

    manifest = sink.write_manifest()
    print(f"wrote {len(sink.paths)} artifact(s); manifest {manifest}")
    return 0


def _arm_spectrogram(scenario: Scenario, setup: ArmSwingSetup, orientation_rad: float) -> microdoppler.Spectrogram:
    _, iq = microdoppler.arm_swing_iq(
        duration_s=setup.duration_s,
        sample_rate_hz=setup.sample_rate_hz,
        wavelength=scenario.wavelength,
        radar_position=setup.radar_position,
        body_position=setup.body_position,
        period_s=setup.period_s,
        peak_speed_mps=setup.peak_speed_mps,
        orientation_rad=orientation_rad,
        arm_amplitudes=setup.arm_amplitudes,
        shoulder_halfwidth_m=setup.shoulder_halfwidth_m,
    )
    return microdoppler.spectrogram(iq, setup.sample_rate_hz, setup.window_len, setup.hop)


def run_microdoppler(config: RunConfig) -> int:
    scenario, doc = _load(config, "table1")
    setup = armswing_from_doc(doc)
    sink = _ArtifactSink(config.output_dir)

    if config.preset == "fig5":
        def one_orientation(deg: float):
            spec = _arm_spectrogram(scenario, setup, math.radians(deg))
            microdoppler.write_spectrogram_csv(sink.out_dir / f"fig5_orient{deg:g}.csv", spec)
            microdoppler.write_spectrogram_pgm(sink.out_dir / f"fig5_orient{deg:g}.pgm", spec)
            return (f"fig5_orient{deg:g}.csv", f"fig5_orient{deg:g}.pgm")

        for names in _parallel_map(one_orientation, [0.0, 30.0, 60.0, 90.0]):
            for n in names:
                sink.paths.append(sink.out_dir / n)
    elif config.preset == "fig3":
        _run_fig3(scenario, doc, setup, sink)
    else:
        spec = _arm_spectrogram(scenario, setup, setup.orientation_rad)
        microdoppler.write_spectrogram_csv(sink.path("spectrogram.csv"), spec)
        microdoppler.write_spectrogram_pgm(sink.path("spectrogram.pgm"), spec)

    manifest = sink.write_manifest()
    print(f"wrote {len(sink.paths)} artifact(s); manifest {manifest}")
    return 0


def _run_fig3(scenario: Scenario, doc: dict, setup: ArmSwingSetup, sink: _ArtifactSink) -> None:
    """Arm-swing velocity-distance map and Doppler-time spectrogram."""
    ofdm, _ = ofdm_from_doc(doc, scenario)
    n_reps = int(round(setup.duration_s / ofdm.pri_s))
    t = np.arange(n_reps) * ofdm.pri_s
    lam = ofdm.wavelength
    radar = np.asarray(setup.radar_position, dtype=float)
    k = np.arange(ofdm.n_sc)
    csi = np.zeros((ofdm.n_sc, n_reps), dtype=complex)
    for i, weight in enumerate(setup.arm_amplitudes):
        states = [
            microdoppler.arm_swing_states(
                ti,
                setup.period_s,
                setup.peak_speed_mps,
                setup.orientation_rad,
                setup.body_position,
                setup.shoulder_halfwidth_m,
            )[i]
            for ti in t
        ]
        r = np.array([float(np.linalg.norm(s.position - radar)) for s in states])
        tau = 2.0 * r / sensing.SPEED_OF_LIGHT
        gain = (weight / r**2) * np.exp(1j * 2.0 * math.pi * 2.0 * r / lam)
        csi += np.exp(-1j * 2.0 * math.pi * np.outer(k, ofdm.scs_hz * tau)) * gain[None, :]

    cfg_long = sensing.OfdmConfig(
        carrier_hz=ofdm.carrier_hz,
        scs_hz=ofdm.scs_hz,
        n_sc=ofdm.n_sc,
        pri_symbols=ofdm.pri_symbols,
        n_reps=n_reps,
        snr_db=ofdm.snr_db,
    )
    dd = sensing.delay_doppler(sensing.notch_zero_doppler(csi), cfg_long)
    # crop to the near range / low velocity region of interest
    keep_delay = slice(0, 32)
    vel = dd.doppler_axis_hz * lam / 2.0
    keep_vel = np.abs(vel) <= 6.0
    crop = sensing.DelayDopplerMap(
        magnitudes=dd.magnitudes[keep_delay, :][:, keep_vel],
        delay_axis_s=dd.delay_axis_s[keep_delay],
        doppler_axis_hz=dd.doppler_axis_hz[keep_vel],
    )
    sensing.write_map_csv(sink.path("fig3_velocity_distance.csv"), crop)
    sensing.write_map_pgm(sink.path("fig3_velocity_distance.pgm"), crop)

    arm_bin = int(np.argmax(np.abs(np.fft.ifft(csi, axis=0)).sum(axis=1)))
    slow = np.fft.ifft(csi, axis=0)[arm_bin]
    spec = microdoppler.spectrogram(slow, 1.0 / ofdm.pri_s, window_len=256, hop=32)
    microdoppler.write_spectrogram_csv(sink.path("fig3_doppler_time.csv"), spec)
    microdoppler.write_spectrogram_pgm(sink.path("fig3_doppler_time.pgm"), spec)


def run_simulate(config: RunConfig) -> int:
    scenario, doc = _load(config, "table1")
    violations = validate(scenario)
    if violations:
        for v in violations:
            print(v)
        return 2
    ofdm, window = ofdm_from_doc(doc, scenario)
    bg = background_from_doc(doc)
    rng = np.random.default_rng(scenario.seed)
    realization, budgets = channel.build_realization(scenario, ofdm, bg, rng)
    pilot = sensing.make_pilot(ofdm.n_sc, scenario.seed)
    echo = sensing.simulate_echo(realization, pilot, ofdm.snr_db, rng)
    csi = sensing.estimate_csi(echo, pilot)
    pre = sensing.delay_doppler(csi, ofdm, window=window)
    post = sensing.delay_doppler(sensing.notch_zero_doppler(csi), ofdm, window=window)

    sink = _ArtifactSink(config.output_dir)
    sensing.write_map_csv(sink.path("delay_doppler_prenotch.csv"), pre)
    sensing.write_map_pgm(sink.path("delay_doppler_prenotch.pgm"), pre)
    sensing.write_map_csv(sink.path("delay_doppler_postnotch.csv"), post)
    sensing.write_map_pgm(sink.path("delay_doppler_postnotch.pgm"), post)

    if config.preset != "fig4":
        detections = sensing.detect_peaks(post, threshold_db_below_max=20.0, guard_bins=2)
        sensing.write_detections_csv(
            sink.path("detections.csv"), detections, ofdm, monostatic=scenario.mode.is_monostatic
        )
        channel.write_realization_csv(sink.path("channel_realization.csv"), realization)
        for det, budget in zip(detections[:1], budgets[:1]):
            rng_m, vel = sensing.to_range_velocity(det, ofdm, scenario.mode.is_monostatic)
            if scenario.mode.is_monostatic:
                quantities = f"{rng_m:.1f} m, {vel:+.1f} m/s"
            else:
                quantities = f"path {rng_m:.1f} m, Doppler {vel:+.1f} Hz"
            print(
                f"top detection: delay bin {det.delay_bin}, Doppler bin {det.doppler_bin:+d} "
                f"-> {quantities} (link budget {budget.pathloss_db:.1f} dB)"
            )

    manifest = sink.write_manifest()
    print(f"wrote {len(sink.paths)} artifact(s); manifest {manifest}")
    return 0


@dataclass(frozen=True)
class FigureRecipe:
    name: str
    subcommand: str
    description: str


def figure_recipes() -> dict[str, FigureRecipe]:
    """Named presets reproducing the reference figures."""
    recipes = [
        FigureRecipe("fig2", "rcs-sweep", "segmented RCS sweeps at three separation distances"),
        FigureRecipe("fig3", "microdoppler", "arm-swing velocity-distance map and Doppler-time spectrogram"),
        FigureRecipe("fig4", "simulate", "link-level pre/post-notch delay-Doppler maps"),
        FigureRecipe("fig5", "microdoppler", "arm-swing spectrograms at orientations 0/30/60/90 deg"),
    ]
    return {r.name: r for r in recipes}


_HANDLERS = {
    "validate": run_validate,
    "rcs-sweep": run_rcs_sweep,
    "microdoppler": run_microdoppler,
    "simulate": run_simulate,
}


def run(config: RunConfig) -> int:
    """Execute one workflow; returns the process exit code."""
    if config.preset is not None:
        recipe = figure_recipes().get(config.preset)
        if recipe is None:
            print(f"unknown preset {config.preset!r}; available: {', '.join(sorted(figure_recipes()))}")
            return 2
        if recipe.subcommand != config.subcommand:
            print(f"preset {config.preset!r} belongs to subcommand {recipe.subcommand!r}")
            return 2
    try:
        return _HANDLERS[config.subcommand](config)
    except ScenarioValidationError as exc:
        for v in exc.violations:
            print(v)
        return 2
    except FileNotFoundError as exc:
        print(f"cannot read scenario file: {exc.filename}")
        return 1
    except (ScenarioLoadError, ValueError) as exc:
        print(f"error: {exc}")
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isac-chansim",
        description="ISAC channel simulator: RCS sweeps, micro-Doppler spectrograms, link-level sensing",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, help_text in (
        ("validate", "check a scenario file and report violations"),
        ("rcs-sweep", "aspect-angle RCS sweep with slow/fast decomposition"),
        ("microdoppler", "arm-swing micro-Doppler spectrograms"),
        ("simulate", "full link-level run producing delay-Doppler maps"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", type=Path, default=None, help="scenario TOML (default: bundled)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--preset", default=None, help="figure preset (fig2..fig5)")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a scenario/config key (repeatable)",
        )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = RunConfig(
        subcommand=args.subcommand,
        scenario_path=args.scenario,
        output_dir=args.out,
        seed=args.seed,
        preset=args.preset,
        overrides=list(args.overrides),
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
