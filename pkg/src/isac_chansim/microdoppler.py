"""Parametric fine-motion models and micro-Doppler phase synthesis.

Profiles cover rotating blades, limb swing, vibration/vital motion, and
two Doppler-specified waveforms (sinusoid, sawtooth). Kinematic profiles
yield radial displacement/velocity in physical units; Doppler-specified
profiles define the instantaneous Doppler deviation directly and bypass
the wavelength scaling. Also provides the arm-swing scatterer model used
to reproduce measured walking signatures, and a Hann-window spectrogram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class NoMotion:
    """No fine motion: zero displacement, zero velocity."""


@dataclass(frozen=True)
class SinusoidDoppler:
    """Sinusoidal micro-Doppler specified in Doppler terms.

    Instantaneous Doppler deviation peak_doppler_hz * cos(2 pi mod_freq_hz t
    + phase_rad); the phase series is its integral and does not depend on
    wavelength or geometry.
    """

    peak_doppler_hz: float
    mod_freq_hz: float
    phase_rad: float = 0.0

    def __post_init__(self):
        if self.mod_freq_hz <= 0:
            raise ValueError("mod_freq_hz must be > 0")
        if self.peak_doppler_hz < 0:
            raise ValueError("peak_doppler_hz must be >= 0")


@dataclass(frozen=True)
class SawtoothDoppler:
    """Sawtooth micro-Doppler: rising Doppler ramp with instantaneous flyback.

    The deviation ramps linearly from -peak to +peak over each period
    (acceleration then flyback); the phase series is the integrated ramp.
    """

    peak_doppler_hz: float
    period_s: float
    phase_rad: float = 0.0

    def __post_init__(self):
        if self.period_s <= 0:
            raise ValueError("period_s must be > 0")
        if self.peak_doppler_hz < 0:
            raise ValueError("peak_doppler_hz must be >= 0")


@dataclass(frozen=True)
class Rotor:
    """Rotating blade assembly reduced to one equivalent tip scatterer.

    Radial displacement blade_length_m * sin(2 pi f_b t) with f_b the
    blade-passage frequency n_blades * rpm / 60.
    """

    n_blades: int
    blade_length_m: float
    rpm: float

    def __post_init__(self):
        if self.n_blades < 1:
            raise ValueError("n_blades must be >= 1")
        if self.blade_length_m <= 0 or self.rpm <= 0:
            raise ValueError("blade_length_m and rpm must be > 0")

    @property
    def passage_hz(self) -> float:
        return self.n_blades * self.rpm / 60.0


@dataclass(frozen=True)
class PendulumArm:
    """Swinging arm: sinusoidal displacement along the body facing axis.

    peak_speed_mps is the speed amplitude; orientation_rad rotates the
    facing axis about vertical, scaling the radial projection by its cosine.
    """

    period_s: float = 1.0
    peak_speed_mps: float = 2.0
    orientation_rad: float = 0.0

    def __post_init__(self):
        if self.period_s <= 0:
            raise ValueError("period_s must be > 0")
        if self.peak_speed_mps < 0:
            raise ValueError("peak_speed_mps must be >= 0")

    @property
    def displacement_amp_m(self) -> float:
        return self.peak_speed_mps * self.period_s / (2.0 * math.pi)


@dataclass(frozen=True)
class VitalSign:
    """Breathing/heartbeat-style vibration: sinusoidal radial displacement."""

    amp_displacement_m: float
    rate_hz: float

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ValueError("rate_hz must be > 0")
        if self.amp_displacement_m < 0:
            raise ValueError("amp_displacement_m must be >= 0")


MicroMotionProfile = Union[NoMotion, SinusoidDoppler, SawtoothDoppler, Rotor, PendulumArm, VitalSign]

# Profiles whose waveform is specified directly as a Doppler deviation.
DOPPLER_SPECIFIED = (SinusoidDoppler, SawtoothDoppler)


@dataclass(frozen=True)
class PhaseSeries:
    """Micro-Doppler phase samples (rad) on a uniform slow-time grid."""

    samples: np.ndarray
    sample_interval: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.size < 1:
            raise ValueError("phase series needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("phase samples must be finite")
        object.__setattr__(self, "samples", samples)


def _sawtooth_wave(t: np.ndarray, period: float, phase_rad: float) -> np.ndarray:
    # rising ramp -1 -> +1 with instantaneous flyback
    s = np.mod(t + phase_rad * period / (2.0 * math.pi), period)
    return 2.0 * s / period - 1.0


def radial_displacement(profile: MicroMotionProfile, t) -> np.ndarray:
    """Radial displacement (m) of a kinematic profile at time(s) t.

    Doppler-specified profiles have no wavelength-free displacement and
    raise TypeError; their phase comes from micro_phase_series directly.
    """
    t = np.asarray(t, dtype=float)
    if isinstance(profile, NoMotion):
        return np.zeros_like(t)
    if isinstance(profile, Rotor):
        return profile.blade_length_m * np.sin(2.0 * math.pi * profile.passage_hz * t)
    if isinstance(profile, PendulumArm):
        amp = profile.displacement_amp_m * math.cos(profile.orientation_rad)
        return amp * np.sin(2.0 * math.pi * t / profile.period_s)
    if isinstance(profile, VitalSign):
        return profile.amp_displacement_m * np.sin(2.0 * math.pi * profile.rate_hz * t)
    raise TypeError(f"{type(profile).__name__} has no kinematic displacement")


def radial_velocity(profile: MicroMotionProfile, t, direction_factor: float = 1.0):
    """Instantaneous radial velocity scaled by direction_factor.

    Kinematic profiles return m/s. Doppler-specified profiles return the
    normalized waveform in [-1, 1] (the wavelength-dependent scale is
    applied in micro_phase_series instead).
    """
    if not -1.0 <= direction_factor <= 1.0:
        raise ValueError("direction_factor must be in [-1, 1]")
    t = np.asarray(t, dtype=float)
    if isinstance(profile, NoMotion):
        out = np.zeros_like(t)
    elif isinstance(profile, SinusoidDoppler):
        out = np.cos(2.0 * math.pi * profile.mod_freq_hz * t + profile.phase_rad)
    elif isinstance(profile, SawtoothDoppler):
        out = _sawtooth_wave(t, profile.period_s, profile.phase_rad)
    elif isinstance(profile, Rotor):
        w = 2.0 * math.pi * profile.passage_hz
        out = profile.blade_length_m * w * np.cos(w * t)
    elif isinstance(profile, PendulumArm):
        w = 2.0 * math.pi / profile.period_s
        out = profile.peak_speed_mps * math.cos(profile.orientation_rad) * np.cos(w * t)
    elif isinstance(profile, VitalSign):
        w = 2.0 * math.pi * profile.rate_hz
        out = profile.amp_displacement_m * w * np.cos(w * t)
    else:
        raise TypeError(f"unsupported profile {type(profile).__name__}")
    out = out * direction_factor
    return float(out) if out.ndim == 0 else out


def micro_phase_series(
    profile: MicroMotionProfile,
    wavelength: float,
    duration: float,
    sample_interval: float,
    geometry_factor: float = 2.0,
) -> PhaseSeries:
    """Micro-Doppler phase sequence phi(t) on a uniform grid.

    Kinematic profiles use phi(t) = (2 pi / wavelength) * geometry_factor *
    d(t) with d the radial displacement; geometry_factor is the sum of the
    absolute projections of the motion axis on the two link directions
    (2 for monostatic motion along boresight). Doppler-specified profiles
    integrate their deviation waveform directly.
    """
    if sample_interval <= 0:
        raise ValueError(f"sample_interval must be > 0, got {sample_interval}")
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    n = max(1, int(round(duration / sample_interval)))
    t = np.arange(n) * sample_interval

    if isinstance(profile, SinusoidDoppler):
        beta = profile.peak_doppler_hz / profile.mod_freq_hz
        phi = beta * np.sin(2.0 * math.pi * profile.mod_freq_hz * t + profile.phase_rad)
    elif isinstance(profile, SawtoothDoppler):
        # integral of 2 pi * peak * (2 s / T - 1) over each period
        T = profile.period_s
        s = np.mod(t + profile.phase_rad * T / (2.0 * math.pi), T)
        phi = 2.0 * math.pi * profile.peak_doppler_hz * (s**2 / T - s)
    else:
        phi = (2.0 * math.pi / wavelength) * geometry_factor * radial_displacement(profile, t)
    return PhaseSeries(samples=phi, sample_interval=sample_interval)


@dataclass(frozen=True)
class ArmState:
    position: np.ndarray
    velocity: np.ndarray


def arm_swing_states(
    t: float,
    period_s: float = 1.0,
    peak_speed_mps: float = 2.0,
    orientation_rad: float = 0.0,
    body_position: Sequence[float] = (0.0, 0.0, 1.4),
    shoulder_halfwidth_m: float = 0.2,
) -> tuple[ArmState, ArmState]:
    """Left/right arm point scatterers at time t, anti-phase along the
    facing axis.

    The facing axis is +x rotated by orientation_rad about vertical. At
    t = 0 the right arm is mid-swing moving forward (left arm posterior),
    with speed amplitude peak_speed_mps. Returns (left, right).
    """
    if period_s <= 0:
        raise ValueError("period_s must be > 0")
    body = np.asarray(body_position, dtype=float)
    facing = np.array([math.cos(orientation_rad), math.sin(orientation_rad), 0.0])
    lateral = np.array([-math.sin(orientation_rad), math.cos(orientation_rad), 0.0])
    w = 2.0 * math.pi / period_s
    amp = peak_speed_mps / w
    s = amp * math.sin(w * t)
    v = peak_speed_mps * math.cos(w * t)
    right = ArmState(
        position=body + s * facing - shoulder_halfwidth_m * lateral,
        velocity=v * facing,
    )
    left = ArmState(
        position=body - s * facing + shoulder_halfwidth_m * lateral,
        velocity=-v * facing,
    )
    return left, right


def arm_swing_iq(
    duration_s: float,
    sample_rate_hz: float,
    wavelength: float,
    radar_position: Sequence[float] = (0.0, 0.0, 1.0),
    body_position: Sequence[float] = (3.0, 0.0, 1.4),
    period_s: float = 1.0,
    peak_speed_mps: float = 2.0,
    orientation_rad: float = 0.0,
    arm_amplitudes: tuple[float, float] = (0.6, 1.0),
    shoulder_halfwidth_m: float = 0.2,
) -> tuple[np.ndarray, np.ndarray]:
    """Monostatic baseband echo of the two swinging arms.

    Each arm contributes amp / r^2 * exp(j 2 pi * 2 r(t) / wavelength), so a
    receding arm has positive Doppler (matching the channel convention).
    arm_amplitudes are the (left, right) reflect weights; healthy gait shows
    a measurable dominant-arm asymmetry and identical weights would make
    every magnitude statistic half-cycle periodic by symmetry.

    Returns (t, iq).
    """
    if duration_s <= 0 or sample_rate_hz <= 0:
        raise ValueError("duration_s and sample_rate_hz must be > 0")
    radar = np.asarray(radar_position, dtype=float)
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    iq = np.zeros(n, dtype=complex)
    for i, weight in enumerate(arm_amplitudes):
        # vectorized over time for each arm
        states = [
            arm_swing_states(
                ti, period_s, peak_speed_mps, orientation_rad, body_position, shoulder_halfwidth_m
            )[i]
            for ti in t
        ]
        pos = np.array([s.position for s in states])
        r = np.linalg.norm(pos - radar[None, :], axis=1)
        iq += (weight / r**2) * np.exp(1j * 2.0 * math.pi * 2.0 * r / wavelength)
    return t, iq


@dataclass(frozen=True)
class Spectrogram:
    """Short-time Fourier magnitudes, frequency axis centered on 0 Hz."""

    magnitudes: np.ndarray  # [n_freq, n_frames]
    freq_hz: np.ndarray
    time_s: np.ndarray
    sample_rate_hz: float = field(default=0.0)

    def peak_frequency_hz(self) -> float:
        """Largest |frequency| reached by the strongest bin of any frame."""
        idx = np.argmax(self.magnitudes, axis=0)
        return float(np.max(np.abs(self.freq_hz[idx])))

    def time_marginal(self) -> np.ndarray:
        return self.magnitudes.sum(axis=0)


def spectrogram(iq: Sequence[complex], sample_rate_hz: float, window_len: int, hop: int) -> Spectrogram:
    """Hann-window short-time Fourier magnitude of a complex series.

    The frequency axis is two-sided and centered (negative to positive
    Doppler); frames start every `hop` samples.
    """
    x = np.asarray(iq, dtype=complex)
    if x.size == 0:
        raise ValueError("input series is empty")
    if window_len > x.size:
        raise ValueError(f"window_len {window_len} exceeds series length {x.size}")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    win = np.hanning(window_len)
    starts = np.arange(0, x.size - window_len + 1, hop)
    frames = np.stack([x[s : s + window_len] * win for s in starts])
    spec = np.fft.fftshift(np.fft.fft(frames, axis=1), axes=1)
    freq = np.fft.fftshift(np.fft.fftfreq(window_len, d=1.0 / sample_rate_hz))
    time = (starts + window_len / 2.0) / sample_rate_hz
    return Spectrogram(
        magnitudes=np.abs(spec).T, freq_hz=freq, time_s=time, sample_rate_hz=sample_rate_hz
    )


def marginal_period_s(spec: Spectrogram, min_lag_s: float = 0.2, max_lag_s: float = 1.5) -> float:
    """Period of the spectrogram time-marginal via its autocorrelation peak.

    Uses the unbiased (overlap-normalized) autocorrelation of the mean-
    removed marginal and returns the lag of the maximum within
    [min_lag_s, max_lag_s].
    """
    marg = spec.time_marginal()
    marg = marg - marg.mean()
    n = marg.size
    if n < 3:
        raise ValueError("spectrogram too short for period estimation")
    dt = float(spec.time_s[1] - spec.time_s[0])
    lags = np.arange(1, n)
    ac = np.array([np.dot(marg[:-k], marg[k:]) / (n - k) for k in lags])
    ac /= np.dot(marg, marg) / n
    lag_t = lags * dt
    sel = (lag_t >= min_lag_s) & (lag_t <= max_lag_s)
    if not np.any(sel):
        raise ValueError("lag search range is empty at this frame rate")
    return float(lag_t[sel][np.argmax(ac[sel])])


def write_spectrogram_csv(path, spec: Spectrogram) -> None:
    """CSV layout: first row = frequency axis (Hz), first column = time (s)."""
    lines = ["," + ",".join(f"{f:.9g}" for f in spec.freq_hz)]
    for i, t in enumerate(spec.time_s):
        row = spec.magnitudes[:, i]
        lines.append(f"{t:.9g}," + ",".join(f"{v:.9g}" for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_spectrogram_pgm(path, spec: Spectrogram, dynamic_range_db: float = 40.0) -> None:
    """dB-scaled graymap, highest frequency on the top row, time rightward."""
    from .grayio import to_gray_u8, write_pgm

    write_pgm(path, to_gray_u8(np.flipud(spec.magnitudes), dynamic_range_db))
