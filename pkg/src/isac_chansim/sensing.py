"""OFDM link-level sensing pipeline.

Pilot generation, echo synthesis with white noise at a configured SNR,
least-squares CSI estimation, delay-Doppler map computation with
orthonormal transforms, zero-Doppler notch clutter suppression, peak
detection, and conversion of detections to range/velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter

from .grayio import to_gray_u8, write_pgm

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class OfdmConfig:
    """Sensing-signal numerology; defaults follow the reference experiment
    (3.5 GHz carrier, 30 kHz SCS, 18 MHz bandwidth, PRI of 14 symbols,
    50 repetitions, 30 dB SNR)."""

    carrier_hz: float = 3.5e9
    scs_hz: float = 30e3
    n_sc: int = 600
    pri_symbols: int = 14
    n_reps: int = 50
    snr_db: float = 30.0

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.scs_hz <= 0:
            raise ValueError("carrier_hz and scs_hz must be > 0")
        if self.n_sc < 1 or self.pri_symbols < 1 or self.n_reps < 1:
            raise ValueError("n_sc, pri_symbols and n_reps must be >= 1")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def bandwidth_hz(self) -> float:
        return self.n_sc * self.scs_hz

    @property
    def pri_s(self) -> float:
        # 14-symbol slot with normal cyclic prefix lasts 15000/scs ms; CP
        # overhead is folded into the slot duration.
        return self.pri_symbols * 15.0 / (14.0 * self.scs_hz)

    @property
    def prf_hz(self) -> float:
        return 1.0 / self.pri_s

    @property
    def delay_resolution_s(self) -> float:
        return 1.0 / self.bandwidth_hz

    @property
    def doppler_resolution_hz(self) -> float:
        return self.prf_hz / self.n_reps


def make_pilot(n_sc: int, seed: int) -> np.ndarray:
    """Unit-modulus QPSK pilot vector, deterministic in the seed."""
    if n_sc < 1:
        raise ValueError("n_sc must be >= 1")
    rng = np.random.default_rng(seed)
    quadrants = rng.integers(0, 4, n_sc)
    return np.exp(1j * (math.pi / 4 + math.pi / 2 * quadrants))


def _as_h(realization) -> np.ndarray:
    h = getattr(realization, "h", realization)
    return np.asarray(h, dtype=complex)


def simulate_echo(realization, pilot: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Received grid Y[k, m] = H[k, m] X[k] + w[k, m].

    The complex white Gaussian noise variance is set so that
    mean(|H X|^2) / var(w) = 10^(snr_db / 10); snr_db = inf disables noise.
    """
    h = _as_h(realization)
    x = np.asarray(pilot, dtype=complex)
    if h.shape[0] != x.shape[0]:
        raise ValueError(f"pilot length {x.shape[0]} does not match {h.shape[0]} subcarriers")
    signal = h * x[:, None]
    if math.isinf(snr_db):
        return signal
    noise_var = float(np.mean(np.abs(signal) ** 2)) * 10.0 ** (-snr_db / 10.0)
    noise = (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) * math.sqrt(noise_var / 2.0)
    return signal + noise


def estimate_csi(echo: np.ndarray, pilot: np.ndarray) -> np.ndarray:
    """Least-squares CSI: H_hat[k, m] = Y[k, m] / X[k]."""
    x = np.asarray(pilot, dtype=complex)
    if np.any(np.abs(x) == 0):
        raise ValueError("pilot must have no zero elements")
    return np.asarray(echo, dtype=complex) / x[:, None]


def notch_zero_doppler(csi: np.ndarray) -> np.ndarray:
    """Remove the slow-time mean per subcarrier, zeroing the DC Doppler bin."""
    csi = np.asarray(csi, dtype=complex)
    if csi.shape[1] < 2:
        raise ValueError("need at least 2 slow-time repetitions to notch")
    return csi - csi.mean(axis=1, keepdims=True)


@dataclass(frozen=True)
class DelayDopplerMap:
    """Magnitude map over delay (rows) and Doppler (columns, DC centered)."""

    magnitudes: np.ndarray
    delay_axis_s: np.ndarray
    doppler_axis_hz: np.ndarray

    @property
    def dc_column(self) -> int:
        return self.magnitudes.shape[1] // 2

    def doppler_bin(self, column: int) -> int:
        """Signed Doppler bin offset from DC for a column index."""
        return column - self.dc_column

    def column_of_bin(self, doppler_bin: int) -> int:
        return doppler_bin + self.dc_column

    def total_energy(self) -> float:
        return float(np.sum(self.magnitudes**2))


def delay_doppler(csi: np.ndarray, config: OfdmConfig, window: str = "rect") -> DelayDopplerMap:
    """Delay-Doppler map: orthonormal IDFT across subcarriers (delay) and
    DFT across repetitions (Doppler), DC Doppler centered.

    window applies along slow time before the Doppler DFT: "rect" (default,
    bin positions analytically exact) or "hann".
    """
    h = np.asarray(csi, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise ValueError("CSI must be finite")
    n_sc, n_reps = h.shape
    if window == "hann":
        h = h * np.hanning(n_reps)[None, :]
    elif window != "rect":
        raise ValueError(f"unknown window {window!r}")
    delay_profile = np.fft.ifft(h, axis=0) * math.sqrt(n_sc)
    dd = np.fft.fft(delay_profile, axis=1) / math.sqrt(n_reps)
    dd = np.fft.fftshift(dd, axes=1)
    delay_axis = np.arange(n_sc) * config.delay_resolution_s
    doppler_axis = np.fft.fftshift(np.fft.fftfreq(n_reps, d=config.pri_s))
    return DelayDopplerMap(magnitudes=np.abs(dd), delay_axis_s=delay_axis, doppler_axis_hz=doppler_axis)


@dataclass(frozen=True)
class Detection:
    delay_bin: int
    doppler_bin: int  # signed offset from DC
    power_db: float
    delay_s: float
    doppler_hz: float


def detect_peaks(
    dd_map: DelayDopplerMap, threshold_db_below_max: float = 20.0, guard_bins: int = 2
) -> list[Detection]:
    """Local maxima within threshold_db_below_max of the global peak.

    Non-maximum suppression keeps one detection per (2 guard + 1)^2
    neighborhood; results are sorted by descending power.
    """
    mag = dd_map.magnitudes
    if mag.size == 0:
        raise ValueError("empty map")
    peak = float(mag.max())
    if peak <= 0.0:
        return []
    threshold = peak * 10.0 ** (-threshold_db_below_max / 20.0)
    size = 2 * guard_bins + 1
    local_max = mag == maximum_filter(mag, size=size, mode="constant", cval=0.0)
    rows, cols = np.nonzero(local_max & (mag >= threshold))
    detections = [
        Detection(
            delay_bin=int(r),
            doppler_bin=dd_map.doppler_bin(int(c)),
            power_db=float(20.0 * np.log10(mag[r, c])),
            delay_s=float(dd_map.delay_axis_s[r]),
            doppler_hz=float(dd_map.doppler_axis_hz[c]),
        )
        for r, c in zip(rows, cols)
    ]
    detections.sort(key=lambda d: -d.power_db)
    return detections


def to_range_velocity(detection: Detection, config: OfdmConfig, monostatic: bool = True) -> tuple[float, float]:
    """Convert a detection to physical quantities.

    Monostatic: (range c tau / 2, velocity f_d lambda / 2). With this
    package's Doppler sign an approaching target has negative Doppler, so
    the displayed velocity is negative when approaching. Bistatic geometry
    is ambiguous, so it reports (total path length c tau, raw Doppler Hz).
    """
    if detection.delay_s < 0 or abs(detection.doppler_bin) > config.n_reps // 2:
        raise ValueError("detection bins out of range")
    if monostatic:
        return (
            SPEED_OF_LIGHT * detection.delay_s / 2.0,
            detection.doppler_hz * config.wavelength / 2.0,
        )
    return SPEED_OF_LIGHT * detection.delay_s, detection.doppler_hz


def write_map_csv(path, dd_map: DelayDopplerMap) -> None:
    """CSV: first row = Doppler axis (Hz), first column = delay axis (s),
    cells = dB magnitudes."""
    floor = dd_map.magnitudes.max(initial=0.0) * 1e-15
    db = 20.0 * np.log10(np.maximum(dd_map.magnitudes, max(floor, 1e-300)))
    lines = ["," + ",".join(f"{f:.9g}" for f in dd_map.doppler_axis_hz)]
    for i, tau in enumerate(dd_map.delay_axis_s):
        lines.append(f"{tau:.9g}," + ",".join(f"{v:.6f}" for v in db[i]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_map_pgm(path, dd_map: DelayDopplerMap, dynamic_range_db: float = 60.0) -> None:
    """dB-scaled graymap of the delay-Doppler magnitudes."""
    write_pgm(path, to_gray_u8(dd_map.magnitudes, dynamic_range_db))


def write_detections_csv(path, detections: Sequence[Detection], config: OfdmConfig, monostatic: bool = True) -> None:
    """CSV columns: delay_s,doppler_hz,range_m,velocity_mps,power_db."""
    lines = ["delay_s,doppler_hz,range_m,velocity_mps,power_db"]
    for det in detections:
        rng_m, vel = to_range_velocity(det, config, monostatic=monostatic)
        lines.append(
            f"{det.delay_s:.9g},{det.doppler_hz:.9g},{rng_m:.9g},{vel:.9g},{det.power_db:.6f}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
