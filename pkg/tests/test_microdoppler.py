import math

import numpy as np
import pytest

from isac_chansim import microdoppler as md

LAM = 0.0857


class TestRadialVelocity:
    def test_no_motion(self):
        assert md.radial_velocity(md.NoMotion(), 0.37) == 0.0

    def test_pendulum_extrema(self):
        arm = md.PendulumArm(period_s=1.0, peak_speed_mps=2.0, orientation_rad=0.0)
        # mid-swing (zero displacement) carries the speed extrema
        assert md.radial_velocity(arm, 0.0) == pytest.approx(2.0)
        assert md.radial_velocity(arm, 0.5) == pytest.approx(-2.0)

    def test_pendulum_perpendicular_orientation(self):
        arm = md.PendulumArm(period_s=1.0, peak_speed_mps=2.0, orientation_rad=math.pi / 2)
        t = np.linspace(0, 2.0, 101)
        assert np.max(np.abs(md.radial_velocity(arm, t))) < 1e-12

    def test_sinusoid_normalized(self):
        prof = md.SinusoidDoppler(peak_doppler_hz=50.0, mod_freq_hz=10.0)
        t = np.linspace(0, 0.2, 400)
        wave = md.radial_velocity(prof, t)
        assert np.max(np.abs(wave)) <= 1.0 + 1e-12
        assert md.radial_velocity(prof, 0.0) == pytest.approx(1.0)

    def test_sawtooth_ramp(self):
        prof = md.SawtoothDoppler(peak_doppler_hz=30.0, period_s=1.0)
        assert md.radial_velocity(prof, 0.0) == pytest.approx(-1.0)
        assert md.radial_velocity(prof, 0.5) == pytest.approx(0.0)
        assert md.radial_velocity(prof, 0.999) == pytest.approx(0.998)

    def test_direction_factor(self):
        arm = md.PendulumArm(period_s=1.0, peak_speed_mps=2.0)
        assert md.radial_velocity(arm, 0.0, direction_factor=-0.5) == pytest.approx(-1.0)
        with pytest.raises(ValueError):
            md.radial_velocity(arm, 0.0, direction_factor=1.5)

    def test_rotor_tip_speed(self):
        rotor = md.Rotor(n_blades=2, blade_length_m=0.5, rpm=600.0)
        # blade passage at 20 Hz; tip speed = 2 pi f L
        assert rotor.passage_hz == pytest.approx(20.0)
        assert md.radial_velocity(rotor, 0.0) == pytest.approx(2 * math.pi * 20.0 * 0.5)


class TestMicroPhaseSeries:
    def test_no_motion_zero(self):
        series = md.micro_phase_series(md.NoMotion(), LAM, duration=0.025, sample_interval=5e-4)
        assert series.samples.shape == (50,)
        assert np.all(series.samples == 0.0)

    def test_sinusoid_instantaneous_frequency(self):
        prof = md.SinusoidDoppler(peak_doppler_hz=50.0, mod_freq_hz=10.0)
        dt = 1e-5
        series = md.micro_phase_series(prof, LAM, duration=0.2, sample_interval=dt)
        inst = np.diff(series.samples) / (2 * math.pi * dt)
        assert np.max(inst) == pytest.approx(50.0, rel=1e-3)

    def test_unit_peak_phase_from_quarter_wavelength_over_pi(self):
        # displacement amplitude lam/(4 pi) with two-way factor 2 -> 1 rad
        prof = md.VitalSign(amp_displacement_m=LAM / (4 * math.pi), rate_hz=1.0)
        series = md.micro_phase_series(prof, LAM, duration=1.0, sample_interval=1e-3, geometry_factor=2.0)
        assert np.max(np.abs(series.samples)) == pytest.approx(1.0, rel=1e-4)

    def test_sawtooth_integrates_ramp(self):
        prof = md.SawtoothDoppler(peak_doppler_hz=30.0, period_s=0.025)
        dt = 1e-6
        series = md.micro_phase_series(prof, LAM, duration=0.025, sample_interval=dt)
        inst = np.diff(series.samples) / (2 * math.pi * dt)
        ramp = 30.0 * (2 * np.arange(len(inst)) * dt / 0.025 - 1.0)
        # ignore the flyback sample at the period boundary
        assert np.allclose(inst[:-2], ramp[:-2], atol=0.05)

    @pytest.mark.parametrize(
        "profile",
        [
            md.VitalSign(amp_displacement_m=0.01, rate_hz=1.2),
            md.PendulumArm(period_s=1.0, peak_speed_mps=2.0, orientation_rad=0.4),
            md.Rotor(n_blades=3, blade_length_m=0.4, rpm=300.0),
        ],
    )
    def test_halving_wavelength_doubles_phase(self, profile):
        kw = dict(duration=0.5, sample_interval=1e-3, geometry_factor=2.0)
        full = md.micro_phase_series(profile, LAM, **kw)
        half = md.micro_phase_series(profile, LAM / 2, **kw)
        assert np.allclose(half.samples, 2.0 * full.samples, rtol=1e-12)

    def test_zero_amplitude_is_identity(self):
        prof = md.VitalSign(amp_displacement_m=0.0, rate_hz=1.0)
        series = md.micro_phase_series(prof, LAM, duration=0.1, sample_interval=1e-3)
        assert np.all(series.samples == 0.0)

    def test_bessel_sideband_energy(self):
        # modulation index 5: tones confined to carrier +- k * mod lines
        prof = md.SinusoidDoppler(peak_doppler_hz=50.0, mod_freq_hz=10.0)
        fs, duration = 1000.0, 1.0
        series = md.micro_phase_series(prof, LAM, duration=duration, sample_interval=1 / fs)
        x = np.exp(1j * series.samples)
        spectrum = np.abs(np.fft.fft(x)) ** 2
        line_bins = (np.arange(len(x)) % 10) == 0  # multiples of mod freq
        assert spectrum[line_bins].sum() / spectrum.sum() > 0.99

    def test_invalid_sample_interval(self):
        with pytest.raises(ValueError):
            md.micro_phase_series(md.NoMotion(), LAM, duration=1.0, sample_interval=0.0)


class TestArmSwing:
    def test_anti_phase_velocities(self):
        for t in np.linspace(0, 2.0, 23):
            left, right = md.arm_swing_states(t, 1.0, 2.0, 0.3, (5.0, 1.0, 1.4))
            assert np.allclose(left.velocity, -right.velocity)

    def test_speed_maxima_twice_per_period(self):
        t = np.linspace(0.0, 2.0, 4001)
        speeds = np.array([np.linalg.norm(md.arm_swing_states(ti, 1.0, 2.0, 0.0)[1].velocity) for ti in t])
        assert speeds.max() == pytest.approx(2.0, rel=1e-6)
        peaks = (speeds[1:-1] > speeds[:-2]) & (speeds[1:-1] > speeds[2:])
        maxima_t = t[1:-1][peaks & (speeds[1:-1] > 1.99)]
        # speed extrema land every half period: two per arm per period
        in_window = maxima_t[(maxima_t >= 0.2) & (maxima_t <= 1.2)]
        assert np.allclose(in_window, [0.5, 1.0], atol=1e-3)

    def test_perpendicular_orientation_kills_radial(self):
        # radar along +x, facing axis rotated to +y
        left, right = md.arm_swing_states(0.0, 1.0, 2.0, math.pi / 2)
        assert abs(right.velocity[0]) < 1e-12

    def test_invalid_period(self):
        with pytest.raises(ValueError):
            md.arm_swing_states(0.0, 0.0, 2.0, 0.0)


class TestSpectrogram:
    def test_pure_tone_single_ridge(self):
        fs, f0 = 500.0, 80.0
        t = np.arange(1500) / fs
        x = np.exp(1j * 2 * math.pi * f0 * t)
        spec = md.spectrogram(x, fs, window_len=128, hop=32)
        ridge = spec.freq_hz[np.argmax(spec.magnitudes, axis=0)]
        assert np.allclose(ridge, f0, atol=fs / 128)

    def test_anti_phase_arms_mirror_symmetric_ridges(self):
        # equal arm weights: opposite radial velocities put the two ridge
        # trajectories at mirrored frequencies about 0 Hz
        _, iq = md.arm_swing_iq(
            3.0, 500.0, LAM, body_position=(3.0, 0.0, 1.0), radar_position=(0.0, 0.0, 1.0),
            arm_amplitudes=(1.0, 1.0), shoulder_halfwidth_m=0.0,
        )
        spec = md.spectrogram(iq, 500.0, window_len=128, hop=16)
        bin_hz = spec.freq_hz[1] - spec.freq_hz[0]
        pos = spec.freq_hz > 2 * bin_hz
        neg = spec.freq_hz < -2 * bin_hz
        checked = 0
        for frame in range(spec.magnitudes.shape[1]):
            col = spec.magnitudes[:, frame]
            if col[pos].max() < 0.3 * col.max() or col[neg].max() < 0.3 * col.max():
                continue  # an arm is near 0 Hz: ridge unresolved this frame
            ridge_pos = spec.freq_hz[pos][np.argmax(col[pos])]
            ridge_neg = spec.freq_hz[neg][np.argmax(col[neg])]
            # fast-chirping frames smear the blob a couple of bins wide
            assert ridge_pos == pytest.approx(-ridge_neg, abs=2.5 * bin_hz)
            checked += 1
        assert checked > 10

    def test_sawtooth_scatterer_ramp_signature(self):
        # sawtooth velocity: ridge frequency ramps up and snaps back
        fs = 500.0
        prof = md.SawtoothDoppler(peak_doppler_hz=60.0, period_s=1.0)
        series = md.micro_phase_series(prof, LAM, duration=3.0, sample_interval=1 / fs)
        x = np.exp(1j * series.samples)
        spec = md.spectrogram(x, fs, window_len=64, hop=8)
        ridge = spec.freq_hz[np.argmax(spec.magnitudes, axis=0)]
        diffs = np.diff(ridge)
        rising = np.sum(diffs > 0)
        falling = np.sum(diffs < 0)
        assert rising > 3 * max(falling, 1)  # tooth-like: slow rise, fast flyback

    def test_input_validation(self):
        with pytest.raises(ValueError):
            md.spectrogram([], 100.0, 16, 4)
        with pytest.raises(ValueError):
            md.spectrogram(np.ones(8, complex), 100.0, 16, 4)
        with pytest.raises(ValueError):
            md.spectrogram(np.ones(32, complex), 100.0, 16, 0)

    def test_csv_layout(self, tmp_path):
        x = np.exp(1j * 2 * math.pi * 50.0 * np.arange(256) / 500.0)
        spec = md.spectrogram(x, 500.0, window_len=64, hop=32)
        path = tmp_path / "spec.csv"
        md.write_spectrogram_csv(path, spec)
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        assert header[0] == ""
        assert len(header) == 1 + len(spec.freq_hz)
        assert float(header[1]) == spec.freq_hz[0]
        row = lines[1].split(",")
        assert float(row[0]) == spec.time_s[0]


class TestArmSwingSignatures:
    def test_peak_frequency_and_orientation_sweep(self):
        expected = 2 * 2.0 / LAM  # geometry factor 2, 2 m/s
        peaks = {}
        for deg in (0, 30, 60, 90):
            _, iq = md.arm_swing_iq(3.0, 500.0, LAM, orientation_rad=math.radians(deg))
            spec = md.spectrogram(iq, 500.0, window_len=128, hop=16)
            peaks[deg] = spec.peak_frequency_hz()
        assert peaks[0] == pytest.approx(expected, rel=0.10)
        assert peaks[0] >= peaks[30] >= peaks[60] >= peaks[90]
        assert peaks[90] <= 0.2 * peaks[0]

    def test_marginal_period_one_second(self):
        _, iq = md.arm_swing_iq(3.0, 500.0, LAM)
        spec = md.spectrogram(iq, 500.0, window_len=128, hop=16)
        assert md.marginal_period_s(spec) == pytest.approx(1.0, abs=0.1)
