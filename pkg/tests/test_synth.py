import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from radarcal.calibration import fit
from radarcal.datacube import RadarConfig, TemperatureLog
from radarcal.errors import FormatError, ValidationError
from radarcal.evaluation import evaluate
from radarcal.preprocess import compute_amplitude_profiles
from radarcal.synth import (
    DEFAULT_DRIFT,
    DriftLaw,
    RandomWalk,
    Ramp,
    Sinusoid,
    SynthSpec,
    format_synth_spec,
    frame_noise,
    generate,
    generate_cube,
    generate_temperatures,
    parse_profile,
    parse_synth_spec,
)

UNIT = DriftLaw((1.0, 1.0, 1.0), (0.0, 0.0, 0.0))
LINEAR = DriftLaw((2.0, 2.0, 2.0), (-0.01, -0.01, -0.01))


class TestTemperatures:
    def test_ramp(self):
        log = generate_temperatures(SynthSpec(num_frames=16, temp_profile=Ramp(30, 45)))
        np.testing.assert_array_equal(log.temps, np.arange(30.0, 46.0))

    def test_sinusoid_phase(self):
        log = generate_temperatures(SynthSpec(num_frames=100, temp_profile=Sinusoid(37.5, 7.5, 100)))
        assert log.temps[0] == 37.5
        assert log.temps[1] > 37.5
        assert log.temps[25] == pytest.approx(45.0)
        assert np.all((log.temps >= 30) & (log.temps <= 45))

    def test_random_walk_is_deterministic_and_clamped(self):
        spec = SynthSpec(num_frames=3000, temp_profile=RandomWalk(37.5, 0.5, 30, 45), seed=5)
        a = generate_temperatures(spec)
        b = generate_temperatures(spec)
        assert np.array_equal(a.temps, b.temps)
        assert a.temps.min() >= 30 and a.temps.max() <= 45
        other = generate_temperatures(SynthSpec(num_frames=3000, temp_profile=RandomWalk(37.5, 0.5, 30, 45), seed=6))
        assert not np.array_equal(a.temps, other.temps)

    def test_empty(self):
        assert len(generate_temperatures(SynthSpec(num_frames=0))) == 0

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("ramp(30, 45)", Ramp(30, 45)),
            ("sinusoid(37.5,7.5,100)", Sinusoid(37.5, 7.5, 100)),
            (" random_walk(37.5, 0.05, 30, 45) ", RandomWalk(37.5, 0.05, 30, 45)),
        ],
    )
    def test_parse_profile(self, text, expected):
        assert parse_profile(text) == expected
        assert parse_profile(str(expected)) == expected

    @pytest.mark.parametrize("text", ["ramp(30)", "saw(1, 2)", "ramp(a, b)", "ramp 30 45"])
    def test_bad_profile(self, text):
        with pytest.raises(FormatError):
            parse_profile(text)


class TestCube:
    def test_unit_tone_noiseless(self):
        spec = SynthSpec(num_frames=20, drift=UNIT, tone_amplitude=1.0, snr_db=math.inf)
        cube, _ = generate(spec)
        ap = compute_amplitude_profiles(cube).values
        np.testing.assert_allclose(ap[:, :, spec.target_bin], 1.0, atol=1e-10)

    def test_noiseless_linear_drift_ground_truth(self):
        spec = SynthSpec(num_frames=300, drift=LINEAR, tone_amplitude=0.08, snr_db=math.inf)
        cube, temps = generate(spec)
        ap = compute_amplitude_profiles(cube)
        k = spec.target_bin
        expected = (2.0 - 0.01 * temps.temps) * 0.08
        np.testing.assert_allclose(ap.values[:, :, k], expected[:, None].repeat(3, 1), rtol=1e-12)
        model = fit(ap, temps)
        np.testing.assert_allclose(model.slopes[:, k], -0.01 * 0.08, rtol=1e-9)
        np.testing.assert_allclose(model.intercepts[:, k], 2.0 * 0.08, rtol=1e-9)

    def test_complex_tone_doubles_profile(self):
        spec = SynthSpec(num_frames=5, drift=UNIT, tone_amplitude=1.0, snr_db=math.inf, tone_mode="complex")
        cube, _ = generate(spec)
        n = np.arange(32)
        np.testing.assert_allclose(cube.samples[0, 0, 0], np.exp(2j * np.pi * spec.target_bin * n / 32), atol=1e-15)
        ap = compute_amplitude_profiles(cube).values
        np.testing.assert_allclose(ap[:, :, spec.target_bin], 2.0, atol=1e-10)

    def test_default_spec_correlates_strongly(self):
        spec = SynthSpec()
        assert (spec.num_frames, spec.config, spec.snr_db) == (5000, RadarConfig(), 20.0)
        cube, temps = generate(spec)
        ap = compute_amplitude_profiles(cube)
        report = evaluate(ap, ap, temps)
        signs = [math.copysign(1, r.pr_ap) for r in report.antennas]
        assert signs == [1, -1, -1]
        assert all(abs(r.pr_ap) >= 0.95 for r in report.antennas)

    def test_deterministic(self):
        spec = SynthSpec(num_frames=200, seed=3)
        c1, t1 = generate(spec)
        c2, t2 = generate(spec)
        assert c1 == c2 and t1 == t2
        c3, _ = generate(SynthSpec(num_frames=200, seed=4))
        assert c1 != c3

    def test_frames_use_independent_substreams(self):
        long_spec = SynthSpec(num_frames=40, seed=9)
        long_cube, long_temps = generate(long_spec)
        short_spec = SynthSpec(num_frames=10, seed=9)
        short_cube = generate_cube(short_spec, long_temps.slice(0, 10))
        assert np.array_equal(short_cube.samples, long_cube.samples[:10])

    def test_parallel_noise_is_bit_identical(self):
        spec = SynthSpec(num_frames=64, seed=2)
        sequential = [frame_noise(spec, f) for f in range(64)]
        with ThreadPoolExecutor(4) as pool:
            parallel = list(pool.map(lambda f: frame_noise(spec, f), reversed(range(64))))[::-1]
        assert all(np.array_equal(a, b) for a, b in zip(sequential, parallel))

    @pytest.mark.parametrize("mode", ["real", "complex"])
    @pytest.mark.parametrize("snr_db", [10.0, 20.0, 30.0])
    def test_snr_calibration(self, mode, snr_db):
        spec = SynthSpec(num_frames=1000, snr_db=snr_db, tone_mode=mode, seed=1)
        cube, temps = generate(spec)
        N, k = 32, spec.target_bin
        spectra = np.fft.fft(cube.samples, axis=-1) / N
        tone_bins = {k, N - k} if mode == "real" else {k}
        noise_bins = [b for b in range(N) if b not in tone_bins]
        noise_power = N * np.mean(np.abs(spectra[..., noise_bins]) ** 2)
        gains = spec.drift.gain(temps.temps) * spec.tone_amplitude
        tone_power = (0.5 if mode == "real" else 1.0) * np.mean(gains**2)
        measured = 10 * np.log10(tone_power / noise_power)
        assert abs(measured - snr_db) < 0.5

    def test_non_positive_gain_rejected(self):
        spec = SynthSpec(num_frames=10, drift=DriftLaw((1.0, 1.0, 1.0), (0.0, -0.05, 0.0)))
        with pytest.raises(ValidationError, match="non-positive gain"):
            generate(spec)

    def test_empty_cube(self):
        cube, temps = generate(SynthSpec(num_frames=0))
        assert cube.shape == (0, 3, 2, 32) and len(temps) == 0

    @pytest.mark.parametrize(
        "kwargs",
        [dict(target_bin=16), dict(num_frames=-1), dict(tone_mode="square"), dict(tone_amplitude=0.0),
         dict(drift=DriftLaw((1.0,), (0.0,)))],
    )
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ValidationError):
            SynthSpec(**kwargs)


class TestSpecFile:
    def test_round_trip(self):
        spec = SynthSpec(num_frames=123, snr_db=math.inf, temp_profile=Sinusoid(37.5, 7.5, 100), seed=42)
        assert parse_synth_spec(format_synth_spec(spec)) == spec

    def test_defaults(self):
        assert parse_synth_spec("") == SynthSpec()

    def test_partial(self):
        spec = parse_synth_spec("num_antennas = 1\nalpha_0 = 2.0\nbeta_0 = -0.01\nnum_frames = 10\n")
        assert spec.drift == DriftLaw((2.0,), (-0.01,))

    def test_default_drift_cycles(self):
        spec = parse_synth_spec("num_antennas = 4\n")
        assert spec.drift.alpha[3] == DEFAULT_DRIFT.alpha[0]

    @pytest.mark.parametrize("text", ["colour = red\n", "alpha_3 = 1\n", "seed = one\n", "temp_profile = flat()\n"])
    def test_rejected(self, text):
        with pytest.raises(FormatError):
            parse_synth_spec(text)
