"""Exit criteria. Each test carries ``@acceptance(n, title)``; the session
summary prints one PASS/FAIL line per criterion."""

import json
import math
import struct
import time

import numpy as np
import pytest

from oracles import direct_dft, normal_equation_line, rss, two_pass_pearson
from radarcal.calibration import apply_correction, dumps_model, fit, loads_model, split_train_test
from radarcal.datacube import (
    AmplitudeTensor,
    RadarConfig,
    RadarCube,
    TemperatureLog,
    decode_amplitudes,
    decode_cube,
    encode_amplitudes,
    encode_cube,
    format_temperature_log,
    parse_temperature_log,
    read_cube,
    write_cube,
)
from radarcal.errors import FormatError
from radarcal.evaluation import evaluate, pearson
from radarcal.preprocess import compute_amplitude_profiles, fft_normalized
from radarcal.synth import DriftLaw, Ramp, SynthSpec, generate

acceptance = pytest.mark.acceptance


@acceptance(1, "drift-removal analogue of the correlation table")
@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_drift_removal(seed):
    start = time.perf_counter()
    spec = SynthSpec(num_frames=5000, temp_profile=Ramp(30.0, 45.0), snr_db=20.0, seed=seed)
    assert spec.config == RadarConfig(num_antennas=3, num_chirps=2, num_samples=32)
    assert [math.copysign(1, b) for b in spec.drift.beta] == [1, -1, -1]
    cube, temps = generate(spec)
    ap = compute_amplitude_profiles(cube)
    (train_ap, train_t), (test_ap, test_t) = split_train_test(ap, temps, 0.7)
    model = fit(train_ap, train_t)
    tcap, flags = apply_correction(model, test_ap, test_t)
    report = evaluate(test_ap, tcap, test_t)
    elapsed = time.perf_counter() - start

    for r in report.antennas:
        print(f"seed {seed} antenna {r.antenna}: PR(T,AP)={r.pr_ap:+.3f} PR(T,TCAP)={r.pr_tcap:+.3f} "
              f"reduction={r.reduction:.3f}")
        assert r.peak_bin == spec.target_bin
        assert abs(r.pr_ap) >= 0.95
        assert abs(r.pr_tcap) <= 0.25
    assert max(r.reduction for r in report.antennas) >= 0.8
    assert not flags.any()
    assert elapsed < 10.0


@acceptance(2, "ground-truth recovery on noiseless data")
def test_ground_truth_recovery():
    spec = SynthSpec(
        num_frames=2000,
        tone_amplitude=1.0,
        drift=DriftLaw((2.0, 2.0, 2.0), (-0.01, -0.01, -0.01)),
        snr_db=math.inf,
    )
    cube, temps = generate(spec)
    ap = compute_amplitude_profiles(cube)
    (train_ap, train_t), _ = split_train_test(ap, temps, 0.7)
    model = fit(train_ap, train_t)
    k = spec.target_bin
    for a in range(3):
        assert abs(model.slopes[a, k] / -0.01 - 1) < 1e-9
        assert abs(model.intercepts[a, k] / 2.0 - 1) < 1e-9
    tcap, _ = apply_correction(model, ap, temps)
    col = tcap.values[:, :, k]
    assert np.max(np.abs(col / col[0] - 1)) < 1e-9


@acceptance(3, "FFT matches direct DFT for N in {2..64}")
def test_dft_oracle():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    for n in (2, 4, 8, 16, 32, 64):
        worst = 0.0
        for _ in range(200):
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            worst = max(worst, float(np.max(np.abs(fft_normalized(x) - np.array(direct_dft(list(x)))))))
        assert worst < 1e-10, (n, worst)
    assert time.perf_counter() - start < 5.0


@acceptance(4, "unit tone at bin k gives AP = 1 at bin k")
@pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
def test_tone_amplitude_identity(n):
    samples = np.arange(n)
    for k in range(1, n // 2):
        for phase in (0.0, 0.3, 1.9):
            chirp = np.cos(2 * np.pi * k * samples / n + phase)
            cube = RadarCube(RadarConfig(num_antennas=1, num_chirps=2, num_samples=n),
                             np.broadcast_to(chirp, (1, 1, 2, n)))
            ap = compute_amplitude_profiles(cube).values[0, 0]
            assert abs(ap[k] - 1.0) < 1e-10, (n, k, phase)


@acceptance(5, "OLS fit matches normal equations; perturbations never lower RSS")
def test_ols_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 300))
        temps = rng.uniform(25, 50, n)
        y = np.abs(rng.uniform(0.01, 2) + rng.normal(0, 0.05) * temps + rng.normal(0, 0.1, n))
        model = fit(AmplitudeTensor(y[:, None, None]), TemperatureLog(temps), bins=[0])
        s, c = model.slopes[0, 0], model.intercepts[0, 0]
        s_ref, c_ref = normal_equation_line(list(temps), list(y))
        assert abs(s - s_ref) <= 1e-9 * max(1.0, abs(s_ref))
        assert abs(c - c_ref) <= 1e-9 * max(1.0, abs(c_ref))
        best = rss(temps, y, s, c)
        for _ in range(8):
            ds, dc = rng.choice([-1e-4, 0.0, 1e-4], size=2)
            assert rss(temps, y, s + ds, c + dc) >= best


@acceptance(6, "Pearson symmetry, affine invariance, bounds, two-pass agreement")
def test_pearson_properties():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(2, 500))
        x = rng.standard_normal(n) * rng.uniform(0.1, 100)
        y = rng.uniform(-1, 1) * x + rng.standard_normal(n)
        r = pearson(x, y)
        assert abs(r) <= 1.0
        assert abs(r - pearson(y, x)) <= 1e-15
        assert abs(r - two_pass_pearson(list(x), list(y))) < 1e-12
        alpha, beta = rng.uniform(0.1, 10), rng.uniform(-50, 50)
        assert abs(pearson(alpha * x + beta, y) - r) < 1e-12
        assert abs(pearson(-alpha * x + beta, y) + r) < 1e-12


@acceptance(7, "reference-point identity and scale equivariance")
def test_reference_identity_and_scaling():
    rng = np.random.default_rng(7)
    temps = TemperatureLog(rng.uniform(30, 45, 200))
    ap = AmplitudeTensor(rng.random((200, 3, 16)) + 0.1)
    model = fit(ap, temps)
    tcap_ref, _ = apply_correction(model, ap, TemperatureLog(np.full(200, model.t_ref)))
    assert np.array_equal(tcap_ref.values, ap.values)

    tcap, _ = apply_correction(model, ap, temps)
    for alpha in (0.125, 0.5, 2.0, 64.0):
        scaled = AmplitudeTensor(alpha * ap.values)
        tcap_refit, _ = apply_correction(fit(scaled, temps), scaled, temps)
        tcap_fixed, _ = apply_correction(model, scaled, temps)
        assert np.array_equal(tcap_refit.values, alpha * tcap.values)
        assert np.array_equal(tcap_fixed.values, alpha * tcap.values)
    # arbitrary factors agree up to the final rounding of one product
    for alpha in rng.uniform(0.01, 100, 5):
        scaled = AmplitudeTensor(alpha * ap.values)
        tcap_fixed, _ = apply_correction(model, scaled, temps)
        np.testing.assert_allclose(tcap_fixed.values, alpha * tcap.values, rtol=4 * np.finfo(float).eps, atol=0)


def _flip_header_fields(data, n_fields, first_offset=4):
    variants = []
    magic = bytearray(data)
    magic[0] ^= 0x01
    variants.append(bytes(magic))
    for i in range(n_fields):
        off = first_offset + 4 * i
        (value,) = struct.unpack_from("<I", data, off)
        for new in {value + 1, max(value - 1, 0) if value else 1, value * 2 + 1}:
            if new != value:
                mutated = bytearray(data)
                struct.pack_into("<I", mutated, off, new)
                variants.append(bytes(mutated))
    return variants


@acceptance(8, "format round-trips are byte-identical; header corruptions rejected")
def test_format_round_trips(tmp_path):
    rng = np.random.default_rng(8)
    cube = RadarCube(RadarConfig(), rng.standard_normal((7, 3, 2, 32)) + 1j * rng.standard_normal((7, 3, 2, 32)))
    first = encode_cube(cube)
    second = encode_cube(decode_cube(first))
    assert first == second
    write_cube(decode_cube(first), tmp_path / "c.rdc")
    assert (tmp_path / "c.rdc").read_bytes() == first
    assert read_cube(tmp_path / "c.rdc") == decode_cube(first)

    ap = AmplitudeTensor(rng.random((7, 3, 16)))
    first = encode_amplitudes(ap)
    assert encode_amplitudes(decode_amplitudes(first)) == first

    temps = TemperatureLog(rng.uniform(30, 45, 7))
    model = fit(ap, temps)
    first = dumps_model(model)
    assert dumps_model(loads_model(first)) == first
    assert loads_model(first) == model
    json.loads(first)

    first = format_temperature_log(temps)
    assert format_temperature_log(parse_temperature_log(first)) == first

    cube_bytes = encode_cube(cube)
    for bad in _flip_header_fields(cube_bytes, 5):
        with pytest.raises(FormatError):
            decode_cube(bad)
    ap_bytes = encode_amplitudes(ap)
    for bad in _flip_header_fields(ap_bytes, 4):
        with pytest.raises(FormatError):
            decode_amplitudes(bad)


@acceptance(9, "preprocess a 34,700-frame cube in under 30 s")
def test_throughput(tmp_path):
    F, A, C, N = 34_700, 3, 2, 32
    rng = np.random.default_rng(9)
    raw = rng.standard_normal((F, A, C, N, 2)).astype(np.float32)
    path = tmp_path / "big.rdc"
    path.write_bytes(struct.pack("<4s5I", b"RDC1", F, A, C, N, 0) + raw.tobytes())
    start = time.perf_counter()
    ap = compute_amplitude_profiles(read_cube(path))
    elapsed = time.perf_counter() - start
    print(f"preprocessed {F} frames in {elapsed:.2f} s")
    assert ap.shape == (F, A, N // 2)
    assert elapsed < 30.0
