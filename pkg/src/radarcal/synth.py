"""Synthetic radar cubes with a known temperature-to-gain drift law.

Each chirp holds a single tone at ``target_bin`` whose amplitude is
``g_a(T_f) * tone_amplitude`` with ``g_a(T) = alpha_a + beta_a * T``, plus white
Gaussian noise scaled to a fixed per-sample SNR.

Random numbers come from numpy's PCG64. Frame ``f`` draws its noise from the
substream ``SeedSequence(seed, spawn_key=(0, f))`` and the random-walk
temperature profile from ``SeedSequence(seed, spawn_key=(1,))``, so any subset
of frames can be regenerated independently and bit-identically.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

import numpy as np

from radarcal.datacube import (
    PathLike,
    RadarConfig,
    RadarCube,
    TemperatureLog,
    check_paired,
    parse_key_values,
    radar_config_from_mapping,
)
from radarcal.errors import FormatError, ValidationError

NOISE_STREAM = 0
TEMPERATURE_STREAM = 1

TONE_MODES = ("real", "complex")


@dataclass(frozen=True)
class Ramp:
    t_start: float
    t_end: float

    def __str__(self):
        return f"ramp({self.t_start!r}, {self.t_end!r})"


@dataclass(frozen=True)
class Sinusoid:
    mean: float
    amplitude: float
    period_frames: float

    def __str__(self):
        return f"sinusoid({self.mean!r}, {self.amplitude!r}, {self.period_frames!r})"


@dataclass(frozen=True)
class RandomWalk:
    start: float
    step_sigma: float
    t_low: float
    t_high: float

    def __str__(self):
        return f"random_walk({self.start!r}, {self.step_sigma!r}, {self.t_low!r}, {self.t_high!r})"


TempProfile = Union[Ramp, Sinusoid, RandomWalk]
_PROFILES = {"ramp": (Ramp, 2), "sinusoid": (Sinusoid, 3), "random_walk": (RandomWalk, 4)}


def parse_profile(text: str) -> TempProfile:
    """Parse ``ramp(30, 45)``, ``sinusoid(37.5, 7.5, 100)`` or ``random_walk(37.5, 0.05, 30, 45)``."""
    m = re.fullmatch(r"\s*(\w+)\s*\((.*)\)\s*", text)
    if not m or m.group(1) not in _PROFILES:
        raise FormatError(f"unknown temperature profile {text!r}")
    cls, arity = _PROFILES[m.group(1)]
    try:
        args = [float(a) for a in m.group(2).split(",")]
    except ValueError:
        raise FormatError(f"non-numeric argument in temperature profile {text!r}") from None
    if len(args) != arity:
        raise FormatError(f"{m.group(1)} takes {arity} arguments, got {len(args)}")
    return cls(*args)


@dataclass(frozen=True)
class DriftLaw:
    """Per-antenna linear gain ``alpha[a] + beta[a] * T``."""

    alpha: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self):
        if len(self.alpha) != len(self.beta):
            raise ValidationError("alpha and beta need one entry per antenna")

    def gain(self, temps: np.ndarray) -> np.ndarray:
        """Gains with shape ``(F, A)``."""
        t = np.asarray(temps, dtype=np.float64)[:, None]
        return np.asarray(self.alpha)[None, :] + np.asarray(self.beta)[None, :] * t


# Slope signs (+, -, -) follow the reference measurements; magnitudes are picked
# so a 30-45 C ramp dominates 20 dB noise even on the last 30 % of the ramp.
DEFAULT_DRIFT = DriftLaw(alpha=(-0.8, 3.4, 1.6), beta=(0.045, -0.06, -0.025))


@dataclass(frozen=True)
class SynthSpec:
    config: RadarConfig = field(default_factory=RadarConfig)
    num_frames: int = 5000
    # 20 cm target at 5.5 GHz sweep bandwidth (~2.7 cm per bin)
    target_bin: int = 7
    tone_amplitude: float = 0.08
    drift: DriftLaw = DEFAULT_DRIFT
    temp_profile: TempProfile = Ramp(30.0, 45.0)
    snr_db: float = 20.0
    seed: int = 0
    tone_mode: str = "real"

    def __post_init__(self):
        cfg = self.config
        if self.num_frames < 0:
            raise ValidationError(f"num_frames must be >= 0, got {self.num_frames}")
        if not 0 <= self.target_bin < cfg.num_bins:
            raise ValidationError(f"target_bin {self.target_bin} must lie in [0, {cfg.num_bins})")
        if len(self.drift.alpha) != cfg.num_antennas:
            raise ValidationError(
                f"drift law has {len(self.drift.alpha)} antennas, config has {cfg.num_antennas}"
            )
        if self.tone_mode not in TONE_MODES:
            raise ValidationError(f"tone_mode must be one of {TONE_MODES}, got {self.tone_mode!r}")
        if not (math.isfinite(self.tone_amplitude) and self.tone_amplitude > 0):
            raise ValidationError("tone_amplitude must be positive and finite")
        if math.isnan(self.snr_db):
            raise ValidationError("snr_db must not be NaN")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db) and self.snr_db > 0


def generate_temperatures(spec: SynthSpec) -> TemperatureLog:
    F = spec.num_frames
    prof = spec.temp_profile
    frames = np.arange(F, dtype=np.float64)
    if isinstance(prof, Ramp):
        if F == 1:
            temps = np.array([prof.t_start])
        else:
            temps = prof.t_start + (prof.t_end - prof.t_start) * frames / max(F - 1, 1)
    elif isinstance(prof, Sinusoid):
        if prof.period_frames <= 0:
            raise ValidationError("sinusoid period must be positive")
        temps = prof.mean + prof.amplitude * np.sin(2.0 * np.pi * frames / prof.period_frames)
    elif isinstance(prof, RandomWalk):
        if not prof.t_low <= prof.start <= prof.t_high:
            raise ValidationError("random walk start must lie inside its clamp range")
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(TEMPERATURE_STREAM,)))
        steps = rng.normal(0.0, prof.step_sigma, size=max(F - 1, 0))
        temps = np.empty(F)
        t = prof.start
        for i in range(F):
            if i:
                t = min(prof.t_high, max(prof.t_low, t + steps[i - 1]))
            temps[i] = t
    else:
        raise ValidationError(f"unsupported temperature profile {prof!r}")
    return TemperatureLog(temps)


def tone(num_samples: int, bin: int, mode: str = "real") -> np.ndarray:
    """Unit tone at ``bin``: ``cos(2 pi k n / N)`` or ``exp(+2j pi k n / N)``."""
    n = np.arange(num_samples)
    phase = 2.0 * np.pi * ((bin * n) % num_samples) / num_samples
    if mode == "real":
        return np.cos(phase).astype(np.complex128)
    if mode == "complex":
        return np.exp(1j * phase)
    raise ValidationError(f"unknown tone mode {mode!r}")


def noise_sigma(spec: SynthSpec, gains: np.ndarray) -> np.ndarray:
    """Per-(frame, antenna) noise standard deviation for the configured SNR.

    A unit real cosine carries power 1/2 per sample, a complex tone power 1.
    """
    if spec.noiseless:
        return np.zeros_like(gains)
    tone_power = (0.5 if spec.tone_mode == "real" else 1.0) * (gains * spec.tone_amplitude) ** 2
    return np.sqrt(tone_power / 10.0 ** (spec.snr_db / 10.0))


def frame_noise(spec: SynthSpec, frame: int) -> np.ndarray:
    """Unit-variance noise for one frame, shape ``(A, C, N)``."""
    cfg = spec.config
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(NOISE_STREAM, frame)))
    shape = (cfg.num_antennas, cfg.num_chirps, cfg.num_samples)
    if spec.tone_mode == "real":
        return rng.standard_normal(shape).astype(np.complex128)
    w = rng.standard_normal(shape + (2,))
    return (w[..., 0] + 1j * w[..., 1]) / math.sqrt(2.0)


def generate_cube(spec: SynthSpec, temps: TemperatureLog) -> RadarCube:
    cfg = spec.config
    check_paired(spec.num_frames, temps, "synth spec")
    gains = spec.drift.gain(temps.temps)
    if gains.size and np.min(gains) <= 0:
        f, a = np.unravel_index(np.argmin(gains), gains.shape)
        raise ValidationError(
            f"drift law gives non-positive gain {gains[f, a]:.6g} for antenna {a} at {temps.temps[f]:.6g} C"
        )
    unit = tone(cfg.num_samples, spec.target_bin, spec.tone_mode)
    amp = gains * spec.tone_amplitude
    samples = np.broadcast_to(
        amp[:, :, None, None] * unit, (spec.num_frames, cfg.num_antennas, cfg.num_chirps, cfg.num_samples)
    ).copy()
    if not spec.noiseless:
        sigma = noise_sigma(spec, gains)
        for f in range(spec.num_frames):
            samples[f] += sigma[f][:, None, None] * frame_noise(spec, f)
    return RadarCube(cfg, samples)


def generate(spec: SynthSpec) -> tuple[RadarCube, TemperatureLog]:
    temps = generate_temperatures(spec)
    return generate_cube(spec, temps), temps


# -- spec files ---------------------------------------------------------------

_SYNTH_KEYS = {
    "start_freq_hz", "end_freq_hz", "num_antennas", "num_chirps", "num_samples",
    "train_fraction", "num_frames", "target_bin", "tone_amplitude", "temp_profile",
    "snr_db", "seed", "tone_mode",
}


def _float(values: dict, key: str, default: float) -> float:
    if key not in values:
        return default
    try:
        return float(values[key])
    except ValueError:
        raise FormatError(f"{key}: expected a number, got {values[key]!r}") from None


def _int(values: dict, key: str, default: int) -> int:
    if key not in values:
        return default
    try:
        return int(values[key])
    except ValueError:
        raise FormatError(f"{key}: expected an integer, got {values[key]!r}") from None


def synth_spec_from_mapping(values: dict[str, str]) -> SynthSpec:
    """Build a spec from ``key = value`` pairs; absent keys take the defaults.

    Antenna ``a`` without ``alpha_a``/``beta_a`` reuses the default law of
    antenna ``a mod 3``.
    """
    drift_key = re.compile(r"(alpha|beta)_(\d+)")
    unknown = [k for k in values if k not in _SYNTH_KEYS and not drift_key.fullmatch(k)]
    if unknown:
        raise FormatError(f"unknown synth spec keys: {', '.join(sorted(unknown))}")
    config = radar_config_from_mapping(values)
    A = config.num_antennas
    for k in values:
        m = drift_key.fullmatch(k)
        if m and int(m.group(2)) >= A:
            raise FormatError(f"{k} refers to antenna {m.group(2)} but num_antennas = {A}")
    d = DEFAULT_DRIFT
    alpha = tuple(_float(values, f"alpha_{a}", d.alpha[a % len(d.alpha)]) for a in range(A))
    beta = tuple(_float(values, f"beta_{a}", d.beta[a % len(d.beta)]) for a in range(A))
    defaults = SynthSpec()
    return SynthSpec(
        config=config,
        num_frames=_int(values, "num_frames", defaults.num_frames),
        target_bin=_int(values, "target_bin", defaults.target_bin),
        tone_amplitude=_float(values, "tone_amplitude", defaults.tone_amplitude),
        drift=DriftLaw(alpha, beta),
        temp_profile=parse_profile(values["temp_profile"]) if "temp_profile" in values else defaults.temp_profile,
        snr_db=_float(values, "snr_db", defaults.snr_db),
        seed=_int(values, "seed", defaults.seed),
        tone_mode=values.get("tone_mode", defaults.tone_mode),
    )


def parse_synth_spec(text: str) -> SynthSpec:
    return synth_spec_from_mapping(parse_key_values(text))


def read_synth_spec(path: PathLike) -> SynthSpec:
    return parse_synth_spec(Path(path).read_text(encoding="utf-8"))


def format_synth_spec(spec: SynthSpec) -> str:
    cfg = spec.config
    lines = [
        f"start_freq_hz = {cfg.start_freq_hz!r}",
        f"end_freq_hz = {cfg.end_freq_hz!r}",
        f"num_antennas = {cfg.num_antennas}",
        f"num_chirps = {cfg.num_chirps}",
        f"num_samples = {cfg.num_samples}",
        f"num_frames = {spec.num_frames}",
        f"target_bin = {spec.target_bin}",
        f"tone_amplitude = {spec.tone_amplitude!r}",
        f"tone_mode = {spec.tone_mode}",
    ]
    for a in range(cfg.num_antennas):
        lines.append(f"alpha_{a} = {spec.drift.alpha[a]!r}")
        lines.append(f"beta_{a} = {spec.drift.beta[a]!r}")
    lines += [
        f"temp_profile = {spec.temp_profile}",
        f"snr_db = {spec.snr_db!r}",
        f"seed = {spec.seed}",
    ]
    return "\n".join(lines) + "\n"


def with_seed(spec: SynthSpec, seed: int) -> SynthSpec:
    return replace(spec, seed=seed)
