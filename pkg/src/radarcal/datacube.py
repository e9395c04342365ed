"""Radar data containers and their on-disk formats.

Three binary/text formats live here:

* ``RDC1`` cube files: 24-byte header (magic, F, A, C, N, reserved) followed by
  interleaved little-endian float32 I/Q pairs in [frame][antenna][chirp][sample]
  order.
* ``RAP1`` amplitude files: 20-byte header (magic, F, A, B, reserved) followed by
  little-endian float64 amplitudes in [frame][antenna][bin] order.
* Temperature logs: CSV with a ``frame,temp_c`` header.

Samples are held as complex128 in memory regardless of the float32 payload.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from radarcal.errors import FormatError, ValidationError

log = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

CUBE_MAGIC = b"RDC1"
AMPLITUDE_MAGIC = b"RAP1"
_CUBE_HEADER = struct.Struct("<4s5I")
_AMPLITUDE_HEADER = struct.Struct("<4s4I")
CUBE_HEADER_SIZE = _CUBE_HEADER.size  # 24
AMPLITUDE_HEADER_SIZE = _AMPLITUDE_HEADER.size  # 20

# Band edges of the 60 GHz sensor used for the reference measurements. The cube
# file carries no frequency information, so these fill RadarConfig on read.
DEFAULT_START_FREQ_HZ = 58e9
DEFAULT_END_FREQ_HZ = 63.5e9
DEFAULT_TRAIN_FRACTION = 0.7

TEMPERATURE_HEADER = ("frame", "temp_c")


@dataclass(frozen=True)
class RadarConfig:
    """Acquisition parameters of one radar recording."""

    start_freq_hz: float = DEFAULT_START_FREQ_HZ
    end_freq_hz: float = DEFAULT_END_FREQ_HZ
    num_antennas: int = 3
    num_chirps: int = 2
    num_samples: int = 32

    def __post_init__(self):
        if not (np.isfinite(self.start_freq_hz) and np.isfinite(self.end_freq_hz)):
            raise ValidationError("band edges must be finite")
        if not self.end_freq_hz > self.start_freq_hz:
            raise ValidationError(
                f"end_freq_hz ({self.end_freq_hz}) must exceed start_freq_hz ({self.start_freq_hz})"
            )
        if self.num_antennas < 1:
            raise ValidationError(f"num_antennas must be >= 1, got {self.num_antennas}")
        if self.num_chirps < 1:
            raise ValidationError(f"num_chirps must be >= 1, got {self.num_chirps}")
        if self.num_samples < 2 or self.num_samples % 2:
            raise ValidationError(
                f"num_samples must be even and >= 2, got {self.num_samples}"
            )

    @property
    def num_bins(self) -> int:
        return self.num_samples // 2

    @property
    def bandwidth_hz(self) -> float:
        return self.end_freq_hz - self.start_freq_hz

    @property
    def range_resolution_m(self) -> float:
        return 299_792_458.0 / (2.0 * self.bandwidth_hz)

    def with_dims(self, num_antennas: int, num_chirps: int, num_samples: int) -> "RadarConfig":
        return RadarConfig(self.start_freq_hz, self.end_freq_hz, num_antennas, num_chirps, num_samples)


def _readonly(arr: np.ndarray) -> np.ndarray:
    view = arr.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class RadarCube:
    """Complex IQ samples with shape ``(frames, antennas, chirps, samples)``."""

    config: RadarConfig
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        cfg = self.config
        if samples.ndim != 4 or samples.shape[1:] != (cfg.num_antennas, cfg.num_chirps, cfg.num_samples):
            raise ValidationError(
                f"sample array shape {samples.shape} does not match config "
                f"(F, {cfg.num_antennas}, {cfg.num_chirps}, {cfg.num_samples})"
            )
        if not np.all(np.isfinite(samples)):
            raise ValidationError("cube contains non-finite samples")
        object.__setattr__(self, "samples", _readonly(samples))

    @property
    def num_frames(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.samples.shape

    def __eq__(self, other):
        if not isinstance(other, RadarCube):
            return NotImplemented
        return self.config == other.config and np.array_equal(self.samples, other.samples)

    __hash__ = None


@dataclass(frozen=True)
class TemperatureLog:
    """Per-frame internal radar temperature in degrees Celsius."""

    temps: np.ndarray

    def __post_init__(self):
        temps = np.asarray(self.temps, dtype=np.float64)
        if temps.ndim != 1:
            raise ValidationError(f"temperature log must be one-dimensional, got shape {temps.shape}")
        if not np.all(np.isfinite(temps)):
            raise ValidationError("temperature log contains non-finite values")
        object.__setattr__(self, "temps", _readonly(temps))

    def __len__(self) -> int:
        return self.temps.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TemperatureLog):
            return NotImplemented
        return np.array_equal(self.temps, other.temps)

    __hash__ = None

    def slice(self, start: int, stop: int | None = None) -> "TemperatureLog":
        return TemperatureLog(self.temps[start:stop])


@dataclass(frozen=True)
class AmplitudeTensor:
    """Real, non-negative amplitudes with shape ``(frames, antennas, bins)``."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise ValidationError(f"amplitude tensor must be 3-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("amplitude tensor contains non-finite values")
        if np.any(values < 0):
            raise ValidationError("amplitude tensor contains negative values")
        object.__setattr__(self, "values", _readonly(values))

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.values.shape[1]

    @property
    def num_bins(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def slice(self, start: int, stop: int | None = None) -> "AmplitudeTensor":
        return AmplitudeTensor(self.values[start:stop])

    def __eq__(self, other):
        if not isinstance(other, AmplitudeTensor):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None


def check_paired(num_frames: int, temps: TemperatureLog, what: str = "data") -> None:
    """Raise if ``temps`` does not have exactly one entry per frame."""
    if len(temps) != num_frames:
        raise ValidationError(
            f"temperature log has {len(temps)} entries but {what} has {num_frames} frames"
        )


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Write ``data`` to ``path`` so that readers never observe a partial file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- RDC1 -------------------------------------------------------------------


def encode_cube(cube: RadarCube) -> bytes:
    F, A, C, N = cube.shape
    payload = np.empty((F, A, C, N, 2), dtype="<f4")
    payload[..., 0] = cube.samples.real
    payload[..., 1] = cube.samples.imag
    header = _CUBE_HEADER.pack(CUBE_MAGIC, F, A, C, N, 0)
    return header + payload.tobytes()


def decode_cube(data: bytes, config: RadarConfig | None = None) -> RadarCube:
    if len(data) < CUBE_HEADER_SIZE:
        raise FormatError(f"cube file too short for header ({len(data)} bytes)")
    magic, F, A, C, N, reserved = _CUBE_HEADER.unpack_from(data)
    if magic != CUBE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CUBE_MAGIC!r}")
    if reserved != 0:
        raise FormatError(f"reserved header field must be 0, got {reserved}")
    if A < 1 or C < 1:
        raise FormatError(f"antenna and chirp counts must be >= 1 (A={A}, C={C})")
    if N < 2 or N % 2:
        raise FormatError(f"samples per chirp must be even and >= 2, got N={N}")
    expected = F * A * C * N * 8
    actual = len(data) - CUBE_HEADER_SIZE
    if actual != expected:
        kind = "truncated payload" if actual < expected else "trailing bytes after payload"
        raise FormatError(
            f"{kind}: header F={F}, A={A}, C={C}, N={N} needs {expected} bytes, found {actual}"
        )
    if config is None:
        config = RadarConfig(num_antennas=A, num_chirps=C, num_samples=N)
    elif (config.num_antennas, config.num_chirps, config.num_samples) != (A, C, N):
        raise ValidationError(
            f"cube dimensions (A={A}, C={C}, N={N}) do not match configuration "
            f"(A={config.num_antennas}, C={config.num_chirps}, N={config.num_samples})"
        )
    raw = np.frombuffer(data, dtype="<f4", offset=CUBE_HEADER_SIZE).reshape(F, A, C, N, 2)
    if not np.all(np.isfinite(raw)):
        raise FormatError("cube payload contains non-finite samples")
    samples = np.empty((F, A, C, N), dtype=np.complex128)
    samples.real = raw[..., 0]
    samples.imag = raw[..., 1]
    return RadarCube(config, samples)


def read_cube(path: PathLike, config: RadarConfig | None = None) -> RadarCube:
    """Read and validate an RDC1 cube file.

    When ``config`` is given, the file dimensions must agree with it and the
    cube inherits its band edges; otherwise the default band is assumed.
    """
    data = Path(path).read_bytes()
    cube = decode_cube(data, config)
    log.debug("read cube %s with shape %s", path, cube.shape)
    return cube


def write_cube(cube: RadarCube, path: PathLike) -> None:
    """Write ``cube`` as RDC1. Samples are narrowed to float32."""
    atomic_write_bytes(path, encode_cube(cube))


# -- RAP1 -------------------------------------------------------------------


def encode_amplitudes(ap: AmplitudeTensor) -> bytes:
    F, A, B = ap.shape
    header = _AMPLITUDE_HEADER.pack(AMPLITUDE_MAGIC, F, A, B, 0)
    return header + np.ascontiguousarray(ap.values, dtype="<f8").tobytes()


def decode_amplitudes(data: bytes) -> AmplitudeTensor:
    if len(data) < AMPLITUDE_HEADER_SIZE:
        raise FormatError(f"amplitude file too short for header ({len(data)} bytes)")
    magic, F, A, B, reserved = _AMPLITUDE_HEADER.unpack_from(data)
    if magic != AMPLITUDE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {AMPLITUDE_MAGIC!r}")
    if reserved != 0:
        raise FormatError(f"reserved header field must be 0, got {reserved}")
    if A < 1 or B < 1:
        raise FormatError(f"antenna and bin counts must be >= 1 (A={A}, B={B})")
    expected = F * A * B * 8
    actual = len(data) - AMPLITUDE_HEADER_SIZE
    if actual != expected:
        kind = "truncated payload" if actual < expected else "trailing bytes after payload"
        raise FormatError(f"{kind}: header F={F}, A={A}, B={B} needs {expected} bytes, found {actual}")
    values = np.frombuffer(data, dtype="<f8", offset=AMPLITUDE_HEADER_SIZE).reshape(F, A, B)
    try:
        return AmplitudeTensor(values.astype(np.float64))
    except ValidationError as exc:
        raise FormatError(f"invalid amplitude payload: {exc}") from exc


def read_amplitudes(path: PathLike) -> AmplitudeTensor:
    return decode_amplitudes(Path(path).read_bytes())


def write_amplitudes(ap: AmplitudeTensor, path: PathLike) -> None:
    atomic_write_bytes(path, encode_amplitudes(ap))


# -- temperature CSV --------------------------------------------------------


def format_temperature_log(temps: TemperatureLog) -> str:
    lines = [",".join(TEMPERATURE_HEADER)]
    lines.extend(f"{i},{float(t)!r}" for i, t in enumerate(temps.temps))
    return "\n".join(lines) + "\n"


def parse_temperature_log(text: str) -> TemperatureLog:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != TEMPERATURE_HEADER:
        raise FormatError(f"temperature log header must be 'frame,temp_c', got {header!r}")
    temps = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise FormatError(f"line {lineno}: expected 2 columns, got {len(row)}")
        try:
            frame = int(row[0])
        except ValueError:
            raise FormatError(f"line {lineno}: frame index {row[0]!r} is not an integer") from None
        try:
            temp = float(row[1])
        except ValueError:
            raise FormatError(f"line {lineno}: temperature {row[1]!r} is not numeric") from None
        expected = len(temps)
        if frame < expected:
            raise FormatError(f"line {lineno}: duplicate or out-of-order frame index {frame}")
        if frame > expected:
            raise FormatError(f"line {lineno}: missing frame index {expected} (next row is {frame})")
        if not np.isfinite(temp):
            raise FormatError(f"line {lineno}: temperature {row[1]!r} is not finite")
        temps.append(temp)
    return TemperatureLog(np.array(temps, dtype=np.float64))


def read_temperature_log(path: PathLike) -> TemperatureLog:
    return parse_temperature_log(Path(path).read_text(encoding="ascii"))


def write_temperature_log(temps: TemperatureLog, path: PathLike) -> None:
    atomic_write_bytes(path, format_temperature_log(temps).encode("ascii"))


# -- key = value config files -----------------------------------------------


def parse_key_values(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines. Blank lines and ``#`` comments are ignored."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise FormatError(f"line {lineno}: empty key")
        if key in out:
            raise FormatError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _parse_number(key: str, value: str, kind=float):
    try:
        if kind is int:
            number = float(value)
            if number != int(number):
                raise ValueError
            return int(number)
        return kind(value)
    except ValueError:
        raise FormatError(f"{key}: expected {kind.__name__}, got {value!r}") from None


CONFIG_KEYS = ("start_freq_hz", "end_freq_hz", "num_antennas", "num_chirps", "num_samples", "train_fraction")


def radar_config_from_mapping(values: dict[str, str]) -> RadarConfig:
    defaults = RadarConfig()
    return RadarConfig(
        start_freq_hz=_parse_number("start_freq_hz", values.get("start_freq_hz", repr(defaults.start_freq_hz))),
        end_freq_hz=_parse_number("end_freq_hz", values.get("end_freq_hz", repr(defaults.end_freq_hz))),
        num_antennas=_parse_number("num_antennas", values.get("num_antennas", str(defaults.num_antennas)), int),
        num_chirps=_parse_number("num_chirps", values.get("num_chirps", str(defaults.num_chirps)), int),
        num_samples=_parse_number("num_samples", values.get("num_samples", str(defaults.num_samples)), int),
    )


def read_config(path: PathLike) -> tuple[RadarConfig, float]:
    """Read a pipeline config file; returns the radar config and train fraction.

    Keys not present fall back to the defaults of :class:`RadarConfig` and a
    0.7 training fraction.
    """
    values = parse_key_values(Path(path).read_text(encoding="utf-8"))
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise FormatError(f"unknown config keys: {', '.join(unknown)}")
    fraction = _parse_number("train_fraction", values.get("train_fraction", repr(DEFAULT_TRAIN_FRACTION)))
    return radar_config_from_mapping(values), fraction
