"""Per-antenna, per-bin linear temperature models and multiplicative correction.

For every (antenna, bin) a line ``amp(T) = slope * T + intercept`` is fitted on
the training frames. Inference rescales each amplitude by
``amp(t_ref) / amp(T_f)`` so that the profile looks as if it had been measured
at the reference temperature.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from radarcal.datacube import (
    AmplitudeTensor,
    PathLike,
    TemperatureLog,
    atomic_write_bytes,
    check_paired,
)
from radarcal.errors import DegenerateTrainingError, FormatError, ValidationError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class BinModel:
    antenna: int
    bin: int
    slope: float
    intercept: float


@dataclass(frozen=True)
class CalibrationModel:
    """Fitted lines for an ``A x B`` grid plus the reference temperature.

    ``fitted`` marks which grid cells carry a model; cells outside it are
    passed through uncorrected. ``clamp`` restricts prediction temperatures to
    the training range ``[t_min, t_max]``.
    """

    slopes: np.ndarray = field(repr=False)
    intercepts: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    t_ref: float
    t_min: float
    t_max: float
    epsilon: float = DEFAULT_EPSILON
    clamp: bool = False
    train_frames: Optional[int] = None

    def __post_init__(self):
        slopes = np.asarray(self.slopes, dtype=np.float64)
        intercepts = np.asarray(self.intercepts, dtype=np.float64)
        fitted = np.asarray(self.fitted, dtype=bool)
        if slopes.ndim != 2 or slopes.shape != intercepts.shape or slopes.shape != fitted.shape:
            raise ValidationError("slopes, intercepts and fitted mask must share one 2-D shape")
        if not (np.all(np.isfinite(slopes[fitted])) and np.all(np.isfinite(intercepts[fitted]))):
            raise ValidationError("fitted slopes and intercepts must be finite")
        for name in ("t_ref", "t_min", "t_max", "epsilon"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")
        if not self.t_min <= self.t_ref <= self.t_max:
            raise ValidationError(
                f"t_ref={self.t_ref} lies outside the training range [{self.t_min}, {self.t_max}]"
            )
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        for name, arr in (("slopes", slopes), ("intercepts", intercepts), ("fitted", fitted)):
            arr = arr.view()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_antennas(self) -> int:
        return self.slopes.shape[0]

    @property
    def num_bins(self) -> int:
        return self.slopes.shape[1]

    def bin_models(self) -> list[BinModel]:
        return [
            BinModel(int(a), int(b), float(self.slopes[a, b]), float(self.intercepts[a, b]))
            for a, b in zip(*np.nonzero(self.fitted))
        ]

    def effective_temperature(self, t):
        return np.clip(t, self.t_min, self.t_max) if self.clamp else t

    def __eq__(self, other):
        if not isinstance(other, CalibrationModel):
            return NotImplemented
        return (
            np.array_equal(self.fitted, other.fitted)
            and np.array_equal(self.slopes[self.fitted], other.slopes[other.fitted])
            and np.array_equal(self.intercepts[self.fitted], other.intercepts[other.fitted])
            and (self.t_ref, self.t_min, self.t_max, self.epsilon, self.clamp, self.train_frames)
            == (other.t_ref, other.t_min, other.t_max, other.epsilon, other.clamp, other.train_frames)
        )

    __hash__ = None


def train_frame_count(num_frames: int, train_fraction: float) -> int:
    """Number of leading frames used for training, ``floor(F * fraction)``.

    The fraction is taken at its decimal value so that e.g. ``0.7`` splits 10
    frames into exactly 7 + 3.
    """
    if not 0 < train_fraction < 1:
        raise ValidationError(f"train fraction must lie strictly between 0 and 1, got {train_fraction}")
    return math.floor(num_frames * Fraction(repr(float(train_fraction))))


def split_train_test(ap: AmplitudeTensor, temps: TemperatureLog, train_fraction: float):
    """Chronological split: ``((train_ap, train_temps), (test_ap, test_temps))``."""
    check_paired(ap.num_frames, temps, "amplitude tensor")
    n_train = train_frame_count(ap.num_frames, train_fraction)
    return (
        (ap.slice(0, n_train), temps.slice(0, n_train)),
        (ap.slice(n_train), temps.slice(n_train)),
    )


def default_bins(num_bins: int) -> list[int]:
    """Bins fitted when the caller gives no subset.

    Bin 0 is skipped: after DC removal it only holds rounding residue, so a
    fitted line there sits below any sensible epsilon.
    """
    return list(range(1, num_bins)) if num_bins > 1 else [0]


def parse_bins(text: str) -> list[int]:
    """Parse a bin list like ``"3,5-7"`` into ``[3, 5, 6, 7]``."""
    bins: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                if hi < lo:
                    raise ValueError
                bins.update(range(lo, hi + 1))
            else:
                bins.add(int(part))
        except ValueError:
            raise ValidationError(f"invalid bin specification {part!r}") from None
    if not bins:
        raise ValidationError("empty bin specification")
    return sorted(bins)


def fit(
    train_ap: AmplitudeTensor,
    train_temps: TemperatureLog,
    epsilon: float = DEFAULT_EPSILON,
    bins: Optional[Iterable[int]] = None,
    t_ref: Optional[float] = None,
    clamp: bool = False,
) -> CalibrationModel:
    """Ordinary least-squares line per (antenna, bin) over the training frames.

    Parameters
    ----------
    train_ap : AmplitudeTensor
        Training amplitudes, ``(F, A, B)``.
    train_temps : TemperatureLog
        One temperature per training frame.
    epsilon : float
        Prediction floor below which inference skips the correction.
    bins : iterable of int, optional
        Bins to model. Defaults to every bin except DC.
    t_ref : float, optional
        Reference temperature; defaults to the mean training temperature.
    clamp : bool
        Clamp inference temperatures to the training range.
    """
    check_paired(train_ap.num_frames, train_temps, "training amplitudes")
    F, A, B = train_ap.shape
    if F < 2:
        raise DegenerateTrainingError(f"need at least 2 training frames, got {F}")
    temps = train_temps.temps
    t_mean = float(np.mean(temps))
    dt = temps - t_mean
    sxx = float(np.dot(dt, dt))
    if sxx == 0.0 or np.ptp(temps) == 0.0:
        raise DegenerateTrainingError("zero temperature variance in training data; slope is undefined")

    bin_list = default_bins(B) if bins is None else sorted(set(int(b) for b in bins))
    for b in bin_list:
        if not 0 <= b < B:
            raise ValidationError(f"bin {b} out of range for {B} bins")

    values = train_ap.values[:, :, bin_list]
    y_mean = values.mean(axis=0)
    sxy = np.einsum("f,fab->ab", dt, values - y_mean)
    slope_sel = sxy / sxx
    intercept_sel = y_mean - slope_sel * t_mean

    slopes = np.full((A, B), np.nan)
    intercepts = np.full((A, B), np.nan)
    fitted = np.zeros((A, B), dtype=bool)
    slopes[:, bin_list] = slope_sel
    intercepts[:, bin_list] = intercept_sel
    fitted[:, bin_list] = True

    model = CalibrationModel(
        slopes=slopes,
        intercepts=intercepts,
        fitted=fitted,
        t_ref=t_mean if t_ref is None else float(t_ref),
        t_min=float(np.min(temps)),
        t_max=float(np.max(temps)),
        epsilon=float(epsilon),
        clamp=clamp,
        train_frames=F,
    )
    log.info("fitted %d bin models on %d frames (t_ref=%.4g)", int(fitted.sum()), F, model.t_ref)
    return model


def predict(model: CalibrationModel, antenna: int, bin: int, t: float) -> float:
    """Predicted amplitude of one grid cell at temperature ``t``."""
    if not (0 <= antenna < model.num_antennas and 0 <= bin < model.num_bins):
        raise ValidationError(
            f"index (antenna={antenna}, bin={bin}) outside model grid {model.slopes.shape}"
        )
    if not model.fitted[antenna, bin]:
        raise ValidationError(f"no model fitted for antenna {antenna}, bin {bin}")
    t_eff = model.effective_temperature(float(t))
    return float(model.slopes[antenna, bin] * t_eff + model.intercepts[antenna, bin])


def predict_grid(model: CalibrationModel, temps: Sequence[float] | np.ndarray) -> np.ndarray:
    """Predictions for every frame and grid cell, shape ``(F, A, B)``.

    Unfitted cells are NaN.
    """
    t_eff = model.effective_temperature(np.asarray(temps, dtype=np.float64))
    return model.slopes[None, :, :] * t_eff[:, None, None] + model.intercepts[None, :, :]


def apply_correction(model: CalibrationModel, ap: AmplitudeTensor, temps: TemperatureLog):
    """Temperature-compensate ``ap``.

    Returns ``(tcap, flags)`` where ``flags[f, a, b]`` is True wherever the
    epsilon guard skipped the correction. The guard fires when the prediction
    at the frame temperature or at ``t_ref`` is not above ``epsilon``.
    """
    check_paired(ap.num_frames, temps, "amplitude tensor")
    if ap.shape[1:] != model.slopes.shape:
        raise ValidationError(
            f"model grid {model.slopes.shape} does not match amplitude dimensions {ap.shape[1:]}"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        pred_f = predict_grid(model, temps.temps)
        pred_ref = predict_grid(model, [model.t_ref])
        usable = model.fitted[None] & (pred_f > model.epsilon) & (pred_ref > model.epsilon)
        factor = pred_ref / pred_f
        tcap = np.where(usable, ap.values * factor, ap.values)
    flags = model.fitted[None] & ~usable
    if flags.any():
        log.warning("epsilon guard skipped correction for %d entries", int(flags.sum()))
    return AmplitudeTensor(tcap), flags


def flagged_entries(flags: np.ndarray) -> list[tuple[int, int, int]]:
    return [(int(f), int(a), int(b)) for f, a, b in zip(*np.nonzero(flags))]


# -- persistence ------------------------------------------------------------

_REQUIRED_KEYS = ("format_version", "t_ref", "t_min", "t_max", "epsilon", "num_antennas", "num_bins", "models")


def model_to_dict(model: CalibrationModel) -> dict:
    data = {
        "format_version": FORMAT_VERSION,
        "t_ref": float(model.t_ref),
        "t_min": float(model.t_min),
        "t_max": float(model.t_max),
        "epsilon": float(model.epsilon),
        "num_antennas": model.num_antennas,
        "num_bins": model.num_bins,
        "clamp": bool(model.clamp),
        "train_frames": model.train_frames,
        "models": [
            {"antenna": m.antenna, "bin": m.bin, "slope": m.slope, "intercept": m.intercept}
            for m in model.bin_models()
        ],
    }
    return data


def dumps_model(model: CalibrationModel) -> str:
    # float repr is the shortest string that round-trips to the same double
    return json.dumps(model_to_dict(model), indent=2, allow_nan=False) + "\n"


def _number(data: dict, key: str) -> float:
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"model field {key!r} must be a number, got {value!r}")
    return float(value)


def _count(data: dict, key: str) -> int:
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise FormatError(f"model field {key!r} must be a positive integer, got {value!r}")
    return value


def model_from_dict(data: dict) -> CalibrationModel:
    if not isinstance(data, dict):
        raise FormatError("model file must contain a JSON object")
    missing = [k for k in _REQUIRED_KEYS if k not in data]
    if missing:
        raise FormatError(f"model file is missing keys: {', '.join(missing)}")
    if data["format_version"] != FORMAT_VERSION:
        raise FormatError(
            f"unsupported model format_version {data['format_version']!r}, expected {FORMAT_VERSION}"
        )
    A = _count(data, "num_antennas")
    B = _count(data, "num_bins")
    slopes = np.full((A, B), np.nan)
    intercepts = np.full((A, B), np.nan)
    fitted = np.zeros((A, B), dtype=bool)
    if not isinstance(data["models"], list):
        raise FormatError("model field 'models' must be a list")
    for entry in data["models"]:
        if not isinstance(entry, dict) or set(entry) != {"antenna", "bin", "slope", "intercept"}:
            raise FormatError(f"malformed bin model entry {entry!r}")
        a, b = entry["antenna"], entry["bin"]
        if not (isinstance(a, int) and isinstance(b, int) and 0 <= a < A and 0 <= b < B):
            raise FormatError(f"bin model index (antenna={a!r}, bin={b!r}) outside {A}x{B} grid")
        if fitted[a, b]:
            raise FormatError(f"duplicate bin model for antenna {a}, bin {b}")
        slopes[a, b] = _number(entry, "slope")
        intercepts[a, b] = _number(entry, "intercept")
        fitted[a, b] = True
    clamp = data.get("clamp", False)
    if not isinstance(clamp, bool):
        raise FormatError(f"model field 'clamp' must be a boolean, got {clamp!r}")
    train_frames = data.get("train_frames")
    if train_frames is not None and (isinstance(train_frames, bool) or not isinstance(train_frames, int)):
        raise FormatError(f"model field 'train_frames' must be an integer, got {train_frames!r}")
    try:
        return CalibrationModel(
            slopes=slopes,
            intercepts=intercepts,
            fitted=fitted,
            t_ref=_number(data, "t_ref"),
            t_min=_number(data, "t_min"),
            t_max=_number(data, "t_max"),
            epsilon=_number(data, "epsilon"),
            clamp=clamp,
            train_frames=train_frames,
        )
    except FormatError:
        raise
    except ValidationError as exc:
        raise FormatError(f"invalid model: {exc}") from exc


def loads_model(text: str) -> CalibrationModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(data)


def save_model(model: CalibrationModel, path: PathLike) -> None:
    atomic_write_bytes(path, dumps_model(model).encode("utf-8"))


def load_model(path: PathLike) -> CalibrationModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
