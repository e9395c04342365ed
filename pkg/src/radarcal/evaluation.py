"""Correlation diagnostics between temperature and (compensated) amplitudes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from radarcal.datacube import AmplitudeTensor, PathLike, TemperatureLog, atomic_write_bytes, check_paired
from radarcal.errors import UndefinedCorrelationError, ValidationError

REPORT_HEADER = "antenna,peak_bin,pr_ap,pr_tcap,reduction"
SERIES_HEADER = "frame,temp_c,ap_peak,tcap_peak"
BINS_HEADER = "antenna,bin,pr_ap,pr_tcap"
NA = "NA"

# A spread this small relative to the data magnitude is floating-point residue
# (e.g. a perfectly compensated series), not a measurable variation.
_ZERO_SPREAD_ULPS = 64


def _centered_sum_of_squares(x: np.ndarray, name: str) -> tuple[np.ndarray, float]:
    d = x - x.mean()
    ss = float(np.dot(d, d))
    scale = float(np.max(np.abs(x)))
    rms = math.sqrt(ss / x.size)
    if ss == 0.0 or rms <= _ZERO_SPREAD_ULPS * np.finfo(np.float64).eps * scale:
        raise UndefinedCorrelationError(f"{name} has zero variance; correlation is undefined")
    return d, ss


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient of two equal-length sequences."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValidationError("pearson expects one-dimensional sequences")
    if x.size != y.size:
        raise ValidationError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValidationError("pearson needs at least two samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("pearson inputs must be finite")
    dx, sxx = _centered_sum_of_squares(x, "x")
    dy, syy = _centered_sum_of_squares(y, "y")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    assert abs(r) <= 1.0 + 1e-12, f"correlation {r} violates Cauchy-Schwarz"
    return min(1.0, max(-1.0, r))


def _pearson_or_none(x, y) -> Optional[float]:
    try:
        return pearson(x, y)
    except UndefinedCorrelationError:
        return None


def peak_bin(ap: AmplitudeTensor, antenna: int) -> int:
    """Bin with the largest time-averaged amplitude; lowest index wins ties."""
    if ap.num_frames < 1:
        raise ValidationError("peak_bin needs at least one frame")
    if not 0 <= antenna < ap.num_antennas:
        raise ValidationError(f"antenna {antenna} out of range for {ap.num_antennas} antennas")
    return int(np.argmax(ap.values[:, antenna, :].mean(axis=0)))


def reduction(pr_ap: Optional[float], pr_tcap: Optional[float]) -> Optional[float]:
    """``1 - |pr_tcap| / |pr_ap|``; None when either side is undefined or pr_ap is 0."""
    if pr_ap is None or pr_tcap is None or pr_ap == 0.0:
        return None
    return 1.0 - abs(pr_tcap) / abs(pr_ap)


@dataclass(frozen=True)
class AntennaResult:
    antenna: int
    peak_bin: int
    pr_ap: Optional[float]
    pr_tcap: Optional[float]
    reduction: Optional[float]


@dataclass(frozen=True)
class EvaluationReport:
    """Per-antenna correlations at the peak bin plus full per-bin tables.

    ``bin_pr_ap`` and ``bin_pr_tcap`` are ``(A, B)`` arrays with NaN where the
    correlation is undefined. ``ap_peak``/``tcap_peak`` hold the per-frame
    series at each antenna's peak bin, ``(F, A)``; ``first_frame`` is the
    absolute index of their first row.
    """

    antennas: list[AntennaResult]
    bin_pr_ap: np.ndarray = field(repr=False)
    bin_pr_tcap: np.ndarray = field(repr=False)
    temps: np.ndarray = field(repr=False)
    ap_peak: np.ndarray = field(repr=False)
    tcap_peak: np.ndarray = field(repr=False)
    first_frame: int = 0


def evaluate(
    ap: AmplitudeTensor,
    tcap: AmplitudeTensor,
    temps: TemperatureLog,
    first_frame: int = 0,
) -> EvaluationReport:
    """Correlate temperature with AP and TCAP for every antenna and bin."""
    if ap.shape != tcap.shape:
        raise ValidationError(f"AP shape {ap.shape} differs from TCAP shape {tcap.shape}")
    check_paired(ap.num_frames, temps, "amplitude tensor")
    F, A, B = ap.shape
    t = temps.temps

    bin_pr_ap = np.full((A, B), np.nan)
    bin_pr_tcap = np.full((A, B), np.nan)
    for a in range(A):
        for b in range(B):
            r_ap = _pearson_or_none(t, ap.values[:, a, b])
            r_tcap = _pearson_or_none(t, tcap.values[:, a, b])
            if r_ap is not None:
                bin_pr_ap[a, b] = r_ap
            if r_tcap is not None:
                bin_pr_tcap[a, b] = r_tcap

    antennas = []
    peaks = []
    for a in range(A):
        pb = peak_bin(ap, a)
        peaks.append(pb)
        pr_ap = None if math.isnan(bin_pr_ap[a, pb]) else float(bin_pr_ap[a, pb])
        pr_tcap = None if math.isnan(bin_pr_tcap[a, pb]) else float(bin_pr_tcap[a, pb])
        antennas.append(AntennaResult(a, pb, pr_ap, pr_tcap, reduction(pr_ap, pr_tcap)))

    idx = np.arange(A)
    return EvaluationReport(
        antennas=antennas,
        bin_pr_ap=bin_pr_ap,
        bin_pr_tcap=bin_pr_tcap,
        temps=np.array(t),
        ap_peak=ap.values[:, idx, peaks],
        tcap_peak=tcap.values[:, idx, peaks],
        first_frame=first_frame,
    )


def _fmt6(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return NA
    return f"{value:.6g}"


def format_report_table(report: EvaluationReport) -> str:
    lines = [REPORT_HEADER]
    for r in report.antennas:
        lines.append(f"{r.antenna},{r.peak_bin},{_fmt6(r.pr_ap)},{_fmt6(r.pr_tcap)},{_fmt6(r.reduction)}")
    return "\n".join(lines) + "\n"


def format_bin_table(report: EvaluationReport) -> str:
    lines = [BINS_HEADER]
    A, B = report.bin_pr_ap.shape
    for a in range(A):
        for b in range(B):
            lines.append(f"{a},{b},{_fmt6(float(report.bin_pr_ap[a, b]))},{_fmt6(float(report.bin_pr_tcap[a, b]))}")
    return "\n".join(lines) + "\n"


def format_series(report: EvaluationReport, antenna: int) -> str:
    lines = [SERIES_HEADER]
    for i, t in enumerate(report.temps):
        lines.append(
            f"{report.first_frame + i},{float(t)!r},"
            f"{float(report.ap_peak[i, antenna])!r},{float(report.tcap_peak[i, antenna])!r}"
        )
    return "\n".join(lines) + "\n"


def series_path_for(series_path: PathLike, antenna: int) -> Path:
    """``out/series.csv`` -> ``out/series.a0.csv`` for antenna 0."""
    p = Path(series_path)
    return p.with_name(f"{p.stem}.a{antenna}{p.suffix or '.csv'}")


def render_report(
    report: EvaluationReport,
    path: PathLike,
    series_path: Optional[PathLike] = None,
    bins_path: Optional[PathLike] = None,
) -> list[Path]:
    """Write the per-antenna table and, optionally, per-frame series and per-bin tables.

    Series are written one file per antenna (see :func:`series_path_for`).
    Returns every path written.
    """
    written = [Path(path)]
    atomic_write_bytes(path, format_report_table(report).encode("ascii"))
    if bins_path is not None:
        atomic_write_bytes(bins_path, format_bin_table(report).encode("ascii"))
        written.append(Path(bins_path))
    if series_path is not None:
        for r in report.antennas:
            p = series_path_for(series_path, r.antenna)
            atomic_write_bytes(p, format_series(report, r.antenna).encode("ascii"))
            written.append(p)
    return written
