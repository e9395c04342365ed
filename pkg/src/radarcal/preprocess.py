"""Range-FFT preprocessing: IQ cube -> chirp-averaged amplitude profiles.

Every stage operates along the last axis, so the functions accept either a
single chirp of ``N`` samples or any stack of chirps with shape ``(..., N)``.
"""

from __future__ import annotations

import logging

import numpy as np

from radarcal.datacube import AmplitudeTensor, RadarCube
from radarcal.errors import ValidationError

log = logging.getLogger(__name__)

# Frames per vectorised block in compute_amplitude_profiles. Only bounds peak
# memory; results do not depend on it.
FRAME_BLOCK = 4096


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _radix2_fft(x: np.ndarray) -> np.ndarray:
    """Unnormalised iterative decimation-in-time FFT along the last axis."""
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = x[..., _bit_reverse_permutation(n)]
    m = 2
    while m <= n:
        half = m // 2
        k = np.arange(half)
        twiddle = np.exp(-2j * np.pi * k / m)
        blocks = y.reshape(lead + (n // m, m))
        top = blocks[..., :half]
        bottom = blocks[..., half:] * twiddle
        y = np.concatenate((top + bottom, top - bottom), axis=-1).reshape(lead + (n,))
        m *= 2
    return y


def _direct_dft(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    k = np.arange(n)
    # reduce k*n mod N before scaling so large products do not lose phase accuracy
    kernel = np.exp(-2j * np.pi * (np.outer(k, k) % n) / n)
    return x @ kernel.T


def remove_dc(chirp: np.ndarray) -> np.ndarray:
    """Subtract the per-chirp mean over samples."""
    chirp = np.asarray(chirp, dtype=np.complex128)
    if chirp.shape[-1] < 1:
        raise ValidationError("a chirp needs at least one sample")
    return chirp - chirp.mean(axis=-1, keepdims=True)


def fft_normalized(chirp: np.ndarray) -> np.ndarray:
    """Forward DFT scaled by 1/N: ``X[k] = (1/N) sum_n x[n] exp(-2j*pi*k*n/N)``.

    Power-of-two lengths use a radix-2 FFT; other lengths fall back to the
    direct O(N^2) sum.
    """
    chirp = np.asarray(chirp, dtype=np.complex128)
    n = chirp.shape[-1]
    if n < 1:
        raise ValidationError("a chirp needs at least one sample")
    spectrum = _radix2_fft(chirp) if _is_power_of_two(n) else _direct_dft(chirp)
    return spectrum / n


def positive_spectrum(spectrum: np.ndarray) -> np.ndarray:
    """Keep bins ``0 .. N/2-1`` (DC included) and double them."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    n = spectrum.shape[-1]
    if n % 2:
        raise ValidationError(f"positive spectrum needs an even length, got {n}")
    return 2.0 * spectrum[..., : n // 2]


def amplitude(half_spectrum: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(half_spectrum, dtype=np.complex128))


def chirp_average(per_chirp: np.ndarray) -> np.ndarray:
    """Average amplitude rows over the chirp axis (second to last).

    Accumulates chirps strictly in index order so the result does not depend
    on how the caller batches frames.
    """
    per_chirp = np.asarray(per_chirp, dtype=np.float64)
    if per_chirp.ndim < 2 or per_chirp.shape[-2] < 1:
        raise ValidationError("chirp_average needs at least one chirp row")
    acc = per_chirp[..., 0, :].copy()
    for c in range(1, per_chirp.shape[-2]):
        acc += per_chirp[..., c, :]
    return acc / per_chirp.shape[-2]


def _profiles(block: np.ndarray) -> np.ndarray:
    return chirp_average(amplitude(positive_spectrum(fft_normalized(remove_dc(block)))))


def compute_amplitude_profiles(cube: RadarCube, frame_block: int = FRAME_BLOCK) -> AmplitudeTensor:
    """Run the full pipeline over every frame and antenna of ``cube``.

    Returns an ``(F, A, N/2)`` tensor.
    """
    F, A, _, N = cube.shape
    out = np.empty((F, A, N // 2), dtype=np.float64)
    for start in range(0, F, frame_block):
        stop = min(start + frame_block, F)
        out[start:stop] = _profiles(cube.samples[start:stop])
    log.debug("computed amplitude profiles for %d frames", F)
    return AmplitudeTensor(out)
