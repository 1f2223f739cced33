"""OFDM signal layer: bit/QAM mapping, orthonormal (I)DFT, cyclic prefix,
and peak-magnitude normalization.

Conventions fixed here and relied upon everywhere else:

* Square QAM with a per-axis reflected Gray code; the first half of each
  symbol's bits selects the I level, the second half the Q level.
* Orthonormal (1/sqrt(N)) DFT scaling in both directions.
* Every modulated block is divided by its own peak magnitude so that
  ``max |x_n| <= 1``; the divisor is recorded as ``norm_scale`` and must be
  re-applied after demodulation to recover the symbol grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputLengthError, ParameterError

__all__ = [
    "OfdmConfig",
    "TimeSignal",
    "bits_per_symbol",
    "map_bits",
    "demap",
    "ofdm_modulate",
    "ofdm_demodulate",
]


@dataclass(frozen=True)
class OfdmConfig:
    """Static transceiver parameters."""

    n_subcarriers: int = 1024
    cp_len: int = 8
    qam_order: int = 16

    def __post_init__(self) -> None:
        n = self.n_subcarriers
        if n < 1 or (n & (n - 1)) != 0:
            raise ParameterError(f"n_subcarriers must be a power of two, got {n}")
        if not 0 <= self.cp_len < n:
            raise ParameterError(f"cp_len must be in [0, {n}), got {self.cp_len}")
        if self.qam_order not in (4, 16, 64):
            raise ParameterError(f"qam_order must be 4, 16 or 64, got {self.qam_order}")


@dataclass(frozen=True)
class TimeSignal:
    """A block of time-domain samples plus the peak divisor applied to it."""

    samples: np.ndarray
    norm_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if self.norm_scale <= 0:
            raise ParameterError(f"norm_scale must be positive, got {self.norm_scale}")

    def __len__(self) -> int:
        return len(self.samples)


def bits_per_symbol(order: int) -> int:
    """Bits carried by one QAM symbol."""
    k = int(round(np.log2(order)))
    if 2**k != order:
        raise ParameterError(f"order must be a power of two, got {order}")
    return k


def _axis_params(order: int) -> tuple[int, int, float]:
    """Levels per axis, bits per axis, and the unit-energy amplitude scale."""
    m = int(round(np.sqrt(order)))
    if m * m != order:
        raise ParameterError(f"order must be a perfect square, got {order}")
    k_axis = int(round(np.log2(m)))
    # Unit average symbol energy for levels +-1, +-3, ..., +-(m-1) per axis.
    scale = np.sqrt(3.0 / (2.0 * (order - 1)))
    return m, k_axis, scale


def _gray_encode(i: np.ndarray) -> np.ndarray:
    return i ^ (i >> 1)


def _gray_decode(g: np.ndarray) -> np.ndarray:
    i = g.copy()
    shift = 1
    while (i >> shift).any():
        i ^= i >> shift
        shift *= 2
    return i


def _axis_levels(bits: np.ndarray, m: int, k_axis: int) -> np.ndarray:
    """Per-axis amplitude indices from Gray-coded bit groups."""
    weights = 1 << np.arange(k_axis - 1, -1, -1)
    gray = bits.reshape(-1, k_axis) @ weights
    idx = _gray_decode(gray.astype(np.int64))
    return (m - 1) - 2 * idx  # +-1, +-3, ... with index 0 at the top level


def map_bits(bits: np.ndarray, order: int) -> np.ndarray:
    """Map a bit sequence to a Gray-coded square-QAM symbol grid.

    The grid has unit average constellation energy.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    m, k_axis, scale = _axis_params(order)
    k = 2 * k_axis
    if len(bits) % k != 0:
        raise InputLengthError(
            f"bit count {len(bits)} is not a multiple of {k} (order {order})"
        )
    groups = bits.reshape(-1, k)
    i_lv = _axis_levels(groups[:, :k_axis].ravel(), m, k_axis)
    q_lv = _axis_levels(groups[:, k_axis:].ravel(), m, k_axis)
    return scale * (i_lv + 1j * q_lv)


def _axis_bits(levels: np.ndarray, m: int, k_axis: int) -> np.ndarray:
    idx = (m - 1 - levels) // 2
    gray = _gray_encode(idx.astype(np.int64))
    out = np.empty((len(gray), k_axis), dtype=np.int64)
    for b in range(k_axis):
        out[:, b] = (gray >> (k_axis - 1 - b)) & 1
    return out


def demap(symbols: np.ndarray, order: int) -> np.ndarray:
    """Hard-decide symbols to the nearest constellation point and invert
    the Gray mapping.  ``demap(map_bits(b)) == b`` exactly."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    m, k_axis, scale = _axis_params(order)

    def decide(vals: np.ndarray) -> np.ndarray:
        lv = np.round((vals / scale + (m - 1)) / 2.0).astype(np.int64)
        lv = np.clip(lv, 0, m - 1)
        return 2 * lv - (m - 1)

    i_bits = _axis_bits(decide(symbols.real), m, k_axis)
    q_bits = _axis_bits(decide(symbols.imag), m, k_axis)
    return np.concatenate([i_bits, q_bits], axis=1).ravel()


def ofdm_modulate(grid: np.ndarray, cfg: OfdmConfig) -> TimeSignal:
    """Inverse DFT, cyclic-prefix insertion, and peak normalization."""
    grid = np.asarray(grid, dtype=complex).ravel()
    if len(grid) != cfg.n_subcarriers:
        raise InputLengthError(
            f"grid length {len(grid)} != n_subcarriers {cfg.n_subcarriers}"
        )
    x = np.fft.ifft(grid, norm="ortho")
    block = np.concatenate([x[len(x) - cfg.cp_len :], x]) if cfg.cp_len else x
    peak = float(np.max(np.abs(block)))
    if peak == 0.0:
        return TimeSignal(block.copy(), 1.0)
    return TimeSignal(block / peak, peak)


def ofdm_demodulate(signal: TimeSignal, cfg: OfdmConfig) -> np.ndarray:
    """Strip the cyclic prefix and apply the forward DFT.

    Returns the grid scaled by ``1 / norm_scale``; multiply by
    ``signal.norm_scale`` to recover the transmitted grid.
    """
    expected = cfg.n_subcarriers + cfg.cp_len
    if len(signal.samples) != expected:
        raise InputLengthError(
            f"sample count {len(signal.samples)} != N + cp_len = {expected}"
        )
    body = signal.samples[cfg.cp_len :]
    return np.fft.fft(body, norm="ortho")
