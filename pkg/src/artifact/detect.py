"""Compensation with the identified model: inverse (predistortion)
learning, frequency-domain zero-forcing equalization, the iterative
distortion-cancellation decoder, and BER metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .dct_neuron import DctNeuron, cosine_features, evaluate, project_function
from .errors import InputLengthError, ParameterError
from .estimator import ChannelEstimate
from .channel import FirChannel
from .ofdm import OfdmConfig, TimeSignal, bits_per_symbol, demap, map_bits

__all__ = [
    "Predistorter",
    "DecodeResult",
    "learn_inverse",
    "predistort",
    "zf_equalize",
    "iterative_decode",
    "ber",
    "theoretical_ber",
]

_ERASURE_TOL = 1e-9


@dataclass(frozen=True)
class Predistorter:
    """Learned inverse of the nonlinearity estimate.

    ``s_max`` is the largest output value observed from f_hat during
    training; inverse queries are clamped to [0, s_max] because the fit is
    unconstrained beyond the reachable range.
    """

    inverse: DctNeuron
    s_max: float = 1.0


@dataclass(frozen=True)
class DecodeResult:
    bits: np.ndarray
    per_iteration_symbol_error: np.ndarray
    iterations_run: int


def learn_inverse(
    f_hat: DctNeuron,
    q_prime: int = 512,
    n_dct_prime: int = 512,
    n_samples: int = 10000,
    alpha: float = 0.01,
    rng: np.random.Generator | None = None,
    epochs: int = 60,
) -> Predistorter:
    """Self-supervised inverse fit: draw magnitudes r uniform on [0, 1],
    present s = clamp(f_hat(r), 0, 1) as the feature input and r as the
    target, and run scalar normalized LMS (step 4 alpha / Q').

    The coefficient vector starts at the identity-curve projection and the
    sample set is swept for several epochs: with Q' = 512 basis functions
    the normalized step is ~8e-5 per sample, far too small for a single
    pass over the training budget to converge.
    """
    if rng is None:
        raise ParameterError("rng is required")
    if n_samples < q_prime:
        raise ParameterError("n_samples must be >= q_prime")
    r = rng.uniform(0.0, 1.0, n_samples)
    s = np.clip(evaluate(f_hat, r), 0.0, 1.0)
    s_max = float(np.max(s)) if n_samples else 1.0
    features = cosine_features(s, q_prime, n_dct_prime)
    coeffs = project_function(lambda z: z, q_prime, n_dct_prime).coeffs.copy()
    step = 4.0 * alpha / q_prime
    for _ in range(epochs):
        for i in range(n_samples):
            c = features[:, i]
            eps = r[i] - coeffs @ c
            coeffs = coeffs + step * eps * c
    return Predistorter(DctNeuron(q_prime, n_dct_prime, coeffs), s_max)


def predistort(x: TimeSignal, p: Predistorter) -> TimeSignal:
    """Map each sample's magnitude through the learned inverse, preserving
    phase; outputs are clamped to [0, 1]."""
    samples = np.asarray(x.samples)
    r = np.abs(samples)
    out = np.zeros_like(samples)
    nz = r > 0
    if np.any(nz):
        queries = np.clip(r[nz], 0.0, p.s_max)
        mags = np.clip(evaluate(p.inverse, queries), 0.0, 1.0)
        out[nz] = mags * (samples[nz] / r[nz])
    return TimeSignal(out, x.norm_scale)


def _frequency_response(channel: ChannelEstimate, n: int) -> np.ndarray:
    """N-point response consistent with the conjugated-tap convolution."""
    return np.fft.fft(np.conj(channel.taps), n)


def zf_equalize(
    received_grid: np.ndarray, channel: ChannelEstimate, n: int
) -> np.ndarray:
    """Per-subcarrier zero-forcing division; near-null subcarriers are
    erased to 0 (decided toward the nearest symbol from the origin)."""
    received_grid = np.asarray(received_grid, dtype=complex)
    H = _frequency_response(channel, n)
    active = np.abs(H) >= _ERASURE_TOL
    out = np.zeros(n, dtype=complex)
    out[active] = received_grid[active] / H[active]
    return out


def iterative_decode(
    y: TimeSignal,
    f_hat: DctNeuron,
    h_hat: ChannelEstimate,
    cfg: OfdmConfig,
    n_iter: int = 5,
    norm_scale: float | None = None,
) -> DecodeResult:
    """Iterative distortion cancellation on one CP-bearing OFDM block.

    Iteration 0 is plain zero-forcing.  Each subsequent iteration remaps
    the hard decisions, rebuilds the time-domain block with the known
    normalization, estimates the additive distortion d_n = f_hat(x_n) - x_n,
    and subtracts its spectrum from the equalized grid.
    """
    if n_iter < 1:
        raise ParameterError("n_iter must be >= 1")
    if norm_scale is None:
        norm_scale = y.norm_scale
    n = cfg.n_subcarriers
    if len(y.samples) != n + cfg.cp_len:
        raise InputLengthError(
            f"block length {len(y.samples)} != N + cp_len = {n + cfg.cp_len}"
        )
    Y = np.fft.fft(np.asarray(y.samples)[cfg.cp_len :], norm="ortho")
    H = _frequency_response(h_hat, n)
    active = np.abs(H) >= _ERASURE_TOL
    zf = zf_equalize(Y, h_hat, n)
    grid = zf * norm_scale

    changes = np.empty(n_iter, dtype=float)
    bits = demap(grid, cfg.qam_order)
    prev_symbols = map_bits(bits, cfg.qam_order)
    for it in range(n_iter):
        remapped = prev_symbols
        x_bar = np.fft.ifft(remapped, norm="ortho") / norm_scale
        r = np.abs(x_bar)
        distortion = np.zeros(n, dtype=complex)
        nz = r > 0
        if np.any(nz):
            distortion[nz] = (evaluate(f_hat, np.minimum(r[nz], 1.0)) - r[nz]) * (
                x_bar[nz] / r[nz]
            )
        D = np.fft.fft(distortion, norm="ortho")
        grid = (zf - np.where(active, D, 0.0)) * norm_scale
        bits = demap(grid, cfg.qam_order)
        symbols = map_bits(bits, cfg.qam_order)
        changes[it] = float(np.count_nonzero(symbols != prev_symbols))
        prev_symbols = symbols
    return DecodeResult(bits, changes, n_iter)


def ber(tx_bits: np.ndarray, rx_bits: np.ndarray) -> float:
    tx_bits = np.asarray(tx_bits).ravel()
    rx_bits = np.asarray(rx_bits).ravel()
    if len(tx_bits) != len(rx_bits):
        raise InputLengthError(
            f"bit stream lengths differ: {len(tx_bits)} vs {len(rx_bits)}"
        )
    if len(tx_bits) == 0:
        raise InputLengthError("empty bit streams")
    return float(np.count_nonzero(tx_bits != rx_bits)) / len(tx_bits)


def _q_function(x: np.ndarray) -> np.ndarray:
    return 0.5 * erfc(x / np.sqrt(2.0))


def theoretical_ber(h: FirChannel, snr_db: float, cfg: OfdmConfig) -> float:
    """Nearest-neighbour BER of linear Gray-coded square-QAM OFDM over the
    given channel realization at the stated average receive SNR.

    The per-subcarrier SNR is gamma_k = |H_k|^2 gamma / mean_j |H_j|^2 —
    normalized by the realization's own mean power because the simulator
    calibrates sigma^2 against the measured received power.
    """
    order = cfg.qam_order
    if order not in (4, 16, 64):
        raise ParameterError(f"unsupported constellation order {order}")
    k = bits_per_symbol(order)
    H = np.fft.fft(np.conj(h.taps), cfg.n_subcarriers)
    mag2 = np.abs(H) ** 2
    mean_power = float(np.mean(mag2))
    if mean_power == 0.0:
        return 0.5
    gamma = 10.0 ** (snr_db / 10.0)
    gamma_k = mag2 * gamma / mean_power
    arg = np.sqrt(3.0 * gamma_k / (order - 1))
    per_sc = (4.0 / k) * (1.0 - 1.0 / np.sqrt(order)) * _q_function(arg)
    return float(np.mean(per_sc))
