"""Ground-truth channel: memoryless AM-AM distortion, FIR multipath with
conjugated taps, and AWGN calibrated to the measured received power.

The received sample is

    y_n = sum_l  h_l^* f(|x_{n-l}|) e^{j phase(x_{n-l})}  +  w_n

with zero pre-history before the block start; a cyclic prefix of length
``>= L - 1`` makes the in-block behaviour circular as in standard OFDM.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .ofdm import TimeSignal

__all__ = [
    "AmplitudeNonlinearity",
    "Identity",
    "SoftSine",
    "HardClip",
    "Tabulated",
    "load_tabulated",
    "FirChannel",
    "NoisySnr",
    "apply_nonlinearity",
    "draw_channel",
    "propagate",
]

_MAG_TOL = 1e-12


class AmplitudeNonlinearity:
    """Base class for AM-AM curves f: [0,1] -> [0,1] with f(0) = 0."""

    kind = "abstract"

    def __call__(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Identity(AmplitudeNonlinearity):
    """Transparent amplifier, f(r) = r."""

    kind = "identity"

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(r, dtype=float)


class SoftSine(AmplitudeNonlinearity):
    """Smooth concave saturation, f(r) = sin(pi r / 2)."""

    kind = "soft"

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return np.sin(0.5 * np.pi * np.asarray(r, dtype=float))


@dataclass(frozen=True)
class HardClip(AmplitudeNonlinearity):
    """Ideal limiter, f(r) = min(r / saturation_input, 1)."""

    saturation_input: float = 0.5
    kind = "hard"

    def __post_init__(self) -> None:
        if not 0.0 < self.saturation_input <= 1.0:
            raise ParameterError(
                f"saturation_input must be in (0, 1], got {self.saturation_input}"
            )

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return np.minimum(np.asarray(r, dtype=float) / self.saturation_input, 1.0)


class Tabulated(AmplitudeNonlinearity):
    """Piecewise-linear AM-AM curve given by (r, f(r)) samples."""

    kind = "tabulated"

    def __init__(self, r_grid: np.ndarray, f_grid: np.ndarray):
        r_grid = np.asarray(r_grid, dtype=float)
        f_grid = np.asarray(f_grid, dtype=float)
        if r_grid.ndim != 1 or r_grid.shape != f_grid.shape or len(r_grid) < 2:
            raise ParameterError("tabulated grid needs matching 1-D arrays, len >= 2")
        if np.any(np.diff(r_grid) <= 0):
            raise ParameterError("tabulated r grid must be strictly increasing")
        if r_grid[0] != 0.0 or r_grid[-1] != 1.0:
            raise ParameterError("tabulated r grid must cover [0, 1]")
        if f_grid[0] != 0.0 or np.any(f_grid < 0.0) or np.any(f_grid > 1.0):
            raise ParameterError("tabulated values must satisfy f(0)=0, 0<=f<=1")
        self.r_grid = r_grid
        self.f_grid = f_grid

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(r, dtype=float), self.r_grid, self.f_grid)


def load_tabulated(path: str) -> Tabulated:
    """Load a tabulated nonlinearity from a two-column CSV (header row
    required): ``r, f``."""
    rows: list[tuple[float, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            if not row:
                continue
            rows.append((float(row[0]), float(row[1])))
    if not rows:
        raise ParameterError(f"no data rows in tabulated CSV {path!r}")
    r, f = zip(*rows)
    return Tabulated(np.array(r), np.array(f))


@dataclass(frozen=True)
class FirChannel:
    """Complex FIR taps h with expected total power 1 when drawn."""

    taps: np.ndarray

    def __post_init__(self) -> None:
        taps = np.atleast_1d(np.asarray(self.taps, dtype=complex))
        if taps.ndim != 1 or len(taps) < 1:
            raise ParameterError("taps must be a non-empty 1-D sequence")
        object.__setattr__(self, "taps", taps)

    @property
    def length(self) -> int:
        return len(self.taps)


@dataclass(frozen=True)
class NoisySnr:
    """Per-realization SNR bookkeeping: sigma^2 derived from the measured
    noiseless received power."""

    snr_db: float
    measured_signal_power: float
    sigma2: float

    @classmethod
    def from_power(cls, snr_db: float, measured_signal_power: float) -> "NoisySnr":
        if measured_signal_power <= 0:
            raise ParameterError("measured_signal_power must be positive")
        sigma2 = (
            0.0 if np.isinf(snr_db) else measured_signal_power / 10.0 ** (snr_db / 10.0)
        )
        return cls(snr_db=snr_db, measured_signal_power=measured_signal_power, sigma2=sigma2)


def apply_nonlinearity(f: AmplitudeNonlinearity, x: np.ndarray) -> np.ndarray:
    """Element-wise AM-AM distortion: f(|x|) e^{j phase(x)}; 0 maps to 0."""
    x = np.asarray(x, dtype=complex)
    r = np.abs(x)
    if np.any(r > 1.0 + _MAG_TOL):
        raise DomainError(f"input magnitude {r.max():.6g} exceeds 1")
    out = np.zeros_like(x)
    nz = r > 0
    out[nz] = f(np.minimum(r[nz], 1.0)) * (x[nz] / r[nz])
    return out


def draw_channel(L: int, rng: np.random.Generator) -> FirChannel:
    """Draw i.i.d. circularly-symmetric Gaussian taps with variance 1/L."""
    if L < 1:
        raise ParameterError(f"L must be >= 1, got {L}")
    taps = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) * np.sqrt(0.5 / L)
    return FirChannel(taps)


def propagate(
    x: TimeSignal,
    f: AmplitudeNonlinearity,
    h: FirChannel,
    snr_db: float,
    rng: np.random.Generator | None = None,
) -> tuple[TimeSignal, NoisySnr]:
    """Push a block through the nonlinear frequency-selective channel.

    ``snr_db = inf`` gives the noiseless output; otherwise sigma^2 is set
    from the measured noiseless received power so the per-realization SNR
    is exact.  Returns the received signal and the noise record.
    """
    distorted = apply_nonlinearity(f, x.samples)
    n = len(distorted)
    noiseless = np.convolve(distorted, np.conj(h.taps))[:n]
    power = float(np.mean(np.abs(noiseless) ** 2))
    if power == 0.0:
        noise = NoisySnr(snr_db=snr_db, measured_signal_power=0.0, sigma2=0.0)
        return TimeSignal(noiseless, x.norm_scale), noise
    noise = NoisySnr.from_power(snr_db, power)
    y = noiseless
    if noise.sigma2 > 0.0:
        if rng is None:
            raise ParameterError("rng is required when snr_db is finite")
        w = np.sqrt(noise.sigma2 / 2.0) * (
            rng.standard_normal(n) + 1j * rng.standard_normal(n)
        )
        y = noiseless + w
    return TimeSignal(y, x.norm_scale), noise
