"""The DCT Neuron: a magnitude nonlinearity modelled as a truncated DCT
series, with feature construction, evaluation, least-squares projection,
and the real-projected normalized-LMS coefficient update.

Basis
-----
For resolution ``N_DCT`` the continuous grid index is ``z = r (N_DCT - 1)``
with ``r`` the input magnitude in [0, 1].  Basis function ``q`` (1-based) is

    c_q(r) = kappa_q cos( pi (q - 1) (2 z + 1) / (2 N_DCT) ),

with ``kappa_1 = 1/sqrt(2)`` and ``kappa_q = 1`` otherwise.  On the integer
grid ``z = 0 .. N_DCT - 1`` this is the orthogonal DCT-II family: every
basis vector has mean-square power exactly 1/2 and distinct vectors are
exactly orthogonal, for any number of retained coefficients up to
``N_DCT``.  Those two identities are what the estimator's step-size
normalization (Q L / 2) and the closed-form projection below rely on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "DctNeuron",
    "cosine_features",
    "evaluate",
    "evaluate_complex",
    "lms_update",
    "project_function",
    "save_neuron_csv",
    "load_neuron_csv",
]

_R_TOL = 1e-12


@dataclass(frozen=True)
class DctNeuron:
    """Q real DCT coefficients plus the basis resolution N_DCT."""

    q_count: int
    n_dct: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=float)
        if self.q_count < 1 or self.n_dct < 1 or self.q_count > self.n_dct:
            raise ParameterError(
                f"need 1 <= q_count <= n_dct, got Q={self.q_count}, N_DCT={self.n_dct}"
            )
        if coeffs.shape != (self.q_count,):
            raise ParameterError(
                f"coeffs shape {coeffs.shape} != (q_count,) = ({self.q_count},)"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ParameterError("coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)


def _check_magnitudes(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < -_R_TOL) or np.any(r > 1.0 + _R_TOL):
        raise DomainError("magnitude outside [0, 1]")
    return np.clip(r, 0.0, 1.0)


def cosine_features(r: np.ndarray | float, q_count: int, n_dct: int) -> np.ndarray:
    """Evaluate the Q basis functions at magnitude(s) r.

    Returns shape ``(Q,)`` for scalar input, ``(Q, len(r))`` for arrays.
    """
    if q_count < 1 or q_count > n_dct:
        raise ParameterError(f"need 1 <= q_count <= n_dct, got {q_count}, {n_dct}")
    scalar = np.isscalar(r) or np.ndim(r) == 0
    r = _check_magnitudes(np.atleast_1d(r))
    z = r * (n_dct - 1)
    k = np.arange(q_count)
    c = np.cos(np.pi * np.multiply.outer(k, 2.0 * z + 1.0) / (2.0 * n_dct))
    c[0] *= 1.0 / np.sqrt(2.0)
    return c[:, 0] if scalar else c


def evaluate(neuron: DctNeuron, r: np.ndarray | float) -> np.ndarray | float:
    """f_hat(r) = coeffs . c(r)."""
    c = cosine_features(r, neuron.q_count, neuron.n_dct)
    return neuron.coeffs @ c


def evaluate_complex(neuron: DctNeuron, x: np.ndarray | complex) -> np.ndarray | complex:
    """f_hat(|x|) e^{j phase(x)}; zero input maps to zero."""
    scalar = np.isscalar(x) or np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    r = np.abs(x)
    out = np.zeros_like(x)
    nz = r > 0
    if np.any(nz):
        out[nz] = evaluate(neuron, r[nz]) * (x[nz] / r[nz])
    return out[0] if scalar else out


def lms_update(
    neuron: DctNeuron,
    C: np.ndarray,
    h_hat: np.ndarray,
    phases: np.ndarray,
    err: complex,
    alpha: float,
) -> DctNeuron:
    """One normalized-LMS step on the coefficient vector.

    ``C`` is the Q x L matrix of cosine features for lags 0..L-1, ``phases``
    the corresponding unit phasors, and ``err`` the complex prediction error
    for this sample.  The step size ``4 alpha / (Q L)`` is the gradient
    descent rate divided by the total input power Q L / 2 contributed by
    Q basis functions of power 1/2 across L lags.
    """
    if alpha <= 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    C = np.asarray(C, dtype=float)
    h_hat = np.asarray(h_hat, dtype=complex).ravel()
    phases = np.asarray(phases, dtype=complex).ravel()
    L = len(h_hat)
    if C.shape != (neuron.q_count, L) or len(phases) != L:
        raise ParameterError(
            f"dimension mismatch: C {C.shape}, h_hat {h_hat.shape}, phases {phases.shape}"
        )
    step = 4.0 * alpha / (neuron.q_count * L)
    grad = np.real(C @ (np.conj(h_hat) * phases) * np.conj(err))
    return DctNeuron(neuron.q_count, neuron.n_dct, neuron.coeffs + step * grad)


def project_function(
    target: Callable[[np.ndarray], np.ndarray], q_count: int, n_dct: int
) -> DctNeuron:
    """Least-squares projection of a real function onto the Q basis
    functions over the integer grid.  By orthogonality the normal equations
    are diagonal, so the solution is the analysis sum scaled by 2 / N_DCT."""
    grid = np.arange(n_dct) / (n_dct - 1) if n_dct > 1 else np.zeros(1)
    values = np.asarray(target(grid), dtype=float)
    if values.shape != grid.shape or not np.all(np.isfinite(values)):
        raise ParameterError("target must be finite on the projection grid")
    basis = cosine_features(grid, q_count, n_dct)
    coeffs = (2.0 / n_dct) * basis @ values
    return DctNeuron(q_count, n_dct, coeffs)


def save_neuron_csv(neuron: DctNeuron, path: str) -> None:
    """Serialize a neuron: header row ``q_count,n_dct``, then one
    coefficient per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([neuron.q_count, neuron.n_dct])
        for value in neuron.coeffs:
            writer.writerow([repr(float(value))])


def load_neuron_csv(path: str) -> DctNeuron:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        q_count, n_dct = int(header[0]), int(header[1])
        coeffs = np.array([float(row[0]) for row in reader if row])
    return DctNeuron(q_count, n_dct, coeffs)
