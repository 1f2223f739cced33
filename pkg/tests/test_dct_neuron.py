"""Tests for the DCT neuron: basis identities, evaluation, projection,
the LMS update, and serialization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import (
    DctNeuron,
    DomainError,
    ParameterError,
    cosine_features,
    evaluate,
    evaluate_complex,
    lms_update,
    project_function,
)
from artifact.dct_neuron import load_neuron_csv, save_neuron_csv


class TestCosineFeatures:
    def test_output_range_and_length(self):
        c = cosine_features(np.linspace(0, 1, 50), 6, 512)
        assert c.shape == (6, 50)
        assert np.all(np.abs(c) <= 1.0 + 1e-15)

    def test_frozen_value_q1(self):
        # Q=1, N_DCT=2, r=0: the first basis value is cos(pi/4) = sqrt(2)/2.
        c = cosine_features(0.0, 1, 2)
        assert c[0] == pytest.approx(np.sqrt(2) / 2, abs=1e-15)

    def test_scalar_vs_vector(self):
        c_scalar = cosine_features(0.37, 6, 512)
        c_vector = cosine_features(np.array([0.37]), 6, 512)
        assert c_scalar.shape == (6,)
        assert np.allclose(c_scalar, c_vector[:, 0], atol=1e-15)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            cosine_features(1.1, 6, 512)
        with pytest.raises(DomainError):
            cosine_features(-0.1, 6, 512)

    def test_tolerates_roundoff_at_edges(self):
        cosine_features(1.0 + 1e-13, 6, 512)
        cosine_features(-1e-13, 6, 512)

    def test_rejects_bad_q(self):
        with pytest.raises(ParameterError):
            cosine_features(0.5, 9, 8)


class TestBasisIdentities:
    @pytest.mark.parametrize("n_dct", [8, 64, 512])
    def test_power_one_half(self, n_dct):
        grid = np.arange(n_dct) / (n_dct - 1)
        basis = cosine_features(grid, n_dct, n_dct)
        power = np.mean(basis**2, axis=1)
        assert np.allclose(power, 0.5, atol=1e-12)

    @pytest.mark.parametrize("n_dct", [8, 64])
    def test_pairwise_orthogonality(self, n_dct):
        grid = np.arange(n_dct) / (n_dct - 1)
        basis = cosine_features(grid, n_dct, n_dct)
        gram = basis @ basis.T
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-9


class TestEvaluate:
    def test_zero_coeffs(self):
        n = DctNeuron(4, 64, np.zeros(4))
        assert np.allclose(evaluate(n, np.linspace(0, 1, 10)), 0.0, atol=1e-15)

    def test_basis_reproduction(self):
        coeffs = np.zeros(4)
        coeffs[2] = 1.0
        n = DctNeuron(4, 64, coeffs)
        r = np.linspace(0, 1, 20)
        assert np.allclose(evaluate(n, r), cosine_features(r, 4, 64)[2], atol=1e-15)

    def test_identity_projection_residual(self):
        # Recorded projection quality of the ramp at the default Q=6:
        # max abs error 0.0326 on a 256-point grid.
        n = project_function(lambda z: z, 6, 512)
        grid = np.linspace(0, 1, 256)
        err = np.max(np.abs(evaluate(n, grid) - grid))
        assert err < 0.035


class TestEvaluateComplex:
    def test_real_positive_input(self):
        n = project_function(lambda z: z, 6, 512)
        out = evaluate_complex(n, 0.5 + 0j)
        assert abs(out.imag) < 1e-15

    def test_phase_preserved(self):
        n = project_function(np.sqrt, 6, 512)
        mags = []
        for phi in np.linspace(0, 2 * np.pi, 9):
            out = evaluate_complex(n, 0.49 * np.exp(1j * phi))
            mags.append(abs(out))
            # Output is a signed real scaling of the input phasor.
            assert abs(np.imag(out * np.exp(-1j * phi))) < 1e-12
        assert np.ptp(mags) < 1e-12

    def test_zero_input(self):
        n = project_function(lambda z: z, 6, 512)
        assert evaluate_complex(n, 0.0 + 0j) == 0.0

    def test_vector_matches_scalar(self):
        n = project_function(np.sqrt, 6, 512)
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, 16) * np.exp(1j * rng.uniform(0, 2 * np.pi, 16))
        vec = evaluate_complex(n, x)
        for xi, vi in zip(x, vec):
            assert vi == pytest.approx(evaluate_complex(n, xi), abs=1e-13)


class TestLmsUpdate:
    def test_zero_error_no_change(self):
        n = DctNeuron(4, 64, np.ones(4))
        C = cosine_features(np.array([0.2, 0.5, 0.9]), 4, 64)
        h = np.array([0.5 + 0.1j, 0.2j, 0.1])
        out = lms_update(n, C, h, np.ones(3, dtype=complex), 0.0, 0.01)
        assert np.array_equal(out.coeffs, n.coeffs)

    def test_scalar_lms_oracle(self):
        # L=1, h=[1], zero phase, real error: plain real LMS with step 4a/Q.
        rng = np.random.default_rng(1)
        n = DctNeuron(4, 64, rng.normal(size=4))
        c = cosine_features(0.63, 4, 64)
        err = 0.37
        out = lms_update(
            n, c[:, None], np.array([1.0 + 0j]), np.array([1.0 + 0j]), err, 0.01
        )
        expected = n.coeffs + (4 * 0.01 / 4) * c * err
        assert np.allclose(out.coeffs, expected, atol=1e-15)

    def test_dimension_mismatch(self):
        n = DctNeuron(4, 64, np.zeros(4))
        C = cosine_features(np.array([0.2, 0.5]), 4, 64)
        with pytest.raises(ParameterError):
            lms_update(n, C, np.array([1.0 + 0j]), np.array([1.0 + 0j]), 0.1, 0.01)

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_gradient_direction_property(self, seed):
        # The update moves against the gradient of |err|^2 w.r.t. coeffs.
        rng = np.random.default_rng(seed)
        Q, L = 3, 2
        n = DctNeuron(Q, 32, rng.normal(size=Q))
        r = rng.uniform(0, 1, L)
        C = cosine_features(r, Q, 32)
        h = rng.normal(size=L) + 1j * rng.normal(size=L)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, L))
        y = rng.normal() + 1j * rng.normal()

        def sq_err(coeffs):
            y_hat = (coeffs @ C) @ (np.conj(h) * phases)
            return abs(y - y_hat) ** 2

        err = y - (n.coeffs @ C) @ (np.conj(h) * phases)
        out = lms_update(n, C, h, phases, err, 0.01)
        delta = out.coeffs - n.coeffs
        eps = 1e-7
        for q in range(Q):
            bump = np.zeros(Q)
            bump[q] = eps
            fd = (sq_err(n.coeffs + bump) - sq_err(n.coeffs - bump)) / (2 * eps)
            # update = -step/2 * gradient
            step = 4 * 0.01 / (Q * L)
            assert delta[q] == pytest.approx(-0.5 * step * fd, rel=1e-4, abs=1e-12)


class TestProjectFunction:
    def test_projects_basis_function(self):
        target = lambda grid: cosine_features(grid, 4, 64)[2]
        n = project_function(target, 4, 64)
        expected = np.zeros(4)
        expected[2] = 1.0
        assert np.allclose(n.coeffs, expected, atol=1e-12)

    def test_zero_target(self):
        n = project_function(lambda grid: np.zeros_like(grid), 4, 64)
        assert np.allclose(n.coeffs, 0.0, atol=1e-15)

    def test_full_rank_projection_exact_on_grid(self):
        n = project_function(np.sqrt, 64, 64)
        grid = np.arange(64) / 63
        assert np.allclose(evaluate(n, grid), np.sqrt(grid), atol=1e-10)

    def test_rejects_non_finite(self):
        with pytest.raises(ParameterError):
            project_function(lambda grid: np.full_like(grid, np.inf), 4, 64)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        n = DctNeuron(6, 512, rng.normal(size=6))
        path = str(tmp_path / "neuron.csv")
        save_neuron_csv(n, path)
        back = load_neuron_csv(path)
        assert back.q_count == 6 and back.n_dct == 512
        assert np.array_equal(back.coeffs, n.coeffs)


def test_neuron_validation():
    with pytest.raises(ParameterError):
        DctNeuron(0, 8, np.zeros(0))
    with pytest.raises(ParameterError):
        DctNeuron(9, 8, np.zeros(9))
    with pytest.raises(ParameterError):
        DctNeuron(2, 8, np.array([1.0, np.nan]))
    with pytest.raises(ParameterError):
        DctNeuron(2, 8, np.zeros(3))
