"""End-to-end acceptance tests.

Each test pins one externally meaningful property of the simulator at its
stated tolerance and runtime budget; thresholds and seeds are frozen so
reruns are reproducible.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from artifact import (
    DctNeuron,
    EstimatorConfig,
    ExperimentConfig,
    FirChannel,
    Identity,
    OfdmConfig,
    SoftSine,
    TimeSignal,
    bits_per_symbol,
    combined_nmse,
    cosine_features,
    draw_channel,
    estimate_channel,
    learn_inverse,
    lms_update,
    map_bits,
    ofdm_modulate,
    propagate,
    records_to_csv,
    run_ber,
    run_estimation,
    run_experiment,
    run_inverse,
    wiener_solve,
)
from artifact.dct_neuron import evaluate, evaluate_complex
from artifact.harness import DetectorConfig, InverseConfig


def pooled_mean(records, name):
    """Per-detection-SNR mean of a metric over trials."""
    acc = {}
    for r in records:
        if r.metric_name == name and not isinstance(r.metric_value, str):
            acc.setdefault(r.det_snr_db, []).append(r.metric_value)
    return {snr: float(np.mean(vals)) for snr, vals in acc.items()}


class Timer:
    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.monotonic() - self.start


def test_dct_basis_power_and_orthogonality():
    with Timer() as t:
        for n_dct in (8, 64, 512):
            grid = np.arange(n_dct) / (n_dct - 1)
            basis = cosine_features(grid, n_dct, n_dct)
            power = np.mean(basis**2, axis=1)
            assert np.max(np.abs(power - 0.5)) < 1e-12
            gram = basis @ basis.T
            off_diagonal = gram - np.diag(np.diag(gram))
            assert np.max(np.abs(off_diagonal)) < 1e-9
    assert t.elapsed < 1.0


def test_wiener_solve_matches_direct_least_squares():
    rng = np.random.default_rng(1002)
    with Timer() as t:
        for _ in range(100):
            L = int(rng.integers(1, 5))
            q = int(rng.integers(2, 9))
            neuron = DctNeuron(q, 64, rng.normal(size=q))
            n = 256
            x = rng.uniform(0.02, 1, n) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
            h = draw_channel(L, rng)
            y, _ = propagate(TimeSignal(x, 1.0), Identity(), h, 10.0, rng)
            est = wiener_solve(TimeSignal(x, 1.0), y, neuron, L, normalize=False)

            fr = evaluate_complex(neuron, x)
            U = np.zeros((n, L), dtype=complex)
            for ell in range(L):
                U[ell:, ell] = fr[: n - ell]
            direct, *_ = np.linalg.lstsq(U, y.samples, rcond=None)
            direct = np.conj(direct)
            assert np.linalg.norm(est.taps - direct) <= 1e-8 * np.linalg.norm(direct)
    assert t.elapsed < 5.0


def test_lms_update_matches_finite_difference_gradient():
    rng = np.random.default_rng(1003)
    alpha = 0.01
    with Timer() as t:
        for _ in range(100):
            Q = int(rng.integers(1, 5))
            L = int(rng.integers(1, 4))
            neuron = DctNeuron(Q, 32, rng.normal(size=Q))
            C = cosine_features(rng.uniform(0, 1, L), Q, 32)
            h = rng.normal(size=L) + 1j * rng.normal(size=L)
            phases = np.exp(1j * rng.uniform(0, 2 * np.pi, L))
            y = rng.normal() + 1j * rng.normal()
            weights = np.conj(h) * phases

            def sq_err(coeffs):
                return abs(y - (coeffs @ C) @ weights) ** 2

            err = y - (neuron.coeffs @ C) @ weights
            delta = lms_update(neuron, C, h, phases, err, alpha).coeffs - neuron.coeffs
            step = 4.0 * alpha / (Q * L)
            eps = 1e-6
            for qi in range(Q):
                bump = np.zeros(Q)
                bump[qi] = eps
                fd = (sq_err(neuron.coeffs + bump) - sq_err(neuron.coeffs - bump)) / (
                    2 * eps
                )
                expected = -0.5 * step * fd
                assert delta[qi] == pytest.approx(expected, rel=1e-5, abs=1e-13)
    assert t.elapsed < 5.0


def test_transparent_channel_fixed_point():
    # Identity curve, single unit tap, no noise: the estimator reproduces
    # the composite response to the representation floor of the basis.
    rng = np.random.default_rng(1004)
    ofdm = OfdmConfig(cp_len=0)
    with Timer() as t:
        parts = [
            ofdm_modulate(
                map_bits(rng.integers(0, 2, 1024 * bits_per_symbol(16)), 16), ofdm
            ).samples
            for _ in range(2)
        ]
        reference = TimeSignal(np.concatenate(parts), 1.0)
        truth_h = FirChannel(np.array([1.0 + 0j]))
        received, _ = propagate(reference, Identity(), truth_h, np.inf)
        result = estimate_channel(
            reference, received, EstimatorConfig(taps=1, q_count=64)
        )
        probe = TimeSignal(
            ofdm_modulate(
                map_bits(rng.integers(0, 2, 1024 * bits_per_symbol(16)), 16), ofdm
            ).samples,
            1.0,
        )
        nmse = combined_nmse(result.neuron, result.channel, Identity(), truth_h, probe)
        assert nmse <= -60.0
        assert abs(abs(result.channel.taps[0]) - 1.0) <= 1e-3
        assert abs(result.channel.taps[0].imag) <= 1e-3
    assert t.elapsed < 10.0


def test_estimation_quality_down_to_zero_db():
    # Soft saturation, 3-tap channel, 2 OFDM symbols (2048 samples),
    # Q=6, alpha=0.01, 30 iterations: near-perfect identification down to
    # 0 dB estimation SNR.
    with Timer() as t:
        medians = {}
        for snr_db, threshold in ((0.0, -20.0), (20.0, -30.0)):
            cfg = ExperimentConfig(
                scenario="estimate",
                nonlinearity="soft",
                est_snr_db=snr_db,
                trials=20,
                master_seed=1001,
            )
            values = [
                r.metric_value
                for r in run_estimation(cfg)
                if r.metric_name == "nmse_combined_db"
                and not isinstance(r.metric_value, str)
            ]
            assert len(values) == 20
            medians[snr_db] = float(np.median(values))
            assert medians[snr_db] <= threshold
    assert t.elapsed < 120.0


def test_predistortion_ber_tracks_theory():
    # Identification at -10 dB, then predistorted transmission swept over
    # detection SNR: measured BER within 2x of the analytic linear curve.
    cfg = ExperimentConfig(
        scenario="ber",
        nonlinearity="soft",
        est_snr_db=-10.0,
        det_snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0),
        trials=40,
        master_seed=1006,
        detector=DetectorConfig(method="predistortion"),
    )
    bits_per_point = (
        cfg.trials
        * max(
            1,
            -(-cfg.min_bits_per_point // (cfg.trials * 1024 * bits_per_symbol(16))),
        )
        * 1024
        * bits_per_symbol(16)
    )
    assert bits_per_point >= 100000
    with Timer() as t:
        records = run_ber(cfg)
    measured = pooled_mean(records, "ber")
    theory = pooled_mean(records, "theory_ber")
    for snr in cfg.det_snr_grid_db:
        if theory[snr] >= 1e-4:
            assert measured[snr] <= 2.0 * theory[snr], (
                f"at {snr} dB: {measured[snr]} > 2 x {theory[snr]}"
            )
    assert t.elapsed < 600.0


def test_decoder_ordering_for_soft_saturation():
    # At 15 dB detection: predistortion beats the iterative decoder, and
    # the iterative decoder stays within one decade of the linear bound.
    with Timer() as t:
        results = {}
        for method in ("predistortion", "iterative"):
            cfg = ExperimentConfig(
                scenario="ber",
                nonlinearity="soft",
                est_snr_db=20.0,
                det_snr_grid_db=(15.0,),
                trials=12,
                master_seed=1007,
                detector=DetectorConfig(method=method),
            )
            records = run_ber(cfg)
            results[method] = (
                pooled_mean(records, "ber")[15.0],
                pooled_mean(records, "theory_ber")[15.0],
            )
        pred_ber, theory = results["predistortion"]
        iter_ber, _ = results["iterative"]
        assert pred_ber <= iter_ber
        assert iter_ber <= 10.0 * theory
    assert t.elapsed < 600.0


def test_hard_clip_breaks_iterative_decoding_but_not_predistortion():
    # Abrupt clipping at effectively noiseless detection: the iterative
    # decoder floors above 1e-2 while predistortion stays near theory.
    with Timer() as t:
        results = {}
        for method in ("iterative", "predistortion"):
            cfg = ExperimentConfig(
                scenario="ber",
                nonlinearity="hard",
                est_snr_db=0.0,
                det_snr_grid_db=(30.0,),
                trials=12,
                master_seed=1008,
                detector=DetectorConfig(method=method),
            )
            records = run_ber(cfg)
            results[method] = (
                pooled_mean(records, "ber")[30.0],
                pooled_mean(records, "theory_ber")[30.0],
            )
        iter_ber, theory = results["iterative"]
        pred_ber, _ = results["predistortion"]
        assert iter_ber > 1e-2
        assert pred_ber < 10.0 * theory
    assert t.elapsed < 600.0


def test_inverse_learning_composition_error():
    # Full-resolution inverse fit (Q = N_DCT = 512, 10000 samples,
    # alpha = 0.01): composing the learned inverse with the soft curve
    # returns the input to within 1e-2 over [0, 0.95].
    with Timer() as t:
        from artifact.dct_neuron import project_function

        surrogate = project_function(SoftSine(), 512, 512)
        p = learn_inverse(
            surrogate, 512, 512, 10000, 0.01, np.random.default_rng(1009)
        )
        grid = np.linspace(0.0, 0.95, 256)
        g = np.clip(np.asarray(evaluate(p.inverse, grid)), 0.0, 1.0)
        composition_error = np.max(np.abs(SoftSine()(g) - grid))
        assert composition_error < 1e-2
    assert t.elapsed < 10.0


def test_csv_byte_identical_across_worker_counts():
    base_estimate = ExperimentConfig(
        scenario="estimate",
        nonlinearity="soft",
        est_snr_db=10.0,
        trials=8,
        master_seed=1010,
        ofdm=OfdmConfig(n_subcarriers=256, cp_len=8),
    )
    base_ber = ExperimentConfig(
        scenario="ber",
        nonlinearity="soft",
        est_snr_db=10.0,
        det_snr_grid_db=(10.0,),
        trials=8,
        master_seed=1010,
        min_bits_per_point=4000,
        ofdm=OfdmConfig(n_subcarriers=256, cp_len=8),
        detector=DetectorConfig(method="iterative"),
    )
    for base in (base_estimate, base_ber):
        serial = records_to_csv(run_experiment(base))
        parallel = records_to_csv(run_experiment(replace(base, workers=8)))
        assert serial == parallel
        repeat = records_to_csv(run_experiment(base))
        assert repeat == serial
