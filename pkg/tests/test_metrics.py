"""Metric definitions and report assembly."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smcal.core import DegenerateRangeError, DomainError, Phantom, grid_2d
from smcal.metrics import (
    MetricReport,
    PSNR_CAP_DB,
    benchmark_report,
    nrmse,
    psnr,
    sm_nrmse_report,
    ssim,
)


class TestNRMSE:
    def test_exact_match_is_zero(self):
        a = np.array([1.0 + 2j, 3.0])
        assert nrmse(a, a) == 0.0

    def test_hand_value(self):
        # truth [1, 0]: error norm 1, modulus range 1 -> 1.0
        assert nrmse(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)

    def test_phase_rotation_invariance(self):
        rng = np.random.default_rng(0)
        t = rng.normal(size=8) + 1j * rng.normal(size=8)
        e = t + 0.1 * (rng.normal(size=8) + 1j * rng.normal(size=8))
        phase = np.exp(1j * 0.7)
        assert nrmse(phase * e, phase * t) == pytest.approx(nrmse(e, t), rel=1e-12)

    def test_constant_modulus_reference_rejected(self):
        with pytest.raises(DegenerateRangeError):
            nrmse(np.array([1.0, 2.0]), np.array([1.0, 1.0]))

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            nrmse(np.zeros(3), np.array([0.0, 1.0]))

    @given(st.integers(0, 100))
    @settings(max_examples=20, deadline=None)
    def test_monotone_in_error_norm(self, seed):
        rng = np.random.default_rng(seed)
        t = rng.normal(size=16)
        d = rng.normal(size=16)
        assert nrmse(t + d, t) <= nrmse(t + 2 * d, t) + 1e-12


class TestPSNR:
    def test_hand_value(self):
        # peak 1, MSE 0.01 -> 20 dB
        t = np.array([1.0, 0.0, 0.0, 0.0])
        e = t + np.array([0.1, 0.1, 0.1, 0.1])
        assert psnr(e, t) == pytest.approx(20.0)

    def test_exact_match_capped(self):
        a = np.ones(4)
        assert psnr(a, a) == PSNR_CAP_DB

    def test_orders_like_nrmse(self):
        rng = np.random.default_rng(1)
        t = rng.random(32) + 0.5
        noisy_small = t + 0.01 * rng.normal(size=32)
        noisy_big = t + 0.2 * rng.normal(size=32)
        assert psnr(noisy_small, t) > psnr(noisy_big, t)
        assert nrmse(noisy_small, t) < nrmse(noisy_big, t)


class TestSSIM:
    def test_identity_is_one(self):
        rng = np.random.default_rng(2)
        img = rng.random((12, 12))
        assert ssim(img, img) == pytest.approx(1.0)

    def test_constant_offset_below_one(self):
        # offset only hurts the luminance term; contrast/structure stay 1
        rng = np.random.default_rng(3)
        img = rng.random((16, 16))
        v = ssim(img + 0.5, img)
        assert 0.0 < v < 1.0

    def test_symmetric_with_shared_range(self):
        rng = np.random.default_rng(4)
        a = rng.random((10, 10))
        b = rng.random((10, 10))
        assert ssim(a, b, shared_range=True) == pytest.approx(
            ssim(b, a, shared_range=True), rel=1e-12)

    def test_small_image_rejected(self):
        with pytest.raises(DomainError):
            ssim(np.ones((3, 3)), np.zeros((3, 3)))

    def test_singleton_axes_squeezed(self):
        rng = np.random.default_rng(5)
        img = rng.random((1, 10, 10))
        assert ssim(img, img) == pytest.approx(1.0)

    def test_zero_range_rejected(self):
        with pytest.raises(DegenerateRangeError):
            ssim(np.random.default_rng(0).random((8, 8)), np.ones((8, 8)))


class TestReports:
    def test_mean_is_arithmetic_mean(self):
        r = MetricReport("m", 2, 0, per_row_nrmse=(0.1, 0.3))
        assert r.mean_nrmse == pytest.approx(0.2)

    def test_sm_report_row_count_mismatch(self):
        with pytest.raises(DomainError):
            sm_nrmse_report("m", 2, 0, [np.zeros(2)], [])

    def test_benchmark_csv_sorted_and_deterministic(self):
        reports = [
            MetricReport("b", 4, 0, per_row_nrmse=(0.2,)),
            MetricReport("a", 2, 0, per_row_nrmse=(0.1,)),
            MetricReport("b", 2, 0, per_row_nrmse=(0.3,)),
        ]
        csv = benchmark_report(reports)
        lines = csv.strip().splitlines()
        assert lines[0] == "method,ratio,seed,mean_nrmse,psnr_db,ssim"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["a", "b", "b"]
        assert csv == benchmark_report(reports)

    def test_mixed_truth_rejected(self):
        reports = [
            MetricReport("a", 2, 0, truth_id="t1"),
            MetricReport("b", 2, 0, truth_id="t2"),
        ]
        with pytest.raises(DomainError):
            benchmark_report(reports)

    def test_phantom_inputs_accepted(self):
        g = grid_2d(8, 8, 0.01, 0.01)
        rng = np.random.default_rng(6)
        truth = Phantom(g, rng.random(g.shape))
        est = Phantom(g, np.asarray(truth.concentration) * 0.9)
        assert nrmse(est, truth) > 0
        assert psnr(est, truth) > 0
        assert -1.0 <= ssim(est, truth) <= 1.0
