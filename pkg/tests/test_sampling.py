"""Padding, decimation, SNR filtering, pair splitting, augmentation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smcal.core import DomainError, SMRow, SystemMatrix, grid_1d, grid_2d
from smcal import sampling, sr
from smcal.metrics import nrmse
from smcal.sampling import (
    AugmentOp,
    PairSet,
    augment_pair,
    crop,
    downsample_equidistant,
    estimate_row_snr,
    make_pairs,
    random_augment_op,
    snr_filter,
    split_pairs,
    zero_pad,
)


def _random_sm(grid, n_rows=4, seed=0):
    rng = np.random.default_rng(seed)
    rows = tuple(
        SMRow("x", k, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape),
              grid)
        for k in range(1, n_rows + 1)
    )
    return SystemMatrix(grid, rows)


class TestPadCrop:
    def test_pad_shapes_and_spacing(self):
        sm = _random_sm(grid_2d(37, 37, 0.02, 0.02))
        padded = zero_pad(sm)  # pre=1, post=2
        assert padded.grid.dims == (40, 40, 1)
        # voxel spacing unchanged
        assert padded.grid.fov_x / 40 == pytest.approx(0.02 / 37)
        # singleton z untouched
        assert padded.grid.nz == 1

    def test_pad_values(self):
        sm = _random_sm(grid_1d(5, 0.01))
        padded = zero_pad(sm, pre=1, post=2)
        v = padded.rows[0].values.ravel()
        assert v[0] == 0 and v[-1] == 0 and v[-2] == 0
        assert np.array_equal(v[1:6], sm.rows[0].values.ravel())

    def test_crop_inverts_pad(self):
        sm = _random_sm(grid_2d(11, 7, 0.01, 0.008))
        back = crop(zero_pad(sm, 1, 2), 1, 2)
        assert back.grid == sm.grid
        for a, b in zip(back.rows, sm.rows):
            assert np.array_equal(a.values, b.values)

    @given(nx=st.integers(2, 20), pre=st.integers(0, 3), post=st.integers(0, 3))
    @settings(max_examples=25, deadline=None)
    def test_crop_inverts_pad_property(self, nx, pre, post):
        sm = _random_sm(grid_1d(nx, 0.01), n_rows=1, seed=nx)
        back = crop(zero_pad(sm, pre, post), pre, post)
        assert np.array_equal(back.rows[0].values, sm.rows[0].values)

    def test_negative_padding_rejected(self):
        with pytest.raises(DomainError):
            zero_pad(_random_sm(grid_1d(4, 0.01)), pre=-1)


class TestDownsample:
    def test_stride_decimation(self):
        sm = _random_sm(grid_1d(8, 0.01))
        lr = downsample_equidistant(sm, 2)
        assert lr.grid.dims == (4, 1, 1)
        assert np.array_equal(lr.rows[0].values.ravel(),
                              sm.rows[0].values.ravel()[::2])

    def test_fov_preserved(self):
        sm = _random_sm(grid_2d(40, 40, 0.02, 0.02))
        lr = downsample_equidistant(sm, 4)
        assert lr.grid.dims == (10, 10, 1)
        assert lr.grid.fov == sm.grid.fov

    def test_indivisible_rejected(self):
        with pytest.raises(DomainError):
            downsample_equidistant(_random_sm(grid_1d(9, 0.01)), 2)

    def test_ratio_one_is_identity(self):
        sm = _random_sm(grid_1d(8, 0.01))
        assert downsample_equidistant(sm, 1) is sm


class TestSNR:
    def test_snr_scale(self):
        g = grid_1d(4, 0.01)
        row = SMRow("x", 1, np.full(g.shape, 2.0 + 0j), g)
        sm = SystemMatrix(g, (row,))
        # ||row||^2 = 16, sigma^2*N = 1*4
        assert estimate_row_snr(sm, 1.0)[0] == pytest.approx(4.0)

    def test_filter_by_threshold_and_fmin(self):
        g = grid_1d(4, 0.01)
        rows = tuple(SMRow("x", k, np.full(g.shape, v, dtype=complex), g)
                     for k, v in [(1, 10.0), (2, 10.0), (3, 0.01)])
        sm = SystemMatrix(g, rows)
        snr = estimate_row_snr(sm, 1.0)
        kept = snr_filter(sm, snr, f_min_index=2, snr_threshold=3.0)
        assert kept.keys() == [("x", 2)]

    def test_bad_sigma(self):
        with pytest.raises(DomainError):
            estimate_row_snr(_random_sm(grid_1d(4, 0.01)), 0.0)


class TestPairsAndSplit:
    def test_make_pairs_alignment(self):
        sm = _random_sm(grid_2d(40, 40, 0.02, 0.02), n_rows=12)
        pairs = make_pairs(sm, 2)
        assert len(pairs) == 12
        assert pairs.lr_rows[0].grid.dims == (20, 20, 1)
        assert pairs.hr_rows[0].grid.dims == (40, 40, 1)

    def test_split_fraction_and_determinism(self):
        sm = _random_sm(grid_1d(8, 0.01), n_rows=20)
        pairs = make_pairs(sm, 2)
        a = split_pairs(pairs, 0.10, seed=5)
        b = split_pairs(pairs, 0.10, seed=5)
        assert a.split == b.split
        assert sum(t == "validation" for t in a.split) == 2
        assert len(a.subset("train")) == 18

    def test_split_changes_with_seed(self):
        sm = _random_sm(grid_1d(8, 0.01), n_rows=40)
        pairs = make_pairs(sm, 2)
        tags = {split_pairs(pairs, 0.25, seed=s).split for s in range(5)}
        assert len(tags) > 1

    def test_too_few_pairs(self):
        pairs = make_pairs(_random_sm(grid_1d(8, 0.01), n_rows=5), 2)
        with pytest.raises(DomainError):
            split_pairs(pairs, 0.10)

    def test_subset_requires_split(self):
        pairs = make_pairs(_random_sm(grid_1d(8, 0.01)), 2)
        with pytest.raises(DomainError):
            pairs.subset("train")

    def test_mismatched_ratio_rejected(self):
        g_lr, g_hr = grid_1d(4, 0.01), grid_1d(12, 0.01)
        lr = SMRow("x", 1, np.zeros(g_lr.shape), g_lr)
        hr = SMRow("x", 1, np.zeros(g_hr.shape), g_hr)
        with pytest.raises(DomainError):
            PairSet((lr,), (hr,), ratio=2)


class TestAugment:
    def test_identity(self):
        arr = np.arange(24.0).reshape(2, 3, 4)
        op = AugmentOp.identity(2)
        assert np.array_equal(op.apply(arr), arr)

    def test_double_flip_is_identity(self):
        arr = np.arange(24.0).reshape(2, 3, 4)
        flip = AugmentOp((0, 1), (True, False))
        assert np.array_equal(flip.apply(flip.apply(arr)), arr)

    def test_rotation_by_two_transposes(self):
        arr = np.arange(16.0).reshape(1, 4, 4)
        rot = AugmentOp((1, 0), (True, False))  # 90-degree rotation
        four = arr
        for _ in range(4):
            four = rot.apply(four)
        assert np.array_equal(four, arr)

    @given(st.integers(0, 500))
    @settings(max_examples=30, deadline=None)
    def test_compose_matches_sequential_apply(self, seed):
        rng = np.random.default_rng(seed)
        shape = (5, 5)
        a = random_augment_op(rng, shape)
        b = random_augment_op(rng, shape)
        arr = np.random.default_rng(seed + 1).normal(size=(2,) + shape)
        lhs = b.compose(a).apply(arr)
        rhs = b.apply(a.apply(arr))
        assert np.array_equal(lhs, rhs)

    def test_random_op_preserves_rectangular_shape(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            op = random_augment_op(rng, (3, 5))
            assert op.apply(np.zeros((2, 3, 5))).shape == (2, 3, 5)

    def test_flip_free_draw_permutes_only(self):
        """The flip-free subgroup never mirrors an axis but does
        exercise the transposes."""
        rng = np.random.default_rng(1)
        ops = [random_augment_op(rng, (4, 4), include_flips=False)
               for _ in range(30)]
        assert all(not any(op.flips) for op in ops)
        assert any(op.perm != (0, 1) for op in ops)

    def test_joint_flip_preserves_interpolation_error(self):
        """A flip applied to both LR and HR leaves the interpolation
        NRMSE unchanged for an interpolator that commutes with flips
        (zero-order block repetition does; grid-aligned spline variants
        do not, because stride-0 decimation breaks mirror symmetry)."""
        g_hr = grid_2d(8, 8, 0.01, 0.01)
        sm_hr = _random_sm(g_hr, n_rows=1, seed=7)
        pairs = make_pairs(sm_hr, 2)
        lr, hr = pairs.lr_rows[0], pairs.hr_rows[0]

        def err(lr_row, hr_row):
            lr_sm = SystemMatrix(lr_row.grid, (lr_row,))
            est = sr.baseline_interpolate(lr_sm, 2, "zero-order")
            return nrmse(est.rows[0].values, hr_row.values)

        op = AugmentOp((0, 1), (False, True))
        lr_f = lr.with_values(op.apply(lr.values[0])[None], lr.grid)
        hr_f = hr.with_values(op.apply(hr.values[0])[None], hr.grid)
        assert err(lr, hr) == pytest.approx(err(lr_f, hr_f), rel=1e-9)

    def test_augment_pair_applies_jointly(self):
        lr = np.arange(8.0).reshape(2, 2, 2)
        hr = np.arange(32.0).reshape(2, 4, 4)
        op = AugmentOp((1, 0), (False, True))
        alr, ahr = augment_pair(lr, hr, op)
        assert np.array_equal(alr, op.apply(lr))
        assert np.array_equal(ahr, op.apply(hr))
