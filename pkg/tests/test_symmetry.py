"""Reflection-parity rules, residuals, and mirror completion."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smcal.core import (
    DomainError,
    IncompleteDomainError,
    SMRow,
    grid_1d,
    grid_2d,
    row_lookup,
    sequence_2d,
)
from smcal import symmetry
from smcal.symmetry import (
    CONJ_EVEN,
    CONJ_ODD,
    EVEN,
    ODD,
    ParityDescriptor,
    expected_parity,
    fundamental_domain_mask,
    measurement_count,
    mirror_complete,
    premise_holds,
    reflect_row,
    symmetry_residual,
)


class TestExpectedParity:
    def test_1d_odd_k_even_row(self):
        # m(-r) = (-1)^(k+1) m(r): odd k -> even row
        assert expected_parity("x", 3, 1).axis_rules == {"x": EVEN}
        assert expected_parity("x", 4, 1).axis_rules == {"x": ODD}

    def test_2d_x_channel(self):
        d = expected_parity("x", 16, 2)
        assert d.axis_rules == {"x": ODD, "y": CONJ_ODD}
        d = expected_parity("x", 17, 2)
        assert d.axis_rules == {"x": EVEN, "y": CONJ_EVEN}

    def test_2d_y_channel(self):
        d = expected_parity("y", 16, 2)
        assert d.axis_rules == {"x": EVEN, "y": CONJ_EVEN}
        d = expected_parity("y", 17, 2)
        assert d.axis_rules == {"x": ODD, "y": CONJ_ODD}

    def test_3d_unknown(self):
        d = expected_parity("x", 5, 3)
        assert d.axis_rules == {} and d.derivation == "unknown-3D"

    def test_premise(self):
        assert premise_holds((17, 16, 0))
        assert not premise_holds((16, 17, 0))
        d = expected_parity("x", 16, 2, cycles=(16, 17, 0))
        assert d.axis_rules == {}

    def test_1d_other_channel_unknown(self):
        assert expected_parity("y", 4, 1).axis_rules == {}

    def test_negative_k_rejected(self):
        with pytest.raises(DomainError):
            expected_parity("x", -1, 1)

    @given(k=st.integers(0, 200))
    def test_pure_function_and_x_y_complementary(self, k):
        dx = expected_parity("x", k, 2)
        dy = expected_parity("y", k, 2)
        assert dx == expected_parity("x", k, 2)
        # x and y channels carry opposite signs at every k
        pairs = {(EVEN, ODD), (ODD, EVEN)}
        assert (dx.axis_rules["x"], dy.axis_rules["x"]) in pairs

    def test_descriptor_validation(self):
        with pytest.raises(DomainError):
            ParityDescriptor({"w": EVEN})
        with pytest.raises(DomainError):
            ParityDescriptor({"x": "sideways"})


class TestResiduals:
    def test_reflect_is_involution(self, sm2d):
        row = sm2d.rows[0]
        assert np.array_equal(reflect_row(reflect_row(row, "x"), "x").values,
                              row.values)

    def test_simulated_1d_rows_satisfy_parity(self, sm1d):
        for row in sm1d.rows:
            res = symmetry_residual(row, expected_parity("x", row.freq_index, 1))
            assert res["x"] < 1e-6, row.key

    def test_simulated_2d_rows_satisfy_parity(self, sm2d, seq2d):
        for row in sm2d.rows:
            desc = expected_parity(row.channel, row.freq_index, 2, cycles=seq2d.cycles)
            for axis, r in symmetry_residual(row, desc).items():
                assert r < 1e-4, (row.key, axis, r)

    def test_zero_row_scores_zero(self):
        g = grid_1d(9, 0.01)
        row = SMRow("x", 3, np.zeros(g.shape), g)
        assert symmetry_residual(row, expected_parity("x", 3, 1))["x"] == 0.0

    def test_wrong_rule_detected(self, sm1d):
        row = row_lookup(sm1d, "x", 3)  # even row
        bad = ParityDescriptor({"x": ODD})
        assert symmetry_residual(row, bad)["x"] > 0.5

    def test_empty_descriptor_rejected(self, sm1d):
        with pytest.raises(DomainError):
            symmetry_residual(sm1d.rows[0], ParityDescriptor({}))


class TestMirrorCompletion:
    def test_fundamental_domain_size_odd_square(self):
        g = grid_2d(17, 17, 0.02, 0.02)
        desc = expected_parity("x", 16, 2)
        assert measurement_count(g, desc) == 81  # ((17+1)/2)^2

    def test_fundamental_domain_size_1d_even(self):
        g = grid_1d(8, 0.01)
        assert measurement_count(g, expected_parity("x", 3, 1)) == 4

    def test_quadrant_completion_exact(self, sm2d, seq2d):
        """Noise-free quadrant samples rebuild every 2D row exactly."""
        for row in sm2d.rows[:20]:
            desc = expected_parity(row.channel, row.freq_index, 2, cycles=seq2d.cycles)
            mask = fundamental_domain_mask(row.grid, desc)
            done = mirror_complete(row, mask, desc)
            err = np.linalg.norm(done.values - row.values) / np.linalg.norm(row.values)
            assert err < 1e-9, (row.key, err)

    def test_known_voxels_kept_verbatim(self, sm2d):
        row = sm2d.rows[0]
        desc = expected_parity(row.channel, row.freq_index, 2)
        mask = fundamental_domain_mask(row.grid, desc)
        done = mirror_complete(row, mask, desc)
        assert np.array_equal(done.values[mask], row.values[mask])

    def test_incomplete_mask_rejected(self, sm2d):
        row = sm2d.rows[0]
        desc = expected_parity(row.channel, row.freq_index, 2)
        mask = np.zeros(row.values.shape, dtype=bool)
        mask[0, 0, 0] = True
        with pytest.raises(IncompleteDomainError):
            mirror_complete(row, mask, desc)

    def test_full_mask_is_identity(self, sm2d):
        row = sm2d.rows[0]
        desc = expected_parity(row.channel, row.freq_index, 2)
        done = mirror_complete(row, np.ones(row.values.shape, bool), desc)
        assert np.array_equal(done.values, row.values)

    def test_mask_shape_mismatch(self, sm2d):
        row = sm2d.rows[0]
        desc = expected_parity(row.channel, row.freq_index, 2)
        with pytest.raises(DomainError):
            mirror_complete(row, np.ones((2, 2), bool), desc)

    def test_1d_half_line_completion(self, sm1d):
        for row in sm1d.rows:
            desc = expected_parity("x", row.freq_index, 1)
            mask = fundamental_domain_mask(row.grid, desc)
            done = mirror_complete(row, mask, desc)
            err = np.linalg.norm(done.values - row.values) / np.linalg.norm(row.values)
            assert err < 1e-12
