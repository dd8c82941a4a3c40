import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from banditlab.errors import UndefinedCurveError, UndefinedTestError
from banditlab.stats import (ContingencyTable2x2, adverse_curve_arrays, chi2_sf_df1,
                             chi_squared_test, craving_means, kaplan_meier, needs_yates)


def chi2_sf_quadrature(x):
    # Upper tail of the df=1 density, integrated numerically.
    pdf = lambda t: math.exp(-t / 2) / math.sqrt(2 * math.pi * t)
    head, _ = integrate.quad(pdf, 0, x, limit=200)
    return 1.0 - head


cells = st.floats(0.5, 500.0)


class TestChiSquared:
    def test_independent_table(self):
        res = chi_squared_test([[10, 10], [10, 10]])
        assert res.statistic == 0.0 and res.p_value == 1.0 and not res.corrected

    def test_critical_value(self):
        assert chi2_sf_df1(3.841) == pytest.approx(0.05, abs=1e-3)
        assert chi2_sf_df1(3.841) == pytest.approx(chi2_sf_quadrature(3.841), rel=1e-7)

    @pytest.mark.parametrize("x", [1e-6, 0.01, 0.5, 3.841, 10.0, 50.0, 120.0, 200.0])
    def test_tail_matches_incomplete_gamma(self, x):
        assert chi2_sf_df1(x) == pytest.approx(special.gammaincc(0.5, x / 2), rel=1e-10)

    def test_randomization_table(self):
        res = chi_squared_test([[124, 56], [30.2, 149.8]])
        assert res.p_value < 1e-15 and not res.corrected

    def test_hand_computed_statistic(self):
        # E = [[15, 15], [15, 15]], deviations 5 everywhere.
        res = chi_squared_test([[20, 10], [10, 20]])
        assert res.statistic == pytest.approx(4 * 25 / 15, rel=1e-14)

    def test_yates_on_small_expected(self):
        table = ContingencyTable2x2(8, 2, 1, 9)
        assert min(x for row in table.expected() for x in row) < 5
        res = chi_squared_test(table)
        assert res.corrected
        manual = sum((abs(o - e) - 0.5) ** 2 / e
                     for o, e in zip((8, 2, 1, 9), (4.5, 5.5, 4.5, 5.5)))
        assert res.statistic == pytest.approx(manual, rel=1e-14)
        assert res.uncorrected_statistic > res.statistic

    def test_yates_on_small_observed_cell(self):
        # Expected cells all exceed five; one observed cell does not.
        table = ContingencyTable2x2(95.0, 230.0, 2.5, 32.5)
        assert min(x for row in table.expected() for x in row) > 5
        assert needs_yates(table) and chi_squared_test(table).corrected

    def test_corrected_deviation_never_negative(self):
        res = chi_squared_test([[3.0, 3.2], [3.1, 3.0]])
        assert res.corrected and res.statistic == 0.0 and res.p_value == 1.0

    @pytest.mark.parametrize("rows", [[[0, 0], [0, 0]], [[0, 0], [3, 4]], [[3, 0], [4, 0]]])
    def test_degenerate_margins(self, rows):
        with pytest.raises(UndefinedTestError):
            chi_squared_test(rows)

    def test_negative_cell(self):
        with pytest.raises(UndefinedTestError):
            ContingencyTable2x2(-1, 2, 3, 4)

    @settings(max_examples=300, deadline=None)
    @given(cells, cells, cells, cells)
    def test_swap_invariance(self, a, b, c, d):
        base = chi_squared_test([[a, b], [c, d]])
        both = chi_squared_test([[d, c], [b, a]])
        rows = chi_squared_test([[c, d], [a, b]])
        for other in (both, rows):
            assert other.statistic == pytest.approx(base.statistic, rel=1e-9, abs=1e-12)
            assert other.corrected == base.corrected

    @settings(max_examples=300, deadline=None)
    @given(cells, cells, cells, cells, st.floats(1.01, 50.0))
    def test_uncorrected_statistic_scales(self, a, b, c, d, k):
        base = chi_squared_test([[a, b], [c, d]]).uncorrected_statistic
        scaled = chi_squared_test([[k * a, k * b], [k * c, k * d]]).uncorrected_statistic
        assert scaled == pytest.approx(k * base, rel=1e-9, abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(0, 400), st.floats(0, 400))
    def test_p_value_monotone(self, x, y):
        lo, hi = sorted((x, y))
        assert chi2_sf_df1(hi) <= chi2_sf_df1(lo)
        assert 0.0 <= chi2_sf_df1(hi) <= 1.0


class TestKaplanMeier:
    def test_complete_retention(self):
        assert list(kaplan_meier([14] * 7)) == [1.0] * 14

    def test_one_dropout(self):
        curve = kaplan_meier([14] * 9 + [5])
        assert list(curve[:5]) == [1.0] * 5
        np.testing.assert_allclose(curve[5:], 0.9, rtol=1e-15)

    def test_empty(self):
        with pytest.raises(UndefinedCurveError):
            kaplan_meier([])

    def test_out_of_range(self):
        with pytest.raises(UndefinedCurveError):
            kaplan_meier([0, 3])

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.integers(1, 14), min_size=1, max_size=300))
    def test_monotone_and_bounded(self, days):
        curve = kaplan_meier(days)
        assert curve[0] == 1.0
        assert (np.diff(curve) <= 0).all()
        assert ((curve >= 0) & (curve <= 1)).all()


class TestAdverseAndCravings:
    def test_zero_effects(self):
        assert list(adverse_curve_arrays(np.zeros((3, 14)), [14, 3, 7])) == [0.0] * 14

    def test_per_present_patient(self):
        ae = np.zeros((2, 14))
        ae[0, 0], ae[1, 0] = 1, 3
        assert adverse_curve_arrays(ae, [14, 2])[0] == 2.0

    def test_nobody_present(self):
        ae = np.zeros((2, 14))
        ae[:, 0] = 1
        curve = adverse_curve_arrays(ae, [3, 4])
        assert curve[0] == 1.0 and list(curve[4:]) == [0.0] * 10

    def test_cravings(self):
        assert craving_means([20.0], [30.0]) == (20.0, 30.0)
        assert craving_means([10.0, 30.0], [20.0, 40.0]) == (20.0, 30.0)
        with pytest.raises(UndefinedCurveError):
            craving_means([], [])
