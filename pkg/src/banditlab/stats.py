"""Trial analyses: chi-squared independence test, retention and symptom summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UndefinedCurveError, UndefinedTestError

YATES_THRESHOLD = 5.0


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Rows are arms, columns are (success, failure).  Cells may be fractional."""

    a: float  # row 0, success
    b: float  # row 0, failure
    c: float  # row 1, success
    d: float  # row 1, failure

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise UndefinedTestError("contingency cells must be nonnegative")

    @classmethod
    def from_rows(cls, rows):
        (a, b), (c, d) = rows
        return cls(float(a), float(b), float(c), float(d))

    @property
    def cells(self):
        return ((self.a, self.b), (self.c, self.d))

    @property
    def row_totals(self):
        return (self.a + self.b, self.c + self.d)

    @property
    def column_totals(self):
        return (self.a + self.c, self.b + self.d)

    @property
    def total(self):
        return self.a + self.b + self.c + self.d

    def expected(self):
        rows, cols, n = self.row_totals, self.column_totals, self.total
        return tuple(tuple(rows[i] * cols[j] / n for j in range(2)) for i in range(2))


@dataclass(frozen=True)
class ChiSquaredResult:
    statistic: float
    p_value: float
    corrected: bool
    uncorrected_statistic: float
    uncorrected_p_value: float


def chi2_sf_df1(statistic: float) -> float:
    """Upper tail of the chi-squared law with one degree of freedom."""
    if statistic <= 0.0:
        return 1.0
    return math.erfc(math.sqrt(statistic / 2.0))


def _statistic(table: ContingencyTable2x2, correction: float) -> float:
    total = 0.0
    for obs_row, exp_row in zip(table.cells, table.expected()):
        for o, e in zip(obs_row, exp_row):
            dev = abs(o - e) - correction
            if dev < 0.0:
                dev = 0.0
            total += dev * dev / e
    return total


def needs_yates(table: ContingencyTable2x2) -> bool:
    """True when any observed or expected cell falls below five."""
    observed = [x for row in table.cells for x in row]
    expected = [x for row in table.expected() for x in row]
    return min(observed) < YATES_THRESHOLD or min(expected) < YATES_THRESHOLD


def chi_squared_test(table) -> ChiSquaredResult:
    """Pearson chi-squared test of independence on a 2x2 table.

    Yates' continuity correction (deviations shrunk by 0.5, floored at
    zero) is applied when :func:`needs_yates` holds; the uncorrected
    statistic and p-value are always reported alongside.
    """
    if not isinstance(table, ContingencyTable2x2):
        table = ContingencyTable2x2.from_rows(table)
    if table.total <= 0:
        raise UndefinedTestError("empty contingency table")
    if min(table.row_totals) <= 0 or min(table.column_totals) <= 0:
        raise UndefinedTestError("a row or column of the table sums to zero")
    raw = _statistic(table, 0.0)
    raw_p = chi2_sf_df1(raw)
    if needs_yates(table):
        stat = _statistic(table, 0.5)
        return ChiSquaredResult(stat, chi2_sf_df1(stat), True, raw, raw_p)
    return ChiSquaredResult(raw, raw_p, False, raw, raw_p)


def kaplan_meier(participation_days: Sequence[int], horizon: int = 14) -> np.ndarray:
    """Share of patients still in treatment on each day ``1..horizon``.

    Every patient is followed to dropout or to the end of treatment, so
    there is no censoring and the estimator reduces to a survival count.
    """
    days = np.asarray(participation_days, dtype=int)
    if days.size == 0:
        raise UndefinedCurveError("no patients")
    if days.min() < 1 or days.max() > horizon:
        raise UndefinedCurveError(f"participation days must lie in [1, {horizon}]")
    d = np.arange(1, horizon + 1)
    return (days[None, :] >= d[:, None]).mean(axis=1)


def adverse_curve(records, horizon: int = 14) -> np.ndarray:
    """Adverse effects per present patient for a sequence of patient records."""
    records = list(records)
    if not records:
        raise UndefinedCurveError("no patients")
    return adverse_curve_arrays([r.adverse_effects_by_day for r in records],
                                [r.participation_days for r in records], horizon)


def adverse_curve_arrays(adverse_by_day, participation_days, horizon: int = 14) -> np.ndarray:
    """Adverse effects per present patient on each day; 0 where nobody is present.

    ``adverse_by_day`` is an ``(n_patients, horizon)`` count matrix.
    """
    ae = np.asarray(adverse_by_day, dtype=float).reshape(-1, horizon)
    days = np.asarray(participation_days, dtype=int)
    present = (days[:, None] >= np.arange(1, horizon + 1)[None, :]).sum(axis=0)
    totals = ae.sum(axis=0)
    out = np.zeros(horizon)
    np.divide(totals, present, out=out, where=present > 0)
    return out


def craving_summary(records):
    """``(mean_arsw, mean_vas)``, unweighted over patients."""
    records = list(records)
    if not records:
        raise UndefinedCurveError("no patients")
    return craving_means([r.arsw for r in records], [r.vas for r in records])


def craving_means(arsw, vas):
    arsw = np.asarray(arsw, dtype=float)
    vas = np.asarray(vas, dtype=float)
    if arsw.size == 0:
        raise UndefinedCurveError("no patients")
    return float(arsw.mean()), float(vas.mean())
