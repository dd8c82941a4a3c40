"""Replay of a two-treatment trial under adaptive allocation.

Patients arrive on random days, are admitted on the following Wednesday
and assigned a treatment by the allocation strategy.  Each patient's whole
record is a bootstrap draw from the assigned arm's population; the success
flag becomes visible to the strategy only ``feedback_delay_days`` later.

Arm 0 is buprenorphine-naloxone ("bupnal"), arm 1 is clonidine ("clon").
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import ALGORITHM_PARAMETERS, make_policy
from .errors import InvalidConfigurationError, PopulationError
from .stats import (ChiSquaredResult, ContingencyTable2x2, adverse_curve_arrays,
                    chi_squared_test, craving_means, kaplan_meier)

TREATMENTS = ("bupnal", "clon")
TREATMENT_DAYS = 14
URINE_TEST_DAY = 13
# Day 0 of accrual is a Thursday, so the first admission Wednesday is day 6.
FIRST_WEDNESDAY = 6

CSV_COLUMNS = (["treatment", "success", "participation_days"]
               + [f"ae_d{d}" for d in range(1, TREATMENT_DAYS + 1)] + ["arsw", "vas"])


@dataclass(frozen=True)
class PatientRecord:
    treatment: str
    success: bool
    participation_days: int
    adverse_effects_by_day: tuple
    arsw: float
    vas: float

    def __post_init__(self):
        if self.treatment not in TREATMENTS:
            raise PopulationError(f"unknown treatment {self.treatment!r}", column="treatment")
        if not 1 <= self.participation_days <= TREATMENT_DAYS:
            raise PopulationError("participation_days must lie in [1, 14]",
                                  column="participation_days")
        if self.success and self.participation_days < URINE_TEST_DAY:
            raise PopulationError("a successful patient must stay until the urine test (day 13)",
                                  column="participation_days")
        ae = tuple(int(x) for x in self.adverse_effects_by_day)
        if len(ae) != TREATMENT_DAYS:
            raise PopulationError("expected 14 daily adverse-effect counts")
        for d, x in enumerate(ae, start=1):
            if x < 0:
                raise PopulationError("adverse-effect counts must be nonnegative",
                                      column=f"ae_d{d}")
            if d > self.participation_days and x != 0:
                raise PopulationError("adverse effect recorded after the patient left",
                                      column=f"ae_d{d}")
        if not self.arsw >= 0.0:
            raise PopulationError("arsw must be nonnegative", column="arsw")
        if not 0.0 <= self.vas <= 100.0:
            raise PopulationError("vas must lie in [0, 100]", column="vas")
        object.__setattr__(self, "adverse_effects_by_day", ae)
        object.__setattr__(self, "success", bool(self.success))


@dataclass
class ArmData:
    """Column arrays for the records of one arm."""

    success: np.ndarray
    participation_days: np.ndarray
    adverse: np.ndarray
    arsw: np.ndarray
    vas: np.ndarray

    def __len__(self):
        return len(self.success)

    @property
    def success_rate(self) -> float:
        return float(self.success.mean())

    @classmethod
    def from_records(cls, records):
        return cls(
            success=np.array([r.success for r in records], dtype=bool),
            participation_days=np.array([r.participation_days for r in records], dtype=int),
            adverse=np.array([r.adverse_effects_by_day for r in records], dtype=int).reshape(
                -1, TREATMENT_DAYS),
            arsw=np.array([r.arsw for r in records], dtype=float),
            vas=np.array([r.vas for r in records], dtype=float),
        )

    def records(self, treatment):
        return [PatientRecord(treatment, bool(s), int(d), tuple(int(x) for x in ae),
                              float(a), float(v))
                for s, d, ae, a, v in zip(self.success, self.participation_days,
                                          self.adverse, self.arsw, self.vas)]


@dataclass
class TreatmentPopulation:
    arms: tuple  # (bupnal ArmData, clon ArmData)

    def __post_init__(self):
        for name, arm in zip(TREATMENTS, self.arms):
            if len(arm) == 0:
                raise PopulationError(f"no {name} patients in the population")

    @classmethod
    def from_records(cls, records):
        grouped = {t: [] for t in TREATMENTS}
        for r in records:
            grouped[r.treatment].append(r)
        for t in TREATMENTS:
            if not grouped[t]:
                raise PopulationError(f"no {t} patients in the population")
        return cls(tuple(ArmData.from_records(grouped[t]) for t in TREATMENTS))

    @property
    def success_rates(self):
        return tuple(a.success_rate for a in self.arms)

    def records(self):
        out = []
        for t, arm in zip(TREATMENTS, self.arms):
            out.extend(arm.records(t))
        return out


def _parse_row(row, lineno):
    def get(col):
        value = row.get(col)
        if value is None or value.strip() == "":
            raise PopulationError("missing value", row=lineno, column=col)
        return value.strip()

    def as_int(col):
        try:
            return int(get(col))
        except ValueError:
            raise PopulationError(f"expected an integer, got {row[col]!r}",
                                  row=lineno, column=col) from None

    def as_float(col):
        try:
            value = float(get(col))
        except ValueError:
            raise PopulationError(f"expected a number, got {row[col]!r}",
                                  row=lineno, column=col) from None
        if not math.isfinite(value):
            raise PopulationError("value must be finite", row=lineno, column=col)
        return value

    treatment = get("treatment").lower()
    success = as_int("success")
    if success not in (0, 1):
        raise PopulationError("success must be 0 or 1", row=lineno, column="success")
    try:
        return PatientRecord(
            treatment=treatment,
            success=bool(success),
            participation_days=as_int("participation_days"),
            adverse_effects_by_day=tuple(as_int(f"ae_d{d}")
                                         for d in range(1, TREATMENT_DAYS + 1)),
            arsw=as_float("arsw"),
            vas=as_float("vas"),
        )
    except PopulationError as exc:
        if exc.row is not None:
            raise
        raise PopulationError(str(exc).split(": ", 1)[-1], row=lineno, column=exc.column) from None


def load_population(source: Union[str, Path]) -> TreatmentPopulation:
    """Read a patient CSV file (see ``CSV_COLUMNS``) into a population.

    Raises ``PopulationError`` naming the offending data row and column;
    ``OSError`` propagates for unreadable files.
    """
    with open(source, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        extra = [c for c in header if c not in CSV_COLUMNS]
        if missing or extra:
            raise PopulationError(f"bad header: missing {missing}, unexpected {extra}", row=0)
        records = [_parse_row(row, lineno) for lineno, row in enumerate(reader, start=1)]
    return TreatmentPopulation.from_records(records)


def write_population(population: TreatmentPopulation, path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in population.records():
            w.writerow([r.treatment, int(r.success), r.participation_days,
                        *r.adverse_effects_by_day, repr(r.arsw), repr(r.vas)])


# ---------------------------------------------------------------------------
# Synthetic populations


@dataclass(frozen=True)
class ArmProfile:
    """Generating parameters for one arm of a synthetic population.

    ``failure_completion`` is the share of failures who still stay until
    the urine test; the rest drop out on a day drawn from
    ``dropout_weights`` (days 1 to 12).
    """

    success_rate: float
    arsw_mean: float
    vas_mean: float
    adverse_rates: tuple
    failure_completion: float
    dropout_weights: tuple = (6, 5, 4, 3.5, 3, 2.5, 2, 1.8, 1.6, 1.4, 1.2, 1.0)
    # Successes report lower cravings than failures; the arm mean is unchanged.
    craving_contrast: float = 0.3


def solve_two_arm_means(mix_a, value_a, mix_b, value_b):
    """Per-arm means reproducing two cohort averages with known arm mixes.

    ``mix_*`` are arm counts (bupnal, clon) of each reference cohort and
    ``value_*`` their observed averages.
    """
    m = np.array([np.asarray(mix_a, float) / np.sum(mix_a),
                  np.asarray(mix_b, float) / np.sum(mix_b)])
    return tuple(float(x) for x in np.linalg.solve(m, [value_a, value_b]))


# Reference cohorts: 1:1 randomization and an epsilon-greedy allocation.
_IN_RANDOM_MIX, _IN_GREEDY_MIX = (180.0, 180.0), (336.2, 23.8)
_OUT_RANDOM_MIX, _OUT_GREEDY_MIX = (180.2, 179.8), (333.6, 26.4)
_IN_ARSW = solve_two_arm_means(_IN_RANDOM_MIX, 35.94, _IN_GREEDY_MIX, 22.12)
_IN_VAS = solve_two_arm_means(_IN_RANDOM_MIX, 38.94, _IN_GREEDY_MIX, 28.4)
_OUT_ARSW = solve_two_arm_means(_OUT_RANDOM_MIX, 30.65, _OUT_GREEDY_MIX, 27.50)
_OUT_VAS = solve_two_arm_means(_OUT_RANDOM_MIX, 39.97, _OUT_GREEDY_MIX, 33.72)

IN_PATIENT_PROFILE = (
    ArmProfile(124.0 / 180.0, _IN_ARSW[0], _IN_VAS[0],
               (0.6, 0.5, 0.4, 0.35, 0.3, 0.25, 0.2, 0.2, 0.15, 0.15, 0.1, 0.1, 0.1, 0.1),
               failure_completion=0.55),
    ArmProfile(30.2 / 180.0, _IN_ARSW[1], _IN_VAS[1],
               (1.3, 1.2, 1.1, 1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.45, 0.4, 0.35, 0.3, 0.3),
               failure_completion=0.35),
)
OUT_PATIENT_PROFILE = (
    ArmProfile(52.0 / 180.2, _OUT_ARSW[0], _OUT_VAS[0],
               (0.5, 0.25, 0.1, 0.02, 0.01, 0.01, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
               failure_completion=0.4),
    ArmProfile(9.7 / 179.8, _OUT_ARSW[1], _OUT_VAS[1],
               (0.9, 0.7, 0.6, 0.5, 0.4, 0.35, 0.3, 0.25, 0.2, 0.2, 0.15, 0.15, 0.1, 0.1),
               failure_completion=0.25),
)
SYNTHETIC_PROFILES = {"in": IN_PATIENT_PROFILE, "out": OUT_PATIENT_PROFILE}
SYNTHETIC_SEEDS = {"in": 20010, "out": 20011}
SYNTHETIC_SIZE = 1800


def _synthetic_arm(profile: ArmProfile, size: int, rng: np.random.Generator) -> ArmData:
    if not 0.0 <= profile.success_rate <= 1.0:
        raise InvalidConfigurationError("success rate must lie in [0, 1]")
    if size < 1:
        raise InvalidConfigurationError("arm size must be positive")
    n_success = int(round(profile.success_rate * size))
    success = np.zeros(size, dtype=bool)
    success[:n_success] = True
    rng.shuffle(success)

    days = np.empty(size, dtype=int)
    days[success] = np.where(rng.random(n_success) < 0.9, 14, 13)
    n_fail = size - n_success
    stays = rng.random(n_fail) < profile.failure_completion
    w = np.asarray(profile.dropout_weights, float)
    dropout = rng.choice(np.arange(1, len(w) + 1), size=n_fail, p=w / w.sum())
    days[~success] = np.where(stays, rng.integers(13, 15, n_fail), dropout)

    rates = np.asarray(profile.adverse_rates, float)
    adverse = rng.poisson(rates[None, :], size=(size, TREATMENT_DAYS))
    adverse[np.arange(1, TREATMENT_DAYS + 1)[None, :] > days[:, None]] = 0

    p, c = success.mean(), profile.craving_contrast
    scale = np.where(success, 1.0 - c * (1.0 - p), 1.0 + c * p)
    arsw = rng.gamma(4.0, profile.arsw_mean * scale / 4.0)
    arsw *= profile.arsw_mean / arsw.mean()
    mu = np.clip(profile.vas_mean * scale / 100.0, 1e-3, 1 - 1e-3)
    vas = 100.0 * rng.beta(6.0 * mu, 6.0 * (1.0 - mu))
    vas = np.clip(vas * (profile.vas_mean / vas.mean()), 0.0, 100.0)
    return ArmData(success, days, adverse, arsw, vas)


def generate_synthetic_population(profiles: Sequence[ArmProfile], size: int,
                                  rng: np.random.Generator) -> TreatmentPopulation:
    """Synthetic records for both arms.

    Each arm holds exactly ``round(rate * size)`` successes; ARSW and VAS
    are rescaled so the arm means hit their targets.
    """
    return TreatmentPopulation(tuple(_synthetic_arm(p, size, rng) for p in profiles))


def synthetic_population(kind: str, size: int = SYNTHETIC_SIZE) -> TreatmentPopulation:
    """The calibrated in-patient (``"in"``) or out-patient (``"out"``) population."""
    if kind not in SYNTHETIC_PROFILES:
        raise InvalidConfigurationError(f"unknown synthetic population {kind!r}; use 'in' or 'out'")
    rng = np.random.default_rng(SYNTHETIC_SEEDS[kind])
    return generate_synthetic_population(SYNTHETIC_PROFILES[kind], size, rng)


# ---------------------------------------------------------------------------
# Allocation strategies


class FixedRandomization:
    """Independent assignment with fixed odds ``ratio[0] : ratio[1]``."""

    name = "randomization"

    def __init__(self, ratio=(1.0, 1.0)):
        if len(ratio) != 2 or min(ratio) <= 0:
            raise InvalidConfigurationError("randomization ratio needs two positive parts")
        self.ratio = tuple(float(r) for r in ratio)
        self._p0 = self.ratio[0] / (self.ratio[0] + self.ratio[1])

    def select(self, rng):
        return 0 if rng.random() < self._p0 else 1

    def update(self, arm, reward, rng=None):
        pass


DEFAULT_STRATEGY_PARAMS = {
    "randomization": {"ratio": (1.0, 1.0)},
    "epsilon_greedy": {"epsilon": 0.05},
    "softmax": {"tau": 0.1},
    "pursuit": {"beta": 0.1},
    "reinforcement_comparison": {"alpha": 0.1, "beta": 0.95},
    "ucb1": {},
    "ucb1_tuned": {},
}
STRATEGY_NAMES = tuple(DEFAULT_STRATEGY_PARAMS)
DEFAULT_STRATEGIES = ("randomization", "epsilon_greedy", "softmax", "ucb1", "ucb1_tuned")


@dataclass(frozen=True)
class StrategySpec:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in DEFAULT_STRATEGY_PARAMS:
            raise InvalidConfigurationError(f"unknown strategy {self.name!r}")
        merged = dict(DEFAULT_STRATEGY_PARAMS[self.name])
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        self.build()  # validate eagerly

    def build(self):
        if self.name == "randomization":
            return FixedRandomization(self.params["ratio"])
        keys = ALGORITHM_PARAMETERS[self.name]
        return make_policy(self.name, 2, {k: self.params[k] for k in keys}, unplayed="random")


@dataclass(frozen=True)
class TrialConfig:
    strategy: Union[StrategySpec, Callable] = StrategySpec("randomization")
    patient_count: int = 360
    accrual_weeks: int = 30
    feedback_delay_days: int = 14
    seed: int = 0

    def __post_init__(self):
        if self.patient_count < 1:
            raise InvalidConfigurationError("patient_count must be positive")
        if self.accrual_weeks < 1:
            raise InvalidConfigurationError("accrual_weeks must be positive")
        if self.feedback_delay_days < 0:
            raise InvalidConfigurationError("feedback_delay_days must be nonnegative")

    def new_strategy(self):
        if isinstance(self.strategy, StrategySpec):
            return self.strategy.build()
        return self.strategy()

    @property
    def admission_days(self):
        return FIRST_WEDNESDAY + 7 * np.arange(self.accrual_weeks)


def schedule_arrivals(patient_count: int, accrual_weeks: int, rng: np.random.Generator) -> np.ndarray:
    """Arrival days uniform over the accrual period, pushed to the next Wednesday."""
    arrivals = rng.integers(0, 7 * accrual_weeks, patient_count)
    admitted = arrivals + (FIRST_WEDNESDAY - arrivals) % 7
    return np.sort(admitted)


@dataclass
class TrialResult:
    contingency: np.ndarray          # [[bupnal success, failure], [clon success, failure]]
    treated_per_day: np.ndarray      # successes per admission Wednesday
    km_curve: np.ndarray
    adverse_curve: np.ndarray
    mean_arsw: float
    mean_vas: float
    chi2: Optional[ChiSquaredResult]
    event_log: Optional[list] = None

    @property
    def treated_total(self) -> float:
        return float(self.contingency[:, 0].sum())

    @property
    def assignments(self) -> np.ndarray:
        return self.contingency.sum(axis=1)

    @property
    def p_value(self) -> float:
        return self.chi2.p_value if self.chi2 is not None else float("nan")


def _safe_chi2(table):
    try:
        return chi_squared_test(ContingencyTable2x2.from_rows(table))
    except ValueError:
        # A single-arm trial has a zero margin: no test is possible.
        return None


def run_trial(config: TrialConfig, population: TreatmentPopulation, rng: np.random.Generator,
              audit: bool = False) -> TrialResult:
    """Simulate one trial.

    Outcome events due on or before an admission day are delivered before
    that day's assignments.  With ``audit`` the result carries an event
    log of ``("assign", day, patient, arm)`` and ``("feedback", day,
    patient, arm)`` tuples in processing order.
    """
    n = config.patient_count
    delay = config.feedback_delay_days
    days = schedule_arrivals(n, config.accrual_weeks, rng)
    strategy = config.new_strategy()
    sizes = [len(a) for a in population.arms]
    successes = [a.success for a in population.arms]
    boot_u = rng.random(n)
    arm_of = np.empty(n, dtype=int)
    row_of = np.empty(n, dtype=int)
    pending = deque()
    log = [] if audit else None

    for i in range(n):
        day = int(days[i])
        while pending and pending[0][0] <= day:
            _, j, arm, reward = pending.popleft()
            strategy.update(arm, reward, rng)
            if audit:
                log.append(("feedback", day, j, arm))
        arm = int(strategy.select(rng))
        if arm not in (0, 1):
            raise InvalidConfigurationError(f"strategy returned invalid arm {arm}")
        row = int(boot_u[i] * sizes[arm])
        if row >= sizes[arm]:
            row = sizes[arm] - 1
        arm_of[i] = arm
        row_of[i] = row
        pending.append((day + delay, i, arm, 1.0 if successes[arm][row] else 0.0))
        if audit:
            log.append(("assign", day, i, arm))

    return _summarise(config, population, days, arm_of, row_of, log)


def _summarise(config, population, days, arm_of, row_of, log):
    success = np.empty(len(arm_of), dtype=bool)
    part = np.empty(len(arm_of), dtype=int)
    adverse = np.empty((len(arm_of), TREATMENT_DAYS), dtype=int)
    arsw = np.empty(len(arm_of))
    vas = np.empty(len(arm_of))
    for a, data in enumerate(population.arms):
        mask = arm_of == a
        rows = row_of[mask]
        success[mask] = data.success[rows]
        part[mask] = data.participation_days[rows]
        adverse[mask] = data.adverse[rows]
        arsw[mask] = data.arsw[rows]
        vas[mask] = data.vas[rows]
    table = np.zeros((2, 2))
    for a in range(2):
        mask = arm_of == a
        table[a, 0] = np.count_nonzero(success & mask)
        table[a, 1] = np.count_nonzero(~success & mask)
    admission = config.admission_days
    per_day = np.array([np.count_nonzero(success & (days == d)) for d in admission], dtype=float)
    mean_arsw, mean_vas = craving_means(arsw, vas)
    return TrialResult(
        contingency=table,
        treated_per_day=per_day,
        km_curve=kaplan_meier(part, TREATMENT_DAYS),
        adverse_curve=adverse_curve_arrays(adverse, part, TREATMENT_DAYS),
        mean_arsw=mean_arsw,
        mean_vas=mean_vas,
        chi2=_safe_chi2(table),
        event_log=log,
    )


def trial_rng(seed: int, repetition: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(repetition),)))


def average_results(results: Sequence[TrialResult]) -> TrialResult:
    """Element-wise mean; the test is run once on the averaged table."""
    table = np.mean([r.contingency for r in results], axis=0)
    return TrialResult(
        contingency=table,
        treated_per_day=np.mean([r.treated_per_day for r in results], axis=0),
        km_curve=np.mean([r.km_curve for r in results], axis=0),
        adverse_curve=np.mean([r.adverse_curve for r in results], axis=0),
        mean_arsw=float(np.mean([r.mean_arsw for r in results])),
        mean_vas=float(np.mean([r.mean_vas for r in results])),
        chi2=_safe_chi2(table),
    )


def repeat_trials(config: TrialConfig, population: TreatmentPopulation, repetitions: int,
                  threads: int = 1) -> TrialResult:
    """Average of ``repetitions`` independent trials (stream ``r`` for trial ``r``)."""
    if repetitions < 1:
        raise InvalidConfigurationError("repetitions must be positive")

    def one(r):
        return run_trial(config, population, trial_rng(config.seed, r))

    if threads <= 1:
        results = [one(r) for r in range(repetitions)]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(repetitions)))
    return average_results(results)
