"""Trial engine: design configuration, dose recommendation, and the cohort loop.

A trial runs a fixed number of cohorts.  Before each cohort the engine
estimates every dose's DLT probability from the data so far (by the configured
method), allocates the dose whose estimate is closest to the target, treats the
cohort, and appends the outcomes.  The first cohort always starts at the
configured starting dose; explicit allocation overrides are available for
replaying externally-decided histories, and the conduct path always reports the
model's own recommendation alongside whatever dose was actually given.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .coherency import CoherencyReport, audit_trial
from .inference import (
    EstimateSnapshot,
    PriorSpec,
    Skeleton,
    TrialState,
    bma_estimates,
    indifference_skeleton,
    pocrm_estimates,
)
from .orderings import (
    DoseGrid,
    OrderingSet,
    SimpleOrdering,
    ToxicitySets,
    standard_orderings,
    toxicity_sets,
    validate_orderings,
)

__all__ = [
    "DesignConfig",
    "CohortRecord",
    "TrialRecord",
    "OutcomeSource",
    "OutcomesExhaustedError",
    "SequenceOutcomes",
    "bernoulli_outcomes",
    "scheduled_outcomes",
    "recommend_dose",
    "admissible_doses",
    "compute_snapshot",
    "run_cohort",
    "run_trial",
]

METHODS = ("selection", "averaging")


class OutcomesExhaustedError(RuntimeError):
    """A response sequence ran out of entries for the dose being allocated."""


@dataclass(frozen=True)
class DesignConfig:
    """Everything needed to run or conduct one trial design."""

    grid: DoseGrid
    theta: float
    cohort_size: int
    n_cohorts: int
    method: str
    skeleton: Skeleton
    prior: PriorSpec
    orderings: OrderingSet
    start_dose: int = 1
    no_skip: bool = False
    coherency_tolerance: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (0, 1)")
        if self.cohort_size < 1 or self.n_cohorts < 1:
            raise ValueError("cohort_size and n_cohorts must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        k = self.grid.n_doses
        if len(self.skeleton) != k:
            raise ValueError("skeleton length must equal the number of doses")
        if self.orderings.n_doses != k:
            raise ValueError("orderings must cover every dose")
        if not (1 <= self.start_dose <= k):
            raise ValueError("start_dose outside the grid")
        if self.coherency_tolerance < 0:
            raise ValueError("coherency_tolerance must be nonnegative")
        result = validate_orderings(self.grid, self.orderings)
        if not result.ok:
            first = result.violations[0]
            raise ValueError(f"ordering {first.ordering_index}: {first.detail}")

    @property
    def sample_size(self) -> int:
        return self.cohort_size * self.n_cohorts

    @cached_property
    def sets(self) -> ToxicitySets:
        return toxicity_sets(self.orderings)

    def to_json_dict(self) -> dict:
        return {
            "rows": self.grid.rows,
            "cols": self.grid.cols,
            "theta": self.theta,
            "cohort_size": self.cohort_size,
            "n_cohorts": self.n_cohorts,
            "method": self.method,
            "skeleton": list(self.skeleton.alpha),
            "prior": {"mean": self.prior.mean, "variance": self.prior.variance},
            "orderings": [list(s) for s in self.orderings.sequences],
            "prior_weights": list(self.orderings.prior_weights),
            "start_dose": self.start_dose,
            "no_skip": self.no_skip,
            "coherency_tolerance": self.coherency_tolerance,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DesignConfig":
        """Build a config from its JSON form; omitted skeleton/orderings use defaults."""
        try:
            grid = DoseGrid(int(doc["rows"]), int(doc["cols"]))
            theta = float(doc["theta"])
            cohort_size = int(doc["cohort_size"])
            n_cohorts = int(doc["n_cohorts"])
            method = str(doc.get("method", "averaging"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed design config: {exc}") from exc
        skeleton = (
            Skeleton(tuple(doc["skeleton"]))
            if doc.get("skeleton") is not None
            else indifference_skeleton(grid.n_doses, theta)
        )
        if doc.get("orderings") is not None:
            seqs = [tuple(int(v) for v in s) for s in doc["orderings"]]
            weights = doc.get("prior_weights")
            orderings = (
                OrderingSet.uniform(seqs)
                if weights is None
                else OrderingSet(tuple(SimpleOrdering(s) for s in seqs), tuple(weights))
            )
        else:
            orderings = standard_orderings(grid)
        prior_doc = doc.get("prior") or {}
        prior = PriorSpec(float(prior_doc.get("mean", 0.0)), float(prior_doc.get("variance", 1.34)))
        return cls(
            grid=grid,
            theta=theta,
            cohort_size=cohort_size,
            n_cohorts=n_cohorts,
            method=method,
            skeleton=skeleton,
            prior=prior,
            orderings=orderings,
            start_dose=int(doc.get("start_dose", 1)),
            no_skip=bool(doc.get("no_skip", False)),
            coherency_tolerance=float(doc.get("coherency_tolerance", 0.0)),
        )

    @classmethod
    def from_json_file(cls, path: str | Path) -> "DesignConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CohortRecord:
    """One cohort: its pre-outcome snapshot, the dose given, and what happened."""

    index: int  # 1-based
    dose: int
    outcomes: tuple[int, ...]
    snapshot: EstimateSnapshot

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "dose": self.dose,
            "outcomes": list(self.outcomes),
            "snapshot": self.snapshot.to_json_dict(),
        }


@dataclass(frozen=True)
class TrialRecord:
    """Full history of one simulated or replayed trial."""

    config: DesignConfig
    cohorts: tuple[CohortRecord, ...]
    final_snapshot: EstimateSnapshot
    recommendation: int
    coherency: CoherencyReport

    @property
    def final_state(self) -> TrialState:
        state = TrialState(self.config.grid.n_doses)
        for c in self.cohorts:
            state = state.with_cohort(c.dose, c.outcomes)
        return state

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "cohorts": [c.to_json_dict() for c in self.cohorts],
            "final_snapshot": self.final_snapshot.to_json_dict(),
            "recommendation": self.recommendation,
            "coherency": self.coherency.to_json_dict(),
        }


OutcomeSource = Callable[[int, int, int], Sequence[int]]


class SequenceOutcomes:
    """Outcome source reading pre-drawn per-dose response sequences.

    The t-th patient ever treated at dose d receives entry t of sequence d,
    whatever cohort they arrive in.  Raises :class:`OutcomesExhaustedError`
    when a sequence runs dry.
    """

    def __init__(self, responses: Sequence[Sequence[int]]):
        self._responses = [list(r) for r in responses]
        self._cursors = [0] * len(self._responses)

    def __call__(self, dose: int, cohort_index: int, size: int) -> list[int]:
        seq = self._responses[dose - 1]
        cur = self._cursors[dose - 1]
        if cur + size > len(seq):
            raise OutcomesExhaustedError(
                f"dose {dose} sequence exhausted (needs {cur + size} entries, has {len(seq)})"
            )
        self._cursors[dose - 1] = cur + size
        return [int(v) for v in seq[cur : cur + size]]


def bernoulli_outcomes(truth: Sequence[float], rng: np.random.Generator) -> OutcomeSource:
    """Outcome source drawing fresh Bernoulli responses from a true toxicity curve."""
    probs = [float(p) for p in truth]

    def source(dose: int, cohort_index: int, size: int) -> list[int]:
        return [int(v) for v in (rng.random(size) < probs[dose - 1])]

    return source


def scheduled_outcomes(schedule: Sequence[int]) -> OutcomeSource:
    """Outcome source replaying a patient-indexed schedule (dose-independent)."""
    flat = [int(bool(v)) for v in schedule]
    cursor = [0]

    def source(dose: int, cohort_index: int, size: int) -> list[int]:
        if cursor[0] + size > len(flat):
            raise OutcomesExhaustedError("outcome schedule exhausted")
        out = flat[cursor[0] : cursor[0] + size]
        cursor[0] += size
        return out

    return source


def recommend_dose(estimates: Sequence[float], theta: float, admissible: Sequence[int] | None = None) -> int:
    """Dose whose estimate is closest to the target; ties go to the lowest index."""
    candidates = range(1, len(estimates) + 1) if admissible is None else sorted(admissible)
    if not candidates:
        raise ValueError("no admissible doses")
    return min(candidates, key=lambda d: (abs(estimates[d - 1] - theta), d))


def admissible_doses(
    config: DesignConfig, tried: set[int], current_dose: int | None
) -> set[int] | None:
    """Doses open to the next cohort under the no-skip rule; None means all.

    With no_skip on, escalation past an untried always-more-toxic dose is
    barred: from dose i, any dose known more toxic than some untried j in xi_i
    is excluded.
    """
    if not config.no_skip or current_dose is None:
        return None
    sets = config.sets
    banned: set[int] = set()
    for j in sets.more_toxic(current_dose):
        if j not in tried:
            banned |= sets.more_toxic(j)
    return set(range(1, config.grid.n_doses + 1)) - banned


def compute_snapshot(state: TrialState, config: DesignConfig) -> EstimateSnapshot:
    """Estimates for the current data by the configured method."""
    fn = pocrm_estimates if config.method == "selection" else bma_estimates
    return fn(state, config.orderings, config.skeleton, config.prior)


def run_cohort(
    state: TrialState,
    config: DesignConfig,
    outcomes: OutcomeSource,
    cohort_index: int,
    forced_dose: int | None = None,
    previous_dose: int | None = None,
) -> tuple[TrialState, CohortRecord]:
    """One estimate-allocate-observe step.

    The model's recommendation is always computed and recorded on the snapshot;
    the administered dose is the recommendation unless this is the first cohort
    (start_dose) or ``forced_dose`` overrides it.
    """
    snap = compute_snapshot(state, config)
    tried = {d for d, _ in state.observations}
    admissible = admissible_doses(config, tried, previous_dose)
    recommended = recommend_dose(snap.estimates, config.theta, admissible)
    snap = replace(snap, recommended_dose=recommended)
    if forced_dose is not None:
        dose = forced_dose
    elif cohort_index == 1:
        dose = config.start_dose
    else:
        dose = recommended
    ys = list(outcomes(dose, cohort_index, config.cohort_size))
    if len(ys) != config.cohort_size:
        raise ValueError(f"outcome source returned {len(ys)} outcomes for a cohort of {config.cohort_size}")
    new_state = state.with_cohort(dose, ys)
    record = CohortRecord(index=cohort_index, dose=dose, outcomes=tuple(int(v) for v in ys), snapshot=snap)
    return new_state, record


def run_trial(
    config: DesignConfig,
    outcomes: OutcomeSource,
    allocation_override: Sequence[int | None] | None = None,
) -> TrialRecord:
    """Run exactly n_cohorts cohorts and audit the history.

    ``allocation_override[t]``, when not None, forces cohort t+1's dose (used
    to replay externally-decided histories); estimation is still performed and
    recorded at every step.
    """
    if allocation_override is not None and len(allocation_override) > config.n_cohorts:
        raise ValueError("allocation override longer than the trial")
    state = TrialState(config.grid.n_doses)
    cohorts: list[CohortRecord] = []
    previous_dose: int | None = None
    for t in range(1, config.n_cohorts + 1):
        forced = None
        if allocation_override is not None and t <= len(allocation_override):
            forced = allocation_override[t - 1]
        state, record = run_cohort(
            state, config, outcomes, t, forced_dose=forced, previous_dose=previous_dose
        )
        cohorts.append(record)
        previous_dose = record.dose
    final = compute_snapshot(state, config)
    recommendation = recommend_dose(final.estimates, config.theta)
    final = replace(final, recommended_dose=recommendation)
    snapshots = [c.snapshot for c in cohorts] + [final]
    report = audit_trial(
        snapshots,
        [c.dose for c in cohorts],
        [c.outcomes for c in cohorts],
        config.sets,
        tolerance=config.coherency_tolerance,
    )
    return TrialRecord(
        config=config,
        cohorts=tuple(cohorts),
        final_snapshot=final,
        recommendation=recommendation,
        coherency=report,
    )
