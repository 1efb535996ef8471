"""Estimation- and escalation-coherency auditing.

After a cohort with no DLT at dose d_i, the model's estimates for every dose
known to be less or more toxic than d_i under all candidate orderings (the nu
and xi sets) should not increase; after a DLT they should not decrease.
Likewise the design should not escalate into xi_i right after a DLT at d_i,
nor de-escalate into nu_i right after a DLT-free cohort.  Violations become
:class:`CoherencyEvent` records; a trial's events roll up into a
:class:`CoherencyReport`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from .inference import EstimateSnapshot
from .orderings import ToxicitySets

__all__ = [
    "ESTIMATION_UP_AFTER_NO_DLT",
    "ESTIMATION_DOWN_AFTER_DLT",
    "ESCALATION_AFTER_DLT",
    "DEESCALATION_AFTER_NO_DLT",
    "ESTIMATION_KINDS",
    "CoherencyEvent",
    "CoherencyReport",
    "check_estimation",
    "check_escalation",
    "audit_trial",
]

ESTIMATION_UP_AFTER_NO_DLT = "estimation-up-after-no-DLT"
ESTIMATION_DOWN_AFTER_DLT = "estimation-down-after-DLT"
ESCALATION_AFTER_DLT = "escalation-after-DLT"
DEESCALATION_AFTER_NO_DLT = "de-escalation-after-no-DLT"
ESTIMATION_KINDS = frozenset({ESTIMATION_UP_AFTER_NO_DLT, ESTIMATION_DOWN_AFTER_DLT})


@dataclass(frozen=True)
class CoherencyEvent:
    """One wrong-direction change, pinned to the cohort that triggered it.

    ``dose`` is the dose administered to the cohort, ``affected_dose`` the dose
    whose estimate (or allocation) moved the wrong way.  Estimation events carry
    the two estimates and their absolute difference as ``magnitude``; escalation
    events have no estimates and magnitude 0.
    """

    cohort: int
    dose: int
    dlt_observed: bool
    affected_dose: int
    kind: str
    previous: float | None = None
    new: float | None = None
    magnitude: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "cohort": self.cohort,
            "dose": self.dose,
            "dlt_observed": self.dlt_observed,
            "affected_dose": self.affected_dose,
            "kind": self.kind,
            "previous": self.previous,
            "new": self.new,
            "magnitude": self.magnitude,
        }


@dataclass(frozen=True)
class CoherencyReport:
    """All coherency events of one trial, with the usual roll-ups."""

    events: tuple[CoherencyEvent, ...]

    @property
    def flag(self) -> bool:
        """True iff the trial had at least one event of any kind."""
        return bool(self.events)

    @property
    def cohorts_with_events(self) -> int:
        return len({e.cohort for e in self.events})

    @property
    def max_magnitude(self) -> float:
        return max((e.magnitude for e in self.events), default=0.0)

    def estimation_events(self) -> tuple[CoherencyEvent, ...]:
        return tuple(e for e in self.events if e.kind in ESTIMATION_KINDS)

    def to_json_dict(self) -> dict:
        return {
            "flag": self.flag,
            "cohorts_with_events": self.cohorts_with_events,
            "max_magnitude": self.max_magnitude,
            "events": [e.to_json_dict() for e in self.events],
        }

    def to_csv(self) -> str:
        """One row per event; header always present."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["cohort", "dose", "dlt_observed", "affected_dose", "kind", "previous", "new", "magnitude"]
        )
        for e in self.events:
            writer.writerow(
                [
                    e.cohort,
                    e.dose,
                    int(e.dlt_observed),
                    e.affected_dose,
                    e.kind,
                    "" if e.previous is None else repr(e.previous),
                    "" if e.new is None else repr(e.new),
                    repr(e.magnitude),
                ]
            )
        return buf.getvalue()


def check_estimation(
    previous: EstimateSnapshot,
    new: EstimateSnapshot,
    dose: int,
    dlt_observed: bool,
    sets: ToxicitySets,
    tolerance: float = 0.0,
    cohort: int = 0,
) -> list[CoherencyEvent]:
    """Events for one update: estimates moving the wrong way on nu_i union xi_i.

    ``tolerance`` is the sub-threshold movement ignored (0 flags any strictly
    wrong-direction change; tiny positive values absorb numerical jitter).
    """
    if tolerance < 0:
        raise ValueError("tolerance must be nonnegative")
    events: list[CoherencyEvent] = []
    watched = sorted(sets.less_toxic(dose) | sets.more_toxic(dose))
    for j in watched:
        prev_est = previous.estimates[j - 1]
        new_est = new.estimates[j - 1]
        delta = new_est - prev_est
        if not dlt_observed and delta > tolerance:
            kind = ESTIMATION_UP_AFTER_NO_DLT
        elif dlt_observed and -delta > tolerance:
            kind = ESTIMATION_DOWN_AFTER_DLT
        else:
            continue
        events.append(
            CoherencyEvent(
                cohort=cohort,
                dose=dose,
                dlt_observed=dlt_observed,
                affected_dose=j,
                kind=kind,
                previous=prev_est,
                new=new_est,
                magnitude=abs(delta),
            )
        )
    return events


def check_escalation(
    previous_dose: int,
    next_dose: int,
    dlt_observed: bool,
    sets: ToxicitySets,
    cohort: int = 0,
) -> list[CoherencyEvent]:
    """Events for one allocation step: moving into xi after a DLT or nu after none.

    ``cohort`` labels the cohort whose outcome preceded the move (the one
    treated at ``previous_dose``).
    """
    if dlt_observed and next_dose in sets.more_toxic(previous_dose):
        kind = ESCALATION_AFTER_DLT
    elif not dlt_observed and next_dose in sets.less_toxic(previous_dose):
        kind = DEESCALATION_AFTER_NO_DLT
    else:
        return []
    return [
        CoherencyEvent(
            cohort=cohort,
            dose=previous_dose,
            dlt_observed=dlt_observed,
            affected_dose=next_dose,
            kind=kind,
        )
    ]


def _any_dlt(outcome) -> bool:
    if isinstance(outcome, (bool, int)):
        return bool(outcome)
    return any(bool(v) for v in outcome)


def audit_trial(
    snapshots: Sequence[EstimateSnapshot],
    allocations: Sequence[int],
    outcomes: Sequence,
    sets: ToxicitySets,
    tolerance: float = 0.0,
) -> CoherencyReport:
    """Audit a whole trial's aligned history.

    ``snapshots`` must hold one more entry than ``allocations``: snapshot t is
    the estimate before cohort t+1's outcomes (snapshot 0 is prior-only) and the
    final entry reflects all data.  ``outcomes[t]`` is cohort t+1's per-patient
    DLT indicators (a bare bool/int works for single-patient cohorts).  Mixed
    cohorts count as DLT-observed.
    """
    if len(allocations) != len(outcomes):
        raise ValueError(
            f"allocations ({len(allocations)}) and outcomes ({len(outcomes)}) differ in length"
        )
    if allocations and len(snapshots) != len(allocations) + 1:
        raise ValueError(
            f"need {len(allocations) + 1} snapshots for {len(allocations)} cohorts, got {len(snapshots)}"
        )
    events: list[CoherencyEvent] = []
    for t, (dose, outcome) in enumerate(zip(allocations, outcomes), start=1):
        dlt = _any_dlt(outcome)
        events.extend(
            check_estimation(snapshots[t - 1], snapshots[t], dose, dlt, sets, tolerance, cohort=t)
        )
        if t < len(allocations):
            events.extend(check_escalation(dose, allocations[t], dlt, sets, cohort=t))
    return CoherencyReport(tuple(events))
