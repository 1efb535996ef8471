"""Operating-characteristics simulator.

Replications are driven by counter-based RNG streams split from one master
seed, so runs are reproducible bit-for-bit whether executed serially or across
processes.  Each replication pre-draws a full per-dose response matrix and the
trial consumes it in allocation order; because both estimation methods then see
the same patient-level randomness for the same (seed, replication), method
comparisons are paired by construction.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .coherency import ESTIMATION_KINDS
from .engine import DesignConfig, SequenceOutcomes, TrialRecord, run_trial
from .orderings import DoseGrid

__all__ = [
    "Scenario",
    "DoseClassification",
    "MagnitudeSummary",
    "OperatingCharacteristics",
    "MethodComparison",
    "classify_doses",
    "run_study",
    "compare_methods",
    "load_scenario",
    "starter_scenarios",
    "OC_CSV_COLUMNS",
]

CORRECT_TOL = 1e-12
ACCEPTABLE_WINDOW = 0.1
OVERLY_TOXIC_FACTOR = 1.1

OC_CSV_COLUMNS = [
    "scenario",
    "method",
    "n_reps",
    "seed",
    "pcs",
    "pas",
    "pots",
    "nptot_mean",
    "incoherent_proportion",
    "mean_cohorts_with_incoherency",
    "max_magnitude_mean",
    "max_magnitude_median",
    "max_magnitude_p90",
    "max_magnitude_max",
    "rmse_mean",
]


@dataclass(frozen=True)
class Scenario:
    """A true dose-toxicity surface to simulate against."""

    label: str
    grid: DoseGrid
    truth: tuple[float, ...]
    theta: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "truth", tuple(float(p) for p in self.truth))
        if len(self.truth) != self.grid.n_doses:
            raise ValueError("truth must list one probability per dose, row-major")
        if any(not (0.0 < p < 1.0) for p in self.truth):
            raise ValueError("true toxicity probabilities must lie strictly inside (0, 1)")

    def to_json_dict(self) -> dict:
        doc = {
            "label": self.label,
            "rows": self.grid.rows,
            "cols": self.grid.cols,
            "truth": list(self.truth),
        }
        if self.theta is not None:
            doc["theta"] = self.theta
        return doc


@dataclass(frozen=True)
class DoseClassification:
    """Per-dose truth classes at a target rate; flags overlap (correct implies acceptable)."""

    correct: tuple[bool, ...]
    acceptable: tuple[bool, ...]
    overly_toxic: tuple[bool, ...]


def classify_doses(scenario: Scenario, theta: float) -> DoseClassification:
    """Classify each dose's true toxicity against the target rate.

    correct: truth equals theta (within 1e-12); acceptable: within
    [theta - 0.1, theta]; overly toxic: strictly above 1.1 * theta.
    """
    correct = tuple(abs(p - theta) <= CORRECT_TOL for p in scenario.truth)
    acceptable = tuple(theta - ACCEPTABLE_WINDOW <= p <= theta for p in scenario.truth)
    overly = tuple(p > OVERLY_TOXIC_FACTOR * theta for p in scenario.truth)
    return DoseClassification(correct, acceptable, overly)


@dataclass(frozen=True)
class MagnitudeSummary:
    """Distribution of per-trial maximum incoherency magnitudes (0 for clean trials)."""

    mean: float
    median: float
    p90: float
    max: float

    def to_json_dict(self) -> dict:
        return {"mean": self.mean, "median": self.median, "p90": self.p90, "max": self.max}


@dataclass(frozen=True)
class OperatingCharacteristics:
    """Aggregated results of one (design, scenario) study.

    Incoherency figures cover estimation-coherency events only; escalation
    events remain visible in individual trial records.
    """

    scenario: str
    method: str
    n_reps: int
    seed: int
    pcs: float
    pas: float
    pots: float
    nptot_mean: float
    incoherent_proportion: float
    mean_cohorts_with_incoherency: float
    max_magnitude: MagnitudeSummary
    rmse_mean: float

    def to_json_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "method": self.method,
            "n_reps": self.n_reps,
            "seed": self.seed,
            "pcs": self.pcs,
            "pas": self.pas,
            "pots": self.pots,
            "nptot_mean": self.nptot_mean,
            "incoherent_proportion": self.incoherent_proportion,
            "mean_cohorts_with_incoherency": self.mean_cohorts_with_incoherency,
            "max_magnitude": self.max_magnitude.to_json_dict(),
            "rmse_mean": self.rmse_mean,
        }

    def csv_row(self) -> list[str]:
        return [
            self.scenario,
            self.method,
            str(self.n_reps),
            str(self.seed),
            repr(self.pcs),
            repr(self.pas),
            repr(self.pots),
            repr(self.nptot_mean),
            repr(self.incoherent_proportion),
            repr(self.mean_cohorts_with_incoherency),
            repr(self.max_magnitude.mean),
            repr(self.max_magnitude.median),
            repr(self.max_magnitude.p90),
            repr(self.max_magnitude.max),
            repr(self.rmse_mean),
        ]


def replication_rng(master_seed: int, rep: int) -> np.random.Generator:
    """Counter-based stream for one replication; independent of execution order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=(rep,))))


def predraw_responses(truth: Sequence[float], n_patients: int, rng: np.random.Generator) -> np.ndarray:
    """Per-dose response matrix: entry (d, t) is patient t's outcome were they given dose d+1."""
    probs = np.asarray(truth)[:, None]
    return (rng.random((len(truth), n_patients)) < probs).astype(int)


def simulate_one(config: DesignConfig, scenario: Scenario, master_seed: int, rep: int) -> TrialRecord:
    """One replication: pre-draw responses, then run the trial on them."""
    rng = replication_rng(master_seed, rep)
    responses = predraw_responses(scenario.truth, config.sample_size, rng)
    return run_trial(config, SequenceOutcomes(responses))


def _rep_metrics(config: DesignConfig, scenario: Scenario, master_seed: int, rep: int, theta: float) -> tuple:
    record = simulate_one(config, scenario, master_seed, rep)
    classes = classify_doses(scenario, theta)
    rec = record.recommendation
    n_at = np.zeros(len(scenario.truth))
    for c in record.cohorts:
        n_at[c.dose - 1] += len(c.outcomes)
    nptot = float(sum(n for n, tox in zip(n_at, classes.overly_toxic) if tox))
    est_events = record.coherency.estimation_events()
    est_cohorts = len({e.cohort for e in est_events})
    max_mag = max((e.magnitude for e in est_events), default=0.0)
    final = np.asarray(record.final_snapshot.estimates)
    rmse = float(np.sqrt(np.mean((final - np.asarray(scenario.truth)) ** 2)))
    return (
        bool(classes.correct[rec - 1]),
        bool(classes.acceptable[rec - 1]),
        bool(classes.overly_toxic[rec - 1]),
        nptot,
        bool(est_events),
        est_cohorts,
        max_mag,
        rmse,
    )


def _metrics_chunk(args) -> list[tuple[int, tuple]]:
    config, scenario, master_seed, reps, theta = args
    return [(rep, _rep_metrics(config, scenario, master_seed, rep, theta)) for rep in reps]


def run_study(
    config: DesignConfig,
    scenario: Scenario,
    n_reps: int,
    seed: int,
    jobs: int = 1,
) -> OperatingCharacteristics:
    """Simulate a design against one scenario and aggregate operating characteristics.

    A scenario's own theta, when present, overrides the config target for both
    allocation and classification.  Aggregation is an ordered reduction over
    replication index, so results are independent of ``jobs``.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be positive")
    theta = scenario.theta if scenario.theta is not None else config.theta
    cfg = config if theta == config.theta else replace(config, theta=theta)
    if jobs > 1:
        chunks = [
            (cfg, scenario, seed, list(range(start, n_reps, jobs)), theta)
            for start in range(jobs)
        ]
        results: list[tuple[int, tuple]] = []
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_metrics_chunk, chunks):
                results.extend(part)
        results.sort(key=lambda item: item[0])
        rows = [metrics for _, metrics in results]
    else:
        rows = [_rep_metrics(cfg, scenario, seed, rep, theta) for rep in range(n_reps)]

    correct, acceptable, overly, nptot, incoherent, inc_cohorts, max_mags, rmse = map(
        np.asarray, zip(*rows)
    )
    return OperatingCharacteristics(
        scenario=scenario.label,
        method=cfg.method,
        n_reps=n_reps,
        seed=seed,
        pcs=float(correct.mean()),
        pas=float(acceptable.mean()),
        pots=float(overly.mean()),
        nptot_mean=float(nptot.mean()),
        incoherent_proportion=float(incoherent.mean()),
        mean_cohorts_with_incoherency=float(inc_cohorts.mean()),
        max_magnitude=MagnitudeSummary(
            mean=float(max_mags.mean()),
            median=float(np.quantile(max_mags, 0.5)),
            p90=float(np.quantile(max_mags, 0.9)),
            max=float(max_mags.max()),
        ),
        rmse_mean=float(rmse.mean()),
    )


@dataclass(frozen=True)
class MethodComparison:
    """Side-by-side operating characteristics for a pair of designs."""

    rows: tuple[OperatingCharacteristics, ...]

    def for_method(self, method: str) -> tuple[OperatingCharacteristics, ...]:
        return tuple(r for r in self.rows if r.method == method)

    def mean_over_scenarios(self, method: str, metric: str) -> float:
        values = [getattr(r, metric) for r in self.for_method(method)]
        return float(np.mean(values))

    def to_json_dict(self) -> dict:
        methods = sorted({r.method for r in self.rows})
        return {
            "rows": [r.to_json_dict() for r in self.rows],
            "means": {
                method: {
                    metric: self.mean_over_scenarios(method, metric)
                    for metric in ("pcs", "pas", "pots", "nptot_mean", "incoherent_proportion", "rmse_mean")
                }
                for method in methods
            },
        }


def compare_methods(
    configs: Sequence[DesignConfig],
    scenarios: Sequence[Scenario],
    n_reps: int,
    seed: int,
    jobs: int = 1,
) -> MethodComparison:
    """Run each config against each scenario under common random numbers.

    All configs share the master seed, hence identical pre-drawn response
    matrices per replication; running the same config twice yields identical
    rows.
    """
    rows = [
        run_study(config, scenario, n_reps, seed, jobs=jobs)
        for scenario in scenarios
        for config in configs
    ]
    return MethodComparison(tuple(rows))


# ----------------------------------------------------------------------------
# Scenario files
# ----------------------------------------------------------------------------

def scenario_from_json_dict(doc: dict) -> Scenario:
    try:
        grid = DoseGrid(int(doc["rows"]), int(doc["cols"]))
        truth = tuple(float(p) for p in doc["truth"])
        label = str(doc["label"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed scenario: {exc}") from exc
    theta = doc.get("theta")
    return Scenario(label=label, grid=grid, truth=truth, theta=None if theta is None else float(theta))


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_json_dict(json.loads(Path(path).read_text()))


def starter_scenarios() -> list[Scenario]:
    """The six constructed 4x4 scenarios shipped with the package.

    These are repo-constructed surfaces spanning the usual taxonomy (matching
    orderings present or absent, symmetric/asymmetric target placement,
    everything-toxic, everything-safe); they are not taken from any study.
    """
    root = resources.files("pocrm").joinpath("data/scenarios")
    docs = []
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            docs.append(scenario_from_json_dict(json.loads(entry.read_text())))
    return docs
