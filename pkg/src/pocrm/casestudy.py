"""Replaying a completed trial's dose-level outcome table patient by patient.

A published combination trial usually reports only per-dose totals (n_j
patients, y_j DLTs).  To replay it under a different design we expand each
dose's totals into a patient-indexed response sequence: the first n_j entries
are a seeded random permutation of the observed outcomes (so any prefix the
design actually consumes has the right DLT multiset), and the remaining
entries are drawn Bernoulli(p_j) with a single p_j ~ Beta(1 + y_j,
1 + n_j - y_j) per dose (Beta(3, 3) where the dose was never given).  Replay
itself is pure: it reads the t-th entry for the t-th patient at a dose and
never touches an RNG.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import DesignConfig, SequenceOutcomes, TrialRecord, run_trial
from .orderings import DoseGrid

__all__ = [
    "SUDDEN_CHANGE_THRESHOLD",
    "SourceTrialData",
    "ResponseSequences",
    "generate_sequences",
    "replay",
    "change_summary",
    "load_source_data",
    "bundled_source_data",
]

# Estimate jumps larger than this between consecutive cohorts get called out in
# replay summaries.
SUDDEN_CHANGE_THRESHOLD = 0.25


@dataclass(frozen=True)
class SourceTrialData:
    """Per-dose totals of a completed trial on a combination grid."""

    grid: DoseGrid
    n: tuple[int, ...]
    y: tuple[int, ...]
    theta: float
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "y", tuple(int(v) for v in self.y))
        k = self.grid.n_doses
        if len(self.n) != k or len(self.y) != k:
            raise ValueError("need n and y for every dose on the grid")
        if any(v < 0 for v in self.n) or any(v < 0 for v in self.y):
            raise ValueError("counts must be nonnegative")
        if any(yy > nn for nn, yy in zip(self.n, self.y)):
            raise ValueError("y cannot exceed n at any dose")
        if not (0.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (0, 1)")

    @property
    def total_patients(self) -> int:
        return sum(self.n)


@dataclass(frozen=True)
class ResponseSequences:
    """Patient-indexed response sequences, one per dose, each covering the whole trial."""

    seed: int
    responses: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "responses", tuple(tuple(int(v) for v in row) for row in self.responses)
        )
        lengths = {len(row) for row in self.responses}
        if len(lengths) > 1:
            raise ValueError("all dose sequences must have equal length")

    @property
    def length(self) -> int:
        return len(self.responses[0]) if self.responses else 0

    def to_json_dict(self) -> dict:
        return {"seed": self.seed, "responses": [list(r) for r in self.responses]}


def generate_sequences(data: SourceTrialData, seed: int) -> ResponseSequences:
    """Expand per-dose totals into full response sequences; pure in (data, seed).

    Doses are processed in index order from one seeded stream: permutation of
    the observed outcomes first, then (if the sequence needs padding) one Beta
    draw for the dose's tail rate followed by its Bernoulli entries.  Changing
    the seed reshuffles prefixes and redraws tails but can never change any
    prefix's outcome counts.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    total = data.total_patients
    rows: list[tuple[int, ...]] = []
    for nn, yy in zip(data.n, data.y):
        observed = np.array([1] * yy + [0] * (nn - yy), dtype=int)
        prefix = rng.permutation(observed) if nn else observed
        pad = total - nn
        if pad > 0:
            p = rng.beta(1 + yy, 1 + nn - yy) if nn else rng.beta(3.0, 3.0)
            tail = (rng.random(pad) < p).astype(int)
            row = np.concatenate([prefix, tail])
        else:
            row = prefix
        rows.append(tuple(int(v) for v in row))
    return ResponseSequences(seed=seed, responses=tuple(rows))


def replay(
    config: DesignConfig,
    sequences: ResponseSequences,
    allocation_override: Sequence[int | None] | None = None,
) -> TrialRecord:
    """Run a design against fixed response sequences; no randomness involved.

    The t-th patient treated at dose j receives entry t of sequence j.  Running
    past the end of any sequence raises the engine's exhaustion error.
    """
    if len(sequences.responses) != config.grid.n_doses:
        raise ValueError("sequences must cover every dose on the design's grid")
    return run_trial(config, SequenceOutcomes(sequences.responses), allocation_override)


def change_summary(record: TrialRecord) -> dict:
    """Between-cohort estimate movement for replay reports.

    Returns the overall [min, max] range of per-dose estimate changes across
    consecutive snapshots, plus every jump whose magnitude exceeds
    ``SUDDEN_CHANGE_THRESHOLD``.
    """
    snapshots = [c.snapshot for c in record.cohorts] + [record.final_snapshot]
    deltas: list[float] = []
    sudden: list[dict] = []
    for t in range(1, len(snapshots)):
        prev, cur = snapshots[t - 1], snapshots[t]
        for dose0, (a, b) in enumerate(zip(prev.estimates, cur.estimates)):
            delta = b - a
            deltas.append(delta)
            if abs(delta) > SUDDEN_CHANGE_THRESHOLD:
                sudden.append(
                    {"cohort": t, "dose": dose0 + 1, "previous": a, "new": b, "delta": delta}
                )
    est_events = record.coherency.estimation_events()
    return {
        "min_delta": min(deltas) if deltas else 0.0,
        "max_delta": max(deltas) if deltas else 0.0,
        "sudden_threshold": SUDDEN_CHANGE_THRESHOLD,
        "sudden_changes": sudden,
        "n_estimation_events": len(est_events),
        "cohorts_with_estimation_events": len({e.cohort for e in est_events}),
        "max_event_magnitude": max((e.magnitude for e in est_events), default=0.0),
    }


# ----------------------------------------------------------------------------
# Source-data files
# ----------------------------------------------------------------------------

def _from_rows(rows: list[dict], grid: DoseGrid, theta: float, label: str) -> SourceTrialData:
    k = grid.n_doses
    n = [0] * k
    y = [0] * k
    seen = set()
    for row in rows:
        d = int(row["dose_index"])
        if not (1 <= d <= k):
            raise ValueError(f"dose_index {d} outside 1..{k}")
        if d in seen:
            raise ValueError(f"dose_index {d} listed twice")
        seen.add(d)
        n[d - 1] = int(row["n"])
        y[d - 1] = int(row["y"])
    return SourceTrialData(grid=grid, n=tuple(n), y=tuple(y), theta=theta, label=label)


def load_source_data(path: str | Path) -> SourceTrialData:
    """Read per-dose totals from a JSON document {rows, cols, theta, doses: [...]}.

    Each entry of ``doses`` has dose_index, n, y; doses absent from the table
    count as never treated.  For bare CSV tables (columns dose_index, n, y) use
    :func:`load_source_data_csv`, which takes the grid and target explicitly.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        raise ValueError(
            f"{path} is a CSV; pass the grid and target via load_source_data_csv"
        )
    doc = json.loads(path.read_text())
    try:
        grid = DoseGrid(int(doc["rows"]), int(doc["cols"]))
        theta = float(doc["theta"])
        rows = list(doc["doses"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed source-data file {path}: {exc}") from exc
    return _from_rows(rows, grid, theta, str(doc.get("label", "")))


def load_source_data_csv(
    path: str | Path, grid: DoseGrid, theta: float, label: str = ""
) -> SourceTrialData:
    """Read a dose_index,n,y CSV for a known grid and target."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return _from_rows(rows, grid, theta, label)


def bundled_source_data() -> SourceTrialData:
    """The synthetic 4x4 demo table shipped with the package (not real trial data)."""
    doc = json.loads(resources.files("pocrm").joinpath("data/synthetic_source_trial.json").read_text())
    grid = DoseGrid(int(doc["rows"]), int(doc["cols"]))
    return _from_rows(list(doc["doses"]), grid, float(doc["theta"]), str(doc.get("label", "")))
