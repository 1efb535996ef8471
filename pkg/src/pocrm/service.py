"""HTTP JSON API holding live trial state for interactive conduct.

One trial = one append-only JSONL file under the store directory, so state
survives restarts; estimates are recomputed from the raw history on load
(they are pure functions of it).  Mutation routes can be gated by a bearer
token.  Estimate snapshots, next-dose recommendations, and coherency events
always come from the same code paths the simulator uses.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from pydantic import BaseModel

from .coherency import audit_trial
from .engine import DesignConfig, admissible_doses, compute_snapshot, recommend_dose
from .inference import EstimateSnapshot, TrialState

DEFAULT_STORE = "pocrm-store"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class CohortBody(BaseModel):
    dose: int
    dlts: list[bool]


@dataclass
class LiveTrial:
    """In-memory trial: raw history plus recomputed snapshots."""

    identifier: str
    config: DesignConfig
    state: TrialState
    cohorts: list[tuple[int, tuple[int, ...]]]
    snapshots: list[EstimateSnapshot]
    created: str
    updated: str
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def status(self) -> str:
        return "complete" if len(self.cohorts) == self.config.n_cohorts else "awaiting-outcomes"

    @property
    def next_dose(self) -> int | None:
        if self.status == "complete":
            return None
        if not self.cohorts:
            return self.config.start_dose
        return self.snapshots[-1].recommended_dose

    @property
    def recommendation(self) -> int | None:
        return self.snapshots[-1].recommended_dose if self.status == "complete" else None


def _snapshot_after(config: DesignConfig, state: TrialState, previous_dose: int | None) -> EstimateSnapshot:
    """Snapshot with the recommendation the engine would make next."""
    snap = compute_snapshot(state, config)
    if len(state.observations) >= config.sample_size:
        rec = recommend_dose(snap.estimates, config.theta)  # terminal MTD estimate
    else:
        tried = {d for d, _ in state.observations}
        rec = recommend_dose(
            snap.estimates, config.theta, admissible_doses(config, tried, previous_dose)
        )
    return replace(snap, recommended_dose=rec)


def _build_trial(identifier: str, config: DesignConfig, created: str) -> LiveTrial:
    state = TrialState(config.grid.n_doses)
    return LiveTrial(
        identifier=identifier,
        config=config,
        state=state,
        cohorts=[],
        snapshots=[_snapshot_after(config, state, None)],
        created=created,
        updated=created,
    )


def _append_cohort(trial: LiveTrial, dose: int, outcomes: tuple[int, ...], at: str) -> None:
    trial.state = trial.state.with_cohort(dose, outcomes)
    trial.cohorts.append((dose, outcomes))
    trial.snapshots.append(_snapshot_after(trial.config, trial.state, dose))
    trial.updated = at


def _transition_events(trial: LiveTrial) -> list[dict]:
    report = audit_trial(
        trial.snapshots,
        [d for d, _ in trial.cohorts],
        [o for _, o in trial.cohorts],
        trial.config.sets,
        tolerance=trial.config.coherency_tolerance,
    )
    last = len(trial.cohorts)
    return [e.to_json_dict() for e in report.events if e.cohort == last]


def _cohort_response(trial: LiveTrial, dose: int, dlts: list[bool]) -> dict:
    return {
        "cohort_index": len(trial.cohorts),
        "dose": dose,
        "dlts": dlts,
        "snapshot": trial.snapshots[-1].to_json_dict(),
        "next_dose": trial.next_dose,
        "status": trial.status,
        "recommendation": trial.recommendation,
        "events": _transition_events(trial),
    }


def _trial_document(trial: LiveTrial) -> dict:
    return {
        "id": trial.identifier,
        "status": trial.status,
        "created": trial.created,
        "updated": trial.updated,
        "config": trial.config.to_json_dict(),
        "initial_snapshot": trial.snapshots[0].to_json_dict(),
        "cohorts": [
            {
                "index": t + 1,
                "dose": dose,
                "dlts": [bool(v) for v in outcomes],
                "snapshot": trial.snapshots[t + 1].to_json_dict(),
            }
            for t, (dose, outcomes) in enumerate(trial.cohorts)
        ],
        "next_dose": trial.next_dose,
        "recommendation": trial.recommendation,
    }


class TrialStore:
    """Registry of live trials backed by one JSONL file per trial."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._registry: dict[str, LiveTrial] = {}
        self._lock = threading.Lock()
        for path in sorted(self.root.glob("*.jsonl")):
            trial = self._load(path)
            if trial is not None:
                self._registry[trial.identifier] = trial

    def _path(self, identifier: str) -> Path:
        return self.root / f"{identifier}.jsonl"

    def _load(self, path: Path) -> LiveTrial | None:
        trial: LiveTrial | None = None
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                if doc["type"] == "created":
                    trial = _build_trial(
                        doc["id"], DesignConfig.from_json_dict(doc["config"]), doc["at"]
                    )
                elif doc["type"] == "cohort" and trial is not None:
                    _append_cohort(
                        trial, int(doc["dose"]), tuple(int(v) for v in doc["dlts"]), doc["at"]
                    )
        return trial

    def _append_line(self, identifier: str, doc: dict) -> None:
        with self._path(identifier).open("a") as fh:
            fh.write(json.dumps(doc) + "\n")

    def create(self, config: DesignConfig) -> LiveTrial:
        identifier = uuid.uuid4().hex[:12]
        trial = _build_trial(identifier, config, _now())
        with self._lock:
            self._registry[identifier] = trial
        self._append_line(
            identifier,
            {"type": "created", "id": identifier, "at": trial.created, "config": config.to_json_dict()},
        )
        return trial

    def get(self, identifier: str) -> LiveTrial:
        with self._lock:
            trial = self._registry.get(identifier)
        if trial is None:
            raise HTTPException(status_code=404, detail=f"no trial {identifier!r}")
        return trial

    def record_cohort(self, trial: LiveTrial, dose: int, outcomes: tuple[int, ...]) -> None:
        self._append_line(
            trial.identifier,
            {"type": "cohort", "dose": dose, "dlts": list(outcomes), "at": trial.updated},
        )

    def delete(self, identifier: str) -> None:
        with self._lock:
            if identifier not in self._registry:
                raise HTTPException(status_code=404, detail=f"no trial {identifier!r}")
            del self._registry[identifier]
        path = self._path(identifier)
        if path.exists():
            path.unlink()


def create_app(store_dir: str | Path | None = None, token: str | None = None) -> FastAPI:
    """Build the service; env POCRM_STORE / POCRM_TOKEN supply defaults."""
    root = Path(store_dir if store_dir is not None else os.environ.get("POCRM_STORE", DEFAULT_STORE))
    if token is None:
        token = os.environ.get("POCRM_TOKEN") or None
    store = TrialStore(root)
    app = FastAPI(title="pocrm conduct service")
    app.state.store = store

    def require_token(request: Request) -> None:
        if token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.post("/trials", status_code=201, dependencies=[Depends(require_token)])
    def create_trial(config: dict) -> dict:
        try:
            parsed = DesignConfig.from_json_dict(config)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        trial = store.create(parsed)
        return {
            "id": trial.identifier,
            "status": trial.status,
            "created": trial.created,
            "next_dose": trial.next_dose,
            "snapshot": trial.snapshots[0].to_json_dict(),
        }

    @app.post("/trials/{identifier}/cohorts", dependencies=[Depends(require_token)])
    def post_cohort(
        identifier: str, body: CohortBody, dryrun: int = Query(default=0)
    ) -> dict:
        trial = store.get(identifier)
        with trial.lock:
            if trial.status == "complete":
                raise HTTPException(status_code=409, detail="trial already complete")
            if not 1 <= body.dose <= trial.config.grid.n_doses:
                raise HTTPException(
                    status_code=422, detail=f"dose must be in 1..{trial.config.grid.n_doses}"
                )
            if len(body.dlts) != trial.config.cohort_size:
                raise HTTPException(
                    status_code=422,
                    detail=f"expected {trial.config.cohort_size} DLT booleans, got {len(body.dlts)}",
                )
            outcomes = tuple(int(v) for v in body.dlts)
            if dryrun:
                preview = LiveTrial(
                    identifier=trial.identifier,
                    config=trial.config,
                    state=trial.state,
                    cohorts=list(trial.cohorts),
                    snapshots=list(trial.snapshots),
                    created=trial.created,
                    updated=trial.updated,
                )
                _append_cohort(preview, body.dose, outcomes, trial.updated)
                return _cohort_response(preview, body.dose, body.dlts)
            _append_cohort(trial, body.dose, outcomes, _now())
            store.record_cohort(trial, body.dose, outcomes)
            return _cohort_response(trial, body.dose, body.dlts)

    @app.get("/trials/{identifier}")
    def get_trial(identifier: str) -> dict:
        trial = store.get(identifier)
        with trial.lock:
            return _trial_document(trial)

    @app.get("/trials/{identifier}/coherency")
    def get_coherency(identifier: str) -> dict:
        trial = store.get(identifier)
        with trial.lock:
            report = audit_trial(
                trial.snapshots,
                [d for d, _ in trial.cohorts],
                [o for _, o in trial.cohorts],
                trial.config.sets,
                tolerance=trial.config.coherency_tolerance,
            )
        return report.to_json_dict()

    @app.delete("/trials/{identifier}", dependencies=[Depends(require_token)])
    def delete_trial(identifier: str) -> dict:
        store.delete(identifier)
        return {"deleted": identifier}

    return app
