"""Record a scripted conduct session against the live HTTP service.

Runs the real FastAPI app in-process, drives a five-cohort trial through it
(dry-run before every commit), and freezes every response body verbatim into
tests/fixtures/session.json.  The UI tests replay these bodies through a stub
fetch, so every number they check is one the service actually returned.

Usage:  python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from pocrm.inference import indifference_skeleton
from pocrm.orderings import DoseGrid, standard_orderings
from pocrm.service import create_app

HERE = Path(__file__).resolve().parent
OUT = HERE.parent / "tests" / "fixtures" / "session.json"

GRID = DoseGrid(3, 2)

CONFIG = {
    "rows": GRID.rows,
    "cols": GRID.cols,
    "theta": 0.3,
    "cohort_size": 3,
    "n_cohorts": 5,
    "method": "selection",
    "skeleton": list(indifference_skeleton(GRID.n_doses, 0.3).alpha),
    "prior": {"mean": 0.0, "variance": 1.34},
    "orderings": [list(s) for s in standard_orderings(GRID).sequences],
    "start_dose": 1,
    "no_skip": True,
    "coherency_tolerance": 0.0,
}

# Candidate outcome scripts, tried in order until one produces at least one
# cohort with coherency events and at least one without.  Each entry is the
# DLT toggles for the cohort; the dose is always the service's next_dose, as
# a clinician following the recommendation would dose.
CANDIDATE_SCRIPTS = [
    [[0, 0, 0], [0, 0, 1], [0, 0, 0], [0, 1, 1], [0, 0, 0]],
    [[0, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 0], [1, 1, 0]],
    [[0, 0, 1], [0, 0, 0], [0, 1, 0], [0, 0, 0], [0, 0, 1]],
    [[0, 0, 0], [0, 0, 0], [0, 1, 1], [0, 0, 0], [0, 1, 0]],
]


def run_session(client: TestClient, script: list[list[int]]) -> dict:
    created = client.post("/trials", json=CONFIG)
    created.raise_for_status()
    trial_id = created.json()["id"]

    steps = []
    for toggles in script:
        trial_doc = client.get(f"/trials/{trial_id}").json()
        body = {"dose": trial_doc["next_dose"], "dlts": [bool(v) for v in toggles]}
        dryrun = client.post(f"/trials/{trial_id}/cohorts", params={"dryrun": 1}, json=body)
        dryrun.raise_for_status()
        commit = client.post(f"/trials/{trial_id}/cohorts", json=body)
        commit.raise_for_status()
        steps.append(
            {
                "body": body,
                "dryrun": dryrun.json(),
                "commit": commit.json(),
                "trial_before": trial_doc,
            }
        )

    final_doc = client.get(f"/trials/{trial_id}").json()
    coherency = client.get(f"/trials/{trial_id}/coherency").json()

    # Error-path fixtures: one more cohort on the now-complete trial (409),
    # a wrong-length DLT list recorded earlier would mutate state, so take the
    # 422 from the completed trial check order: dose range is checked after the
    # completion guard, so use a fresh trial for the 422s.
    conflict = client.post(f"/trials/{trial_id}/cohorts", json={"dose": 1, "dlts": [False] * 3})
    assert conflict.status_code == 409, conflict.status_code

    fresh = client.post("/trials", json=CONFIG).json()
    bad_dose = client.post(
        f"/trials/{fresh['id']}/cohorts", json={"dose": 99, "dlts": [False] * 3}
    )
    assert bad_dose.status_code == 422, bad_dose.status_code
    bad_len = client.post(
        f"/trials/{fresh['id']}/cohorts", json={"dose": 1, "dlts": [False, True]}
    )
    assert bad_len.status_code == 422, bad_len.status_code
    missing = client.get("/trials/not-a-trial")
    assert missing.status_code == 404, missing.status_code
    client.delete(f"/trials/{fresh['id']}")

    return {
        "config": CONFIG,
        "created": created.json(),
        "steps": steps,
        "final": final_doc,
        "coherency": coherency,
        "errors": {
            "conflict": {"status": conflict.status_code, "body": conflict.json()},
            "bad_dose": {"status": bad_dose.status_code, "body": bad_dose.json()},
            "bad_len": {"status": bad_len.status_code, "body": bad_len.json()},
            "missing": {"status": missing.status_code, "body": missing.json()},
        },
    }


def main() -> int:
    for script in CANDIDATE_SCRIPTS:
        with TestClient(create_app()) as client:
            session = run_session(client, script)
        with_events = [s["commit"]["cohort_index"] for s in session["steps"] if s["commit"]["events"]]
        without = [s["commit"]["cohort_index"] for s in session["steps"] if not s["commit"]["events"]]
        print(f"script {script}: events at cohorts {with_events}, none at {without}")
        if with_events and without:
            OUT.write_text(json.dumps(session, indent=2) + "\n")
            print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")
            return 0
    print("no candidate script produced a mixed session", file=sys.stderr)
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
