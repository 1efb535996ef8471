// Browser entry point. Wires the fetch client, view-model reducers, and
// renderers together. Every repaint follows a server response — there is no
// optimistic update path, and one trial is shown at a time (picked via the
// URL hash, e.g. index.html#tr-0001).

import { ApiError, TrialClient, type TrialConfig } from "./api";
import {
  acknowledgeAlert,
  applyCohortResult,
  buildViewModel,
  hasBlockingAlerts,
  previewModel,
  setFormBusy,
  setFormDose,
  setFormError,
  setFormToggle,
  type PreviewModel,
  type TrialViewModel,
} from "./viewmodel";
import { escapeHtml, renderApp } from "./render";

// Convenience design for the "open demo trial" button: a 3x2 grid with the
// six standard candidate orderings and an indifference-interval skeleton at
// theta = 0.3, matching the service's own defaults for small grids.
const DEMO_CONFIG: TrialConfig = {
  rows: 3,
  cols: 2,
  theta: 0.3,
  cohort_size: 3,
  n_cohorts: 20,
  method: "averaging",
  skeleton: [
    0.12252935822023314, 0.2039560076328238, 0.3, 0.4018194361295181,
    0.5013464477551696, 0.5928140468687035,
  ],
  prior: { mean: 0.0, variance: 1.34 },
  orderings: [
    [1, 2, 3, 4, 5, 6],
    [1, 3, 5, 2, 4, 6],
    [1, 3, 2, 5, 4, 6],
    [1, 2, 3, 4, 5, 6],
    [1, 2, 3, 5, 4, 6],
    [1, 3, 2, 4, 5, 6],
  ],
  start_dose: 1,
  no_skip: true,
};

interface AppState {
  vm: TrialViewModel | null;
  preview: PreviewModel | null;
  fatal: string | null;
}

const state: AppState = { vm: null, preview: null, fatal: null };

const client = new TrialClient({
  baseUrl: (window as { CONDUCT_API_BASE?: string }).CONDUCT_API_BASE ?? "",
  token: (window as { CONDUCT_API_TOKEN?: string }).CONDUCT_API_TOKEN,
});

function root(): HTMLElement {
  const el = document.getElementById("app");
  if (!el) throw new Error("missing #app container");
  return el;
}

function paint(): void {
  if (state.fatal) {
    root().innerHTML = `<div class="banner error">${escapeHtml(state.fatal)}</div>${splash()}`;
    return;
  }
  if (!state.vm) {
    root().innerHTML = splash();
    return;
  }
  root().innerHTML = renderApp(state.vm, state.preview);
}

function splash(): string {
  return (
    `<div class="splash"><h2>No trial open</h2>` +
    `<p>Append <code>#&lt;trial-id&gt;</code> to the URL to attach to a running trial, or</p>` +
    `<button data-action="new-trial">Open demo trial</button></div>`
  );
}

async function loadTrial(id: string): Promise<void> {
  try {
    const doc = await client.getTrial(id);
    const report = await client.getCoherency(id);
    state.vm = buildViewModel(doc, report);
    state.preview = null;
    state.fatal = null;
  } catch (err) {
    state.vm = null;
    state.fatal = err instanceof ApiError ? err.message : `failed to load trial: ${err}`;
  }
  paint();
}

async function newDemoTrial(): Promise<void> {
  try {
    const created = await client.createTrial(DEMO_CONFIG);
    window.location.hash = created.id;
    await loadTrial(created.id);
  } catch (err) {
    state.fatal = err instanceof ApiError ? err.message : `failed to create trial: ${err}`;
    paint();
  }
}

async function submitCohort(dryRun: boolean): Promise<void> {
  const vm = state.vm;
  if (!vm || hasBlockingAlerts(vm) || vm.form.busy) return;
  if (vm.form.dose === null) {
    state.vm = setFormError(vm, "pick a dose first");
    paint();
    return;
  }
  state.vm = setFormBusy(vm, true);
  paint();
  try {
    const result = await client.postCohort(
      vm.trialId,
      { dose: vm.form.dose, dlts: vm.form.toggles.slice() },
      { dryRun },
    );
    if (dryRun) {
      state.preview = previewModel(result);
      state.vm = setFormBusy(state.vm!, false);
    } else {
      state.vm = applyCohortResult(state.vm!, result);
      state.preview = null;
    }
  } catch (err) {
    if (err instanceof ApiError) {
      state.vm = setFormError(state.vm!, err.detail);
    } else {
      state.vm = setFormError(state.vm!, `request failed: ${err}`);
    }
  }
  paint();
}

function onClick(ev: Event): void {
  const target = (ev.target as HTMLElement).closest("[data-action]");
  if (!(target instanceof HTMLElement)) return;
  switch (target.dataset.action) {
    case "new-trial":
      void newDemoTrial();
      break;
    case "ack-alert":
      if (state.vm) {
        state.vm = acknowledgeAlert(state.vm, Number(target.dataset.index));
        paint();
      }
      break;
    case "dry-run":
      void submitCohort(true);
      break;
    case "commit":
      void submitCohort(false);
      break;
    case "close-preview":
      state.preview = null;
      paint();
      break;
    default:
      break;
  }
}

function onChange(ev: Event): void {
  const target = ev.target;
  if (!(target instanceof HTMLElement) || !state.vm) return;
  const action = target.dataset.action;
  if (action === "pick-dose" && target instanceof HTMLSelectElement) {
    state.vm = setFormDose(state.vm, Number(target.value));
  } else if (action === "toggle-dlt" && target instanceof HTMLInputElement) {
    state.vm = setFormToggle(state.vm, Number(target.dataset.index), target.checked);
  }
  // No repaint here: the controls already reflect the user's input, and a
  // repaint mid-interaction would drop checkbox focus.
}

export function start(): void {
  root().addEventListener("click", onClick);
  root().addEventListener("change", onChange);
  window.addEventListener("hashchange", () => {
    const id = window.location.hash.slice(1);
    if (id) void loadTrial(id);
  });
  const id = window.location.hash.slice(1);
  if (id) {
    void loadTrial(id);
  } else {
    paint();
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}
