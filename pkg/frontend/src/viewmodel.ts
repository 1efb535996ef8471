/**
 * View-model layer: turns service responses into the exact structures the
 * renderer displays. All numbers here are copies of API fields — the only
 * arithmetic is the previous→current difference shown next to each estimate,
 * and both of its operands come from server snapshots.
 */

import type {
  CoherencyEvent,
  CoherencyReport,
  CohortResult,
  Method,
  Snapshot,
  TrialDocument,
  TrialStatus,
} from "./api";

// ─── Types ───────────────────────────────────────────────────────────────────

export interface DoseCell {
  dose: number; // 1-based, row-major over the grid
  row: number; // drug A level, 1-based
  col: number; // drug B level, 1-based
  estimate: number;
  previous: number | null;
  delta: number | null;
  isRecommended: boolean;
}

export interface WeightBar {
  ordering: number; // 1-based index into the candidate orderings
  sequence: number[];
  weight: number;
  selected: boolean;
}

export interface CoherencyAlert {
  event: CoherencyEvent;
  acknowledged: boolean;
}

export interface FormState {
  dose: number | null;
  toggles: boolean[];
  error: string | null;
  busy: boolean;
}

export interface TrialViewModel {
  trialId: string;
  status: TrialStatus;
  method: Method;
  rows: number;
  cols: number;
  theta: number;
  cohortsEntered: number;
  totalCohorts: number;
  cohortSize: number;
  cells: DoseCell[];
  nextDose: number | null;
  recommendation: number | null;
  weights: WeightBar[];
  alerts: CoherencyAlert[];
  form: FormState;
}

/** Dry-run panel: a verbatim slice of the service's preview response. */
export interface PreviewModel {
  dose: number;
  dlts: boolean[];
  estimates: number[];
  nextDose: number | null;
  status: TrialStatus;
  recommendation: number | null;
  events: CoherencyEvent[];
}

// ─── Snapshot selection ──────────────────────────────────────────────────────

export function latestSnapshot(doc: TrialDocument): Snapshot {
  const last = doc.cohorts[doc.cohorts.length - 1];
  return last ? last.snapshot : doc.initial_snapshot;
}

function previousSnapshot(doc: TrialDocument): Snapshot | null {
  if (doc.cohorts.length === 0) return null;
  if (doc.cohorts.length === 1) return doc.initial_snapshot;
  return doc.cohorts[doc.cohorts.length - 2].snapshot;
}

// ─── Builders ────────────────────────────────────────────────────────────────

function buildCells(
  latest: Snapshot,
  previous: Snapshot | null,
  rows: number,
  cols: number,
  highlighted: number | null,
): DoseCell[] {
  return latest.estimates.map((estimate, i) => {
    const dose = i + 1;
    const prev = previous ? previous.estimates[i] : null;
    return {
      dose,
      row: Math.floor(i / cols) + 1,
      col: (i % cols) + 1,
      estimate,
      previous: prev,
      delta: prev === null ? null : estimate - prev,
      isRecommended: dose === highlighted,
    };
  });
}

function buildWeights(latest: Snapshot, orderings: number[][]): WeightBar[] {
  return latest.ordering_probs.map((weight, i) => ({
    ordering: i + 1,
    sequence: orderings[i] ?? [],
    weight,
    selected: latest.selected_ordering === i + 1,
  }));
}

function freshForm(nextDose: number | null, cohortSize: number): FormState {
  return {
    dose: nextDose,
    toggles: Array.from({ length: cohortSize }, () => false),
    error: null,
    busy: false,
  };
}

/**
 * Build the dashboard state from a trial document, optionally surfacing the
 * auditor's events for the most recent cohort as alerts (the report endpoint
 * returns the whole history; only the latest transition is alert-worthy on
 * first load).
 */
export function buildViewModel(doc: TrialDocument, report?: CoherencyReport): TrialViewModel {
  const latest = latestSnapshot(doc);
  const highlighted = doc.status === "complete" ? doc.recommendation : doc.next_dose;
  const lastCohort = doc.cohorts.length;
  const events = report ? report.events.filter((e) => e.cohort === lastCohort) : [];
  return {
    trialId: doc.id,
    status: doc.status,
    method: doc.config.method,
    rows: doc.config.rows,
    cols: doc.config.cols,
    theta: doc.config.theta,
    cohortsEntered: doc.cohorts.length,
    totalCohorts: doc.config.n_cohorts,
    cohortSize: doc.config.cohort_size,
    cells: buildCells(latest, previousSnapshot(doc), doc.config.rows, doc.config.cols, highlighted),
    nextDose: doc.next_dose,
    recommendation: doc.recommendation,
    weights: buildWeights(latest, doc.config.orderings),
    alerts: events.map((event) => ({ event, acknowledged: false })),
    form: freshForm(doc.next_dose, doc.config.cohort_size),
  };
}

/**
 * Fold a committed cohort response into the model. Called only with a real
 * server response — the UI never updates optimistically.
 */
export function applyCohortResult(vm: TrialViewModel, result: CohortResult): TrialViewModel {
  const previous: Snapshot | null = {
    // Only `estimates` is read downstream; carry the rest for type shape.
    method: vm.method,
    estimates: vm.cells.map((c) => c.estimate),
    ordering_probs: vm.weights.map((w) => w.weight),
    posterior_means: [],
    selected_ordering: null,
    recommended_dose: null,
  };
  const highlighted = result.status === "complete" ? result.recommendation : result.next_dose;
  return {
    ...vm,
    status: result.status,
    cohortsEntered: result.cohort_index,
    cells: buildCells(result.snapshot, previous, vm.rows, vm.cols, highlighted),
    nextDose: result.next_dose,
    recommendation: result.recommendation,
    weights: buildWeights(result.snapshot, vm.weights.map((w) => w.sequence)),
    alerts: result.events.map((event) => ({ event, acknowledged: false })),
    form: freshForm(result.next_dose, vm.cohortSize),
  };
}

/** Verbatim preview panel from a dry-run response; commits nothing. */
export function previewModel(result: CohortResult): PreviewModel {
  return {
    dose: result.dose,
    dlts: result.dlts.slice(),
    estimates: result.snapshot.estimates.slice(),
    nextDose: result.next_dose,
    status: result.status,
    recommendation: result.recommendation,
    events: result.events.slice(),
  };
}

// ─── Alerts ──────────────────────────────────────────────────────────────────

export function acknowledgeAlert(vm: TrialViewModel, index: number): TrialViewModel {
  const alerts = vm.alerts.map((a, i) => (i === index ? { ...a, acknowledged: true } : a));
  return { ...vm, alerts };
}

/** Unacknowledged alerts block further outcome entry. */
export function hasBlockingAlerts(vm: TrialViewModel): boolean {
  return vm.alerts.some((a) => !a.acknowledged);
}

// ─── Form reducers ───────────────────────────────────────────────────────────

export function setFormDose(vm: TrialViewModel, dose: number | null): TrialViewModel {
  return { ...vm, form: { ...vm.form, dose, error: null } };
}

export function setFormToggle(vm: TrialViewModel, patient: number, on: boolean): TrialViewModel {
  const toggles = vm.form.toggles.map((t, i) => (i === patient ? on : t));
  return { ...vm, form: { ...vm.form, toggles, error: null } };
}

export function setFormError(vm: TrialViewModel, error: string | null): TrialViewModel {
  return { ...vm, form: { ...vm.form, error, busy: false } };
}

export function setFormBusy(vm: TrialViewModel, busy: boolean): TrialViewModel {
  return { ...vm, form: { ...vm.form, busy } };
}
