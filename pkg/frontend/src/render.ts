// HTML renderers for the conduct dashboard. Pure functions from view-model to
// markup: no DOM access, so the same code runs in tests and in the browser.
// Every numeric span carries the raw server value in `data-value`; the visible
// text is that value through one fixed formatter.

import type { PreviewModel, TrialViewModel, WeightBar } from "./viewmodel";
import type { CoherencyEvent } from "./api";

export const fmtProb = (x: number): string => x.toFixed(4);

export const fmtDelta = (d: number): string => `${d >= 0 ? "+" : ""}${d.toFixed(4)}`;

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const num = (value: number, cls: string): string =>
  `<span class="${cls}" data-value="${value}">${fmtProb(value)}</span>`;

// ─── Status banner ───────────────────────────────────────────────────────────

export function renderStatus(vm: TrialViewModel): string {
  const progress = `cohort ${vm.cohortsEntered} of ${vm.totalCohorts}`;
  if (vm.status === "complete") {
    const rec = vm.recommendation === null ? "none" : `d${vm.recommendation}`;
    return `<div class="banner complete">Trial complete (${progress}) — recommended dose <strong data-field="recommendation" data-value="${vm.recommendation ?? ""}">${rec}</strong></div>`;
  }
  const next = vm.nextDose === null ? "—" : `d${vm.nextDose}`;
  return `<div class="banner running">Awaiting outcomes (${progress}) — next dose <strong data-field="next-dose" data-value="${vm.nextDose ?? ""}">${next}</strong></div>`;
}

// ─── Heatmap ─────────────────────────────────────────────────────────────────

function heatClass(estimate: number, theta: number): string {
  if (estimate > theta + 0.1) return "hot";
  if (estimate >= theta - 0.1) return "warm";
  return "cool";
}

/**
 * Dose grid with drug A levels as rows, ascending downward (level 1 on the
 * first data row), drug B levels as columns left to right.
 */
export function renderHeatmap(vm: TrialViewModel): string {
  const header = ["<th></th>"];
  for (let c = 1; c <= vm.cols; c++) header.push(`<th>B${c}</th>`);
  const body: string[] = [];
  for (let r = 1; r <= vm.rows; r++) {
    const tds = [`<th>A${r}</th>`];
    for (const cell of vm.cells.filter((c) => c.row === r)) {
      const classes = ["cell", heatClass(cell.estimate, vm.theta)];
      if (cell.isRecommended) classes.push("recommended");
      const delta =
        cell.delta === null
          ? ""
          : `<span class="delta" data-value="${cell.delta}">${fmtDelta(cell.delta)}</span>`;
      tds.push(
        `<td class="${classes.join(" ")}" data-dose="${cell.dose}">` +
          `<span class="dose-label">d${cell.dose}</span>` +
          num(cell.estimate, "est") +
          delta +
          `</td>`,
      );
    }
    body.push(`<tr>${tds.join("")}</tr>`);
  }
  return (
    `<table class="heatmap"><thead><tr>${header.join("")}</tr></thead>` +
    `<tbody>${body.join("")}</tbody></table>`
  );
}

// ─── Ordering weights ────────────────────────────────────────────────────────

function weightRow(bar: WeightBar): string {
  const pct = Math.round(bar.weight * 1000) / 10;
  const label = `m${bar.ordering}: ${bar.sequence.join("→")}`;
  const cls = bar.selected ? "weight selected" : "weight";
  return (
    `<div class="${cls}" data-ordering="${bar.ordering}">` +
    `<span class="weight-label">${escapeHtml(label)}${bar.selected ? " ★" : ""}</span>` +
    `<span class="bar"><span class="fill" style="width:${pct}%"></span></span>` +
    num(bar.weight, "weight-value") +
    `</div>`
  );
}

export function renderWeights(vm: TrialViewModel): string {
  return `<div class="weights">${vm.weights.map(weightRow).join("")}</div>`;
}

// ─── Coherency alerts ────────────────────────────────────────────────────────

function describeEvent(e: CoherencyEvent): string {
  const outcome = e.dlt_observed ? "a DLT" : "no DLT";
  return `After ${outcome} at d${e.dose} (cohort ${e.cohort}), the estimate for d${e.affected_dose} moved the wrong way:`;
}

export function renderAlerts(vm: TrialViewModel): string {
  if (vm.alerts.length === 0) return "";
  const items = vm.alerts.map((alert, i) => {
    const e = alert.event;
    const ack = alert.acknowledged
      ? `<span class="acked">acknowledged</span>`
      : `<button data-action="ack-alert" data-index="${i}">Acknowledge</button>`;
    return (
      `<div class="alert ${alert.acknowledged ? "acked" : "open"}" data-kind="${e.kind}">` +
      `<p>${describeEvent(e)} ` +
      num(e.previous, "prev") +
      ` → ` +
      num(e.new, "new") +
      ` (Δ ` +
      num(e.magnitude, "magnitude") +
      `)</p>${ack}</div>`
    );
  });
  const blocking = vm.alerts.some((a) => !a.acknowledged);
  return (
    `<div class="alerts${blocking ? " blocking" : ""}">` +
    `<h3>Coherency alerts</h3>${items.join("")}</div>`
  );
}

// ─── Outcome entry form ──────────────────────────────────────────────────────

export function renderForm(vm: TrialViewModel, blocked: boolean): string {
  if (vm.status === "complete") return "";
  const doses = [];
  for (const cell of vm.cells) {
    const sel = vm.form.dose === cell.dose ? " selected" : "";
    doses.push(`<option value="${cell.dose}"${sel}>d${cell.dose} (A${cell.row}, B${cell.col})</option>`);
  }
  const toggles = vm.form.toggles
    .map(
      (on, i) =>
        `<label class="toggle"><input type="checkbox" data-action="toggle-dlt" data-index="${i}"` +
        `${on ? " checked" : ""}${blocked ? " disabled" : ""}/> patient ${i + 1} DLT</label>`,
    )
    .join("");
  const err = vm.form.error ? `<div class="form-error">${escapeHtml(vm.form.error)}</div>` : "";
  const disabled = blocked || vm.form.busy ? " disabled" : "";
  return (
    `<form class="entry" data-blocked="${blocked}">` +
    `<label>Dose <select data-action="pick-dose"${disabled}>${doses.join("")}</select></label>` +
    `<fieldset${disabled ? " disabled" : ""}>${toggles}</fieldset>` +
    err +
    `<button type="button" data-action="dry-run"${disabled}>Preview (dry run)</button>` +
    `<button type="button" data-action="commit"${disabled}>Record cohort</button>` +
    `</form>`
  );
}

// ─── Dry-run preview panel ───────────────────────────────────────────────────

export function renderPreview(p: PreviewModel | null): string {
  if (!p) return "";
  const ests = p.estimates
    .map((v, i) => `<li>d${i + 1}: ${num(v, "preview-est")}</li>`)
    .join("");
  const next =
    p.status === "complete"
      ? `would complete the trial; recommended dose <strong data-value="${p.recommendation ?? ""}">d${p.recommendation}</strong>`
      : `next dose would be <strong data-value="${p.nextDose ?? ""}">d${p.nextDose}</strong>`;
  const flags =
    p.events.length === 0
      ? `<p class="no-events">No coherency events.</p>`
      : `<p class="has-events">${p.events.length} coherency event(s) would be flagged.</p>`;
  return (
    `<aside class="preview"><h3>Dry-run preview — d${p.dose}, ` +
    `[${p.dlts.map((d) => (d ? "DLT" : "ok")).join(", ")}]</h3>` +
    `<ul>${ests}</ul><p>${next}</p>${flags}` +
    `<button type="button" data-action="close-preview">Close preview</button></aside>`
  );
}

// ─── Page assembly ───────────────────────────────────────────────────────────

export function renderApp(vm: TrialViewModel, preview: PreviewModel | null = null): string {
  const blocked = vm.alerts.some((a) => !a.acknowledged);
  return (
    `<div class="conduct" data-trial="${escapeHtml(vm.trialId)}">` +
    renderStatus(vm) +
    renderAlerts(vm) +
    `<section class="grid-pane">${renderHeatmap(vm)}</section>` +
    `<section class="weights-pane"><h3>Ordering weights (${escapeHtml(vm.method)})</h3>${renderWeights(vm)}</section>` +
    `<section class="entry-pane">${renderForm(vm, blocked)}${renderPreview(preview)}</section>` +
    `</div>`
  );
}
