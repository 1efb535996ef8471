import { describe, expect, it } from "vitest";

import {
  acknowledgeAlert,
  applyCohortResult,
  buildViewModel,
  previewModel,
} from "../src/viewmodel";
import {
  fmtDelta,
  fmtProb,
  renderAlerts,
  renderApp,
  renderForm,
  renderHeatmap,
  renderPreview,
  renderStatus,
  renderWeights,
} from "../src/render";
import { session, valuesOf } from "./helpers";

const midway = buildViewModel(session.steps[2].trial_before);
const flaggedStep = session.steps[2];
const flagged = applyCohortResult(buildViewModel(flaggedStep.trial_before), flaggedStep.commit);

describe("renderHeatmap", () => {
  it("orders rows by drug A level ascending downward", () => {
    const html = renderHeatmap(midway);
    const rowHeads = [...html.matchAll(/<th>A(\d+)<\/th>/g)].map((m) => Number(m[1]));
    expect(rowHeads).toEqual([1, 2, 3]);
    const doses = [...html.matchAll(/data-dose="(\d+)"/g)].map((m) => Number(m[1]));
    expect(doses).toEqual([1, 2, 3, 4, 5, 6]);
  });

  it("prints each server estimate through the display formatter, raw value attached", () => {
    const html = renderHeatmap(midway);
    const shown = valuesOf(html, "est");
    expect(shown).toEqual(midway.cells.map((c) => c.estimate));
    for (const cell of midway.cells) {
      expect(html).toContain(`data-value="${cell.estimate}">${fmtProb(cell.estimate)}</span>`);
    }
  });

  it("attaches the delta spans once a previous snapshot exists", () => {
    const html = renderHeatmap(midway);
    const deltas = [...html.matchAll(/class="delta" data-value="([^"]+)">([^<]+)</g)];
    expect(deltas.length).toBe(6);
    deltas.forEach((m, i) => {
      expect(Number(m[1])).toBe(midway.cells[i].delta);
      expect(m[2]).toBe(fmtDelta(midway.cells[i].delta as number));
    });
  });

  it("marks exactly the highlighted dose as recommended", () => {
    const html = renderHeatmap(midway);
    const hits = [...html.matchAll(/<td class="[^"]*recommended[^"]*" data-dose="(\d+)"/g)];
    expect(hits.map((m) => Number(m[1]))).toEqual([midway.nextDose]);
  });
});

describe("renderWeights", () => {
  it("one bar per candidate ordering, weight value verbatim", () => {
    const html = renderWeights(midway);
    expect(valuesOf(html, "weight-value")).toEqual(midway.weights.map((w) => w.weight));
    for (const w of midway.weights) {
      expect(html).toContain(`m${w.ordering}: ${w.sequence.join("→")}`);
    }
  });

  it("stars the modal ordering under selection", () => {
    const selected = midway.weights.find((w) => w.selected);
    const html = renderWeights(midway);
    if (selected) {
      expect(html).toContain(`class="weight selected" data-ordering="${selected.ordering}"`);
    }
    expect([...html.matchAll(/class="weight selected"/g)].length).toBe(selected ? 1 : 0);
  });
});

describe("renderAlerts", () => {
  it("is empty when the auditor reported nothing", () => {
    expect(renderAlerts(midway)).toBe("");
  });

  it("shows before/after/magnitude for each event and blocks until acknowledged", () => {
    const html = renderAlerts(flagged);
    expect(html).toContain('class="alerts blocking"');
    expect(valuesOf(html, "prev")).toEqual(flagged.alerts.map((a) => a.event.previous));
    expect(valuesOf(html, "new")).toEqual(flagged.alerts.map((a) => a.event.new));
    expect(valuesOf(html, "magnitude")).toEqual(flagged.alerts.map((a) => a.event.magnitude));
    expect([...html.matchAll(/data-action="ack-alert"/g)].length).toBe(2);

    const acked = acknowledgeAlert(acknowledgeAlert(flagged, 0), 1);
    const after = renderAlerts(acked);
    expect(after).not.toContain("blocking");
    expect(after).not.toContain("ack-alert");
    expect([...after.matchAll(/acknowledged/g)].length).toBeGreaterThanOrEqual(2);
  });
});

describe("renderForm", () => {
  it("disables entry while alerts block", () => {
    const html = renderForm(flagged, true);
    expect(html).toContain('data-blocked="true"');
    expect(html).toContain("<fieldset disabled>");
    expect(html).toContain('data-action="commit" disabled');
  });

  it("pre-selects the recommended next dose", () => {
    const html = renderForm(midway, false);
    expect(html).toContain(`<option value="${midway.nextDose}" selected>`);
    expect([...html.matchAll(/type="checkbox"/g)].length).toBe(midway.cohortSize);
  });

  it("renders the service detail as an inline, escaped error", () => {
    const vm = { ...midway, form: { ...midway.form, error: session.errors.bad_len.body.detail } };
    expect(renderForm(vm, false)).toContain("expected 3 DLT booleans, got 2");
    const hostile = { ...midway, form: { ...midway.form, error: '<img src=x onerror="1">' } };
    const html = renderForm(hostile, false);
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img");
  });

  it("disappears when the trial is complete", () => {
    const done = buildViewModel(session.final);
    expect(renderForm(done, false)).toBe("");
  });
});

describe("renderStatus", () => {
  it("shows progress and the next dose while running", () => {
    const html = renderStatus(midway);
    expect(html).toContain(`cohort ${midway.cohortsEntered} of ${midway.totalCohorts}`);
    expect(html).toContain(`data-field="next-dose" data-value="${midway.nextDose}"`);
  });

  it("shows the final recommendation when complete", () => {
    const done = buildViewModel(session.final);
    const html = renderStatus(done);
    expect(html).toContain("Trial complete");
    expect(html).toContain(
      `data-field="recommendation" data-value="${session.final.recommendation}"`,
    );
  });
});

describe("renderPreview", () => {
  it("lists every previewed estimate and never commits", () => {
    const p = previewModel(session.steps[3].dryrun);
    const html = renderPreview(p);
    expect(valuesOf(html, "preview-est")).toEqual(p.estimates);
    expect(html).toContain('data-action="close-preview"');
    expect(renderPreview(null)).toBe("");
  });
});

describe("renderApp", () => {
  it("includes the alert panel exactly when alerts exist", () => {
    expect(renderApp(flagged)).toContain('class="alerts blocking"');
    expect(renderApp(midway)).not.toContain('class="alerts');
  });
});
