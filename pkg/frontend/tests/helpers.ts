// Shared test plumbing: typed access to the recorded service session and a
// stub fetch that replays those recorded bodies.

import raw from "./fixtures/session.json";
import type {
  CoherencyReport,
  CohortResult,
  CreatedTrial,
  FetchLike,
  TrialConfig,
  TrialDocument,
} from "../src/api";

export interface SessionStep {
  body: { dose: number; dlts: boolean[] };
  dryrun: CohortResult;
  commit: CohortResult;
  trial_before: TrialDocument;
}

export interface ErrorFixture {
  status: number;
  body: { detail: string };
}

export interface SessionFixture {
  config: TrialConfig;
  created: CreatedTrial;
  steps: SessionStep[];
  final: TrialDocument;
  coherency: CoherencyReport;
  errors: {
    conflict: ErrorFixture;
    bad_dose: ErrorFixture;
    bad_len: ErrorFixture;
    missing: ErrorFixture;
  };
}

export const session = raw as unknown as SessionFixture;

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: unknown;
}

/**
 * Stub fetch that pops queued responses in order and records every call.
 * Throws if the client requests more than was queued — the scripted session
 * must not invent extra round-trips.
 */
export function queuedFetch(queue: Array<{ match: string; response: Response }>) {
  const calls: RecordedCall[] = [];
  const remaining = queue.slice();
  const impl: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    calls.push({
      url,
      method,
      headers: (init?.headers as Record<string, string>) ?? {},
      body: typeof init?.body === "string" ? JSON.parse(init.body) : undefined,
    });
    const next = remaining.shift();
    if (!next) throw new Error(`unexpected request ${method} ${url}`);
    const got = `${method} ${url}`;
    if (got !== next.match) throw new Error(`expected ${next.match}, got ${got}`);
    return next.response;
  };
  return { impl, calls, remaining };
}

/** All raw numbers rendered inside spans of one class, in document order. */
export function valuesOf(html: string, cls: string): number[] {
  const re = new RegExp(`class="${cls}" data-value="([^"]+)"`, "g");
  const out: number[] = [];
  for (const m of html.matchAll(re)) out.push(Number(m[1]));
  return out;
}
