/**
 * Typed client for the trial-conduct HTTP service.
 *
 * Every method resolves to the service's JSON body untouched. The dashboard
 * renders those numbers verbatim — nothing in this package recomputes an
 * estimate, a weight, or an alert magnitude on the client side.
 */

// ─── Wire types ──────────────────────────────────────────────────────────────

export type Method = "selection" | "averaging";

export type TrialStatus = "awaiting-outcomes" | "complete";

export type EventKind =
  | "estimation-up-after-no-DLT"
  | "estimation-down-after-DLT"
  | "escalation-after-DLT"
  | "de-escalation-after-no-DLT";

/** Posterior summary the engine produces after each cohort. */
export interface Snapshot {
  method: Method;
  estimates: number[];
  ordering_probs: number[];
  posterior_means: number[];
  selected_ordering: number | null;
  recommended_dose: number | null;
}

/** One wrong-direction move flagged by the coherency auditor. */
export interface CoherencyEvent {
  cohort: number;
  dose: number;
  dlt_observed: boolean;
  affected_dose: number;
  kind: EventKind;
  previous: number;
  new: number;
  magnitude: number;
}

export interface PriorSpec {
  mean: number;
  variance: number;
}

/** Design sent when opening a trial; the service echoes it back fully populated. */
export interface TrialConfig {
  rows: number;
  cols: number;
  theta: number;
  cohort_size: number;
  n_cohorts: number;
  method: Method;
  skeleton: number[];
  prior: PriorSpec;
  orderings: number[][];
  prior_weights?: number[];
  start_dose?: number;
  no_skip?: boolean;
  coherency_tolerance?: number;
}

export interface CreatedTrial {
  id: string;
  status: TrialStatus;
  created: string;
  next_dose: number | null;
  snapshot: Snapshot;
}

export interface CohortBody {
  dose: number;
  dlts: boolean[];
}

/** Response to posting a cohort — identical shape for dry-run and commit. */
export interface CohortResult {
  cohort_index: number;
  dose: number;
  dlts: boolean[];
  snapshot: Snapshot;
  next_dose: number | null;
  status: TrialStatus;
  recommendation: number | null;
  events: CoherencyEvent[];
}

export interface TrialCohort {
  index: number;
  dose: number;
  dlts: boolean[];
  snapshot: Snapshot;
}

export interface TrialDocument {
  id: string;
  status: TrialStatus;
  created: string;
  updated: string;
  config: TrialConfig;
  initial_snapshot: Snapshot;
  cohorts: TrialCohort[];
  next_dose: number | null;
  recommendation: number | null;
}

export interface CoherencyReport {
  flag: boolean;
  cohorts_with_events: number;
  max_magnitude: number;
  events: CoherencyEvent[];
}

// ─── Errors ──────────────────────────────────────────────────────────────────

/** Non-2xx response, carrying the service's `detail` string for inline display. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

// ─── Client ──────────────────────────────────────────────────────────────────

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  /** Service origin, e.g. "http://127.0.0.1:8000"; default same-origin. */
  baseUrl?: string;
  /** Bearer token for the mutating routes, when the service requires one. */
  token?: string;
  /** Injectable fetch — tests replay recorded service bodies through this. */
  fetchImpl?: FetchLike;
}

export class TrialClient {
  private readonly base: string;
  private readonly token: string | undefined;
  private readonly fetchImpl: FetchLike;

  constructor(opts: ClientOptions = {}) {
    this.base = (opts.baseUrl ?? "").replace(/\/+$/, "");
    this.token = opts.token;
    this.fetchImpl = opts.fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const res = await this.fetchImpl(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let detail = res.statusText || `status ${res.status}`;
      try {
        const doc = (await res.json()) as { detail?: unknown };
        if (typeof doc.detail === "string") detail = doc.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  createTrial(config: TrialConfig): Promise<CreatedTrial> {
    return this.request("POST", "/trials", config);
  }

  getTrial(id: string): Promise<TrialDocument> {
    return this.request("GET", `/trials/${encodeURIComponent(id)}`);
  }

  /**
   * Post one cohort's outcomes. With `dryRun` the service previews the update
   * without committing; the response body is identical to what the same
   * commit would return.
   */
  postCohort(id: string, body: CohortBody, opts: { dryRun?: boolean } = {}): Promise<CohortResult> {
    const suffix = opts.dryRun ? "?dryrun=1" : "";
    return this.request("POST", `/trials/${encodeURIComponent(id)}/cohorts${suffix}`, body);
  }

  getCoherency(id: string): Promise<CoherencyReport> {
    return this.request("GET", `/trials/${encodeURIComponent(id)}/coherency`);
  }

  deleteTrial(id: string): Promise<{ deleted: string }> {
    return this.request("DELETE", `/trials/${encodeURIComponent(id)}`);
  }
}
