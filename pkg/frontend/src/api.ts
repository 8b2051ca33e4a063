/**
 * Typed client for the bench server's /v1 wire API.
 *
 * Every reply keeps the raw response text next to the parsed payload: the
 * bench promises that displayed results byte-match what the server sent, so
 * the UI (and its tests) can compare `raw` against reference files instead
 * of trusting a re-serialization.
 *
 * Errors: non-2xx replies raise WireError carrying the HTTP status and the
 * server's `detail` string, which the panels surface inline.
 */

export interface Dials {
  theta_l: number;
  phi_l: number;
  alpha: number;
  beta: number;
}

export interface AnglesBody {
  a?: number;
  a_prime?: number;
  b?: number;
  b_prime?: number;
}

export interface SessionConfig {
  apparatus?: Record<string, number | string>;
  source?: { theta_l?: number; phi_l?: number };
  angles?: AnglesBody;
}

export interface SessionPayload {
  schema_version: number;
  kind: "session";
  session_id: string;
  config: unknown;
  settings: Dials;
  n_records: number;
}

export interface SettingsPayload extends Dials {
  schema_version: number;
  kind: "settings";
}

export interface CountRecordFields {
  alpha: number;
  beta: number;
  duration_s: number;
  n_a: number;
  n_b: number;
  n_coinc: number;
}

export interface CountRecordPayload extends CountRecordFields {
  schema_version: number;
  kind: "count_record";
}

export interface CountRecordsPayload {
  schema_version: number;
  kind: "count_records";
  records: CountRecordFields[];
}

export interface DiagnosticsPayload {
  schema_version: number;
  kind: "state_diagnostics";
  c_offset: number;
  a_pairs: number;
  theta_l: number;
  cos_phi_m: number;
  phi_m: number;
  clamped: boolean;
  inputs_digest: string | null;
}

export interface ChshResultPayload {
  schema_version: number;
  kind: "chsh_result";
  e_ab: number;
  e_abp: number;
  e_apb: number;
  e_apbp: number;
  s_value: number;
  sigma_s: number;
  significance: number;
  inputs_digest: string | null;
}

export interface ChshRequest {
  duration_s?: number;
  angles?: AnglesBody;
  add_one_smoothing?: boolean;
}

export interface AnalysisRequest {
  counts_csv: string;
  angles?: AnglesBody;
  add_one_smoothing?: boolean;
}

/** Parsed payload plus the exact bytes (as text) the server sent. */
export interface WireReply<T> {
  payload: T;
  raw: string;
}

export class WireError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "WireError";
  }
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; text(): Promise<string> }>;

export class BenchClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<WireReply<T>> {
    const init: { method: string; headers?: Record<string, string>; body?: string } = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const raw = await response.text();
    if (response.status < 200 || response.status >= 300) {
      let detail = `HTTP ${response.status}`;
      try {
        const parsed = JSON.parse(raw);
        if (parsed && typeof parsed.detail === "string") detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new WireError(response.status, detail);
    }
    const payload = raw === "" ? (undefined as T) : (JSON.parse(raw) as T);
    return { payload, raw };
  }

  async createSession(config: SessionConfig = {}): Promise<SessionPayload> {
    const reply = await this.request<SessionPayload>("POST", "/v1/sessions", config);
    return reply.payload;
  }

  async getSession(sessionId: string): Promise<SessionPayload> {
    const reply = await this.request<SessionPayload>("GET", `/v1/sessions/${sessionId}`);
    return reply.payload;
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.request<undefined>("DELETE", `/v1/sessions/${sessionId}`);
  }

  async updateSettings(sessionId: string, dials: Partial<Dials>): Promise<SettingsPayload> {
    const reply = await this.request<SettingsPayload>(
      "POST",
      `/v1/sessions/${sessionId}/settings`,
      dials,
    );
    return reply.payload;
  }

  async acquire(sessionId: string, durationS: number): Promise<CountRecordPayload> {
    const reply = await this.request<CountRecordPayload>(
      "POST",
      `/v1/sessions/${sessionId}/acquire`,
      { duration_s: durationS },
    );
    return reply.payload;
  }

  async records(sessionId: string): Promise<CountRecordsPayload> {
    const reply = await this.request<CountRecordsPayload>(
      "GET",
      `/v1/sessions/${sessionId}/records`,
    );
    return reply.payload;
  }

  async diagnostics(sessionId: string): Promise<DiagnosticsPayload> {
    const reply = await this.request<DiagnosticsPayload>(
      "GET",
      `/v1/sessions/${sessionId}/diagnostics`,
    );
    return reply.payload;
  }

  /** Run the 16-setting protocol server-side; raw is kept for byte checks. */
  async runChsh(
    sessionId: string,
    request: ChshRequest = {},
  ): Promise<WireReply<ChshResultPayload>> {
    return this.request<ChshResultPayload>("POST", `/v1/sessions/${sessionId}/chsh`, request);
  }

  /** Analyze an existing count table; the CSV text is passed through verbatim. */
  async analyzeChsh(request: AnalysisRequest): Promise<WireReply<ChshResultPayload>> {
    return this.request<ChshResultPayload>("POST", "/v1/analysis/chsh", request);
  }
}
