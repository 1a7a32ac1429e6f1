// Typed client for the planexp service. Only the documented HTTP routes are
// used; every number shown in the console comes from these payloads.

export interface HdiIntervalJson {
  lo: number;
  hi: number;
  k: number;
  alpha: number;
}

export interface RunState {
  corpus_id: string;
  stage: string | null;
  params: Record<string, unknown>;
  artifacts: Record<string, boolean>;
  job: { status: string; error: string | null } | null;
  n_plans?: number;
  intervals?: Record<string, HdiIntervalJson>;
  report?: Report;
}

export interface PairRow {
  pair_id: string;
  a: string;
  b: string;
  a_label: string | null;
  b_label: string | null;
  explained: boolean;
}

export interface ChatMessageJson {
  role: "system" | "user" | "assistant";
  content: string;
}

export interface SessionJson {
  session_id: string;
  narrative_ref: string;
  level: number;
  messages: ChatMessageJson[];
}

export interface RevisionRow {
  pair_id: string;
  level: number;
  revision: number;
  text: string;
  narrative_ref: string;
  n_words: number;
}

export interface PairDetail {
  pair_id: string;
  a: string;
  b: string;
  level: number;
  a_label: string | null;
  b_label: string | null;
  narrative: string | null;
  narrative_n_words: number | null;
  explanation: string | null;
  revision: number | null;
  revisions?: RevisionRow[];
  metrics: { n_words: number; fres: number; cosine: number | null } | null;
  session: SessionJson | null;
}

export interface FollowupResponse {
  pair_id: string;
  level: number;
  revision: number;
  text: string;
  detail: PairDetail;
}

export interface ReportCell {
  method: "baseline" | "refined";
  specificity: number;
  metric: "n_words" | "fres" | "cosine";
  mean: number | null;
}

export interface ReportTest {
  specificity: number;
  metric: string;
  t: number | null;
  df: number | null;
  p: number | null;
  skewness: number | null;
  note: string | null;
}

export interface Report {
  mu0: number;
  n_pairs: Record<string, number>;
  cells: ReportCell[];
  tests: ReportTest[];
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`service returned ${status}: ${detail}`);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return resp.json() as Promise<T>;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return fetch(this.url(path), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => asJson<T>(r));
  }

  healthz(): Promise<{ status: string }> {
    return fetch(this.url("/healthz")).then((r) => asJson(r));
  }

  listRuns(): Promise<RunState[]> {
    return fetch(this.url("/runs")).then((r) => asJson(r));
  }

  getRun(corpusId: string): Promise<RunState> {
    return fetch(this.url(`/runs/${corpusId}`)).then((r) => asJson(r));
  }

  createGenerated(seed: number, n: number): Promise<RunState> {
    return this.post("/runs", { generate: { seed, n } });
  }

  uploadExperiences(experiences: unknown[]): Promise<RunState> {
    return this.post("/runs", { experiences });
  }

  advance(corpusId: string, stage: string, params: Record<string, unknown>): Promise<RunState> {
    return this.post(`/runs/${corpusId}/advance`, { stage, params });
  }

  pairs(corpusId: string): Promise<PairRow[]> {
    return fetch(this.url(`/runs/${corpusId}/pairs`)).then((r) => asJson(r));
  }

  pairDetail(corpusId: string, pairId: string, level: number): Promise<PairDetail> {
    return fetch(this.url(`/runs/${corpusId}/pairs/${pairId}?level=${level}`)).then((r) =>
      asJson(r),
    );
  }

  followup(
    corpusId: string,
    pairId: string,
    request: string,
    level: number,
  ): Promise<FollowupResponse> {
    return this.post(`/runs/${corpusId}/pairs/${pairId}/followup`, { request, level });
  }
}

// Stage machinery mirrored from the service so forms enable correctly.
export const STAGES = ["ingested", "classified", "inferred", "narrated", "refined", "evaluated"];

export function stageIndex(stage: string | null): number {
  return stage === null ? -1 : STAGES.indexOf(stage);
}

export function nextStage(stage: string | null): string | null {
  const i = stageIndex(stage);
  return i + 1 < STAGES.length ? STAGES[i + 1] : null;
}
