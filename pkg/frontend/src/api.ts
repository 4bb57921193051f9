/** Typed client for the risk-service HTTP API (the console's only backend). */

export interface StateRow {
  k: number;
  maternal_age: number;
  parity: number;
  history_preterm: boolean;
  fhr: string | number;
  brady_persist: boolean;
  dilatation: number;
  sbp: string | number;
  dbp: string | number;
  a: number;
  z: number;
  y: number;
  born: boolean;
  action?: number | null;
}

export interface SessionEvent {
  hour: number;
  event: string;
}

export interface SessionPayload {
  session_id: string;
  seed: number;
  mode: "coarse" | "continuous";
  horizon: number;
  k: number;
  terminated: boolean;
  state: StateRow;
  events: SessionEvent[];
  history?: StateRow[];
  new_events?: SessionEvent[];
}

export interface RiskEntry {
  estimand_id: number;
  label: string;
  p: number;
  se: number;
  n: number;
  method: string;
}

export interface RisksResponse {
  session_id: string;
  k: number;
  estimates: RiskEntry[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parse<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ApiErrorBody = { code: "http_error", message: response.statusText };
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, body.code, body.message);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  createSession(body: { seed?: number; mode?: string }): Promise<SessionPayload> {
    return fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => parse<SessionPayload>(r));
  }

  getState(sessionId: string): Promise<SessionPayload> {
    return fetch(`${this.baseUrl}/sessions/${sessionId}/state`).then((r) =>
      parse<SessionPayload>(r),
    );
  }

  getRisks(sessionId: string, estimands: number[], nMc?: number): Promise<RisksResponse> {
    const params = new URLSearchParams({ estimands: estimands.join(",") });
    if (nMc !== undefined) params.set("n_mc", String(nMc));
    return fetch(`${this.baseUrl}/sessions/${sessionId}/risks?${params}`).then((r) =>
      parse<RisksResponse>(r),
    );
  }

  postDecision(
    sessionId: string,
    action: "continue_vaginal" | "cesarean",
    atHour: number,
  ): Promise<SessionPayload> {
    return fetch(`${this.baseUrl}/sessions/${sessionId}/decision`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ action, at_hour: atHour }),
    }).then((r) => parse<SessionPayload>(r));
  }

  deleteSession(sessionId: string): Promise<void> {
    return fetch(`${this.baseUrl}/sessions/${sessionId}`, { method: "DELETE" }).then(
      (r) => {
        if (!r.ok && r.status !== 204) throw new ApiError(r.status, "http_error", r.statusText);
      },
    );
  }
}
