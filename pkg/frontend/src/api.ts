// Typed client for the session service. The UI holds no state the server
// doesn't: everything here is a thin fetch wrapper.

export interface CandidateSummary {
  index: number;
  n_repro: number;
  n_frames: number;
}

export interface SessionSummary {
  version: number;
  session_id: string;
  preset: string;
  mutator: string;
  generation: number;
  n_candidates: number;
  candidates: CandidateSummary[];
  history: number[];
  deployed: boolean;
}

export interface FramePayload {
  version: number;
  n_repro: number;
  palette: number[][];
  height: number;
  width: number;
  frames: number[][];
}

export interface ReplicaReport {
  total_agents: number;
  extinct: boolean;
}

export interface DeployReport {
  total_agents_mean: number;
  total_agents_std: number;
  extinction_pct: number;
  replicas: ReplicaReport[];
}

export interface DeployResponse {
  version: number;
  report: DeployReport;
  replay: FramePayload extends never ? never : Omit<FramePayload, "n_repro" | "version">;
  record_path?: string;
}

export interface ApiError {
  code: string;
  message: string;
}

export class ServiceApiError extends Error {
  code: string;
  status: number;
  constructor(status: number, body: ApiError) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await resp.json();
  if (!resp.ok) {
    throw new ServiceApiError(resp.status, body as ApiError);
  }
  return body as T;
}

export class SessionApi {
  constructor(private base: string) {}

  async startSession(opts: {
    preset?: string;
    arch?: string;
    mutator?: string;
    sigma?: number;
    n_candidates?: number;
    seed?: number;
    n_petri_steps?: number;
  }): Promise<string> {
    const body = await request<{ session_id: string }>(this.base, "/sessions", {
      method: "POST",
      body: JSON.stringify(opts),
    });
    return body.session_id;
  }

  getSession(id: string): Promise<SessionSummary> {
    return request<SessionSummary>(this.base, `/sessions/${id}`);
  }

  getFrames(id: string, index: number): Promise<FramePayload> {
    return request<FramePayload>(this.base, `/sessions/${id}/candidates/${index}/frames`);
  }

  choose(id: string, index: number): Promise<SessionSummary> {
    return request<SessionSummary>(this.base, `/sessions/${id}/choice`, {
      method: "POST",
      body: JSON.stringify({ index }),
    });
  }

  deploy(
    id: string,
    opts: { preset?: string; width?: number; height?: number; steps?: number; reps?: number },
  ): Promise<DeployResponse> {
    return request<DeployResponse>(this.base, `/sessions/${id}/deploy`, {
      method: "POST",
      body: JSON.stringify(opts),
    });
  }
}
