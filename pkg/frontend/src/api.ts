/** Typed client for the session service.
 *
 * Every number shown in the UI comes through here; the client never
 * derives model quantities itself. Network-level failures throw
 * ServiceUnreachableError so callers can offer a retry without losing
 * the click that triggered the request; structured service errors
 * throw ApiError with the server's stable error code.
 */

export interface RenderSpec {
  kind: string;
  hue: number;
  saturation: number;
  lightness: number;
  curve_exponent: number;
}

export interface PairResponse {
  points: number[][];
  renders: RenderSpec[];
  iteration: number;
}

export interface IncumbentView {
  location: number[];
  value: number;
  render: RenderSpec;
}

export interface PosteriorCurve1d {
  x: number[];
  mean: number[];
  std: number[];
}

export interface PosteriorGrid2d {
  x1: number[];
  x2: number[];
  mean: number[][];
  std: number[][];
}

export interface StateResponse {
  schema_version: number;
  id: string;
  mode: string;
  iteration: number;
  bounds: number[][];
  incumbent: IncumbentView | null;
  current_pair: { points: number[][]; renders: RenderSpec[] } | null;
  posterior_curve: PosteriorCurve1d | PosteriorGrid2d | null;
}

export interface CreateSessionRequest {
  mode?: "preference" | "scalar";
  bounds: number[][];
  kernel?: Record<string, unknown>;
  strategy?: string;
  comparison_noise?: number | null;
  rng_seed?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly field?: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ServiceUnreachableError extends Error {
  constructor(cause: unknown) {
    super("service unreachable");
    this.name = "ServiceUnreachableError";
    this.cause = cause;
  }
}

export function isCurve1d(
  curve: PosteriorCurve1d | PosteriorGrid2d,
): curve is PosteriorCurve1d {
  return "x" in curve;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    // bind so a bare globalThis.fetch keeps its receiver
    const impl = fetchImpl ?? globalThis.fetch;
    if (!impl) throw new Error("no fetch implementation available");
    this.fetchImpl = (url, init) => impl.call(globalThis, url, init);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new ServiceUnreachableError(cause);
    }
    if (!response.ok) {
      let code = "unknown";
      let message = `${response.status}`;
      let field: string | undefined;
      try {
        const doc = await response.json();
        code = doc?.error?.code ?? code;
        message = doc?.error?.message ?? message;
        field = doc?.error?.field;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, message, field);
    }
    if (response.status === 204) return undefined as T;
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  createSession(spec: CreateSessionRequest): Promise<{ id: string; mode: string; iteration: number }> {
    return this.request("POST", "/sessions", spec);
  }

  getPair(sessionId: string): Promise<PairResponse> {
    return this.request("GET", `/sessions/${sessionId}/pair`);
  }

  postPreference(
    sessionId: string,
    winnerIndex: 0 | 1,
    token: string,
  ): Promise<StateResponse> {
    return this.request("POST", `/sessions/${sessionId}/preference`, {
      winner_index: winnerIndex,
      token,
    });
  }

  getState(sessionId: string, grid?: number): Promise<StateResponse> {
    const suffix = grid === undefined ? "" : `?grid=${grid}`;
    return this.request("GET", `/sessions/${sessionId}/state${suffix}`);
  }
}
