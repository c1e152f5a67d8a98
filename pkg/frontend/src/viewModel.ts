/** Gallery state machine.
 *
 * Owns everything the DOM layer shows: the outstanding pair, the
 * incumbent, the served posterior, the iteration counter, and the
 * retry banner. All numbers come from the service; nothing here
 * computes model quantities. A session is resumable from its id alone:
 * resume() rebuilds the view from get_state and the (idempotent)
 * outstanding pair.
 *
 * Submission protocol: choose() is a no-op while a submission is in
 * flight, each logical click gets one idempotency token, and a network
 * failure keeps the pending submission so retry() can re-post the same
 * token. The service dedupes on the token, so a click resolves to
 * exactly one recorded preference no matter how many times it is
 * retried or replayed.
 */

import {
  ApiError,
  ServiceClient,
  ServiceUnreachableError,
  type CreateSessionRequest,
  type IncumbentView,
  type PairResponse,
  type PosteriorCurve1d,
  type PosteriorGrid2d,
  type StateResponse,
} from "./api.js";

export interface ClickRecord {
  winnerIndex: 0 | 1;
  token: string;
}

export interface ViewModelOptions {
  /** Delay between pair polls after a submission; the contract says 500. */
  pollIntervalMs?: number;
  maxPollAttempts?: number;
  tokenFactory?: () => string;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

function defaultToken(): string {
  const rng = globalThis.crypto;
  if (rng && "randomUUID" in rng) return rng.randomUUID();
  return `t-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export class GalleryViewModel {
  sessionId: string | null = null;
  bounds: number[][] = [];
  pair: PairResponse | null = null;
  incumbent: IncumbentView | null = null;
  posteriorCurve: PosteriorCurve1d | PosteriorGrid2d | null = null;
  iteration = 0;
  /** Clicks made in this page's lifetime; resumed sessions start empty
   * and rely on the served iteration counter for their history size. */
  history: ClickRecord[] = [];
  banner: string | null = null;
  busy = false;
  onChange: (() => void) | null = null;

  private pending: { side: 0 | 1; token: string } | null = null;
  private readonly pollIntervalMs: number;
  private readonly maxPollAttempts: number;
  private readonly tokenFactory: () => string;
  private readonly sleep: (ms: number) => Promise<void>;

  constructor(
    readonly client: ServiceClient,
    options: ViewModelOptions = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 500;
    this.maxPollAttempts = options.maxPollAttempts ?? 20;
    this.tokenFactory = options.tokenFactory ?? defaultToken;
    this.sleep = options.sleep ?? defaultSleep;
  }

  get hasPendingSubmission(): boolean {
    return this.pending !== null;
  }

  private notify(): void {
    this.onChange?.();
  }

  async create(spec: CreateSessionRequest): Promise<void> {
    const created = await this.client.createSession(spec);
    this.sessionId = created.id;
    this.bounds = spec.bounds;
    this.iteration = created.iteration;
    await this.refreshPair();
  }

  async resume(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    await this.refreshState();
    await this.refreshPair();
  }

  /** Pull the outstanding pair (the service computes one if needed). */
  async refreshPair(): Promise<void> {
    if (!this.sessionId) throw new Error("no session");
    try {
      this.pair = await this.client.getPair(this.sessionId);
      this.iteration = this.pair.iteration;
      this.banner = null;
    } catch (error) {
      if (error instanceof ServiceUnreachableError) {
        this.banner = "service unreachable, click retry";
      } else {
        throw error;
      }
    }
    this.notify();
  }

  async refreshState(): Promise<void> {
    if (!this.sessionId) throw new Error("no session");
    this.applyState(await this.client.getState(this.sessionId));
  }

  private applyState(state: StateResponse): void {
    this.bounds = state.bounds;
    this.iteration = state.iteration;
    this.incumbent = state.incumbent;
    this.posteriorCurve = state.posterior_curve;
    if (state.current_pair) {
      this.pair = { ...state.current_pair, iteration: state.iteration };
    }
    this.notify();
  }

  /** Record a click on side 0 or 1. Ignored while a submission is in
   * flight or awaiting retry, which is what serializes submissions. */
  async choose(side: 0 | 1): Promise<void> {
    if (!this.sessionId || !this.pair || this.busy || this.pending) return;
    this.pending = { side, token: this.tokenFactory() };
    await this.submitPending();
  }

  /** Re-post a submission that failed on the network, same token. */
  async retry(): Promise<void> {
    if (!this.pending) return;
    await this.submitPending();
  }

  private async submitPending(): Promise<void> {
    if (!this.sessionId || !this.pending) return;
    this.busy = true;
    this.banner = null;
    this.notify();
    const { side, token } = this.pending;
    try {
      const state = await this.client.postPreference(this.sessionId, side, token);
      this.history.push({ winnerIndex: side, token });
      this.pending = null;
      this.pair = null;
      this.applyState(state);
      await this.pollForPair();
    } catch (error) {
      if (error instanceof ServiceUnreachableError) {
        // keep pending so retry() reuses the token; the click is not lost
        this.banner = "submission failed, click retry";
      } else if (error instanceof ApiError) {
        // structured rejection: the submission cannot succeed as-is
        this.pending = null;
        this.banner = `${error.code}: ${error.message}`;
      } else {
        this.pending = null;
        throw error;
      }
    } finally {
      this.busy = false;
      this.notify();
    }
  }

  private async pollForPair(): Promise<void> {
    for (let attempt = 0; attempt < this.maxPollAttempts; attempt++) {
      if (attempt > 0) await this.sleep(this.pollIntervalMs);
      try {
        this.pair = await this.client.getPair(this.sessionId!);
        this.iteration = this.pair.iteration;
        this.notify();
        return;
      } catch (error) {
        if (!(error instanceof ServiceUnreachableError)) throw error;
      }
    }
    this.banner = "could not fetch the next pair, click retry";
    this.notify();
  }
}
