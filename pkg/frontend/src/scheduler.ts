/** Debounced render scheduling with at most one request in flight.
 *
 * Rapid state changes (slider drags) collapse into one trailing-edge send per
 * quiet period. While a request is in flight, newer settled states queue;
 * when the response lands it is dropped if a newer state superseded it and
 * the newest state is sent instead. Timer and clock are injectable for
 * deterministic tests.
 */

export interface SchedulerHooks<S, R> {
  send: (state: S) => Promise<R>;
  onResult: (state: S, result: R, latencyMs: number) => void;
  onError?: (state: S, error: unknown) => void;
  debounceMs?: number;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

export class RenderScheduler<S, R> {
  private readonly debounceMs: number;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;

  private timer: unknown = null;
  private latest: S | null = null;   // state waiting for the debounce to settle
  private pending: S | null = null;  // settled state waiting for a free slot
  private flying = false;

  /** number of requests actually sent (for tests and latency stats) */
  issued = 0;
  /** number of responses dropped because a newer state superseded them */
  dropped = 0;

  constructor(private readonly hooks: SchedulerHooks<S, R>) {
    this.debounceMs = hooks.debounceMs ?? 150;
    this.now = hooks.now ?? (() => Date.now());
    this.setTimer = hooks.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = hooks.clearTimer ?? ((h) => clearTimeout(h as number));
  }

  get inFlight(): boolean {
    return this.flying;
  }

  /** Record the newest desired state and (re)start the debounce window. */
  request(state: S): void {
    this.latest = state;
    if (this.timer !== null) this.clearTimer(this.timer);
    this.timer = this.setTimer(() => this.settle(), this.debounceMs);
  }

  private settle(): void {
    this.timer = null;
    if (this.latest === null) return;
    this.pending = this.latest;
    this.latest = null;
    this.drain();
  }

  private drain(): void {
    if (this.flying || this.pending === null) return;
    const state = this.pending;
    this.pending = null;
    this.flying = true;
    this.issued += 1;
    const t0 = this.now();
    this.hooks.send(state).then(
      (result) => {
        this.flying = false;
        if (this.pending !== null) {
          this.dropped += 1; // superseded while in flight
          this.drain();
        } else {
          this.hooks.onResult(state, result, this.now() - t0);
        }
      },
      (error) => {
        this.flying = false;
        this.hooks.onError?.(state, error);
        this.drain();
      },
    );
  }
}
