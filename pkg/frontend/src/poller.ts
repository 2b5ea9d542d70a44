import type { ApiClient } from "./api.js";
import type { DisplaySnapshot } from "./types.js";

export const MIN_POLL_INTERVAL_MS = 500;

export interface PollerEvents {
  /** Called only when the snapshot actually changed (304s never re-render). */
  onSnapshot: (snapshot: DisplaySnapshot) => void;
  /** Stale badge control: true after a network failure, false on recovery. */
  onStale?: (stale: boolean) => void;
}

/**
 * The 2-second display poll loop. Network failures flip the stale flag and
 * back off exponentially (capped at 8x the interval) until the server
 * answers again.
 */
export class DisplayPoller {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private etag: string | undefined;
  private failures = 0;
  private stale = false;
  polls = 0;
  renders = 0;

  constructor(
    private client: ApiClient,
    private events: PollerEvents,
    private intervalMs = 2000,
  ) {
    this.intervalMs = Math.max(MIN_POLL_INTERVAL_MS, intervalMs);
  }

  setInterval(ms: number): void {
    this.intervalMs = Math.max(MIN_POLL_INTERVAL_MS, ms);
  }

  get interval(): number {
    return this.intervalMs;
  }

  start(): void {
    if (this.timer !== null) return;
    void this.tick();
  }

  stop(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private schedule(delay: number): void {
    this.timer = setTimeout(() => void this.tick(), delay);
  }

  private async tick(): Promise<void> {
    this.polls += 1;
    let delay = this.intervalMs;
    try {
      const result = await this.client.pollDisplay(this.etag);
      if (this.stale) {
        this.stale = false;
        this.events.onStale?.(false);
      }
      this.failures = 0;
      if (result.changed) {
        this.etag = result.etag;
        this.renders += 1;
        this.events.onSnapshot(result.snapshot);
      }
    } catch {
      this.failures += 1;
      if (!this.stale) {
        this.stale = true;
        this.events.onStale?.(true);
      }
      delay = Math.min(this.intervalMs * 2 ** this.failures, this.intervalMs * 8);
    }
    this.schedule(delay);
  }
}
