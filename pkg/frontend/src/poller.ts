// Fixed-interval polling that never stacks requests: if a fetch is still in
// flight when the next tick fires, that tick is skipped entirely.

export const DEFAULT_POLL_INTERVAL_S = 10;
export const MIN_POLL_INTERVAL_S = 1;

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  /** ticks dropped because the previous fetch had not finished */
  skippedTicks = 0;

  constructor(
    private task: () => Promise<void>,
    public intervalS: number = DEFAULT_POLL_INTERVAL_S,
  ) {
    if (intervalS < MIN_POLL_INTERVAL_S) {
      throw new Error(`poll interval must be >= ${MIN_POLL_INTERVAL_S}s`);
    }
  }

  get running(): boolean {
    return this.timer !== null;
  }

  /** Run one cycle immediately (unless one is already in flight). */
  async tick(): Promise<void> {
    if (this.inFlight) {
      this.skippedTicks += 1;
      return;
    }
    this.inFlight = true;
    try {
      await this.task();
    } finally {
      this.inFlight = false;
    }
  }

  start(): void {
    if (this.timer !== null) return;
    // task failures must not kill the loop; views surface their own errors
    const run = () => this.tick().catch(() => {});
    run();
    this.timer = setInterval(run, this.intervalS * 1000);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
