/**
 * Trailing-edge rate limiter used for vertex-drag updates.
 *
 * Calls made faster than the configured rate collapse onto the most recent
 * arguments and fire once the minimum interval has elapsed, so a drag never
 * issues more than `maxPerSecond` requests while still ending exactly at
 * the final pointer position.
 */

export class RateLimiter<A extends unknown[]> {
  private lastFired = -Infinity;
  private pending: A | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly fn: (...args: A) => void,
    maxPerSecond: number,
    private readonly now: () => number = () => Date.now(),
  ) {
    this.intervalMs = 1000 / maxPerSecond;
  }

  private readonly intervalMs: number;

  call(...args: A): void {
    const elapsed = this.now() - this.lastFired;
    if (elapsed >= this.intervalMs) {
      this.lastFired = this.now();
      this.fn(...args);
      return;
    }
    this.pending = args;
    if (this.timer === null) {
      this.timer = setTimeout(() => this.flush(), this.intervalMs - elapsed);
    }
  }

  flush(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.pending !== null) {
      const args = this.pending;
      this.pending = null;
      this.lastFired = this.now();
      this.fn(...args);
    }
  }

  cancel(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
  }
}
