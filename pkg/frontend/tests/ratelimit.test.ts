import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { RateLimiter } from "../src/ratelimit.js";

describe("RateLimiter", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("fires immediately when idle", () => {
    const calls: number[] = [];
    const rl = new RateLimiter<[number]>((v) => calls.push(v), 30, Date.now);
    rl.call(1);
    expect(calls).toEqual([1]);
  });

  it("never exceeds the configured rate", () => {
    const stamps: number[] = [];
    const rl = new RateLimiter<[number]>(() => stamps.push(Date.now()), 30,
      Date.now);
    for (let i = 0; i < 200; i++) {
      rl.call(i);
      vi.advanceTimersByTime(5); // 200 calls per second offered
    }
    vi.advanceTimersByTime(100);
    // 200 offered calls over ~1s must collapse to roughly 30 sends, and no
    // two sends may be closer together than the 1000/30 ms interval.
    expect(stamps.length).toBeLessThanOrEqual(34);
    expect(stamps.length).toBeGreaterThan(20);
    for (let i = 1; i < stamps.length; i++) {
      expect(stamps[i] - stamps[i - 1]).toBeGreaterThanOrEqual(1000 / 30 - 1);
    }
  });

  it("delivers the most recent arguments on the trailing edge", () => {
    const calls: number[] = [];
    const rl = new RateLimiter<[number]>((v) => calls.push(v), 30, Date.now);
    rl.call(1);
    rl.call(2);
    rl.call(3);
    expect(calls).toEqual([1]);
    vi.advanceTimersByTime(40);
    expect(calls).toEqual([1, 3]);
  });

  it("flush sends the pending call right away", () => {
    const calls: number[] = [];
    const rl = new RateLimiter<[number]>((v) => calls.push(v), 30, Date.now);
    rl.call(1);
    rl.call(9);
    rl.flush();
    expect(calls).toEqual([1, 9]);
    vi.advanceTimersByTime(1000);
    expect(calls).toEqual([1, 9]); // nothing queued afterwards
  });

  it("cancel drops the pending call", () => {
    const calls: number[] = [];
    const rl = new RateLimiter<[number]>((v) => calls.push(v), 30, Date.now);
    rl.call(1);
    rl.call(2);
    rl.cancel();
    vi.advanceTimersByTime(1000);
    expect(calls).toEqual([1]);
  });
});
