import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { createScheduler } from "../src/scheduler.js";

interface Deferred {
  resolve: (value: string) => void;
  reject: (error: Error) => void;
  params: number;
}

function makeHarness(minInterval = 100) {
  const issued: Deferred[] = [];
  const applied: Array<{ frame: string; params: number }> = [];
  const errors: unknown[] = [];
  const scheduler = createScheduler<number, string>(
    (params) =>
      new Promise<string>((resolve, reject) => {
        issued.push({ resolve, reject, params });
      }),
    (frame, params) => applied.push({ frame, params }),
    (error) => errors.push(error),
    minInterval,
  );
  return { scheduler, issued, applied, errors };
}

describe("createScheduler", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("issues at most one request per interval while dragging", async () => {
    const { scheduler, issued } = makeHarness(100);
    // simulate a 1-second drag emitting every 10 ms
    for (let ms = 0; ms < 1000; ms += 10) {
      scheduler.request(ms);
      await vi.advanceTimersByTimeAsync(10);
    }
    expect(issued.length).toBeLessThanOrEqual(11);
    expect(issued.length).toBeGreaterThanOrEqual(9);
  });

  it("only the latest pending params are issued", async () => {
    const { scheduler, issued } = makeHarness(100);
    scheduler.request(1);
    await vi.advanceTimersByTimeAsync(0);
    // burst during the cooldown: only 5 should survive
    scheduler.request(2);
    scheduler.request(3);
    scheduler.request(4);
    scheduler.request(5);
    await vi.advanceTimersByTimeAsync(150);
    expect(issued.map((d) => d.params)).toEqual([1, 5]);
  });

  it("discards an in-flight response superseded by a newer issue", async () => {
    const { scheduler, issued, applied } = makeHarness(100);
    scheduler.request(1);
    await vi.advanceTimersByTimeAsync(0);
    scheduler.request(2);
    await vi.advanceTimersByTimeAsync(100);
    expect(issued.length).toBe(2);
    // older response arrives after the newer one
    issued[1].resolve("frame-2");
    await vi.advanceTimersByTimeAsync(0);
    issued[0].resolve("frame-1");
    await vi.advanceTimersByTimeAsync(0);
    expect(applied.map((a) => a.frame)).toEqual(["frame-2"]);
  });

  it("applies the final position once requests settle", async () => {
    const { scheduler, issued, applied } = makeHarness(100);
    scheduler.request(1);
    await vi.advanceTimersByTimeAsync(0);
    // 2 and 3 arrive during the cooldown and coalesce into one issue of 3
    scheduler.request(2);
    scheduler.request(3);
    issued[0].resolve("early");
    await vi.advanceTimersByTimeAsync(200);
    expect(issued.map((d) => d.params)).toEqual([1, 3]);
    issued[1].resolve("final");
    await vi.advanceTimersByTimeAsync(0);
    expect(applied[applied.length - 1].params).toBe(3);
    expect(scheduler.settled()).toBe(true);
  });

  it("reports errors and keeps serving later requests", async () => {
    const { scheduler, issued, applied, errors } = makeHarness(100);
    scheduler.request(1);
    await vi.advanceTimersByTimeAsync(0);
    issued[0].reject(new Error("boom"));
    await vi.advanceTimersByTimeAsync(0);
    expect(errors.length).toBe(1);
    expect(applied.length).toBe(0);
    scheduler.request(2);
    await vi.advanceTimersByTimeAsync(100);
    issued[1].resolve("recovered");
    await vi.advanceTimersByTimeAsync(0);
    expect(applied.map((a) => a.frame)).toEqual(["recovered"]);
  });
});
