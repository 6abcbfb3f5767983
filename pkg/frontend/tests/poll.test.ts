import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ACTIVE_INTERVAL_MS, IDLE_AFTER, IDLE_INTERVAL_MS, Poller } from "../src/poll.js";

describe("Poller", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  function harness(fetchValue: () => Promise<unknown>) {
    const updates: unknown[] = [];
    const errors: unknown[] = [];
    let fetches = 0;
    const poller = new Poller({
      fetchValue: () => {
        fetches += 1;
        return fetchValue();
      },
      onUpdate: (value) => updates.push(value),
      onError: (error) => errors.push(error),
    });
    return { poller, updates, errors, fetches: () => fetches };
  }

  it("polls every second while responses keep changing", async () => {
    let serial = 0;
    const h = harness(async () => ({ serial: serial++ }));
    h.poller.start();
    await vi.advanceTimersByTimeAsync(0);
    expect(h.fetches()).toBe(1);
    expect(h.updates).toHaveLength(1);

    await vi.advanceTimersByTimeAsync(ACTIVE_INTERVAL_MS - 1);
    expect(h.fetches()).toBe(1);
    await vi.advanceTimersByTimeAsync(1);
    expect(h.fetches()).toBe(2);
    await vi.advanceTimersByTimeAsync(ACTIVE_INTERVAL_MS);
    expect(h.fetches()).toBe(3);
    expect(h.updates).toHaveLength(3);
    h.poller.stop();
  });

  it("stretches to five seconds once the job stops changing", async () => {
    const h = harness(async () => ({ stage: "generating" }));
    h.poller.start();
    await vi.advanceTimersByTimeAsync(0);
    for (let i = 0; i < IDLE_AFTER; i++) {
      await vi.advanceTimersByTimeAsync(ACTIVE_INTERVAL_MS);
    }
    expect(h.fetches()).toBe(1 + IDLE_AFTER);
    expect(h.updates).toHaveLength(1);
    expect(h.poller.intervalMs).toBe(IDLE_INTERVAL_MS);

    await vi.advanceTimersByTimeAsync(IDLE_INTERVAL_MS - 1);
    expect(h.fetches()).toBe(1 + IDLE_AFTER);
    await vi.advanceTimersByTimeAsync(1);
    expect(h.fetches()).toBe(2 + IDLE_AFTER);
    h.poller.stop();
  });

  it("snaps back to one second when a change arrives", async () => {
    let value: Record<string, string> = { stage: "generating" };
    const h = harness(async () => value);
    h.poller.start();
    await vi.advanceTimersByTimeAsync(0);
    for (let i = 0; i < IDLE_AFTER; i++) {
      await vi.advanceTimersByTimeAsync(ACTIVE_INTERVAL_MS);
    }
    expect(h.poller.intervalMs).toBe(IDLE_INTERVAL_MS);

    value = { stage: "complete" };
    await vi.advanceTimersByTimeAsync(IDLE_INTERVAL_MS);
    expect(h.updates).toHaveLength(2);
    expect(h.poller.intervalMs).toBe(ACTIVE_INTERVAL_MS);
    const before = h.fetches();
    await vi.advanceTimersByTimeAsync(ACTIVE_INTERVAL_MS);
    expect(h.fetches()).toBe(before + 1);
    h.poller.stop();
  });

  it("stops polling when told to", async () => {
    const h = harness(async () => ({ ok: true }));
    h.poller.start();
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(ACTIVE_INTERVAL_MS);
    h.poller.stop();
    const before = h.fetches();
    await vi.advanceTimersByTimeAsync(10 * IDLE_INTERVAL_MS);
    expect(h.fetches()).toBe(before);
  });

  it("reports fetch errors and keeps polling", async () => {
    let calls = 0;
    const h = harness(async () => {
      calls += 1;
      if (calls <= 2) throw new Error("boom");
      return { ok: true };
    });
    h.poller.start();
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(ACTIVE_INTERVAL_MS);
    expect(h.errors).toHaveLength(2);
    expect(h.updates).toHaveLength(0);
    await vi.advanceTimersByTimeAsync(ACTIVE_INTERVAL_MS);
    expect(h.updates).toHaveLength(1);
    h.poller.stop();
  });
});
