import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import type { WhatIf } from "../src/api";
import { CoachController } from "../src/controller";
import { ManualClient, flush, mkScore } from "./helpers";

const CHIP_SET: WhatIf[] = [
  {
    toggle: "add_image",
    change: "Add a photo link as evidence",
    probability: 0.3,
    delta: 0.15,
  },
  {
    toggle: "add_gratitude",
    change: "Say thanks in the request",
    probability: 0.15,
    delta: 0,
  },
  {
    toggle: "disable_narrative_craving",
    change: "Drop the craving angle",
    probability: 0.4,
    delta: 0.25,
  },
  {
    toggle: "enable_narrative_money",
    change: "Work in the money story",
    probability: 0.1,
    delta: -0.05,
  },
];

describe("CoachController", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("waits for 400ms of idle typing before calling the service", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setDraft("", "ple");
    await vi.advanceTimersByTimeAsync(399);
    expect(client.calls).toHaveLength(0);

    c.setDraft("", "please help"); // resets the idle timer
    await vi.advanceTimersByTimeAsync(399);
    expect(client.calls).toHaveLength(0);
    expect(c.state().pending).toBe(true);

    await vi.advanceTimersByTimeAsync(1);
    expect(client.calls).toHaveLength(1);
    expect(client.calls[0].body).toBe("please help");

    client.pending[0].resolve(mkScore(0.25));
    await flush();
    expect(c.state().pending).toBe(false);
    expect(c.state().gauge).toBe(0.25);
  });

  it("keeps at most one request in flight and re-scores only the newest text", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setDraft("", "a");
    await vi.advanceTimersByTimeAsync(400);
    expect(client.calls).toHaveLength(1);

    c.setDraft("", "ab");
    await vi.advanceTimersByTimeAsync(400);
    c.setDraft("", "abc");
    await vi.advanceTimersByTimeAsync(400);
    expect(client.calls).toHaveLength(1); // still just the first request

    client.pending[0].resolve(mkScore(0.1));
    await flush();
    // The stale response was dropped and exactly one follow-up was sent,
    // for the newest text only; the intermediate draft was never scored.
    expect(client.calls).toHaveLength(2);
    expect(client.calls[1].body).toBe("abc");
    expect(c.state().gauge).toBeNull();

    client.pending[1].resolve(mkScore(0.4));
    await flush();
    expect(c.state().gauge).toBe(0.4);
    expect(c.state().history.map((h) => h.probability)).toEqual([0.4]);
  });

  it("discards an out-of-order response injected for a superseded draft", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setDraft("", "first draft");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[0].resolve(mkScore(0.3));
    await flush();
    expect(c.state().gauge).toBe(0.3);

    c.setDraft("", "second draft");
    await vi.advanceTimersByTimeAsync(400);
    c.setDraft("", "third draft");
    await vi.advanceTimersByTimeAsync(400);

    // The response for "second draft" arrives only now, after the third
    // edit superseded it: it must never reach the gauge.
    client.pending[1].resolve(mkScore(0.9));
    await flush();
    expect(c.state().gauge).toBe(0.3);
    expect(c.state().pending).toBe(true);

    expect(client.calls).toHaveLength(3);
    expect(client.calls[2].body).toBe("third draft");
    client.pending[2].resolve(mkScore(0.55));
    await flush();
    expect(c.state().gauge).toBe(0.55);
    expect(c.state().history.map((h) => h.probability)).toEqual([0.3, 0.55]);
  });

  it("keeps the last good score and raises a banner when the service fails", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setDraft("", "good");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[0].resolve(mkScore(0.42));
    await flush();
    expect(c.state().error).toBeNull();

    c.setDraft("", "good but unlucky");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[1].reject(new Error("score failed: HTTP 503"));
    await flush();

    const s = c.state();
    expect(s.error).toContain("503");
    expect(s.gauge).toBe(0.42);
    expect(s.score?.probability).toBe(0.42);
    expect(s.pending).toBe(false);

    c.setDraft("", "fixed");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[2].resolve(mkScore(0.5));
    await flush();
    expect(c.state().error).toBeNull();
    expect(c.state().gauge).toBe(0.5);
  });

  it("sorts chips by descending delta and disables zero-delta chips", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setDraft("", "draft");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[0].resolve(mkScore(0.15, { whatIf: CHIP_SET }));
    await flush();

    const chips = c.state().chips;
    expect(chips.map((ch) => ch.toggle)).toEqual([
      "disable_narrative_craving",
      "add_image",
      "add_gratitude",
      "enable_narrative_money",
    ]);
    expect(chips.map((ch) => ch.disabled)).toEqual([false, false, true, false]);
  });

  it("applies a chip: advertised number shown verbatim, toggle committed, re-score fired", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setDraft("", "draft");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[0].resolve(mkScore(0.15, { whatIf: CHIP_SET }));
    await flush();

    c.applyChip("add_image");
    const s = c.state();
    expect(s.gauge).toBe(0.3); // the service's number, not arithmetic
    expect(s.suggestion).toBe("Add a photo link as evidence");
    expect(s.toggles).toEqual(["add_image"]);
    expect(s.pending).toBe(true);
    expect(s.body).toBe("draft"); // text never auto-edited

    // Chip clicks re-score immediately, no debounce wait.
    expect(client.calls).toHaveLength(2);
    expect(client.calls[1].toggles).toEqual(["add_image"]);

    client.pending[1].resolve(mkScore(0.3, { image: true, toggles: ["add_image"] }));
    await flush();
    expect(c.state().gauge).toBe(0.3);
    expect(c.state().pending).toBe(false);
  });

  it("ignores clicks on a zero-delta (already present) chip", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setDraft("", "draft");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[0].resolve(mkScore(0.15, { whatIf: CHIP_SET }));
    await flush();

    c.applyChip("add_gratitude"); // delta 0
    expect(client.calls).toHaveLength(1);
    expect(c.state().gauge).toBe(0.15);
    expect(c.state().toggles).toEqual([]);
  });

  it("sends the configured user metadata and pinned timestamp", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setUser({ karma: 150, posted_before: false, account_age_days: 250 });
    c.setTimestamp(1316520000);
    c.setDraft("", "pizza for a movie night");
    await vi.advanceTimersByTimeAsync(400);

    expect(client.calls).toHaveLength(1); // the three edits collapse into one
    const call = client.calls[0];
    expect(call.user).toEqual({
      karma: 150,
      posted_before: false,
      account_age_days: 250,
    });
    expect(call.timestamp).toBe(1316520000);
  });

  it("never shows a probability the service did not produce", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);
    const served = new Set<number>();
    const displayed = new Set<number>();
    c.onChange((s) => {
      if (s.gauge !== null) displayed.add(s.gauge);
    });

    const serve = async (p: number, whatIf: WhatIf[] = []) => {
      served.add(p);
      for (const w of whatIf) served.add(w.probability);
      client.pending[client.pending.length - 1].resolve(
        mkScore(p, { whatIf }),
      );
      await flush();
    };

    c.setDraft("", "one");
    await vi.advanceTimersByTimeAsync(400);
    await serve(0.111, CHIP_SET);
    c.applyChip("disable_narrative_craving");
    await serve(0.222);
    c.setDraft("", "two");
    await vi.advanceTimersByTimeAsync(400);
    await serve(0.333);

    expect(displayed.size).toBeGreaterThan(0);
    for (const p of displayed) expect(served.has(p)).toBe(true);
  });

  it("derives the checklist from detected signals and the length factor", async () => {
    const client = new ManualClient();
    const c = new CoachController(client);

    c.setDraft("", "draft");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[0].resolve(
      mkScore(0.2, {
        narratives: ["money", "family"],
        gratitude: true,
        words: 120,
      }),
    );
    await flush();

    const byKey = new Map(c.state().checklist.map((i) => [i.key, i]));
    expect(byKey.get("narrative_money")?.present).toBe(true);
    expect(byKey.get("narrative_family")?.present).toBe(true);
    expect(byKey.get("narrative_craving")?.present).toBe(false);
    expect(byKey.get("gratitude")?.present).toBe(true);
    expect(byKey.get("reciprocity")?.present).toBe(false);
    expect(byKey.get("image")?.present).toBe(false);
    expect(byKey.get("length")?.detail).toBe("120 words");
  });

  it("records one history point per completed score using the injected clock", async () => {
    const client = new ManualClient();
    let tick = 0;
    const c = new CoachController(client, { now: () => ++tick });

    c.setDraft("", "one");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[0].resolve(mkScore(0.2));
    await flush();

    c.setDraft("", "two");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[1].reject(new Error("boom")); // failures add no points
    await flush();

    c.setDraft("", "three");
    await vi.advanceTimersByTimeAsync(400);
    client.pending[2].resolve(mkScore(0.6));
    await flush();

    expect(c.state().history).toEqual([
      { at: 1, probability: 0.2 },
      { at: 2, probability: 0.6 },
    ]);
  });
});
