/**
 * End-to-end test against a freshly spawned scoring service.
 *
 * Gated behind ASKWELL_LIVE=1 (run via `npm run test:live`) because it needs
 * the Python package installed. It loads the packaged reference model,
 * starts the HTTP service on a free port, drives the real controller and
 * the real DOM view against it, and checks that applying what-if chips
 * walks the gauge through the published 9.8% / 19.4% / 56.8% progression.
 */
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import net from "node:net";
import { JSDOM } from "jsdom";
import { HttpScoreClient } from "../src/api";
import { CoachController } from "../src/controller";
import { renderCoach } from "../src/view";

const LIVE = process.env.ASKWELL_LIVE === "1";

interface ReferenceScenario {
  title: string;
  body: string;
  created_at: number;
  karma: number;
  posted_before: boolean;
  account_age_days: number;
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr && typeof addr === "object") {
        const { port } = addr;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("could not allocate a port"));
      }
    });
  });
}

async function waitFor(
  cond: () => boolean,
  timeoutMs: number,
  stepMs = 25,
): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("timed out waiting for condition");
    }
    await new Promise((r) => setTimeout(r, stepMs));
  }
}

describe.skipIf(!LIVE)("coach against a live scoring service", () => {
  let child: ChildProcess;
  let base: string;
  let scenario: ReferenceScenario;

  beforeAll(async () => {
    const modelPath = execFileSync("python3", [
      "-c",
      "from importlib import resources; print(resources.files('askwell').joinpath('data/reference_model.json'))",
    ])
      .toString()
      .trim();
    const artifact = JSON.parse(readFileSync(modelPath, "utf8"));
    scenario = artifact.extra.reference_scenario as ReferenceScenario;

    const port = await freePort();
    base = `http://127.0.0.1:${port}`;
    child = spawn(
      "python3",
      ["-m", "askwell", "serve", "--model", modelPath, "--host", "127.0.0.1", "--port", String(port)],
      { stdio: ["ignore", "pipe", "pipe"] },
    );

    const deadline = Date.now() + 30000;
    for (;;) {
      try {
        const res = await fetch(`${base}/healthz`);
        if (res.ok) {
          const health = (await res.json()) as { model_loaded: boolean };
          if (health.model_loaded) break;
        }
      } catch {
        // service not up yet
      }
      if (Date.now() > deadline) throw new Error("service did not come up");
      await new Promise((r) => setTimeout(r, 150));
    }
  }, 40000);

  afterAll(() => {
    if (child) child.kill("SIGTERM");
  });

  it("walks the gauge through the reference what-if progression", async () => {
    const dom = new JSDOM('<!doctype html><div id="panel"></div>');
    (globalThis as { document?: Document }).document = dom.window.document;
    const panel = dom.window.document.getElementById("panel") as HTMLElement;

    const controller = new CoachController(new HttpScoreClient(base));
    controller.onChange((s) =>
      renderCoach(panel, s, { onChip: (t) => controller.applyChip(t) }),
    );

    const settled = () => {
      const s = controller.state();
      return !s.pending && s.error === null && s.gauge !== null;
    };
    const gaugeText = () =>
      panel.querySelector('[data-test="gauge"]')?.textContent ?? "";

    controller.setUser({
      karma: scenario.karma,
      posted_before: scenario.posted_before,
      account_age_days: scenario.account_age_days,
    });
    controller.setTimestamp(scenario.created_at);
    controller.setDraft(scenario.title, scenario.body);
    await waitFor(settled, 10000);

    const baseline = controller.state().gauge as number;
    expect(Math.abs(baseline - 0.098)).toBeLessThanOrEqual(0.002);
    expect(gaugeText()).toBe(`${(baseline * 100).toFixed(1)}%`);

    const clickChip = async (toggle: string) => {
      const before = controller.state().history.length;
      const button = [
        ...panel.querySelectorAll<HTMLButtonElement>("button.chip"),
      ].find((b) => b.dataset.toggle === toggle);
      if (!button) throw new Error(`chip not rendered: ${toggle}`);
      expect(button.disabled).toBe(false);
      button.click();
      await waitFor(() => {
        const s = controller.state();
        return s.history.length > before && !s.pending;
      }, 10000);
    };

    for (const t of [
      "disable_narrative_craving",
      "enable_narrative_job",
      "enable_narrative_money",
    ]) {
      await clickChip(t);
    }
    const second = controller.state().gauge as number;
    expect(Math.abs(second - 0.194)).toBeLessThanOrEqual(0.002);
    expect(gaugeText()).toBe(`${(second * 100).toFixed(1)}%`);

    for (const t of [
      "add_100_words",
      "add_image",
      "add_gratitude",
      "add_reciprocity",
    ]) {
      await clickChip(t);
    }
    const third = controller.state().gauge as number;
    expect(Math.abs(third - 0.568)).toBeLessThanOrEqual(0.002);
    expect(gaugeText()).toBe(`${(third * 100).toFixed(1)}%`);

    // Applied chips now advertise no further change and render disabled.
    const appliedChip = [
      ...panel.querySelectorAll<HTMLButtonElement>("button.chip"),
    ].find((b) => b.dataset.toggle === "add_image");
    expect(appliedChip?.disabled).toBe(true);
  }, 60000);

  it("reproduces the same gauge for the same draft on a fresh session", async () => {
    const client = new HttpScoreClient(base);
    const one = await client.score({
      title: scenario.title,
      body: scenario.body,
      timestamp: scenario.created_at,
      user: {
        karma: scenario.karma,
        posted_before: scenario.posted_before,
        account_age_days: scenario.account_age_days,
      },
    });
    const two = await client.score({
      title: scenario.title,
      body: scenario.body,
      timestamp: scenario.created_at,
      user: {
        karma: scenario.karma,
        posted_before: scenario.posted_before,
        account_age_days: scenario.account_age_days,
      },
    });
    expect(two.probability).toBe(one.probability);
  }, 30000);
});
