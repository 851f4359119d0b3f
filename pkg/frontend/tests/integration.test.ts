/**
 * Optional end-to-end run against a live service instance; skipped unless
 * PREFSUM_URL points at one (e.g. `prefsum serve --port 8000`).  Guards
 * against drift between the fake server used in unit tests and the real
 * API.
 */

import { describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { SessionController } from "../src/controller.js";

const base = process.env.PREFSUM_URL;

const CLUSTER = {
  id: "integration",
  documents: [
    { id: "d0", text: "storm surge floods coast. rescue crews arrive fast. power lines fall down." },
    { id: "d1", text: "storm damage spreads inland. repair work starts monday. coast roads stay closed." },
  ],
  references: ["storm surge floods coast rescue crews arrive"],
};

const CONFIG = {
  unit: "unigram",
  budget: 5,
  summary_length: 12,
  reward_budget: 1,
  pool_size: 4,
  policy_episodes: 60,
};

describe.skipIf(!base)("live service integration", () => {
  it("drives a 5-query session against the real API", async () => {
    const api = new SessionApi(base!);
    const controller = await SessionController.create(api, CLUSTER, CONFIG, 1);
    for (let i = 0; i < 5; i += 1) {
      const view = controller.snapshot();
      expect(view.stage).toBe("elicitation");
      expect(view.conceptQuery).not.toBeNull();
      await controller.chooseConcept("left");
    }
    while (controller.snapshot().stage === "reward") {
      await controller.chooseSummary("left");
    }
    const view = controller.snapshot();
    expect(view.stage).toBe("final");
    expect(view.final?.length).toBeLessThan(CONFIG.summary_length);
    await controller.rate(7);

    const log = await api.getLog(view.sessionId);
    const kinds = log.events.map((e) => e.kind);
    expect(kinds.filter((k) => k === "feedback")).toHaveLength(5);
    expect(kinds.filter((k) => k === "reward_feedback")).toHaveLength(1);
    expect(kinds.filter((k) => k === "rated")).toHaveLength(1);
  });
});
