import { describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import { FakeServer } from "./fake_server.js";

function setup(budget = 5, rewardBudget = 1) {
  const server = new FakeServer(budget, rewardBudget);
  const api = new SessionApi("", server.fetch);
  return { server, api };
}

describe("SessionController", () => {
  it("starts on the first concept query", async () => {
    const { api } = setup();
    const controller = await SessionController.create(api, {}, {}, 0);
    const view = controller.snapshot();
    expect(view.stage).toBe("elicitation");
    expect(view.conceptQuery?.left.surface).toBe("concept-0");
    expect(view.round).toBe(0);
    expect(view.budget).toBe(5);
  });

  it("posts exactly the ids from the last fetched query", async () => {
    const { server, api } = setup();
    const controller = await SessionController.create(api, {}, {}, 0);
    const query = controller.snapshot().conceptQuery!;
    await controller.chooseConcept("right");
    const feedback = server.events.filter((e) => e.kind === "feedback");
    expect(feedback).toHaveLength(1);
    expect(feedback[0].payload).toEqual({
      left: query.left.id,
      right: query.right.id,
      label: 0,
    });
  });

  it("updates the draft panel after each answer", async () => {
    const { api } = setup();
    const controller = await SessionController.create(api, {}, {}, 0);
    expect(controller.snapshot().draft).toBeNull();
    await controller.chooseConcept("left");
    expect(controller.snapshot().draft?.text).toBe("draft after 1 answers");
    await controller.chooseConcept("left");
    expect(controller.snapshot().draft?.text).toBe("draft after 2 answers");
  });

  it("silently refetches on a stale-pair conflict", async () => {
    const { server, api } = setup();
    const controller = await SessionController.create(api, {}, {}, 0);
    server.failNextWith = { status: 409, code: "conflict" };
    await controller.chooseConcept("left");
    const view = controller.snapshot();
    expect(view.error).toBeNull();
    expect(view.conceptQuery).not.toBeNull();
    expect(server.countEvents("feedback")).toBe(0);
  });

  it("shows a retryable banner on network failure and recovers", async () => {
    const { server, api } = setup();
    const controller = await SessionController.create(api, {}, {}, 0);
    server.failNextWith = { status: 500, code: "boom" };
    await controller.chooseConcept("left");
    expect(controller.snapshot().error).toContain("boom");
    await controller.retry();
    expect(controller.snapshot().error).toBeNull();
    expect(server.countEvents("feedback")).toBe(1);
  });

  it("drives a full scripted session with exact event counts", async () => {
    const { server, api } = setup(5, 1);
    const controller = await SessionController.create(api, {}, {}, 0);
    for (let i = 0; i < 5; i += 1) {
      expect(controller.snapshot().stage).toBe("elicitation");
      await controller.chooseConcept(i % 2 === 0 ? "left" : "right");
    }
    expect(controller.snapshot().stage).toBe("reward");
    await controller.chooseSummary("left");
    const view = controller.snapshot();
    expect(view.stage).toBe("final");
    expect(view.final?.text).toBe("the final summary");
    await controller.rate(8);
    expect(controller.snapshot().rating).toBe(8);

    expect(server.countEvents("feedback")).toBe(5);
    expect(server.countEvents("reward_feedback")).toBe(1);
    expect(server.countEvents("rated")).toBe(1);
  });

  it("drops concurrent clicks while a mutation is in flight", async () => {
    const { server, api } = setup();
    const controller = await SessionController.create(api, {}, {}, 0);
    await Promise.all([
      controller.chooseConcept("left"),
      controller.chooseConcept("left"),
      controller.chooseConcept("right"),
    ]);
    expect(server.countEvents("feedback")).toBe(1);
  });

  it("ignores double rating", async () => {
    const { server, api } = setup(1, 1);
    const controller = await SessionController.create(api, {}, {}, 0);
    await controller.chooseConcept("left");
    await controller.chooseSummary("left");
    await controller.rate(4);
    await controller.rate(9);
    expect(server.countEvents("rated")).toBe(1);
    expect(controller.snapshot().rating).toBe(4);
  });

  it("resumes mid-session from server state", async () => {
    const { server, api } = setup();
    const first = await SessionController.create(api, {}, {}, 0);
    await first.chooseConcept("left");
    await first.chooseConcept("right");

    const resumed = await SessionController.resume(api, "fake-session");
    const view = resumed.snapshot();
    expect(view.round).toBe(2);
    expect(view.stage).toBe("elicitation");
    expect(view.conceptQuery?.left.id).toBe(4);
    expect(view.draft?.text).toBe("draft after 2 answers");
    // resuming must not create stray events
    expect(server.countEvents("feedback")).toBe(2);
  });

  it("resumes a finished session straight to the final screen", async () => {
    const { api } = setup(1, 1);
    const first = await SessionController.create(api, {}, {}, 0);
    await first.chooseConcept("left");
    await first.chooseSummary("right");
    await first.rate(10);

    const resumed = await SessionController.resume(api, "fake-session");
    const view = resumed.snapshot();
    expect(view.stage).toBe("final");
    expect(view.final?.text).toBe("the final summary");
    expect(view.rating).toBe(10);
  });
});
