/**
 * Entry point: binds the create-session form, the session controller,
 * and the renderer.  The session id is kept in the URL hash so a
 * browser refresh resumes the exact stage from server state.
 */

import { SessionApi } from "./api.js";
import { SessionController } from "./controller.js";
import { render } from "./view.js";

const DEFAULT_CONFIG = {
  unit: "unigram",
  budget: 5,
  summary_length: 30,
  reward_budget: 1,
  pool_size: 6,
};

function baseUrl(): string {
  const input = document.getElementById("server-url") as HTMLInputElement | null;
  return input?.value || "";
}

async function attach(controller: SessionController): Promise<void> {
  const root = document.getElementById("session-root");
  if (!root) {
    throw new Error("missing #session-root element");
  }
  controller.subscribe((view) => {
    render(root, view, {
      onConcept: (side) => void controller.chooseConcept(side),
      onSummary: (side) => void controller.chooseSummary(side),
      onRate: (score) => void controller.rate(score),
      onRetry: () => void controller.retry(),
    });
  });
}

async function start(): Promise<void> {
  const api = new SessionApi(baseUrl());
  const existing = window.location.hash.replace(/^#/, "");
  if (existing) {
    await attach(await SessionController.resume(api, existing));
    return;
  }
  const form = document.getElementById("create-form") as HTMLFormElement | null;
  if (!form) {
    return;
  }
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const textarea = document.getElementById("cluster-json") as HTMLTextAreaElement;
    const seedInput = document.getElementById("seed") as HTMLInputElement;
    const budgetInput = document.getElementById("budget") as HTMLInputElement;
    const cluster = JSON.parse(textarea.value);
    const seed = parseInt(seedInput.value || "0", 10);
    const config = {
      ...DEFAULT_CONFIG,
      budget: parseInt(budgetInput.value || "5", 10),
      seed,
    };
    const controller = await SessionController.create(api, cluster, config, seed);
    window.location.hash = controller.snapshot().sessionId;
    form.style.display = "none";
    await attach(controller);
  });
}

window.addEventListener("DOMContentLoaded", () => {
  void start();
});
