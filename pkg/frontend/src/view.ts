/** DOM rendering: every click maps to exactly one controller call. */

import { SessionView } from "./controller.js";

export interface Handlers {
  onConcept: (side: "left" | "right") => void;
  onSummary: (side: "left" | "right") => void;
  onRate: (score: number) => void;
  onRetry: () => void;
}

function el(
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function conceptCard(
  side: "left" | "right",
  surface: string,
  snippet: string,
  disabled: boolean,
  onPick: () => void,
): HTMLElement {
  const card = el("button", `card concept-card ${side}`);
  card.setAttribute("data-side", side);
  (card as HTMLButtonElement).disabled = disabled;
  card.appendChild(el("div", "card-surface", surface));
  card.appendChild(el("div", "card-snippet", snippet));
  card.addEventListener("click", onPick);
  return card;
}

function summaryCard(
  side: "left" | "right",
  text: string,
  disabled: boolean,
  onPick: () => void,
): HTMLElement {
  const card = el("button", `card summary-card ${side}`);
  card.setAttribute("data-side", side);
  (card as HTMLButtonElement).disabled = disabled;
  card.appendChild(el("div", "card-text", text));
  card.addEventListener("click", onPick);
  return card;
}

export function render(
  root: HTMLElement,
  view: SessionView,
  handlers: Handlers,
): void {
  root.textContent = "";

  if (view.error) {
    const banner = el("div", "banner error", view.error);
    const retry = el("button", "retry", "Retry");
    retry.addEventListener("click", handlers.onRetry);
    banner.appendChild(retry);
    root.appendChild(banner);
    return;
  }

  const header = el("div", "progress");
  if (view.stage === "elicitation") {
    header.textContent = `Question ${view.round + 1} of ${view.budget}: which matters more to you?`;
  } else if (view.stage === "reward") {
    header.textContent = `Summary check ${view.rewardRound + 1} of ${view.rewardBudget}: which summary is better?`;
  } else {
    header.textContent = "Your summary";
  }
  root.appendChild(header);

  const bar = el("div", "progress-bar");
  const total = view.budget + view.rewardBudget;
  const done = Math.min(view.round, view.budget) + Math.min(view.rewardRound, view.rewardBudget);
  const fill = el("div", "progress-fill");
  fill.style.width = `${total ? Math.round((100 * done) / total) : 100}%`;
  bar.appendChild(fill);
  root.appendChild(bar);

  if (view.stage === "elicitation" && view.conceptQuery) {
    const row = el("div", "card-row");
    row.appendChild(
      conceptCard("left", view.conceptQuery.left.surface,
        view.conceptQuery.left.snippet, view.busy,
        () => handlers.onConcept("left")),
    );
    row.appendChild(
      conceptCard("right", view.conceptQuery.right.surface,
        view.conceptQuery.right.snippet, view.busy,
        () => handlers.onConcept("right")),
    );
    root.appendChild(row);
  }

  if (view.stage === "reward" && view.summaryQuery) {
    const row = el("div", "card-row");
    row.appendChild(
      summaryCard("left", view.summaryQuery.left.text, view.busy,
        () => handlers.onSummary("left")),
    );
    row.appendChild(
      summaryCard("right", view.summaryQuery.right.text, view.busy,
        () => handlers.onSummary("right")),
    );
    root.appendChild(row);
  }

  if (view.draft && view.stage !== "final") {
    const panel = el("div", "panel draft-panel");
    panel.appendChild(el("h3", "panel-title", "Draft summary so far"));
    panel.appendChild(el("p", "panel-text", view.draft.text));
    root.appendChild(panel);
  }

  if (view.stage === "final" && view.final) {
    const panel = el("div", "panel final-panel");
    panel.appendChild(el("h3", "panel-title", "Final summary"));
    panel.appendChild(el("p", "panel-text", view.final.text));
    root.appendChild(panel);

    if (view.rating === null) {
      const rating = el("div", "rating");
      rating.appendChild(el("span", "rating-label", "How satisfied are you? (0-10)"));
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "10";
      slider.step = "1";
      slider.value = "5";
      slider.className = "rating-slider";
      const valueLabel = el("span", "rating-value", "5");
      slider.addEventListener("input", () => {
        valueLabel.textContent = slider.value;
      });
      const submit = el("button", "rating-submit", "Submit rating");
      (submit as HTMLButtonElement).disabled = view.busy;
      submit.addEventListener("click", () =>
        handlers.onRate(parseInt(slider.value, 10)),
      );
      rating.appendChild(slider);
      rating.appendChild(valueLabel);
      rating.appendChild(submit);
      root.appendChild(rating);
    } else {
      root.appendChild(
        el("div", "rating-done", `Thanks! You rated this summary ${view.rating}/10.`),
      );
    }
  }
}
