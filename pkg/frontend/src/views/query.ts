import { ApiClient } from "../api.js";
import { clear, el } from "../dom.js";

/** Demo view: type a question, see the live top-3 with scores visible. */
export function renderQueryView(root: HTMLElement, api: ApiClient): void {
  clear(root);
  const results = el("div", { class: "results" });
  const banner = el("div", { class: "banner hidden", role: "alert" });
  const input = el("input", {
    class: "question-input",
    placeholder: "customer question, e.g. where is my package ?",
  }) as HTMLInputElement;

  let lastQuestion = "";

  async function ask(question: string): Promise<void> {
    banner.classList.add("hidden");
    if (!question.trim()) return; // empty questions never reach the service
    lastQuestion = question;
    try {
      const rec = await api.recommend(question, 3);
      clear(results);
      rec.ranked.forEach((answer, i) => {
        results.append(
          el(
            "div",
            { class: "card", "data-rank": String(i + 1), "data-tid": String(answer.id) },
            el("span", { class: "rank" }, `#${i + 1}`),
            el("span", { class: "answer-text" }, answer.text),
            el("span", { class: "match-score" }, answer.score.toFixed(4)),
          ),
        );
      });
    } catch (err) {
      clear(banner);
      banner.classList.remove("hidden");
      banner.append(
        el("span", {}, `request failed: ${err instanceof Error ? err.message : err}`),
        el("button", { class: "retry", onclick: () => void ask(lastQuestion) }, "retry"),
      );
    }
  }

  const button = el(
    "button",
    { class: "ask", onclick: () => void ask(input.value) },
    "recommend",
  );
  input.addEventListener("keydown", (ev) => {
    if ((ev as KeyboardEvent).key === "Enter") void ask(input.value);
  });

  root.append(
    el("h2", {}, "Try a question"),
    el("div", { class: "ask-row" }, input, button),
    banner,
    results,
  );
}
