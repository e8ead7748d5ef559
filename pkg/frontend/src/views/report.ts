import { ApiClient, RelevanceStats } from "../api.js";
import { clear, el } from "../dom.js";

/** Report view: renders exactly what /v1/report returned; no statistics
 * are computed client-side. */
export async function renderReportView(root: HTMLElement, api: ApiClient): Promise<void> {
  clear(root);
  root.append(el("h2", {}, "Human evaluation report"));
  try {
    const report = await api.report();
    const scorers = Object.keys(report.relevance).sort();
    if (scorers.length === 0) {
      root.append(el("p", { class: "empty-state" }, "no annotations yet"));
      return;
    }
    const row = el("div", { class: "report-row" });
    for (const scorer of scorers) {
      row.append(scorerPanel(scorer, report.relevance[scorer]!));
    }
    root.append(row);
  } catch (err) {
    root.append(
      el("div", { class: "banner", role: "alert" },
        `could not load the report: ${err instanceof Error ? err.message : err}`),
    );
  }
}

function scorerPanel(scorer: string, stats: RelevanceStats): HTMLElement {
  const counts = [1, 2, 3].map((score) => stats.histogram[String(score)] ?? 0);
  const peak = Math.max(1, ...counts);
  const bars = counts.map((count, i) =>
    el(
      "div",
      { class: "bar-slot" },
      el("div", {
        class: "bar",
        "data-score": String(i + 1),
        "data-count": String(count),
        style: `height: ${Math.round((100 * count) / peak)}px`,
      }),
      el("div", { class: "bar-label" }, `${i + 1}`),
      el("div", { class: "bar-count" }, String(count)),
    ),
  );
  return el(
    "div",
    { class: "scorer-panel", "data-scorer": scorer },
    el("h3", { class: "panel-title" }, scorer),
    el("div", { class: "histogram" }, ...bars),
    el("p", { class: "mean-line" },
      `mean relevance ${stats.mean.toFixed(2)} ± ${stats.ci_half_width.toFixed(2)} (95% CI)`),
    el("p", { class: "very-relevant-line" },
      `${stats.n_with_very_relevant} of ${stats.n_questions} questions had a very relevant answer in the top 3`),
  );
}
