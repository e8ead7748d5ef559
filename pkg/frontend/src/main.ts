import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { renderAnnotateView } from "./views/annotate.js";
import { renderQueryView } from "./views/query.js";
import { renderReportView } from "./views/report.js";

type TabName = "query" | "annotate" | "report";

const TABS: { name: TabName; label: string }[] = [
  { name: "query", label: "Try it" },
  { name: "annotate", label: "Annotate" },
  { name: "report", label: "Report" },
];

export function mountApp(root: HTMLElement, api = new ApiClient()): void {
  clear(root);
  const content = el("main", { id: "content" });
  const nav = el(
    "nav",
    { class: "tabs" },
    ...TABS.map(({ name, label }) =>
      el("button", {
        class: "tab",
        "data-tab": name,
        onclick: () => show(name),
      }, label),
    ),
  );

  function show(tab: TabName): void {
    nav.querySelectorAll(".tab").forEach((b) => {
      b.classList.toggle("active", b.getAttribute("data-tab") === tab);
    });
    window.location.hash = tab;
    if (tab === "query") renderQueryView(content, api);
    else if (tab === "annotate") renderAnnotateView(content, api);
    else void renderReportView(content, api);
  }

  root.append(el("h1", {}, "Reply console"), nav, content);
  const initial = (window.location.hash.replace("#", "") || "query") as TabName;
  show(TABS.some((t) => t.name === initial) ? initial : "query");
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountApp(document.getElementById("app")!);
}
