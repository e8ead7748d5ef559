import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { renderQueryView } from "../src/views/query.js";
import { MockService } from "./mockService.js";

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

describe("query view", () => {
  let root: HTMLElement;
  let mock: MockService;

  beforeEach(() => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app")!;
    mock = new MockService();
    mock.install();
  });

  it("renders three cards in the order returned by the service", async () => {
    renderQueryView(root, new ApiClient());
    const input = root.querySelector<HTMLInputElement>(".question-input")!;
    input.value = "where is my package ?";
    root.querySelector<HTMLButtonElement>(".ask")!.click();
    await flush();

    const cards = [...root.querySelectorAll(".card")];
    expect(cards).toHaveLength(3);
    const ranks = cards.map((c) => c.getAttribute("data-rank"));
    expect(ranks).toEqual(["1", "2", "3"]);
    const scores = cards.map((c) =>
      Number(c.querySelector(".match-score")!.textContent),
    );
    expect(scores).toEqual([...scores].sort((a, b) => b - a));
    // demo mode shows the match scores
    expect(root.querySelector(".match-score")).not.toBeNull();
  });

  it("shows an error banner with a retry affordance when the service is down", async () => {
    renderQueryView(root, new ApiClient());
    const input = root.querySelector<HTMLInputElement>(".question-input")!;
    input.value = "hello ?";
    mock.failNextRequests = 1;
    root.querySelector<HTMLButtonElement>(".ask")!.click();
    await flush();

    const banner = root.querySelector(".banner")!;
    expect(banner.classList.contains("hidden")).toBe(false);
    expect(banner.textContent).toContain("request failed");

    banner.querySelector<HTMLButtonElement>(".retry")!.click();
    await flush();
    expect([...root.querySelectorAll(".card")]).toHaveLength(3);
  });

  it("blocks empty questions client-side", async () => {
    renderQueryView(root, new ApiClient());
    root.querySelector<HTMLButtonElement>(".ask")!.click();
    await flush();
    expect(mock.sessions.size).toBe(0);
    expect([...root.querySelectorAll(".card")]).toHaveLength(0);
  });
});
