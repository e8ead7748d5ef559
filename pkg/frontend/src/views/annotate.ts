import { ApiClient, Score } from "../api.js";
import { clear, el } from "../dom.js";
import {
  QuestionState,
  SessionState,
  attachRecommendation,
  clearSession,
  isFullyScored,
  loadSession,
  newSession,
  resumePoint,
  saveSession,
  setScore,
} from "../session.js";

const SCORE_LABELS: Record<Score, string> = {
  1: "1 irrelevant",
  2: "2 somewhat relevant",
  3: "3 very relevant",
};

/** Blinded evaluation view: the engine identity never reaches this page,
 * and answers are shown without their match scores. */
export function renderAnnotateView(
  root: HTMLElement,
  api: ApiClient,
  storage: Storage = localStorage,
): void {
  clear(root);
  const existing = loadSession(storage);
  if (existing && existing.questions.length > 0) {
    existing.cursor = resumePoint(existing);
    void runSession(root, api, existing, storage);
  } else {
    renderStart(root, api, storage);
  }
}

function renderStart(root: HTMLElement, api: ApiClient, storage: Storage): void {
  clear(root);
  const input = el("input", {
    class: "annotator-input",
    placeholder: "annotator id",
  }) as HTMLInputElement;
  const banner = el("div", { class: "banner hidden", role: "alert" });

  async function start(): Promise<void> {
    const annotator = input.value.trim();
    if (!annotator) return;
    try {
      const questions = await api.evalQuestions();
      const session = newSession(annotator, questions);
      saveSession(session, storage);
      await runSession(root, api, session, storage);
    } catch (err) {
      banner.classList.remove("hidden");
      banner.textContent = `could not load the evaluation questions: ${
        err instanceof Error ? err.message : err
      }`;
    }
  }

  root.append(
    el("h2", {}, "Relevance annotation"),
    el("p", {}, "Score each recommended answer from 1 (irrelevant) to 3 (very relevant)."),
    el("div", { class: "ask-row" }, input,
      el("button", { class: "start", onclick: () => void start() }, "start session")),
    banner,
  );
}

async function runSession(
  root: HTMLElement,
  api: ApiClient,
  session: SessionState,
  storage: Storage,
): Promise<void> {
  if (session.cursor >= session.questions.length) {
    renderDone(root, session, storage, api);
    return;
  }
  const question = session.questions[session.cursor]!;
  let item = session.items[session.cursor];
  if (!item) {
    try {
      const rec = await api.recommend(question, 3);
      item = attachRecommendation(session, question, rec);
      saveSession(session, storage);
    } catch (err) {
      clear(root);
      root.append(
        el("div", { class: "banner", role: "alert" },
          `service unavailable: ${err instanceof Error ? err.message : err} `,
          el("button", {
            class: "retry",
            onclick: () => void runSession(root, api, session, storage),
          }, "retry")),
      );
      return;
    }
  }
  renderQuestion(root, api, session, item, storage);
}

function renderQuestion(
  root: HTMLElement,
  api: ApiClient,
  session: SessionState,
  item: QuestionState,
  storage: Storage,
): void {
  clear(root);
  const submit = el("button", { class: "submit", disabled: "" }, "submit scores") as
    HTMLButtonElement;
  const banner = el("div", { class: "banner hidden", role: "alert" });

  function refreshSubmit(): void {
    if (isFullyScored(item)) {
      submit.removeAttribute("disabled");
    } else {
      submit.setAttribute("disabled", "");
    }
  }

  const cards = item.answers.map((answer, answerIndex) => {
    const buttons = ([1, 2, 3] as Score[]).map((score) =>
      el("button", {
        class: `score-btn${item.scores[answerIndex] === score ? " selected" : ""}`,
        "data-answer": String(answerIndex),
        "data-score": String(score),
        onclick: (ev) => {
          setScore(item, answerIndex, score);
          const row = (ev.currentTarget as HTMLElement).parentElement!;
          row.querySelectorAll(".score-btn").forEach((b) => b.classList.remove("selected"));
          (ev.currentTarget as HTMLElement).classList.add("selected");
          saveSession(session, storage);
          refreshSubmit();
        },
      }, SCORE_LABELS[score]),
    );
    return el(
      "div",
      { class: "card", "data-position": String(answerIndex + 1) },
      el("div", { class: "answer-text" }, answer.text),
      el("div", { class: "score-row" }, ...buttons),
    );
  });

  submit.addEventListener("click", () => void submitScores());

  async function submitScores(): Promise<void> {
    banner.classList.add("hidden");
    submit.setAttribute("disabled", "");
    try {
      for (let i = 0; i < item.answers.length; i++) {
        const score = item.scores[i];
        if (score == null || item.sent[i]) continue;
        const outcome = await api.annotate({
          qid: item.qid,
          tid: item.answers[i]!.tid,
          score,
          annotator: session.annotator,
        });
        if (outcome === "duplicate") {
          banner.classList.remove("hidden");
          banner.textContent = "already recorded earlier; moving on";
        }
        item.sent[i] = true;
        session.submittedCount += 1;
        saveSession(session, storage);
      }
      item.submitted = true;
      session.cursor += 1;
      saveSession(session, storage);
      await runSession(root, api, session, storage);
    } catch (err) {
      // Network failures leave unsent answers queued; retry resubmits only
      // those, and the server's duplicate detection keeps it idempotent.
      banner.classList.remove("hidden");
      clear(banner);
      banner.append(
        el("span", {}, `submit failed: ${err instanceof Error ? err.message : err} `),
        el("button", { class: "retry", onclick: () => void submitScores() }, "retry"),
      );
      refreshSubmit();
    }
  }

  root.append(
    el("div", { class: "progress" },
      `question ${session.cursor + 1} of ${session.questions.length}`),
    el("h2", { class: "question-text" }, item.question),
    ...cards,
    banner,
    submit,
  );
  refreshSubmit();
}

function renderDone(
  root: HTMLElement,
  session: SessionState,
  storage: Storage,
  api: ApiClient,
): void {
  clear(root);
  root.append(
    el("h2", {}, "Session complete"),
    el("p", { class: "completion" },
      `${session.submittedCount} annotations submitted by ${session.annotator}.`),
    el("button", {
      class: "new-session",
      onclick: () => {
        clearSession(storage);
        renderAnnotateView(root, api, storage);
      },
    }, "start a new session"),
  );
}
