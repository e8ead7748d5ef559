import { RecommendResponse, Score } from "./api.js";

export interface QuestionState {
  question: string;
  qid: string;
  answers: { tid: number; text: string }[];
  scores: (Score | null)[];
  /** Per-answer delivery state, so a failed submit retries only what is
   * still missing server-side. */
  sent: boolean[];
  submitted: boolean;
}

export interface SessionState {
  annotator: string;
  questions: string[];
  items: QuestionState[];
  cursor: number;
  submittedCount: number;
}

const STORAGE_KEY = "replyrank.session.v1";

export function newSession(annotator: string, questions: string[]): SessionState {
  return {
    annotator,
    questions,
    items: [],
    cursor: 0,
    submittedCount: 0,
  };
}

export function attachRecommendation(
  session: SessionState,
  question: string,
  rec: RecommendResponse,
): QuestionState {
  const item: QuestionState = {
    question,
    qid: rec.qid,
    answers: rec.ranked.map((r) => ({ tid: r.id, text: r.text })),
    scores: rec.ranked.map(() => null),
    sent: rec.ranked.map(() => false),
    submitted: false,
  };
  session.items.push(item);
  return item;
}

export function setScore(item: QuestionState, answerIndex: number, score: Score): void {
  if (answerIndex < 0 || answerIndex >= item.scores.length) {
    throw new Error(`no answer at position ${answerIndex}`);
  }
  item.scores[answerIndex] = score;
}

/** Submission unlocks only when every displayed answer has a score. */
export function isFullyScored(item: QuestionState): boolean {
  return item.scores.length > 0 && item.scores.every((s) => s !== null);
}

export function isFinished(session: SessionState): boolean {
  return session.cursor >= session.questions.length;
}

/** Index of the first question not yet submitted; resuming lands here. */
export function resumePoint(session: SessionState): number {
  for (let i = 0; i < session.items.length; i++) {
    const item = session.items[i];
    if (item && !item.submitted) return i;
  }
  return session.items.length;
}

export function saveSession(session: SessionState, storage: Storage = localStorage): void {
  storage.setItem(STORAGE_KEY, JSON.stringify(session));
}

export function loadSession(storage: Storage = localStorage): SessionState | null {
  const raw = storage.getItem(STORAGE_KEY);
  if (!raw) return null;
  try {
    const parsed = JSON.parse(raw) as SessionState;
    if (!Array.isArray(parsed.questions) || !Array.isArray(parsed.items)) return null;
    for (const item of parsed.items) {
      item.sent = item.sent ?? item.answers.map(() => false);
    }
    return parsed;
  } catch {
    return null;
  }
}

export function clearSession(storage: Storage = localStorage): void {
  storage.removeItem(STORAGE_KEY);
}
