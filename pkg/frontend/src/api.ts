import { z } from "zod";

export const RankedAnswer = z.object({
  id: z.number().int(),
  text: z.string(),
  score: z.number(),
});
export type RankedAnswer = z.infer<typeof RankedAnswer>;

export const RecommendResponse = z.object({
  qid: z.string().min(1),
  ranked: z.array(RankedAnswer),
});
export type RecommendResponse = z.infer<typeof RecommendResponse>;

export const TemplateListing = z.object({
  templates: z.array(
    z.object({
      id: z.number().int(),
      text: z.string(),
      cluster_size: z.number().int(),
    }),
  ),
});
export type TemplateListing = z.infer<typeof TemplateListing>;

/** Relevance scores are a closed 1..3 scale; anything else is unrepresentable. */
export const Score = z.union([z.literal(1), z.literal(2), z.literal(3)]);
export type Score = z.infer<typeof Score>;

export const AnnotationPayload = z.object({
  qid: z.string().min(1),
  tid: z.number().int(),
  score: Score,
  annotator: z.string().min(1),
});
export type AnnotationPayload = z.infer<typeof AnnotationPayload>;

export const RelevanceStats = z.object({
  n_annotations: z.number().int(),
  mean: z.number(),
  ci_half_width: z.number(),
  histogram: z.record(z.string(), z.number().int()),
  n_questions: z.number().int(),
  n_with_very_relevant: z.number().int(),
});
export type RelevanceStats = z.infer<typeof RelevanceStats>;

export const ReportDoc = z.object({
  relevance: z.record(z.string(), RelevanceStats),
  mrr_p_value: z.number().nullable().optional(),
  ranking: z.record(z.string(), z.unknown()).optional(),
});
export type ReportDoc = z.infer<typeof ReportDoc>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function body(response: Response): Promise<unknown> {
  try {
    return await response.json();
  } catch {
    return {};
  }
}

async function fail(response: Response): Promise<never> {
  const doc = (await body(response)) as { detail?: unknown };
  throw new ApiError(response.status, String(doc.detail ?? response.statusText));
}

/** Thin client over the four service endpoints; all numbers shown in the
 * console come from these responses, never from client-side math. */
export class ApiClient {
  constructor(private readonly base: string = "") {}

  async recommend(question: string, k = 3): Promise<RecommendResponse> {
    const response = await fetch(`${this.base}/v1/recommend`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ question, k }),
    });
    if (!response.ok) return fail(response);
    return RecommendResponse.parse(await body(response));
  }

  async templates(): Promise<TemplateListing> {
    const response = await fetch(`${this.base}/v1/templates`);
    if (!response.ok) return fail(response);
    return TemplateListing.parse(await body(response));
  }

  /** Returns "recorded" on 201 and "duplicate" on 409 (already scored). */
  async annotate(payload: AnnotationPayload): Promise<"recorded" | "duplicate"> {
    const checked = AnnotationPayload.parse(payload);
    const response = await fetch(`${this.base}/v1/annotations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(checked),
    });
    if (response.status === 409) return "duplicate";
    if (!response.ok) return fail(response);
    return "recorded";
  }

  async report(): Promise<ReportDoc> {
    const response = await fetch(`${this.base}/v1/report`);
    if (!response.ok) return fail(response);
    return ReportDoc.parse(await body(response));
  }

  /** Evaluation question set served statically next to the console. */
  async evalQuestions(): Promise<string[]> {
    const response = await fetch(`${this.base}/eval-questions.json`);
    if (!response.ok) return fail(response);
    return z.array(z.string()).parse(await body(response));
  }
}
