// Typed client for the labeling service REST API.

export interface PendingQuestion {
  question_id: number;
  leaf_a: number;
  leaf_b: number;
  payload_a: string;
  payload_b: string;
}

export interface ClusteringView {
  clusters: number[][];
  payload_clusters: string[][];
  k: number;
  status?: string;
}

export type QuestionView =
  | PendingQuestion
  | { done: true; clustering: ClusteringView }
  | { waiting: true }
  | { error: string };

export interface Progress {
  queries: number;
  answered: number;
  clusters: number;
  status: string;
}

export interface SessionStats extends Progress {}

export class StaleQuestionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "StaleQuestionError";
  }
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

export class LabelingClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const data = await resp.json();
    if (resp.status === 409) {
      throw new StaleQuestionError(data.error ?? "stale question");
    }
    if (!resp.ok) {
      throw new ApiError(resp.status, data.error ?? `HTTP ${resp.status}`);
    }
    return data as T;
  }

  createSession(tree: unknown, algorithm: string, params: Record<string, unknown> = {}): Promise<{ id: string }> {
    return this.request("POST", "/sessions", { tree, algorithm, params });
  }

  question(sessionId: string): Promise<QuestionView> {
    return this.request("GET", `/sessions/${sessionId}/question`);
  }

  answer(
    sessionId: string,
    questionId: number,
    similar: boolean,
  ): Promise<{ accepted: boolean; progress: Progress }> {
    return this.request("POST", `/sessions/${sessionId}/answer`, {
      question_id: questionId,
      similar,
    });
  }

  clustering(sessionId: string): Promise<ClusteringView> {
    return this.request("GET", `/sessions/${sessionId}/clustering`);
  }

  stats(sessionId: string): Promise<SessionStats> {
    return this.request("GET", `/sessions/${sessionId}/stats`);
  }
}

export function isPending(q: QuestionView): q is PendingQuestion {
  return (q as PendingQuestion).question_id !== undefined;
}

export function isDone(q: QuestionView): q is { done: true; clustering: ClusteringView } {
  return (q as { done?: boolean }).done === true;
}
