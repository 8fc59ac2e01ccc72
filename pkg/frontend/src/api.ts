/**
 * Typed client for the annotation service HTTP API.
 *
 * All state changes round-trip through these endpoints; the client holds no
 * judgment data of its own.  A custom fetch implementation can be injected
 * for tests or retry wrappers.
 */

export interface TaskSide {
  kind: 'usage' | 'sense';
  context?: string;
  target_start?: number;
  target_end?: number;
  definition?: string;
}

export interface ScaleEntry {
  score: number;
  label: string;
}

export interface PairTask {
  task_id: string;
  lemma: string;
  first: TaskSide;
  second: TaskSide;
  scale: ScaleEntry[];
  progress: { done: number; total: number };
}

export interface NextTaskResponse {
  task: PairTask | null;
  progress?: { done: number; total: number };
}

export interface SubmitResponse {
  ok: boolean;
  log_length: number;
  remaining: number;
}

export interface LemmaRoundReport {
  loss: number | null;
  normalized_loss: number | null;
  n_clusters: number | null;
  removed_nodes: string[];
  flags: string[];
  batch_pairs: number;
  complete: boolean;
}

export interface AdvanceReport {
  round: number;
  batch_pairs: number;
  batch_provenance: Record<string, number>;
  lemmas: Record<string, LemmaRoundReport>;
}

export interface GraphNode {
  id: string;
  sense: boolean;
  grouping: number | null;
  cluster: number | null;
  isolate: boolean;
  definition?: string;
}

export interface GraphEdge {
  node1: string;
  node2: string;
  judgments: { annotator: string; score: number; round: number; comment: string }[];
  weight: number | null;
  shifted: number | null;
}

export interface GraphDoc {
  project_id: string;
  lemma: string;
  nodes: GraphNode[];
  edges: GraphEdge[];
  clustering: { loss: number; normalized_loss: number; n_clusters: number } | null;
}

export interface ProjectStats {
  project_id: string;
  round: number;
  total_judgments: number;
  judgment_counts: Record<string, number>;
  lemmas: Record<string, { complete: boolean; loss?: number; n_clusters?: number }>;
  [key: string]: unknown;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(typeof detail === 'string' ? detail : JSON.stringify(detail));
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Api {
  constructor(
    readonly baseUrl: string,
    readonly projectId: string,
    private readonly token?: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private headers(json = false): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h['Content-Type'] = 'application/json';
    if (this.token) h['X-Token'] = this.token;
    return h;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}/projects/${this.projectId}${path}`, init);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, body?.detail ?? body);
    }
    return body as T;
  }

  nextTask(annotator: string): Promise<NextTaskResponse> {
    const query = new URLSearchParams({ annotator });
    return this.request<NextTaskResponse>(`/tasks/next?${query}`, {
      headers: this.headers(),
    });
  }

  submitJudgment(
    annotator: string,
    taskId: string,
    score: number,
    comment = '',
  ): Promise<SubmitResponse> {
    return this.request<SubmitResponse>('/judgments', {
      method: 'POST',
      headers: this.headers(true),
      body: JSON.stringify({ annotator, task_id: taskId, score, comment }),
    });
  }

  advanceRound(expireOpen = false): Promise<AdvanceReport> {
    return this.request<AdvanceReport>('/rounds/advance', {
      method: 'POST',
      headers: this.headers(true),
      body: JSON.stringify({ expire_open: expireOpen }),
    });
  }

  fetchGraph(lemma: string): Promise<GraphDoc> {
    return this.request<GraphDoc>(`/lemmas/${encodeURIComponent(lemma)}/graph`, {
      headers: this.headers(),
    });
  }

  fetchStats(): Promise<ProjectStats> {
    return this.request<ProjectStats>('/stats', { headers: this.headers() });
  }
}
