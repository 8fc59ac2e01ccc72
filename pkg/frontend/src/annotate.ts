/**
 * Annotation flow: fetch the next task, wait for a score, submit, repeat.
 *
 * Submissions that fail on the network are queued and retried before the
 * next fetch; a 409 from the server means the judgment already landed
 * (at-most-once per task_id), so the entry is dropped rather than retried.
 */

import { Api, ApiError, PairTask } from './api.js';

interface QueuedSubmission {
  taskId: string;
  score: number;
  comment: string;
}

export interface SessionEvents {
  onTask?: (task: PairTask) => void;
  onDone?: (progress: { done: number; total: number }) => void;
  onError?: (message: string) => void;
  onQueued?: (pending: number) => void;
}

export class AnnotationSession {
  current: PairTask | null = null;
  finished = false;
  private queue: QueuedSubmission[] = [];

  constructor(
    private readonly api: Api,
    readonly annotator: string,
    private readonly events: SessionEvents = {},
  ) {}

  get pendingSubmissions(): number {
    return this.queue.length;
  }

  /** Flush queued offline submissions, then fetch the next open task. */
  async next(): Promise<PairTask | null> {
    await this.flushQueue();
    const response = await this.api.nextTask(this.annotator);
    this.current = response.task;
    if (response.task === null) {
      this.finished = true;
      this.events.onDone?.(response.progress ?? { done: 0, total: 0 });
      return null;
    }
    this.events.onTask?.(response.task);
    return response.task;
  }

  /** Submit a score for the current task; resolves once acknowledged. */
  async submit(score: number, comment = ''): Promise<boolean> {
    if (!this.current) {
      throw new Error('no task to submit');
    }
    const entry = { taskId: this.current.task_id, score, comment };
    const accepted = await this.trySubmit(entry);
    if (accepted) {
      this.current = null;
    }
    return accepted;
  }

  /** Fetch-submit loop with a scoring callback; used by scripted clients. */
  async run(score: (task: PairTask) => number | Promise<number>): Promise<number> {
    let submitted = 0;
    for (;;) {
      const task = await this.next();
      if (task === null) {
        return submitted;
      }
      await this.submit(await score(task));
      submitted += 1;
    }
  }

  private async trySubmit(entry: QueuedSubmission): Promise<boolean> {
    try {
      await this.api.submitJudgment(this.annotator, entry.taskId, entry.score, entry.comment);
      return true;
    } catch (error) {
      if (error instanceof ApiError) {
        if (error.status === 409) {
          // already resolved server-side: treat as submitted
          return true;
        }
        this.events.onError?.(String(error.message));
        throw error;
      }
      // network failure: park the submission and retry later
      this.queue.push(entry);
      this.events.onQueued?.(this.queue.length);
      this.current = null;
      return false;
    }
  }

  private async flushQueue(): Promise<void> {
    while (this.queue.length > 0) {
      const entry = this.queue[0]!;
      try {
        await this.api.submitJudgment(this.annotator, entry.taskId, entry.score, entry.comment);
        this.queue.shift();
      } catch (error) {
        if (error instanceof ApiError && error.status === 409) {
          this.queue.shift(); // landed in an earlier attempt
          continue;
        }
        if (error instanceof ApiError) {
          this.events.onError?.(String(error.message));
          this.queue.shift(); // server rejected it outright; do not loop forever
          continue;
        }
        return; // still offline; keep the queue for the next attempt
      }
    }
  }
}
