/**
 * Admin flow: per-lemma status, round advancement, and graph inspection.
 *
 * Advancing while tasks are open is rejected by the server; the view keeps
 * the remaining-task count visible so the admin can chase or expire them.
 */

import { AdvanceReport, Api, ApiError, GraphDoc, ProjectStats } from './api.js';
import { countConflicts, describeClusters, renderGraphSvg } from './graph.js';

export interface AdminEvents {
  onStats?: (stats: ProjectStats) => void;
  onAdvance?: (report: AdvanceReport) => void;
  onBlocked?: (openTasks: number) => void;
  onError?: (message: string) => void;
}

export class AdminSession {
  lastReport: AdvanceReport | null = null;

  constructor(
    private readonly api: Api,
    private readonly events: AdminEvents = {},
  ) {}

  async refresh(): Promise<ProjectStats> {
    const stats = await this.api.fetchStats();
    this.events.onStats?.(stats);
    return stats;
  }

  /** Advance the round; returns null when blocked by open tasks. */
  async advance(expireOpen = false): Promise<AdvanceReport | null> {
    try {
      const report = await this.api.advanceRound(expireOpen);
      this.lastReport = report;
      this.events.onAdvance?.(report);
      return report;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        const detail = error.detail as { open_tasks?: number } | string;
        const open = typeof detail === 'object' && detail?.open_tasks ? detail.open_tasks : 0;
        this.events.onBlocked?.(open);
        return null;
      }
      this.events.onError?.(String(error));
      throw error;
    }
  }

  graph(lemma: string): Promise<GraphDoc> {
    return this.api.fetchGraph(lemma);
  }
}

export function renderStatusTable(container: HTMLElement, stats: ProjectStats): void {
  const doc = container.ownerDocument;
  container.textContent = '';
  const table = doc.createElement('table');
  table.className = 'lemma-status';
  const head = doc.createElement('tr');
  for (const title of ['lemma', 'clusters', 'loss', 'complete']) {
    const th = doc.createElement('th');
    th.textContent = title;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const [lemma, entry] of Object.entries(stats.lemmas).sort()) {
    const row = doc.createElement('tr');
    const cells = [
      lemma,
      entry.n_clusters === undefined ? '–' : String(entry.n_clusters),
      entry.loss === undefined ? '–' : String(entry.loss),
      entry.complete ? 'yes' : 'no',
    ];
    for (const value of cells) {
      const td = doc.createElement('td');
      td.textContent = value;
      row.appendChild(td);
    }
    row.dataset.lemma = lemma;
    table.appendChild(row);
  }
  container.appendChild(table);
}

export function renderGraphPanel(container: HTMLElement, graphDoc: GraphDoc): void {
  const doc = container.ownerDocument;
  container.textContent = '';
  const summary = doc.createElement('div');
  summary.className = 'graph-summary';
  const clusters = describeClusters(graphDoc);
  const conflicts = countConflicts(graphDoc);
  const lossText = graphDoc.clustering
    ? `loss ${graphDoc.clustering.loss} (normalized ${graphDoc.clustering.normalized_loss.toFixed(3)})`
    : 'not clustered yet';
  summary.textContent =
    `${graphDoc.lemma}: ${clusters.length} cluster(s), ${lossText}, ` +
    `${conflicts} conflicting edge(s)`;
  container.appendChild(summary);
  const holder = doc.createElement('div');
  holder.className = 'graph-svg';
  holder.innerHTML = renderGraphSvg(graphDoc, { width: 720, height: 520 });
  container.appendChild(holder);
}
