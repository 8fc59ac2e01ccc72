// @vitest-environment happy-dom
//
// End-to-end: spawn the Python annotation service, let two simulated
// browser annotators (rendered views, real button clicks) complete the
// round-1 batch, then advance as admin and inspect round 2.
import { ChildProcess, spawn } from 'node:child_process';
import { fileURLToPath } from 'node:url';
import path from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { Api, FetchLike, PairTask } from '../src/api.js';
import { AnnotationSession } from '../src/annotate.js';
import { AdminSession, renderGraphPanel, renderStatusTable } from '../src/admin.js';
import { renderAnnotationView } from '../src/views.js';

const PORT = 8500 + (process.pid % 400);
const BASE = `http://127.0.0.1:${PORT}`;
const HERE = path.dirname(fileURLToPath(import.meta.url));

let server: ChildProcess;

/** Every payload the annotators ever receive, for blindness checks. */
const annotatorPayloads: string[] = [];

const recordingFetch: FetchLike = async (url, init) => {
  const response = await fetch(url, init);
  if (url.includes('/tasks/next')) {
    // read once ourselves (happy-dom's clone() breaks later json() reads)
    const text = await response.text();
    annotatorPayloads.push(text);
    return {
      ok: response.ok,
      status: response.status,
      json: async () => JSON.parse(text),
    } as Response;
  }
  return response;
};

function apiFor(annotator: 'kim' | 'sam'): Api {
  return new Api(BASE, 'demo', `${annotator}-token`, recordingFetch);
}

const adminApi = new Api(BASE, 'demo', 'admin-token');

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  await new Promise((resolve) => setTimeout(resolve, 800)); // uvicorn boot
  for (;;) {
    try {
      const r = await fetch(`${BASE}/projects/demo/stats`, {
        headers: { 'X-Token': 'admin-token' },
      });
      if (r.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error('fixture server did not come up');
    await new Promise((resolve) => setTimeout(resolve, 400));
  }
}

/** Blind scoring rule: judge by the sense keyword visible in the contexts. */
function chooseScore(task: PairTask): number {
  const keyword = (side: { context?: string; definition?: string }) =>
    (side.context ?? side.definition ?? '').split('near ')[1]?.split(' ')[0] ?? '';
  return keyword(task.first) === keyword(task.second) ? 4 : 1;
}

/** Complete the annotator's queue through rendered views and button clicks. */
async function annotateThroughUi(annotator: 'kim' | 'sam'): Promise<number> {
  const container = document.createElement('div');
  document.body.appendChild(container);
  const session = new AnnotationSession(apiFor(annotator), annotator);
  let judged = 0;
  for (;;) {
    const task = await session.next();
    if (task === null) break;
    await new Promise<void>((resolve, reject) => {
      renderAnnotationView(container, task, {
        submit: (score, comment) => {
          void session.submit(score, comment).then(() => resolve(), reject);
        },
      });
      const wanted = String(chooseScore(task));
      const button = [...container.querySelectorAll('button.scale-button')].find(
        (b) => (b as HTMLElement).dataset.score === wanted,
      ) as HTMLButtonElement | undefined;
      if (!button) {
        reject(new Error('scale button not rendered'));
        return;
      }
      button.click();
    });
    judged += 1;
  }
  container.remove();
  return judged;
}

beforeAll(async () => {
  server = spawn('python3', [path.join(HERE, 'fixture_server.py'), String(PORT)], {
    stdio: ['ignore', 'pipe', 'pipe'],
  });
  server.stderr?.on('data', (chunk: Buffer) => {
    const text = chunk.toString();
    if (!text.includes('WARNING')) process.stderr.write(text);
  });
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
});

describe('live annotation round trip', () => {
  it('runs round 1 through the UI and yields a combination-only round 2', async () => {
    const admin = new AdminSession(adminApi);

    // admins cannot advance before opening a round? round 0 -> 1 opens the walk
    const round1 = await admin.advance();
    expect(round1?.round).toBe(1);
    expect(round1!.batch_pairs).toBeGreaterThan(0);

    // two simulated browser annotators work through their queues
    const kimCount = await annotateThroughUi('kim');
    const samCount = await annotateThroughUi('sam');
    expect(kimCount + samCount).toBeGreaterThanOrEqual(round1!.batch_pairs);

    // advancing with everything resolved opens round 2: pure combination
    const round2 = await admin.advance();
    expect(round2?.round).toBe(2);
    expect(round2!.batch_pairs).toBeGreaterThan(0);
    expect(Object.keys(round2!.batch_provenance)).toEqual(['combination']);

    // the annotators finish round 2 as well
    const more = (await annotateThroughUi('kim')) + (await annotateThroughUi('sam'));
    expect(more).toBeGreaterThanOrEqual(round2!.batch_pairs);
  }, 120_000);

  it('never leaked period labels or identifiers to annotators', () => {
    expect(annotatorPayloads.length).toBeGreaterThan(0);
    for (const raw of annotatorPayloads) {
      expect(raw).not.toMatch(/grouping/i);
      expect(raw).not.toMatch(/period/i);
      expect(raw).not.toMatch(/"date"/i);
      expect(raw).not.toMatch(/identifier/i);
      expect(raw).not.toMatch(/u\d\d/); // fixture node ids
    }
  });

  it('advance is blocked while round-3 tasks are open, with a count', async () => {
    const blocked: number[] = [];
    const admin = new AdminSession(adminApi, {
      onBlocked: (open) => blocked.push(open),
    });
    const round3 = await admin.advance();
    expect(round3?.round).toBe(3);
    if (round3!.batch_pairs > 0) {
      const result = await admin.advance();
      expect(result).toBeNull();
      expect(blocked[0]).toBeGreaterThan(0);
      await annotateThroughUi('kim');
      await annotateThroughUi('sam');
    }
  }, 120_000);

  it('admin views render live stats and the clustered graph', async () => {
    const admin = new AdminSession(adminApi);
    const stats = await admin.refresh();
    expect(stats.total_judgments).toBeGreaterThan(0);

    const tableBox = document.createElement('div');
    renderStatusTable(tableBox, stats);
    expect(tableBox.querySelector('tr[data-lemma="word"]')).not.toBeNull();

    const graphDoc = await admin.graph('word');
    expect(graphDoc.clustering).not.toBeNull();
    const graphBox = document.createElement('div');
    renderGraphPanel(graphBox, graphDoc);
    expect(graphBox.querySelector('svg')).not.toBeNull();
    expect(graphBox.textContent).toContain('cluster');
    // single-sense fixture judged consistently: one cluster, no conflicts
    expect(graphBox.textContent).toContain('0 conflicting edge(s)');
  }, 60_000);
});
