/**
 * Admin page bootstrap: status table, advance-round button, graph viewer.
 */

import { Api } from './api.js';
import { AdminSession, renderGraphPanel, renderStatusTable } from './admin.js';

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const server = (byId<HTMLInputElement>('server').value || '').replace(/\/$/, '');
  const projectId = byId<HTMLInputElement>('project').value;
  const token = byId<HTMLInputElement>('token').value || undefined;
  const statusBox = byId<HTMLDivElement>('status');
  const tableBox = byId<HTMLDivElement>('lemmas');
  const graphBox = byId<HTMLDivElement>('graph');

  const api = new Api(server, projectId, token);
  const admin = new AdminSession(api, {
    onBlocked: (open) => {
      statusBox.textContent = `advance blocked: ${open} task(s) still open ` +
        '(tick "expire open tasks" to force)';
    },
    onAdvance: (report) => {
      const tags = Object.entries(report.batch_provenance)
        .map(([tag, count]) => `${tag}: ${count}`)
        .join(', ') || 'empty';
      statusBox.textContent =
        `round ${report.round} opened with ${report.batch_pairs} pairs (${tags})`;
    },
  });

  const refresh = async (): Promise<void> => {
    const stats = await admin.refresh();
    renderStatusTable(tableBox, stats);
    for (const row of tableBox.querySelectorAll('tr[data-lemma]')) {
      row.addEventListener('click', async () => {
        const lemma = (row as HTMLElement).dataset.lemma!;
        renderGraphPanel(graphBox, await admin.graph(lemma));
      });
    }
  };

  byId<HTMLButtonElement>('advance').addEventListener('click', async () => {
    const expire = byId<HTMLInputElement>('expire').checked;
    const report = await admin.advance(expire);
    if (report !== null) {
      await refresh();
    }
  });
  byId<HTMLDivElement>('login').style.display = 'none';
  byId<HTMLDivElement>('panel').style.display = '';
  await refresh();
}

byId<HTMLButtonElement>('connect').addEventListener('click', () => {
  void start();
});
