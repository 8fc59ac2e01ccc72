/**
 * Annotator page bootstrap: connect from the login form, then loop
 * fetch -> render -> submit until the queue is empty.
 */

import { Api, ApiError } from './api.js';
import { AnnotationSession } from './annotate.js';
import { renderAnnotationView, renderDone, renderQueueNotice } from './views.js';

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const server = (byId<HTMLInputElement>('server').value || '').replace(/\/$/, '');
  const projectId = byId<HTMLInputElement>('project').value;
  const annotator = byId<HTMLInputElement>('annotator').value;
  const token = byId<HTMLInputElement>('token').value || undefined;
  const stage = byId<HTMLDivElement>('stage');
  const status = byId<HTMLDivElement>('status');

  const api = new Api(server, projectId, token);
  const session = new AnnotationSession(api, annotator, {
    onQueued: (pending) => renderQueueNotice(stage, pending),
    onError: (message) => {
      status.textContent = message;
    },
  });

  const showNext = async (): Promise<void> => {
    let task;
    try {
      task = await session.next();
    } catch (error) {
      if (error instanceof ApiError && error.status === 401) {
        status.textContent = 'session expired or bad token; please reconnect';
        byId<HTMLDivElement>('login').style.display = '';
        stage.textContent = '';
        return;
      }
      status.textContent = `cannot reach the server: ${String(error)}`;
      return;
    }
    renderQueueNotice(stage, session.pendingSubmissions);
    if (task === null) {
      renderDone(stage, { done: 0, total: 0 });
      return;
    }
    status.textContent = '';
    renderAnnotationView(stage, task, {
      submit: async (score, comment) => {
        await session.submit(score, comment);
        await showNext();
      },
    });
  };

  byId<HTMLDivElement>('login').style.display = 'none';
  await showNext();
}

byId<HTMLButtonElement>('connect').addEventListener('click', () => {
  void start();
});
