/**
 * DOM rendering for the annotation view.
 *
 * The target token is highlighted via its character span; scale buttons
 * carry the 4..0 labels; a 0 ("Cannot decide") click must be confirmed
 * before it is submitted, since excess zeros get usages removed from the
 * graph.  Nothing in this module ever renders period or identifier
 * information: the task payload does not contain any, and the view adds
 * none.
 */

import { PairTask, TaskSide } from './api.js';

export interface ViewHandlers {
  submit: (score: number, comment: string) => void;
  /** Defaults to window.confirm; injectable for tests. */
  confirmZero?: (message: string) => boolean;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Context with the [start, end) target span wrapped in a <mark>. */
export function renderSide(doc: Document, side: TaskSide): HTMLElement {
  const box = el(doc, 'div', 'pair-side');
  if (side.kind === 'sense') {
    box.classList.add('sense');
    box.appendChild(el(doc, 'div', 'side-kind', 'sense description'));
    box.appendChild(el(doc, 'div', 'sense-definition', side.definition ?? ''));
    return box;
  }
  const context = side.context ?? '';
  const start = side.target_start ?? 0;
  const end = side.target_end ?? 0;
  const text = el(doc, 'div', 'usage-context');
  text.appendChild(doc.createTextNode(context.slice(0, start)));
  const mark = el(doc, 'mark', 'target-token', context.slice(start, end));
  text.appendChild(mark);
  text.appendChild(doc.createTextNode(context.slice(end)));
  box.appendChild(text);
  return box;
}

export function renderAnnotationView(
  container: HTMLElement,
  task: PairTask,
  handlers: ViewHandlers,
): void {
  const doc = container.ownerDocument;
  container.textContent = '';

  const header = el(doc, 'div', 'task-header');
  header.appendChild(el(doc, 'span', 'lemma', task.lemma));
  header.appendChild(
    el(doc, 'span', 'progress', `${task.progress.done}/${task.progress.total}`),
  );
  container.appendChild(header);

  const pair = el(doc, 'div', 'pair');
  pair.appendChild(renderSide(doc, task.first));
  pair.appendChild(renderSide(doc, task.second));
  container.appendChild(pair);

  const comment = el(doc, 'textarea', 'comment-box') as HTMLTextAreaElement;
  comment.placeholder = 'optional comment';

  const buttons = el(doc, 'div', 'scale-buttons');
  for (const entry of task.scale) {
    const button = el(doc, 'button', 'scale-button', `${entry.score}: ${entry.label}`);
    button.dataset.score = String(entry.score);
    button.addEventListener('click', () => {
      if (entry.score === 0) {
        const confirm =
          handlers.confirmZero ??
          ((message: string) => (doc.defaultView ? doc.defaultView.confirm(message) : true));
        if (!confirm('Submit "Cannot decide"? Frequent zeros remove usages from the graph.')) {
          return;
        }
      }
      handlers.submit(entry.score, comment.value);
    });
    buttons.appendChild(button);
  }
  container.appendChild(buttons);
  container.appendChild(comment);
}

export function renderDone(container: HTMLElement, progress: { done: number; total: number }): void {
  const doc = container.ownerDocument;
  container.textContent = '';
  const note = el(doc, 'div', 'done-note',
    `All done: ${progress.done}/${progress.total} pairs judged. Thank you!`);
  container.appendChild(note);
}

export function renderQueueNotice(container: HTMLElement, pending: number): void {
  const doc = container.ownerDocument;
  let notice = container.querySelector('.offline-notice') as HTMLElement | null;
  if (pending === 0) {
    notice?.remove();
    return;
  }
  if (!notice) {
    notice = el(doc, 'div', 'offline-notice');
    container.prepend(notice);
  }
  notice.textContent = `offline: ${pending} submission(s) queued, retrying…`;
}
