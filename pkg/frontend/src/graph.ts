/**
 * Client-side force-directed layout and SVG rendering of a clustered graph.
 *
 * The server sends only topology and cluster ids; layout and styling happen
 * here.  Styling conventions: node color is a deterministic function of the
 * cluster id (stable across reloads of the same snapshot), edges are black
 * when the median weight is >= 2.5 and gray below, and edges that disagree
 * with the clustering (positive across clusters, negative within) are
 * flagged in red with a dashed stroke.
 */

import { GraphDoc, GraphEdge, GraphNode } from './api.js';

export interface Point {
  x: number;
  y: number;
}

export interface LayoutOptions {
  width?: number;
  height?: number;
  iterations?: number;
}

const PALETTE = [
  '#4e79a7', '#f28e2b', '#59a14f', '#e15759', '#76b7b2',
  '#edc948', '#b07aa1', '#ff9da7', '#9c755f', '#bab0ac',
];

export function clusterColor(cluster: number | null): string {
  if (cluster === null) return '#cccccc';
  return PALETTE[cluster % PALETTE.length]!;
}

export function edgeIsHigh(edge: GraphEdge): boolean {
  return edge.weight !== null && edge.weight >= 2.5;
}

/** Positive edge across clusters or negative edge within one. */
export function edgeIsConflict(edge: GraphEdge, doc: GraphDoc): boolean {
  if (edge.shifted === null) return false;
  const cluster = new Map(doc.nodes.map((n) => [n.id, n.cluster]));
  const c1 = cluster.get(edge.node1);
  const c2 = cluster.get(edge.node2);
  if (c1 === undefined || c2 === undefined || c1 === null || c2 === null) return false;
  if (edge.shifted > 0 && c1 !== c2) return true;
  if (edge.shifted < 0 && c1 === c2) return true;
  return false;
}

/**
 * Deterministic spring-and-repulsion layout.
 *
 * Nodes start on a circle in id order (no randomness, so the same snapshot
 * always lays out the same way), then relax: weighted edges pull, all node
 * pairs push apart, everything is re-centered each sweep.
 */
export function layoutGraph(doc: GraphDoc, options: LayoutOptions = {}): Map<string, Point> {
  const width = options.width ?? 640;
  const height = options.height ?? 480;
  const iterations = options.iterations ?? 150;
  const nodes = [...doc.nodes].sort((a, b) => (a.id < b.id ? -1 : 1));
  const n = nodes.length;
  const points = new Map<string, Point>();
  if (n === 0) return points;
  const radius = Math.min(width, height) * 0.38;
  nodes.forEach((node, i) => {
    const angle = (2 * Math.PI * i) / n;
    points.set(node.id, {
      x: width / 2 + radius * Math.cos(angle),
      y: height / 2 + radius * Math.sin(angle),
    });
  });
  const weighted = doc.edges.filter((e) => e.weight !== null);
  const ideal = radius / Math.max(1, Math.sqrt(n));
  for (let step = 0; step < iterations; step += 1) {
    const force = new Map<string, Point>(nodes.map((node) => [node.id, { x: 0, y: 0 }]));
    for (let i = 0; i < n; i += 1) {
      for (let j = i + 1; j < n; j += 1) {
        const a = points.get(nodes[i]!.id)!;
        const b = points.get(nodes[j]!.id)!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        const dist = Math.max(1e-3, Math.hypot(dx, dy));
        const push = (ideal * ideal) / dist / dist;
        dx *= push;
        dy *= push;
        const fa = force.get(nodes[i]!.id)!;
        const fb = force.get(nodes[j]!.id)!;
        fa.x += dx * ideal;
        fa.y += dy * ideal;
        fb.x -= dx * ideal;
        fb.y -= dy * ideal;
      }
    }
    for (const edge of weighted) {
      const a = points.get(edge.node1);
      const b = points.get(edge.node2);
      if (!a || !b) continue;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const dist = Math.max(1e-3, Math.hypot(dx, dy));
      // strong edges pull harder; negative edges pull only weakly
      const affinity = edge.weight! >= 2.5 ? edge.weight! / 4 : 0.05;
      const pull = ((dist - ideal) / dist) * 0.05 * affinity;
      const fa = force.get(edge.node1)!;
      const fb = force.get(edge.node2)!;
      fa.x += dx * pull;
      fa.y += dy * pull;
      fb.x -= dx * pull;
      fb.y -= dy * pull;
    }
    const cool = 1 - step / iterations;
    for (const node of nodes) {
      const p = points.get(node.id)!;
      const f = force.get(node.id)!;
      p.x += Math.max(-10, Math.min(10, f.x)) * cool;
      p.y += Math.max(-10, Math.min(10, f.y)) * cool;
      p.x = Math.max(12, Math.min(width - 12, p.x));
      p.y = Math.max(12, Math.min(height - 12, p.y));
    }
  }
  return points;
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Render the clustered graph snapshot as an SVG string. */
export function renderGraphSvg(doc: GraphDoc, options: LayoutOptions = {}): string {
  const width = options.width ?? 640;
  const height = options.height ?? 480;
  const points = layoutGraph(doc, { ...options, width, height });
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">`,
  ];
  for (const edge of doc.edges) {
    if (edge.weight === null) continue;
    const a = points.get(edge.node1);
    const b = points.get(edge.node2);
    if (!a || !b) continue;
    const conflict = edgeIsConflict(edge, doc);
    const stroke = conflict ? '#d62728' : edgeIsHigh(edge) ? '#000000' : '#bbbbbb';
    const dash = conflict ? ' stroke-dasharray="4 3"' : '';
    const klass = conflict ? 'edge conflict' : edgeIsHigh(edge) ? 'edge high' : 'edge low';
    parts.push(
      `<line class="${klass}" x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}" ` +
        `x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}" stroke="${stroke}"` +
        ` stroke-width="${edgeIsHigh(edge) ? 1.6 : 1}"${dash}/>`,
    );
  }
  for (const node of doc.nodes) {
    const p = points.get(node.id);
    if (!p) continue;
    const color = clusterColor(node.cluster);
    const shape = node.sense
      ? `<rect class="node sense" x="${(p.x - 6).toFixed(1)}" y="${(p.y - 6).toFixed(1)}" ` +
        `width="12" height="12" fill="${color}" stroke="#333"/>`
      : `<circle class="node usage" cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="6" ` +
        `fill="${color}" stroke="#333"/>`;
    parts.push(`<g>${shape}<title>${escapeXml(node.id)}</title></g>`);
  }
  parts.push('</svg>');
  return parts.join('\n');
}

export function describeClusters(doc: GraphDoc): { cluster: number; size: number }[] {
  const sizes = new Map<number, number>();
  for (const node of doc.nodes) {
    if (node.cluster === null || node.isolate) continue;
    sizes.set(node.cluster, (sizes.get(node.cluster) ?? 0) + 1);
  }
  return [...sizes.entries()]
    .map(([cluster, size]) => ({ cluster, size }))
    .sort((a, b) => b.size - a.size || a.cluster - b.cluster);
}

export function countConflicts(doc: GraphDoc): number {
  return doc.edges.filter((edge) => edgeIsConflict(edge, doc)).length;
}

export type { GraphDoc, GraphEdge, GraphNode };
