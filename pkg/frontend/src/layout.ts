/**
 * Node placement for the network view.
 *
 * Frames carry 3-D positions; when they are all zero (no geometry known,
 * e.g. sensor-space sessions) a small deterministic force-directed layout
 * spreads the nodes instead. The layout is seeded from the node count so
 * repeated renders of the same session do not jitter.
 */

import type { NetworkEdge, NetworkNode } from "./types.js";

export interface PlacedNode {
  id: number;
  x: number;
  y: number;
}

export function hasGeometry(nodes: readonly NetworkNode[]): boolean {
  return nodes.some((n) => n.pos.some((c) => c !== 0));
}

/** Orthographic projection of the engine-provided 3-D positions. */
export function projectPositions(nodes: readonly NetworkNode[]): PlacedNode[] {
  return nodes.map((n) => ({ id: n.id, x: n.pos[0], y: n.pos[1] }));
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface LayoutOptions {
  iterations?: number;
  seed?: number;
}

/**
 * Fruchterman–Reingold style layout on the unit square: springs along
 * edges, inverse-square repulsion between all node pairs, cooling step.
 */
export function forceLayout(
  nodes: readonly NetworkNode[],
  edges: readonly NetworkEdge[],
  opts: LayoutOptions = {},
): PlacedNode[] {
  const n = nodes.length;
  if (n === 0) return [];
  if (n === 1) return [{ id: nodes[0]!.id, x: 0.5, y: 0.5 }];
  const iterations = opts.iterations ?? 60;
  const rand = mulberry32(opts.seed ?? n * 2654435761);
  const xs = new Float64Array(n);
  const ys = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    xs[i] = rand();
    ys[i] = rand();
  }
  const index = new Map<number, number>();
  nodes.forEach((node, i) => index.set(node.id, i));
  const k = Math.sqrt(1 / n); // ideal spring length on the unit square
  let temp = 0.1;
  const dx = new Float64Array(n);
  const dy = new Float64Array(n);
  for (let iter = 0; iter < iterations; iter++) {
    dx.fill(0);
    dy.fill(0);
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let ex = xs[i]! - xs[j]!;
        let ey = ys[i]! - ys[j]!;
        let d = Math.hypot(ex, ey);
        if (d < 1e-9) {
          ex = rand() - 0.5;
          ey = rand() - 0.5;
          d = Math.hypot(ex, ey);
        }
        const rep = (k * k) / d;
        dx[i]! += (ex / d) * rep;
        dy[i]! += (ey / d) * rep;
        dx[j]! -= (ex / d) * rep;
        dy[j]! -= (ey / d) * rep;
      }
    }
    for (const e of edges) {
      const i = index.get(e.i);
      const j = index.get(e.j);
      if (i === undefined || j === undefined) continue;
      const ex = xs[i]! - xs[j]!;
      const ey = ys[i]! - ys[j]!;
      const d = Math.hypot(ex, ey) || 1e-9;
      const att = (d * d) / k;
      dx[i]! -= (ex / d) * att;
      dy[i]! -= (ey / d) * att;
      dx[j]! += (ex / d) * att;
      dy[j]! += (ey / d) * att;
    }
    for (let i = 0; i < n; i++) {
      const d = Math.hypot(dx[i]!, dy[i]!) || 1e-9;
      const step = Math.min(d, temp);
      xs[i] = Math.min(1, Math.max(0, xs[i]! + (dx[i]! / d) * step));
      ys[i] = Math.min(1, Math.max(0, ys[i]! + (dy[i]! / d) * step));
    }
    temp *= 0.95;
  }
  return nodes.map((node, i) => ({ id: node.id, x: xs[i]!, y: ys[i]! }));
}

/** Choose placement: engine geometry when present, force layout otherwise. */
export function placeNodes(
  nodes: readonly NetworkNode[],
  edges: readonly NetworkEdge[],
  opts: LayoutOptions = {},
): PlacedNode[] {
  return hasGeometry(nodes)
    ? projectPositions(nodes)
    : forceLayout(nodes, edges, opts);
}
