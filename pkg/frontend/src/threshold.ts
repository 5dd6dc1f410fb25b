/**
 * Client-side display thresholding, bit-identical to the engine's rule so
 * the slider never disagrees with a server-side thresholded frame:
 *
 *   keep ceil(fraction * nPairs) edges, ranked by |w| descending, exact
 *   ties broken by (i, j) lexicographic ascending order.
 *
 * `nPairs` is the full pair count of the network (n*(n-1)/2 over nodes),
 * not the length of the received edge list — a frame that was already
 * thresholded upstream re-thresholds consistently.
 */

import type { NetworkEdge } from "./types.js";

export function pairCount(nNodes: number): number {
  return (nNodes * (nNodes - 1)) / 2;
}

export function thresholdEdges(
  edges: readonly NetworkEdge[],
  fraction: number,
  nNodes: number,
): NetworkEdge[] {
  if (!(fraction > 0 && fraction <= 1)) {
    throw new RangeError(`fraction ${fraction} outside (0, 1]`);
  }
  const keep = Math.min(
    edges.length,
    Math.ceil(fraction * pairCount(nNodes)),
  );
  const ranked = [...edges].sort((a, b) => {
    const d = Math.abs(b.w) - Math.abs(a.w);
    if (d !== 0) return d;
    if (a.i !== b.i) return a.i - b.i;
    return a.j - b.j;
  });
  const kept = ranked.slice(0, keep);
  // stable display order: (i, j) ascending, matching the wire format
  kept.sort((a, b) => (a.i !== b.i ? a.i - b.i : a.j - b.j));
  return kept;
}

/** Degree of every node in a (thresholded) edge list. */
export function nodeDegrees(
  edges: readonly NetworkEdge[],
  nNodes: number,
): number[] {
  const deg = new Array<number>(nNodes).fill(0);
  for (const e of edges) {
    deg[e.i] = (deg[e.i] ?? 0) + 1;
    deg[e.j] = (deg[e.j] ?? 0) + 1;
  }
  return deg;
}

/** Degrees normalized by the maximal node (all zeros stay zero). */
export function normalizedDegrees(
  edges: readonly NetworkEdge[],
  nNodes: number,
): number[] {
  const deg = nodeDegrees(edges, nNodes);
  const max = Math.max(0, ...deg);
  return max === 0 ? deg : deg.map((d) => d / max);
}
