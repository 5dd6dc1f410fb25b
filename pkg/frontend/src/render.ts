/**
 * Pure scene construction: turns a network frame plus view options into
 * plain drawable primitives (circles and segments on the unit square) and
 * a timing frame into bar rows against the block budget. The DOM/canvas
 * code in app.ts only draws what these functions return, so every visual
 * rule is unit-testable.
 */

import { type LayoutOptions, placeNodes } from "./layout.js";
import { normalizedDegrees, thresholdEdges } from "./threshold.js";
import type { NetworkFrame, TimingFrame } from "./types.js";

export interface SceneNode {
  id: number;
  x: number;
  y: number;
  /** Radius scale in [minRadius, 1]: degree normalized to the max node. */
  r: number;
}

export interface SceneEdge {
  i: number;
  j: number;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  /** Width scale in (0, 1]: |weight| normalized to the strongest edge. */
  width: number;
  weight: number;
  lag: number | null;
}

export interface Scene {
  metric: string;
  nTrials: number;
  bandLabel: string;
  nodes: SceneNode[];
  edges: SceneEdge[];
}

export interface ViewOptions extends LayoutOptions {
  /** Display keep-fraction; null renders the frame's edges unchanged. */
  thresholdFraction?: number | null;
  /** Smallest node radius scale so degree-0 nodes stay visible. */
  minRadius?: number;
}

export function buildScene(
  net: NetworkFrame,
  opts: ViewOptions = {},
): Scene {
  const minRadius = opts.minRadius ?? 0.25;
  const fraction = opts.thresholdFraction ?? null;
  const edges =
    fraction === null
      ? [...net.edges]
      : thresholdEdges(net.edges, fraction, net.nodes.length);
  const placed = placeNodes(net.nodes, edges, opts);
  const pos = new Map(placed.map((p) => [p.id, p]));
  const degrees = normalizedDegrees(edges, net.nodes.length);
  const maxW = Math.max(1e-300, ...edges.map((e) => Math.abs(e.w)));

  const nodes: SceneNode[] = placed.map((p, idx) => ({
    id: p.id,
    x: p.x,
    y: p.y,
    r: minRadius + (1 - minRadius) * (degrees[idx] ?? 0),
  }));
  const sceneEdges: SceneEdge[] = [];
  for (const e of edges) {
    const a = pos.get(e.i);
    const b = pos.get(e.j);
    if (a === undefined || b === undefined) continue; // defensive: bad index
    sceneEdges.push({
      i: e.i,
      j: e.j,
      x1: a.x,
      y1: a.y,
      x2: b.x,
      y2: b.y,
      width: Math.abs(e.w) / maxW,
      weight: e.w,
      lag: e.lag,
    });
  }
  const { lo_bin, hi_bin, bin_hz } = net.band;
  return {
    metric: net.metric,
    nTrials: net.n_trials,
    bandLabel: `${(lo_bin * bin_hz).toFixed(1)}-${(hi_bin * bin_hz).toFixed(1)} Hz`,
    nodes,
    edges: sceneEdges,
  };
}

export interface TimingBar {
  stage: string;
  ms: number;
  /** Fill fraction of the budget axis, clamped to 1. */
  fill: number;
  overBudget: boolean;
}

/** One bar per stage against the shared block-budget line. */
export function buildTimingBars(tm: TimingFrame): TimingBar[] {
  return Object.entries(tm.stage_ms).map(([stage, ms]) => ({
    stage,
    ms,
    fill: Math.min(1, ms / tm.budget_ms),
    overBudget: ms > tm.budget_ms,
  }));
}
