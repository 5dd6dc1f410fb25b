/**
 * Wire types for the engine's WebSocket stream, plus defensive parsers.
 *
 * Every message on the socket is either an envelope
 * `{"frame": "network" | "timing", "data": ...}` pushed by the engine, or
 * an ack `{"type": "ack", "for": ..., "accepted": ..., "reason": ...}`
 * answering a control message. Anything that does not parse into one of
 * those shapes is skipped; a malformed frame must never kill the session.
 */

export interface NetworkNode {
  id: number;
  pos: [number, number, number];
}

export interface NetworkEdge {
  i: number;
  j: number;
  w: number;
  w_im: number | null;
  lag: number | null;
}

export interface NetworkFrame {
  metric: string;
  band: { lo_bin: number; hi_bin: number; bin_hz: number };
  n_trials: number;
  normalized: boolean;
  nodes: NetworkNode[];
  edges: NetworkEdge[];
}

export interface TimingFrame {
  block_index: number;
  budget_ms: number;
  stage_ms: Record<string, number>;
}

export interface Ack {
  type: "ack";
  for: string;
  accepted: boolean;
  reason: string;
}

export type ControlMessage =
  | { type: "set_metric"; value: string }
  | { type: "set_band"; lo: number; hi: number }
  | { type: "set_threshold"; value: number }
  | { type: "set_average_count"; value: number }
  | { type: "reset_accumulators" };

export type Incoming =
  | { kind: "network"; network: NetworkFrame }
  | { kind: "timing"; timing: TimingFrame }
  | { kind: "ack"; ack: Ack };

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function isNetworkFrame(x: unknown): x is NetworkFrame {
  if (!isRecord(x)) return false;
  if (typeof x.metric !== "string" || typeof x.n_trials !== "number") {
    return false;
  }
  if (!isRecord(x.band) || typeof x.band.lo_bin !== "number") return false;
  if (!Array.isArray(x.nodes) || !Array.isArray(x.edges)) return false;
  for (const n of x.nodes) {
    if (!isRecord(n) || typeof n.id !== "number" || !Array.isArray(n.pos)) {
      return false;
    }
  }
  for (const e of x.edges) {
    if (
      !isRecord(e) ||
      typeof e.i !== "number" ||
      typeof e.j !== "number" ||
      typeof e.w !== "number"
    ) {
      return false;
    }
  }
  return true;
}

function isTimingFrame(x: unknown): x is TimingFrame {
  return (
    isRecord(x) &&
    typeof x.block_index === "number" &&
    typeof x.budget_ms === "number" &&
    isRecord(x.stage_ms)
  );
}

function isAck(x: unknown): x is Ack {
  return (
    isRecord(x) &&
    x.type === "ack" &&
    typeof x.for === "string" &&
    typeof x.accepted === "boolean"
  );
}

/** Parse one raw socket message; returns null for anything malformed. */
export function parseIncoming(raw: string): Incoming | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (!isRecord(obj)) return null;
  if (isAck(obj)) return { kind: "ack", ack: obj };
  if (obj.frame === "network" && isNetworkFrame(obj.data)) {
    return { kind: "network", network: obj.data };
  }
  if (obj.frame === "timing" && isTimingFrame(obj.data)) {
    return { kind: "timing", timing: obj.data };
  }
  return null;
}
