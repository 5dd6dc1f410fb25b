/**
 * Reconnecting session client.
 *
 * Owns the socket lifecycle (exponential backoff with a cap, automatic
 * resubscribe after an engine restart), routes frames into latest-value
 * mailboxes, and matches control acks to in-flight requests. All
 * environment access (socket construction, clock) is injectable so the
 * client is fully testable without a network.
 */

import { Mailbox } from "./mailbox.js";
import {
  type Ack,
  type ControlMessage,
  type NetworkFrame,
  type TimingFrame,
  parseIncoming,
} from "./types.js";

/** Minimal socket surface (satisfied by browser WebSocket and `ws`). */
export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionState = "connecting" | "connected" | "closed";

export interface ClientOptions {
  socketFactory: SocketFactory;
  /** Initial reconnect delay in ms (doubles per failure). */
  backoffMs?: number;
  /** Reconnect delay ceiling in ms. */
  backoffCapMs?: number;
  /** No network frame for longer than this means "stale". */
  staleAfterMs?: number;
  /** Ack wait limit in ms. */
  ackTimeoutMs?: number;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
}

interface PendingAck {
  kind: string;
  resolve: (ack: Ack) => void;
  timer: unknown;
}

export class SessionClient {
  readonly networks = new Mailbox<NetworkFrame>();
  readonly timings = new Mailbox<TimingFrame>();

  private readonly opts: Required<ClientOptions>;
  private socket: SocketLike | null = null;
  private url = "";
  private stopped = true;
  private attempt = 0;
  private reconnectTimer: unknown = null;
  private lastFrameAt = -Infinity;
  private pending: PendingAck[] = [];
  private stateValue: ConnectionState = "closed";
  onstate: ((s: ConnectionState) => void) | null = null;

  constructor(options: ClientOptions) {
    this.opts = {
      socketFactory: options.socketFactory,
      backoffMs: options.backoffMs ?? 250,
      backoffCapMs: options.backoffCapMs ?? 5000,
      staleAfterMs: options.staleAfterMs ?? 3000,
      ackTimeoutMs: options.ackTimeoutMs ?? 10000,
      now: options.now ?? (() => Date.now()),
      setTimer: options.setTimer ?? ((fn, ms) => setTimeout(fn, ms)),
      clearTimer: options.clearTimer ?? ((h) => clearTimeout(h as never)),
    };
  }

  get state(): ConnectionState {
    return this.stateValue;
  }

  /** True when connected but no network frame arrived recently. */
  get stale(): boolean {
    return (
      this.stateValue === "connected" &&
      this.opts.now() - this.lastFrameAt > this.opts.staleAfterMs
    );
  }

  connect(url: string): void {
    this.url = url;
    this.stopped = false;
    this.attempt = 0;
    this.open();
  }

  close(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) {
      this.opts.clearTimer(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
    this.socket = null;
    this.setState("closed");
  }

  /**
   * Send a control message; resolves with the engine's ack (accepted or
   * rejected) or rejects on disconnect/timeout. The UI must only reflect
   * a new setting once the resolved ack has accepted=true.
   */
  sendControl(msg: ControlMessage): Promise<Ack> {
    return new Promise((resolve, reject) => {
      if (this.stateValue !== "connected" || this.socket === null) {
        reject(new Error("not connected"));
        return;
      }
      const entry: PendingAck = {
        kind: msg.type,
        resolve,
        timer: this.opts.setTimer(() => {
          this.pending = this.pending.filter((p) => p !== entry);
          reject(new Error(`no ack for ${msg.type}`));
        }, this.opts.ackTimeoutMs),
      };
      this.pending.push(entry);
      this.socket.send(JSON.stringify(msg));
    });
  }

  private setState(s: ConnectionState): void {
    if (s === this.stateValue) return;
    this.stateValue = s;
    this.onstate?.(s);
  }

  private open(): void {
    this.setState("connecting");
    let socket: SocketLike;
    try {
      socket = this.opts.socketFactory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.attempt = 0;
      this.lastFrameAt = this.opts.now();
      this.setState("connected");
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onerror = () => {
      /* onclose follows; nothing to do here */
    };
    socket.onclose = () => {
      if (this.socket !== socket) return; // superseded socket
      this.socket = null;
      this.failPending("connection lost");
      if (!this.stopped) this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    this.setState("connecting");
    const delay = Math.min(
      this.opts.backoffCapMs,
      this.opts.backoffMs * 2 ** this.attempt,
    );
    this.attempt += 1;
    this.reconnectTimer = this.opts.setTimer(() => {
      this.reconnectTimer = null;
      if (!this.stopped) this.open();
    }, delay);
  }

  private failPending(reason: string): void {
    for (const p of this.pending) {
      this.opts.clearTimer(p.timer);
      p.resolve({ type: "ack", for: p.kind, accepted: false, reason });
    }
    this.pending = [];
  }

  private handleMessage(raw: string): void {
    const msg = parseIncoming(raw);
    if (msg === null) return; // malformed frame: skip, stay alive
    if (msg.kind === "network") {
      this.lastFrameAt = this.opts.now();
      this.networks.put(msg.network);
    } else if (msg.kind === "timing") {
      this.timings.put(msg.timing);
    } else {
      const idx = this.pending.findIndex((p) => p.kind === msg.ack.for);
      if (idx >= 0) {
        const [entry] = this.pending.splice(idx, 1);
        this.opts.clearTimer(entry!.timer);
        entry!.resolve(msg.ack);
      }
    }
  }
}
