// Websocket session client: join on open, verify the server's monotone seq,
// reconnect with capped exponential backoff when the socket drops.

import {
  parseServerMessage,
  type ClientMessage,
  type ControllerName,
  type ServerMessage,
} from "./protocol.js";

/** Structural subset of WebSocket so tests can inject a fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientHandlers {
  onMessage: (msg: ServerMessage) => void;
  onStatus?: (status: "connecting" | "open" | "closed") => void;
  onSeqGap?: (expected: number, got: number) => void;
}

export interface ClientOptions {
  controller?: ControllerName;
  seed?: number;
  factory?: SocketFactory;
  backoffMs?: number[];
  scheduler?: (fn: () => void, ms: number) => unknown;
}

const DEFAULT_BACKOFF = [500, 1000, 2000, 4000, 8000];

export class SessionClient {
  private ws: SocketLike | null = null;
  private open = false;
  private nextSeq = 0;
  private attempt = 0;
  private closedByUser = false;
  private readonly factory: SocketFactory;
  private readonly backoff: number[];
  private readonly schedule: (fn: () => void, ms: number) => unknown;

  constructor(
    private readonly url: string,
    private readonly handlers: ClientHandlers,
    private readonly options: ClientOptions = {},
  ) {
    this.factory = options.factory
      ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.backoff = options.backoffMs ?? DEFAULT_BACKOFF;
    this.schedule = options.scheduler ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    this.closedByUser = false;
    this.open = false;
    this.handlers.onStatus?.("connecting");
    const ws = this.factory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.open = true;
      this.attempt = 0;
      this.nextSeq = 0; // a fresh connection restarts the server counter
      this.handlers.onStatus?.("open");
      this.sendRaw({
        type: "join",
        mode: "wall",
        controller: this.options.controller,
        seed: this.options.seed,
      });
    };
    ws.onmessage = (ev) => {
      const msg = parseServerMessage(ev.data);
      if (!msg) return;
      if (msg.seq !== this.nextSeq) {
        this.handlers.onSeqGap?.(this.nextSeq, msg.seq);
      }
      this.nextSeq = msg.seq + 1;
      this.handlers.onMessage(msg);
    };
    ws.onclose = () => {
      this.ws = null;
      this.open = false;
      this.handlers.onStatus?.("closed");
      if (this.closedByUser) return;
      const wait = this.backoff[Math.min(this.attempt, this.backoff.length - 1)];
      this.attempt += 1;
      this.schedule(() => this.connect(), wait);
    };
  }

  /** True when the message went out; inputs during an outage are dropped. */
  send(msg: ClientMessage): boolean {
    if (!this.ws || !this.open) return false;
    return this.sendRaw(msg);
  }

  private sendRaw(msg: ClientMessage): boolean {
    const body: Record<string, unknown> = {};
    for (const [k, v] of Object.entries(msg)) {
      if (v !== undefined) body[k] = v;
    }
    this.ws!.send(JSON.stringify(body));
    return true;
  }

  close(): void {
    this.closedByUser = true;
    this.ws?.close();
  }
}
