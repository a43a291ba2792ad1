// Reconnecting WebSocket client for the drive service.
//
// Sends are dropped (not queued) while disconnected or over the rate cap;
// reconnects with exponential backoff and resets it on a clean open.

import { ClientCommand, Telemetry, WS_PROTOCOL, encodeCommand, errorFrame,
         parseTelemetry } from "./protocol";
import { RateLimiter } from "./ratelimit";

export type SocketStatus = "disconnected" | "connecting" | "connected";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
}

export interface DriveSocketOptions {
  wsFactory?: (url: string, protocol: string) => SocketLike;
  limiter?: RateLimiter;
  backoffMs?: number[];
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

export interface DriveSocketHooks {
  onTelemetry?: (t: Telemetry) => void;
  onStatus?: (s: SocketStatus) => void;
  onServerError?: (message: string) => void;
}

const DEFAULT_BACKOFF = [500, 1000, 2000, 4000, 8000];

export class DriveSocket {
  status: SocketStatus = "disconnected";
  sentCount = 0;
  droppedCount = 0;

  private ws: SocketLike | null = null;
  private attempt = 0;
  private closed = false;
  private readonly wsFactory: (url: string, protocol: string) => SocketLike;
  private readonly limiter: RateLimiter;
  private readonly backoff: number[];
  private readonly schedule: (fn: () => void, ms: number) => unknown;

  constructor(private url: string, private hooks: DriveSocketHooks = {},
              opts: DriveSocketOptions = {}) {
    this.wsFactory = opts.wsFactory
      ?? ((u, p) => new WebSocket(u, p) as unknown as SocketLike);
    this.limiter = opts.limiter ?? new RateLimiter(30);
    this.backoff = opts.backoffMs ?? DEFAULT_BACKOFF;
    this.schedule = opts.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    this.closed = false;
    this.open();
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
    this.setStatus("disconnected");
  }

  /** True when the command went out; false when dropped. */
  send(cmd: ClientCommand): boolean {
    if (this.status !== "connected" || !this.ws) {
      this.droppedCount += 1;
      return false;
    }
    if (!this.limiter.tryAcquire()) {
      this.droppedCount += 1;
      return false;
    }
    this.ws.send(encodeCommand(cmd));
    this.sentCount += 1;
    return true;
  }

  nextBackoffMs(): number {
    return this.backoff[Math.min(this.attempt, this.backoff.length - 1)];
  }

  private open(): void {
    this.setStatus("connecting");
    const ws = this.wsFactory(this.url, WS_PROTOCOL);
    this.ws = ws;
    ws.onopen = () => {
      this.attempt = 0;
      this.setStatus("connected");
    };
    ws.onmessage = (ev) => {
      const err = errorFrame(ev.data);
      if (err !== null) {
        this.hooks.onServerError?.(err);
        return;
      }
      const telemetry = parseTelemetry(ev.data);
      if (telemetry) this.hooks.onTelemetry?.(telemetry);
    };
    ws.onerror = () => { /* close follows */ };
    ws.onclose = () => {
      if (this.ws !== ws) return;
      this.ws = null;
      this.setStatus("disconnected");
      if (!this.closed) {
        const wait = this.nextBackoffMs();
        this.attempt += 1;
        this.schedule(() => {
          if (!this.closed) this.open();
        }, wait);
      }
    };
  }

  private setStatus(s: SocketStatus): void {
    if (s !== this.status) {
      this.status = s;
      this.hooks.onStatus?.(s);
    }
  }
}
