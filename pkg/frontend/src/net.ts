// WebSocket session with reconnect backoff.  Incoming frames feed the view
// model; outgoing teleop/control frames carry a per-connection sequence.

import { decodeFrame, encodeFrame, WireFrame } from "./protocol.js";
import { ViewModel } from "./viewmodel.js";

const BACKOFF_INITIAL_MS = 500;
const BACKOFF_MAX_MS = 5000;

export class Session {
  private ws: WebSocket | null = null;
  private outSeq = 0;
  private backoffMs = BACKOFF_INITIAL_MS;
  private closed = false;

  constructor(
    readonly url: string,
    readonly vm: ViewModel,
    private readonly now: () => number = () => performance.now(),
  ) {}

  open(): void {
    this.vm.markConnecting();
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoffMs = BACKOFF_INITIAL_MS;
    };
    ws.onmessage = (event: MessageEvent) => {
      try {
        this.vm.apply(decodeFrame(String(event.data)), this.now());
      } catch (err) {
        console.warn("bad frame from bridge:", err);
      }
    };
    ws.onclose = () => this.handleDrop();
    ws.onerror = () => ws.close();
  }

  private handleDrop(): void {
    this.vm.markDisconnected();
    this.outSeq = 0;
    if (this.closed) {
      return;
    }
    setTimeout(() => this.open(), this.backoffMs);
    this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  private send(type: WireFrame["type"], body: Record<string, unknown>): void {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) {
      return;
    }
    this.outSeq += 1;
    this.ws.send(encodeFrame({ type, seq: this.outSeq, body }));
  }

  sendTeleop(robot: string, v: number, w: number, stamp: number): void {
    this.send("teleop", { robot, v, w, stamp });
  }

  sendControl(body: Record<string, unknown>): void {
    this.send("control", body);
  }
}
