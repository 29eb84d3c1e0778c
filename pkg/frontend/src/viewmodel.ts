// Render-side state assembled purely from received wire frames.  Poses are
// interpolated between the last two state frames and never extrapolated
// beyond one broadcast interval; everything else is shown verbatim.

import { HelloBody, RobotStateEntry, StateBody, WireFrame } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface RenderPose {
  name: string;
  x: number;
  y: number;
  theta: number;
  led: [number, number, number];
  tof: number[];
  line: [number, number];
}

interface TimedState {
  body: StateBody;
  receivedAt: number;
}

function lerpAngle(a: number, b: number, alpha: number): number {
  let diff = b - a;
  while (diff > Math.PI) diff -= 2 * Math.PI;
  while (diff <= -Math.PI) diff += 2 * Math.PI;
  return a + diff * alpha;
}

export class ViewModel {
  status: ConnectionStatus = "connecting";
  hello: HelloBody | null = null;
  teleopTarget: string | null = null;
  droppedTotal = 0;
  lastError: string | null = null;

  private prev: TimedState | null = null;
  private last: TimedState | null = null;

  get broadcastIntervalMs(): number {
    const hz = this.hello?.broadcast_hz ?? 20;
    return 1000 / hz;
  }

  get simTime(): number {
    return this.last?.body.t ?? 0;
  }

  get paused(): boolean {
    return this.last?.body.paused ?? false;
  }

  get done(): boolean {
    return this.last?.body.done ?? false;
  }

  get robotNames(): string[] {
    return this.hello?.robots ?? [];
  }

  apply(frame: WireFrame, nowMs: number): void {
    switch (frame.type) {
      case "hello": {
        this.hello = frame.body as unknown as HelloBody;
        this.status = "connected";
        if (this.teleopTarget === null && this.hello.robots.length > 0) {
          this.teleopTarget = this.hello.robots[0];
        }
        break;
      }
      case "state": {
        const body = frame.body as unknown as StateBody;
        this.prev = this.last;
        this.last = { body, receivedAt: nowMs };
        this.droppedTotal += body.dropped;
        break;
      }
      case "error": {
        this.lastError = String(frame.body["message"] ?? frame.body["code"] ?? "error");
        break;
      }
      default:
        break; // topic frames are monitoring-only; ignored by the renderer
    }
  }

  markDisconnected(): void {
    this.status = "disconnected";
    // Drop pose history so a reconnect starts from the next state frame
    // instead of interpolating against stale data.
    this.prev = null;
    this.last = null;
  }

  markConnecting(): void {
    this.status = "connecting";
  }

  /** Poses for drawing at wall time nowMs, interpolated between the last two
   *  frames; clamped so display never runs past the newest frame. */
  poses(nowMs: number): RenderPose[] {
    if (this.last === null) {
      return [];
    }
    const cur = this.last.body.robots;
    if (this.prev === null || this.last.body.paused) {
      return cur.map((r) => this.toPose(r, r));
    }
    const span = this.broadcastIntervalMs;
    const alpha = Math.min(1, Math.max(0, (nowMs - this.last.receivedAt) / span));
    const before = new Map(this.prev.body.robots.map((r) => [r.name, r]));
    return cur.map((r) => this.toPose(before.get(r.name) ?? r, r, alpha));
  }

  private toPose(a: RobotStateEntry, b: RobotStateEntry, alpha = 1): RenderPose {
    return {
      name: b.name,
      x: a.x + (b.x - a.x) * alpha,
      y: a.y + (b.y - a.y) * alpha,
      theta: lerpAngle(a.theta, b.theta, alpha),
      led: b.led,
      tof: b.tof,
      line: b.line,
    };
  }
}
