// Wire protocol: single-line JSON frames exchanged with the bridge.
// Encoding is canonical (keys sorted recursively, no whitespace) so that
// decode-then-encode reproduces a frame byte for byte.

export type FrameType = "hello" | "state" | "topic" | "teleop" | "control" | "error";

export const FRAME_TYPES: readonly FrameType[] = [
  "hello", "state", "topic", "teleop", "control", "error",
];

export interface WireFrame {
  type: FrameType;
  seq: number;
  body: Record<string, unknown>;
}

export interface RobotStateEntry {
  name: string;
  x: number;
  y: number;
  theta: number;
  led: [number, number, number];
  tof: number[];
  line: [number, number];
  v: number;
  w: number;
}

export interface StateBody {
  t: number;
  step: number;
  paused: boolean;
  done: boolean;
  dropped: number;
  robots: RobotStateEntry[];
}

export interface HelloBody {
  scenario: string;
  robots: string[];
  world: {
    bounds: [number, number, number, number] | null;
    segments: number[][];
    circles: number[][];
  };
  dt: number;
  duration: number;
  speed: number;
  broadcast_hz: number;
}

export class WireDecodeError extends Error {
  constructor(message: string, readonly offset = 0) {
    super(`${message} (at byte ${offset})`);
  }
}

export class UnknownFrameTypeError extends Error {
  constructor(readonly frameType: string) {
    super(`unknown frame type '${frameType}'`);
  }
}

function canonical(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonical).join(",") + "]";
  }
  const obj = value as Record<string, unknown>;
  const keys = Object.keys(obj).sort();
  const parts = keys.map((k) => JSON.stringify(k) + ":" + canonical(obj[k]));
  return "{" + parts.join(",") + "}";
}

export function encodeFrame(frame: WireFrame): string {
  return canonical({ body: frame.body, seq: frame.seq, type: frame.type });
}

export function decodeFrame(text: string): WireFrame {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    // JSON.parse errors carry no portable offset; report the start.
    throw new WireDecodeError(`invalid JSON: ${(err as Error).message}`);
  }
  if (obj === null || typeof obj !== "object" || Array.isArray(obj)) {
    throw new WireDecodeError("frame must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  const type = rec["type"];
  if (typeof type !== "string") {
    throw new WireDecodeError("missing or non-string 'type'");
  }
  if (!FRAME_TYPES.includes(type as FrameType)) {
    throw new UnknownFrameTypeError(type);
  }
  const seq = rec["seq"];
  if (typeof seq !== "number" || !Number.isInteger(seq)) {
    throw new WireDecodeError("missing or non-integer 'seq'");
  }
  const body = rec["body"] ?? {};
  if (body === null || typeof body !== "object" || Array.isArray(body)) {
    throw new WireDecodeError("'body' must be an object");
  }
  return { type: type as FrameType, seq, body: body as Record<string, unknown> };
}
