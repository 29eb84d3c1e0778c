// Keyboard / on-screen joystick to teleop frames at a fixed cadence, with a
// dead-man rule: releasing all input emits exactly one zero-command frame.

export interface TeleopInput {
  forward: boolean;
  back: boolean;
  left: boolean;
  right: boolean;
}

export interface TeleopEmit {
  (v: number, w: number, stampMs: number): void;
}

export const TELEOP_CADENCE_MS = 50; // 20 Hz

export class TeleopController {
  private input: TeleopInput = { forward: false, back: false, left: false, right: false };
  private lastSentAt = -Infinity;
  private wasActive = false;

  constructor(
    private readonly emit: TeleopEmit,
    private readonly vMax = 0.3,
    private readonly wMax = 1.5,
    private readonly cadenceMs = TELEOP_CADENCE_MS,
  ) {}

  setKey(key: keyof TeleopInput, pressed: boolean): void {
    this.input[key] = pressed;
  }

  setInput(input: Partial<TeleopInput>): void {
    this.input = { ...this.input, ...input };
  }

  private command(): { v: number; w: number } {
    const v = (Number(this.input.forward) - Number(this.input.back)) * this.vMax;
    const w = (Number(this.input.left) - Number(this.input.right)) * this.wMax;
    return { v, w };
  }

  private anyActive(): boolean {
    return this.input.forward || this.input.back || this.input.left || this.input.right;
  }

  /** Drive emission from a steady clock; call at least once per cadence. */
  tick(nowMs: number): void {
    if (this.anyActive()) {
      if (nowMs - this.lastSentAt >= this.cadenceMs) {
        const { v, w } = this.command();
        this.emit(v, w, nowMs);
        this.lastSentAt = nowMs;
      }
      this.wasActive = true;
    } else if (this.wasActive) {
      // Dead-man: one zero frame on release, then silence.
      this.emit(0, 0, nowMs);
      this.lastSentAt = nowMs;
      this.wasActive = false;
    }
  }
}
