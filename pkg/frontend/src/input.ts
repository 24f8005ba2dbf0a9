// Keyboard -> pedestrian speed commands.
//
// Hold-to-walk: W/ArrowUp walks toward the roadway, with Shift for a jog;
// S/ArrowDown steps back; Space stops regardless. Commands are coalesced to
// at most one ped_input per MIN_SEND_INTERVAL_MS and sent only on change,
// so key autorepeat does not spam the socket.

import { clampSpeed, type PedInputMsg } from "./protocol.js";

export const WALK_SPEED = 1.4;
export const JOG_SPEED = 2.0;
export const BACK_SPEED = -0.5;
export const MIN_SEND_INTERVAL_MS = 50; // 20 Hz cap

const FORWARD_KEYS = new Set(["KeyW", "ArrowUp"]);
const BACK_KEYS = new Set(["KeyS", "ArrowDown"]);
const STOP_KEYS = new Set(["Space"]);
const SHIFT_KEYS = new Set(["ShiftLeft", "ShiftRight"]);

export function isMappedKey(code: string): boolean {
  return FORWARD_KEYS.has(code) || BACK_KEYS.has(code)
    || STOP_KEYS.has(code) || SHIFT_KEYS.has(code);
}

export class KeyboardPilot {
  private held = new Set<string>();
  private lastSentSpeed: number | null = null;
  private lastSentAtMs = -Infinity;

  keyEvent(kind: "down" | "up", code: string): void {
    if (!isMappedKey(code)) return;
    if (kind === "down") this.held.add(code);
    else this.held.delete(code);
  }

  releaseAll(): void {
    this.held.clear();
  }

  /** Forget the last sent value so the next sample resends (reconnect, reset). */
  forgetSent(): void {
    this.lastSentSpeed = null;
  }

  desiredSpeed(): number {
    const any = (keys: Set<string>) => [...keys].some((k) => this.held.has(k));
    if (any(STOP_KEYS)) return 0;
    if (any(FORWARD_KEYS)) return clampSpeed(any(SHIFT_KEYS) ? JOG_SPEED : WALK_SPEED);
    if (any(BACK_KEYS)) return clampSpeed(BACK_SPEED);
    return 0;
  }

  /** Poll from the frame loop; returns a wire message when one should go out. */
  sample(nowMs: number): PedInputMsg | null {
    const speed = this.desiredSpeed();
    if (speed === this.lastSentSpeed) return null;
    if (nowMs - this.lastSentAtMs < MIN_SEND_INTERVAL_MS) return null;
    this.lastSentSpeed = speed;
    this.lastSentAtMs = nowMs;
    return { type: "ped_input", speed };
  }
}
