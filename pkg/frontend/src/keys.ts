/** Keyboard driving: WASD to velocity commands at a bounded rate.
 *
 * Key events only toggle membership in a pressed-key set; actual `cmd`
 * messages go out on a fixed timer, so the outbound rate stays at the pump
 * frequency no matter how fast the browser fires key-repeat events.
 */

import { Limits, Wire } from "./protocol.js";

export const PUMP_HZ = 20;

const DRIVE_KEYS = new Set(["w", "a", "s", "d"]);

/** Normalize a KeyboardEvent.key to one of w/a/s/d, or null to ignore. */
export function normalizeKey(key: string): string | null {
  const lower = key.toLowerCase();
  return DRIVE_KEYS.has(lower) ? lower : null;
}

export function keyToCmd(
  keys: ReadonlySet<string>,
  limits: Limits,
): { v: number; omega: number } {
  const forward = (keys.has("w") ? 1 : 0) - (keys.has("s") ? 1 : 0);
  const turn = (keys.has("a") ? 1 : 0) - (keys.has("d") ? 1 : 0);
  return { v: forward * limits.v_max, omega: turn * limits.omega_max };
}

export interface PumpView {
  role: "driver" | "observer";
  policy: string;
  limits: Limits | null;
}

/** One pump beat: emit the current command, or nothing at all when the
 * session may not drive (commands are suppressed, never queued). */
export function pumpOnce(
  wire: Wire,
  view: PumpView,
  keys: ReadonlySet<string>,
): boolean {
  if (view.role !== "driver" || view.policy !== "teleop" || !view.limits) {
    return false;
  }
  wire.send("cmd", keyToCmd(keys, view.limits));
  return true;
}

/** Run `beat` at the fixed pump rate; returns a stop function. */
export function startCommandLoop(
  beat: () => void,
  hz: number = PUMP_HZ,
): () => void {
  const handle = setInterval(beat, 1000 / hz);
  return () => clearInterval(handle);
}
