import { afterEach, describe, expect, it, vi } from "vitest";

import {
  keyToCmd,
  normalizeKey,
  PUMP_HZ,
  pumpOnce,
  startCommandLoop,
} from "../src/keys.js";
import { Wire } from "../src/protocol.js";
import { FakeSocket } from "./helpers.js";

const LIMITS = { v_max: 1.0, omega_max: 2.0 };

describe("keyToCmd", () => {
  it("maps W to full forward speed", () => {
    expect(keyToCmd(new Set(["w"]), LIMITS)).toEqual({ v: 1.0, omega: 0 });
  });

  it("combines forward and left turn", () => {
    expect(keyToCmd(new Set(["w", "a"]), LIMITS)).toEqual({ v: 1.0, omega: 2.0 });
  });

  it("is zero with no keys held", () => {
    expect(keyToCmd(new Set(), LIMITS)).toEqual({ v: 0, omega: 0 });
  });

  it("maps S and D to reverse and right turn", () => {
    expect(keyToCmd(new Set(["s", "d"]), LIMITS)).toEqual({ v: -1.0, omega: -2.0 });
  });

  it("cancels opposing keys", () => {
    expect(keyToCmd(new Set(["w", "s", "a", "d"]), LIMITS)).toEqual({ v: 0, omega: 0 });
  });
});

describe("normalizeKey", () => {
  it("lowercases drive keys", () => {
    expect(normalizeKey("W")).toBe("w");
    expect(normalizeKey("a")).toBe("a");
  });

  it("ignores everything else", () => {
    expect(normalizeKey("ArrowUp")).toBeNull();
    expect(normalizeKey("Shift")).toBeNull();
  });
});

describe("pumpOnce", () => {
  it("sends the current command when driving", () => {
    const socket = new FakeSocket();
    const wire = new Wire(socket);
    const sent = pumpOnce(
      wire,
      { role: "driver", policy: "teleop", limits: LIMITS },
      new Set(["w"]),
    );
    expect(sent).toBe(true);
    expect(socket.frames()).toEqual([
      { kind: "cmd", seq: 1, payload: { v: 1.0, omega: 0 } },
    ]);
  });

  it("suppresses commands for observers instead of queueing them", () => {
    const socket = new FakeSocket();
    const wire = new Wire(socket);
    const view = { role: "observer" as const, policy: "teleop", limits: LIMITS };
    expect(pumpOnce(wire, view, new Set(["w"]))).toBe(false);
    expect(pumpOnce(wire, view, new Set(["w"]))).toBe(false);
    expect(socket.sent).toHaveLength(0);
  });

  it("suppresses commands while the learned policy drives", () => {
    const socket = new FakeSocket();
    const wire = new Wire(socket);
    const view = { role: "driver" as const, policy: "follow", limits: LIMITS };
    expect(pumpOnce(wire, view, new Set(["w"]))).toBe(false);
    expect(socket.sent).toHaveLength(0);
  });

  it("stays silent before the hello handshake provides limits", () => {
    const socket = new FakeSocket();
    const wire = new Wire(socket);
    expect(
      pumpOnce(wire, { role: "driver", policy: "teleop", limits: null }, new Set()),
    ).toBe(false);
    expect(socket.sent).toHaveLength(0);
  });
});

describe("startCommandLoop", () => {
  afterEach(() => vi.useRealTimers());

  it("beats at the fixed pump rate regardless of input event rate", () => {
    vi.useFakeTimers();
    let beats = 0;
    const stop = startCommandLoop(() => {
      beats += 1;
    });
    // a storm of key events changes nothing: only the timer emits
    vi.advanceTimersByTime(1000);
    expect(beats).toBe(PUMP_HZ);
    stop();
    vi.advanceTimersByTime(1000);
    expect(beats).toBe(PUMP_HZ);
  });
});
