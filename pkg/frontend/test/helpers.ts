import { HelloPayload, TickPayload } from "../src/protocol.js";
import { applyServer, initialState, ViewState } from "../src/state.js";

export class FakeSocket {
  sent: string[] = [];

  send(data: string): void {
    this.sent.push(data);
  }

  frames(): Array<{ kind: string; seq: number; payload: Record<string, unknown> }> {
    return this.sent.map((s) => JSON.parse(s));
  }
}

const BORDER_TEXT = [
  "6 6 1.0 0.0 0.0 0.0",
  "######",
  "#....#",
  "#....#",
  "#....#",
  "#....#",
  "######",
].join("\n") + "\n";

export function makeHello(overrides: Partial<HelloPayload> = {}): HelloPayload {
  return {
    map: {
      width: 6,
      height: 6,
      resolution: 1.0,
      origin: { x: 0, y: 0, alpha: 0 },
      text: BORDER_TEXT,
    },
    limits: { v_max: 1.0, omega_max: 2.0 },
    dt: 0.05,
    band: { d_min: 1.0, d_max: 3.0 },
    policy: "teleop",
    role: "observer",
    demo_ids: [],
    model_version: 0,
    ...overrides,
  };
}

export function makeTick(overrides: Partial<TickPayload> = {}): TickPayload {
  return {
    t: 1.0,
    target: { x: 3, y: 3, alpha: 0, v: 0, omega: 0 },
    follower: { x: 2, y: 2, alpha: 0, v: 0, omega: 0 },
    collision: false,
    recording: { active: false, demo_id: null },
    ...overrides,
  };
}

export function greetedState(overrides: Partial<HelloPayload> = {}): ViewState {
  return applyServer(initialState(), {
    kind: "hello",
    seq: null,
    payload: makeHello(overrides) as unknown as Record<string, unknown>,
  });
}
