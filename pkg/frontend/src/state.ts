/** Console view state and the reducer that folds server messages into it.
 *
 * The state is replaced wholesale on every message (snapshots and heatmaps
 * are never mutated in place), so rendering is a pure function of the
 * current value and re-rendering an unchanged state draws an identical
 * frame.
 */

import {
  HeatmapPayload,
  HelloPayload,
  ServerMessage,
  TickPayload,
} from "./protocol.js";

export type HeatmapKind = "affordance" | "gainmap" | "cost";

export interface FitInfo {
  version: number;
  components: number;
  samples: number;
}

export interface ViewState {
  connected: boolean;
  role: "driver" | "observer";
  policy: string;
  hello: HelloPayload | null;
  snapshot: TickPayload | null;
  heatmap: HeatmapPayload | null;
  banners: string[];
  demoIds: number[];
  modelVersion: number;
  lastFit: FitInfo | null;
  // local control state
  lambda: number;
  heatmapKind: HeatmapKind;
}

export function initialState(): ViewState {
  return {
    connected: false,
    role: "observer",
    policy: "teleop",
    hello: null,
    snapshot: null,
    heatmap: null,
    banners: [],
    demoIds: [],
    modelVersion: 0,
    lastFit: null,
    lambda: 0.5,
    heatmapKind: "affordance",
  };
}

export function recording(state: ViewState): { active: boolean; demoId: number | null } {
  const rec = state.snapshot?.recording;
  return rec ? { active: rec.active, demoId: rec.demo_id } : { active: false, demoId: null };
}

/** The next unused demo id: one past the largest the server knows about. */
export function nextDemoId(state: ViewState): number {
  const active = state.snapshot?.recording.demo_id;
  const known = [...state.demoIds, ...(active != null ? [active] : [])];
  return known.length ? Math.max(...known) + 1 : 1;
}

function sortedUnique(ids: number[]): number[] {
  return [...new Set(ids)].sort((a, b) => a - b);
}

export function applyServer(state: ViewState, msg: ServerMessage): ViewState {
  switch (msg.kind) {
    case "hello": {
      const hello = msg.payload as unknown as HelloPayload;
      return {
        ...state,
        connected: true,
        hello,
        role: hello.role,
        policy: hello.policy,
        demoIds: sortedUnique(hello.demo_ids),
        modelVersion: hello.model_version,
      };
    }
    case "tick":
      return { ...state, snapshot: msg.payload as unknown as TickPayload };
    case "claim_driver": {
      const granted = msg.payload.granted === true;
      const next: ViewState = { ...state, role: granted ? "driver" : "observer" };
      if (!granted) {
        const reason = String(msg.payload.reason ?? "driver claim denied");
        next.banners = [...state.banners, reason];
      }
      return next;
    }
    case "record": {
      const demoId = msg.payload.demo_id;
      if (msg.payload.active === false && typeof demoId === "number") {
        return { ...state, demoIds: sortedUnique([...state.demoIds, demoId]) };
      }
      return state;
    }
    case "fit": {
      const info: FitInfo = {
        version: Number(msg.payload.version),
        components: Number(msg.payload.components),
        samples: Number(msg.payload.samples),
      };
      return { ...state, modelVersion: info.version, lastFit: info };
    }
    case "heatmap":
      return { ...state, heatmap: msg.payload as unknown as HeatmapPayload };
    case "set_policy":
      return { ...state, policy: String(msg.payload.policy) };
    case "error":
      return {
        ...state,
        banners: [...state.banners, String(msg.payload.message ?? "server error")],
      };
    default:
      return state;
  }
}

export function dismissBanner(state: ViewState, index: number): ViewState {
  return { ...state, banners: state.banners.filter((_, i) => i !== index) };
}

export function disconnected(state: ViewState): ViewState {
  return { ...state, connected: false, role: "observer" };
}
