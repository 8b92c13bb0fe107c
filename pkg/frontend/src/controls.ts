/** Session controls: each user action maps to exactly one wire message. */

import { Wire } from "./protocol.js";
import { HeatmapKind, ViewState, nextDemoId, recording } from "./state.js";

/** Start recording under a fresh auto-incremented demo id, or stop the
 * recording in progress. One on/off cycle touches exactly one demo id. */
export function toggleRecord(wire: Wire, state: ViewState): void {
  if (recording(state).active) {
    wire.send("record", { active: false });
  } else {
    wire.send("record", { active: true, demo_id: nextDemoId(state) });
  }
}

/** Refit the follow model over every demo the server knows about. */
export function requestFit(wire: Wire, state: ViewState): void {
  wire.send("fit", { demo_ids: state.demoIds });
}

export function requestHeatmap(wire: Wire, state: ViewState): void {
  wire.send("heatmap", { what: state.heatmapKind, lambda: state.lambda });
}

/** Slider moved: remember the new blend weight and re-request the layer. */
export function changeLambda(wire: Wire, state: ViewState, lambda: number): ViewState {
  const next = { ...state, lambda };
  requestHeatmap(wire, next);
  return next;
}

export function changeHeatmapKind(
  wire: Wire,
  state: ViewState,
  kind: HeatmapKind,
): ViewState {
  const next = { ...state, heatmapKind: kind };
  requestHeatmap(wire, next);
  return next;
}

export function requestPolicy(wire: Wire, policy: string): void {
  wire.send("set_policy", { policy });
}

export function claimDriver(wire: Wire): void {
  wire.send("claim_driver");
}
