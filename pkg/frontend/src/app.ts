/** DOM and socket wiring for the live console.
 *
 * All protocol handling and drawing logic lives in the pure modules; this
 * file only routes events: socket frames into the reducer, user input into
 * wire messages, state changes onto the canvas and the control strip.
 */

import {
  changeHeatmapKind,
  changeLambda,
  claimDriver,
  requestFit,
  requestHeatmap,
  requestPolicy,
  toggleRecord,
} from "./controls.js";
import { normalizeKey, pumpOnce, startCommandLoop } from "./keys.js";
import { parseServerMessage, Wire } from "./protocol.js";
import { canvasSize, Ctx2D, render } from "./render.js";
import {
  applyServer,
  disconnected,
  dismissBanner,
  HeatmapKind,
  initialState,
  recording,
  ViewState,
} from "./state.js";

const CANVAS_TARGET_PX = 640;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("canvas");
const ctx = canvas.getContext("2d") as unknown as Ctx2D;
const statusLine = el<HTMLElement>("status");
const claimButton = el<HTMLButtonElement>("claim");
const recordButton = el<HTMLButtonElement>("record");
const fitButton = el<HTMLButtonElement>("fit");
const kindSelect = el<HTMLSelectElement>("heatmap-kind");
const lambdaSlider = el<HTMLInputElement>("lambda");
const lambdaValue = el<HTMLElement>("lambda-value");
const refreshButton = el<HTMLButtonElement>("heatmap-refresh");
const policySelect = el<HTMLSelectElement>("policy");
const bannerBox = el<HTMLElement>("banners");

let state: ViewState = initialState();
let scale = 10;
let dirty = true;

const socket = new WebSocket(`ws://${location.host}/ws`);
const wire = new Wire(socket);
const keys = new Set<string>();

function update(next: ViewState): void {
  state = next;
  dirty = true;
  syncDom();
}

function syncCanvasSize(): void {
  if (!state.hello) return;
  const [w, h] = canvasSize(state.hello.map, 1);
  scale = Math.max(1, Math.floor(CANVAS_TARGET_PX / Math.max(w, h)));
  const [pw, ph] = canvasSize(state.hello.map, scale);
  if (canvas.width !== pw || canvas.height !== ph) {
    canvas.width = pw;
    canvas.height = ph;
  }
}

function syncDom(): void {
  syncCanvasSize();
  const rec = recording(state);
  statusLine.textContent = state.connected
    ? `${state.role} | policy ${state.policy} | model v${state.modelVersion}` +
      (state.lastFit ? ` (${state.lastFit.components} comp)` : "") +
      ` | demos [${state.demoIds.join(", ")}]`
    : "disconnected";
  claimButton.disabled = !state.connected || state.role === "driver";
  recordButton.disabled = state.role !== "driver";
  recordButton.textContent = rec.active ? `stop (demo ${rec.demoId})` : "record";
  fitButton.disabled = state.role !== "driver" || state.demoIds.length === 0;
  policySelect.disabled = state.role !== "driver";
  policySelect.value = state.policy;
  lambdaValue.textContent = state.lambda.toFixed(2);

  bannerBox.replaceChildren(
    ...state.banners.map((text, index) => {
      const div = document.createElement("div");
      div.className = "banner";
      const span = document.createElement("span");
      span.textContent = text;
      const dismiss = document.createElement("button");
      dismiss.textContent = "x";
      dismiss.addEventListener("click", () => update(dismissBanner(state, index)));
      div.append(span, dismiss);
      return div;
    }),
  );
}

socket.addEventListener("open", () => wire.send("hello"));
socket.addEventListener("message", (event: MessageEvent<string>) => {
  update(applyServer(state, parseServerMessage(event.data)));
});
socket.addEventListener("close", () => update(disconnected(state)));

claimButton.addEventListener("click", () => claimDriver(wire));
recordButton.addEventListener("click", () => toggleRecord(wire, state));
fitButton.addEventListener("click", () => requestFit(wire, state));
refreshButton.addEventListener("click", () => requestHeatmap(wire, state));
lambdaSlider.addEventListener("input", () =>
  update(changeLambda(wire, state, Number(lambdaSlider.value))),
);
kindSelect.addEventListener("change", () =>
  update(changeHeatmapKind(wire, state, kindSelect.value as HeatmapKind)),
);
policySelect.addEventListener("change", () => requestPolicy(wire, policySelect.value));

window.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement || event.target instanceof HTMLSelectElement) {
    return;
  }
  const key = normalizeKey(event.key);
  if (key) {
    keys.add(key);
    event.preventDefault();
  }
});
window.addEventListener("keyup", (event) => {
  const key = normalizeKey(event.key);
  if (key) keys.delete(key);
});
window.addEventListener("blur", () => keys.clear());

startCommandLoop(() =>
  pumpOnce(
    wire,
    { role: state.role, policy: state.policy, limits: state.hello?.limits ?? null },
    keys,
  ),
);

function frame(): void {
  if (dirty) {
    render(ctx, state, scale);
    dirty = false;
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
