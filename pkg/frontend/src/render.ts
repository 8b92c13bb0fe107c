/** Pure canvas frame drawing.
 *
 * Screen space puts +y world up: world (x, y) maps to
 * (x * scale, canvasHeight - y * scale) relative to the map origin, so a
 * robot with alpha = pi/2 is drawn pointing to the top of the screen.
 * Drawing reads the view state and writes to the context only; rendering
 * the same state twice issues the identical call sequence.
 */

import { parseMapText, ParsedMap } from "./maptext.js";
import { cssColor, palette } from "./palette.js";
import { HelloPayload, MapInfo, RobotPayload } from "./protocol.js";
import { ViewState, recording } from "./state.js";

/** The slice of CanvasRenderingContext2D the console draws with; tests
 * substitute a call-recording fake. */
export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fillText(text: string, x: number, y: number): void;
}

const BACKGROUND = "#10131a";
const FREE = "#1d2330";
const WALL = "#556077";
const TARGET = "#ff9f43";
const FOLLOWER = "#4cc9f0";
const BAND = "rgba(255,255,255,0.25)";
const HEATMAP_ALPHA = 0.6;

export function canvasSize(map: MapInfo, scale: number): [number, number] {
  return [map.width * map.resolution * scale, map.height * map.resolution * scale];
}

export function worldToScreen(
  map: MapInfo,
  scale: number,
  x: number,
  y: number,
): [number, number] {
  const heightPx = map.height * map.resolution * scale;
  return [(x - map.origin.x) * scale, heightPx - (y - map.origin.y) * scale];
}

/** Screen-space vertices of an oriented robot triangle: apex at the heading,
 * two base corners swept 140 degrees to either side. */
export function triangleVertices(
  robot: RobotPayload,
  map: MapInfo,
  scale: number,
  sizeMeters: number,
): Array<[number, number]> {
  const sweep = (140 * Math.PI) / 180;
  return [0, sweep, -sweep].map((offset) => {
    const shrink = offset === 0 ? 1 : 0.7;
    const angle = robot.alpha + offset;
    return worldToScreen(
      map,
      scale,
      robot.x + Math.cos(angle) * sizeMeters * shrink,
      robot.y + Math.sin(angle) * sizeMeters * shrink,
    );
  });
}

const parsedMaps = new WeakMap<HelloPayload, ParsedMap>();

function mapCells(hello: HelloPayload): ParsedMap {
  let parsed = parsedMaps.get(hello);
  if (!parsed) {
    parsed = parseMapText(hello.map.text);
    parsedMaps.set(hello, parsed);
  }
  return parsed;
}

function drawCell(
  ctx: Ctx2D,
  map: MapInfo,
  scale: number,
  row: number,
  col: number,
): void {
  const side = map.resolution * scale;
  const [sx, sy] = worldToScreen(
    map,
    scale,
    map.origin.x + col * map.resolution,
    map.origin.y + (row + 1) * map.resolution,
  );
  ctx.fillRect(sx, sy, side, side);
}

function drawTriangle(ctx: Ctx2D, vertices: Array<[number, number]>, color: string): void {
  ctx.fillStyle = color;
  ctx.beginPath();
  ctx.moveTo(vertices[0][0], vertices[0][1]);
  ctx.lineTo(vertices[1][0], vertices[1][1]);
  ctx.lineTo(vertices[2][0], vertices[2][1]);
  ctx.closePath();
  ctx.fill();
}

export function render(ctx: Ctx2D, view: ViewState, scale: number): void {
  if (!view.hello) {
    ctx.fillStyle = BACKGROUND;
    ctx.fillRect(0, 0, 10 * scale, 10 * scale);
    return;
  }
  const map = view.hello.map;
  const [widthPx, heightPx] = canvasSize(map, scale);
  ctx.clearRect(0, 0, widthPx, heightPx);
  ctx.fillStyle = FREE;
  ctx.fillRect(0, 0, widthPx, heightPx);

  const cells = mapCells(view.hello);
  ctx.fillStyle = WALL;
  for (let row = 0; row < cells.height; row += 1) {
    for (let col = 0; col < cells.width; col += 1) {
      if (cells.occupied[row][col]) {
        drawCell(ctx, map, scale, row, col);
      }
    }
  }

  if (view.heatmap) {
    const hm = view.heatmap;
    const geometry: MapInfo = {
      width: hm.width,
      height: hm.height,
      resolution: hm.resolution,
      origin: hm.origin,
      text: "",
    };
    for (let row = 0; row < hm.height; row += 1) {
      for (let col = 0; col < hm.width; col += 1) {
        const value = hm.values[row * hm.width + col];
        if (value > 0) {
          ctx.fillStyle = cssColor(palette(value), HEATMAP_ALPHA);
          drawCell(ctx, geometry, scale, row, col);
        }
      }
    }
  }

  if (view.snapshot) {
    const { target, follower } = view.snapshot;
    const band = view.hello.band;
    const [tx, ty] = worldToScreen(map, scale, target.x, target.y);
    ctx.strokeStyle = BAND;
    ctx.lineWidth = 1;
    for (const radius of [band.d_min, band.d_max]) {
      ctx.beginPath();
      ctx.arc(tx, ty, radius * scale, 0, 2 * Math.PI);
      ctx.stroke();
    }
    drawTriangle(ctx, triangleVertices(target, map, scale, 0.3), TARGET);
    drawTriangle(ctx, triangleVertices(follower, map, scale, 0.3), FOLLOWER);

    if (view.snapshot.collision) {
      ctx.strokeStyle = "#e63946";
      ctx.lineWidth = 3;
      ctx.strokeRect(1, 1, widthPx - 2, heightPx - 2);
    }

    const rec = recording(view);
    if (rec.active) {
      ctx.fillStyle = "#e63946";
      ctx.beginPath();
      ctx.arc(14, 16, 6, 0, 2 * Math.PI);
      ctx.fill();
      ctx.font = "13px system-ui, sans-serif";
      ctx.fillStyle = "#ffffff";
      ctx.fillText(`REC demo ${rec.demoId}`, 26, 21);
    }
  }
}
