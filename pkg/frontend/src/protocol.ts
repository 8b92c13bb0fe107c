/** Wire-level types for the teleop WebSocket protocol.
 *
 * Every frame in either direction is a JSON envelope
 * `{kind, seq, payload}`; `seq` must strictly increase per direction, so all
 * outbound traffic goes through a single {@link Wire} that owns the counter.
 */

export interface Limits {
  v_max: number;
  omega_max: number;
}

export interface OriginPayload {
  x: number;
  y: number;
  alpha: number;
}

export interface MapInfo {
  width: number;
  height: number;
  resolution: number;
  origin: OriginPayload;
  text: string;
}

export interface RobotPayload {
  x: number;
  y: number;
  alpha: number;
  v: number;
  omega: number;
}

export interface TickPayload {
  t: number;
  target: RobotPayload;
  follower: RobotPayload;
  collision: boolean;
  recording: { active: boolean; demo_id: number | null };
}

export interface HelloPayload {
  map: MapInfo;
  limits: Limits;
  dt: number;
  band: { d_min: number; d_max: number };
  policy: string;
  role: "driver" | "observer";
  demo_ids: number[];
  model_version: number;
}

export interface HeatmapPayload {
  what: string;
  lambda: number | null;
  width: number;
  height: number;
  resolution: number;
  origin: OriginPayload;
  values: number[];
  max: number;
}

export interface ServerMessage {
  kind: string;
  seq: number | null;
  payload: Record<string, unknown>;
}

export type ClientKind =
  | "hello"
  | "claim_driver"
  | "cmd"
  | "record"
  | "fit"
  | "heatmap"
  | "set_policy";

/** The transport surface the console needs; `WebSocket` satisfies it and
 * tests substitute a capture fake. */
export interface SocketLike {
  send(data: string): void;
}

export class Wire {
  private seq = 0;

  constructor(private readonly socket: SocketLike) {}

  send(kind: ClientKind, payload: Record<string, unknown> = {}): void {
    this.seq += 1;
    this.socket.send(JSON.stringify({ kind, seq: this.seq, payload }));
  }
}

export function parseServerMessage(raw: string): ServerMessage {
  const msg = JSON.parse(raw) as ServerMessage;
  if (typeof msg.kind !== "string") {
    throw new Error("server frame without a kind");
  }
  return msg;
}
