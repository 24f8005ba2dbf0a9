// Wire protocol of the session service. One websocket = one live episode;
// every server message carries a per-connection monotone `seq`.

export const PED_INPUT_RANGE: readonly [number, number] = [-0.5, 2.0];

export function clampSpeed(speed: number): number {
  const [lo, hi] = PED_INPUT_RANGE;
  return Math.min(Math.max(speed, lo), hi);
}

export type ControllerName = "mpc" | "rulebased" | "cautious";

export interface JoinMsg {
  type: "join";
  mode: "wall" | "manual";
  controller?: ControllerName;
  seed?: number;
  slot_budget_ms?: number;
}

export interface PedInputMsg {
  type: "ped_input";
  speed: number;
}

export interface AdvanceMsg {
  type: "advance";
  ticks: number;
}

export interface SelectControllerMsg {
  type: "select_controller";
  name: ControllerName;
}

export interface ResetMsg {
  type: "reset";
  controller?: ControllerName;
  seed?: number;
}

export type ClientMessage =
  | JoinMsg
  | PedInputMsg
  | AdvanceMsg
  | SelectControllerMsg
  | ResetMsg;

interface Sequenced {
  seq: number;
}

export interface GeometrySummary {
  conflict_x: number;
  conflict_y: number;
  safe_zone: [number, number];
  near_zone: [number, number];
  crossing_zone: [number, number];
  veh_passed_clearance: number;
  sensing_range: number;
}

export interface JoinedMsg extends Sequenced {
  type: "joined";
  mode: string;
  controller: string;
  seed: number;
  config_hash: string;
  controllers: string[];
  ped_input_range: [number, number];
  geometry: GeometrySummary;
  sim: { dt_sim: number; t_max: number; veh_start_x: number; ped_start_y: number };
  controller_info?: unknown;
  serve: { tick_hz: number; controller: string };
}

export interface TickMsg extends Sequenced {
  type: "tick";
  t: number;
  x_veh: number;
  v_veh: number;
  y_ped: number;
  v_ped: number;
  u_cmd: number;
  intention_raw: number;
  intention_eff: number;
  zone: string;
  clamped: boolean;
  overrun: boolean;
}

export interface EpisodeEndMsg extends Sequenced {
  type: "episode_end";
  outcome: string;
  t_end: number;
}

export interface InputAckMsg extends Sequenced {
  type: "input_ack";
  applied: number;
  clamped: boolean;
}

export interface AdvancedMsg extends Sequenced {
  type: "advanced";
  ticks_sent: number;
  done: boolean;
}

export interface ControllerSelectedMsg extends Sequenced {
  type: "controller_selected";
  name: ControllerName;
  applies: string;
}

export interface ResetDoneMsg extends Sequenced {
  type: "reset_done";
  controller: string;
  seed: number;
}

export interface ErrorMsg extends Sequenced {
  type: "error";
  message: string;
}

export type ServerMessage =
  | JoinedMsg
  | TickMsg
  | EpisodeEndMsg
  | InputAckMsg
  | AdvancedMsg
  | ControllerSelectedMsg
  | ResetDoneMsg
  | ErrorMsg;

const SERVER_TYPES = new Set([
  "joined", "tick", "episode_end", "input_ack", "advanced",
  "controller_selected", "reset_done", "error",
]);

/** Parse one frame; null for anything that is not a sequenced server message. */
export function parseServerMessage(text: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const msg = doc as { type?: unknown; seq?: unknown };
  if (typeof msg.type !== "string" || !SERVER_TYPES.has(msg.type)) return null;
  if (typeof msg.seq !== "number") return null;
  return doc as ServerMessage;
}

export function isTick(msg: ServerMessage): msg is TickMsg {
  return msg.type === "tick";
}
