// Client-side session state: the last two ticks for interpolation, the
// intention overlay, and a short trail of effective-intention samples.
//
// The overlay is a verbatim pass-through of the tick payload. The decay of
// the effective intention is computed by the server's controller; the UI
// must display those exact numbers, not re-derive or smooth them.

import type {
  EpisodeEndMsg,
  GeometrySummary,
  JoinedMsg,
  ServerMessage,
  TickMsg,
} from "./protocol.js";

export interface IntentionOverlay {
  raw: number;
  eff: number;
}

export interface TrailSample {
  t: number;
  eff: number;
}

export interface Hud {
  t: number;
  vVeh: number;
  vPed: number;
  uCmd: number;
  zone: string;
  clamped: boolean;
  overrun: boolean;
}

export interface EpisodeStatus {
  done: boolean;
  outcome: string | null;
  tEnd: number | null;
}

export interface RenderState {
  hasTick: boolean;
  xVeh: number;
  yPed: number;
  overlay: IntentionOverlay;
  trail: TrailSample[];
  hud: Hud;
  episode: EpisodeStatus;
  geometry: GeometrySummary | null;
  controller: string;
  connection: string;
  lastError: string | null;
}

const TRAIL_LIMIT = 600;

export class ViewModel {
  geometry: GeometrySummary | null = null;
  controller = "";
  connection = "connecting";
  lastError: string | null = null;

  private latest: TickMsg | null = null;
  private prev: TickMsg | null = null;
  private latestAtMs = 0;
  private prevAtMs = 0;
  private tickPeriodMs = 50;
  private trail: TrailSample[] = [];
  private episode: EpisodeStatus = { done: false, outcome: null, tEnd: null };

  apply(msg: ServerMessage, nowMs: number): void {
    switch (msg.type) {
      case "joined":
        this.onJoined(msg);
        break;
      case "tick":
        this.onTick(msg, nowMs);
        break;
      case "episode_end":
        this.onEnd(msg);
        break;
      case "reset_done":
        this.controller = msg.controller;
        this.restart();
        break;
      case "controller_selected":
        break; // applies at the next reset; nothing to show yet
      case "error":
        this.lastError = msg.message;
        break;
      default:
        break;
    }
  }

  setConnection(status: string): void {
    this.connection = status;
  }

  private onJoined(msg: JoinedMsg): void {
    this.geometry = msg.geometry;
    this.controller = msg.controller;
    if (msg.serve.tick_hz > 0) this.tickPeriodMs = 1000 / msg.serve.tick_hz;
    this.restart();
  }

  private restart(): void {
    this.latest = null;
    this.prev = null;
    this.trail = [];
    this.episode = { done: false, outcome: null, tEnd: null };
    this.lastError = null;
  }

  private onTick(msg: TickMsg, nowMs: number): void {
    this.prev = this.latest;
    this.prevAtMs = this.latestAtMs;
    this.latest = msg;
    this.latestAtMs = nowMs;
    const last = this.trail[this.trail.length - 1];
    if (!last || last.t !== msg.t) {
      this.trail.push({ t: msg.t, eff: msg.intention_eff });
      if (this.trail.length > TRAIL_LIMIT) this.trail.shift();
    }
  }

  private onEnd(msg: EpisodeEndMsg): void {
    this.episode = { done: true, outcome: msg.outcome, tEnd: msg.t_end };
  }

  /** Snapshot for the renderer; positions interpolated between the last two ticks. */
  render(nowMs: number): RenderState {
    const tick = this.latest;
    let xVeh = 0;
    let yPed = 0;
    if (tick) {
      xVeh = tick.x_veh;
      yPed = tick.y_ped;
      if (this.prev && this.latestAtMs > this.prevAtMs) {
        // render one tick behind, easing prev -> latest over one period
        const span = Math.min(this.latestAtMs - this.prevAtMs, 4 * this.tickPeriodMs);
        const alpha = Math.min(Math.max((nowMs - this.latestAtMs) / span, 0), 1);
        xVeh = this.prev.x_veh + (tick.x_veh - this.prev.x_veh) * alpha;
        yPed = this.prev.y_ped + (tick.y_ped - this.prev.y_ped) * alpha;
      }
    }
    return {
      hasTick: tick !== null,
      xVeh,
      yPed,
      overlay: {
        raw: tick ? tick.intention_raw : 0,
        eff: tick ? tick.intention_eff : 0,
      },
      trail: this.trail,
      hud: {
        t: tick ? tick.t : 0,
        vVeh: tick ? tick.v_veh : 0,
        vPed: tick ? tick.v_ped : 0,
        uCmd: tick ? tick.u_cmd : 0,
        zone: tick ? tick.zone : "-",
        clamped: tick ? tick.clamped : false,
        overrun: tick ? tick.overrun : false,
      },
      episode: this.episode,
      geometry: this.geometry,
      controller: this.controller,
      connection: this.connection,
      lastError: this.lastError,
    };
  }
}
