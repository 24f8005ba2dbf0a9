// Top-down scene renderer. Pure function of a RenderState snapshot so tests
// can drive it with a recording stub instead of a real canvas.

import type { RenderState, TrailSample } from "./viewmodel.js";

/** Structural subset of CanvasRenderingContext2D used by draw(). */
export interface Canvas2D {
  fillStyle: string | object; // only CSS color strings are ever assigned here
  strokeStyle: string | object;
  lineWidth: number;
  font: string;
  textAlign: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

export const OVERLAY_BAR_W = 160;
const OVERLAY_BAR_H = 14;
const TRAIL_BOX = { x: 10, y: 52, w: 180, h: 44 };

const COLORS = {
  background: "#10141a",
  road: "#2a2f38",
  laneMark: "#3d444f",
  crosswalk: "#4a5260",
  safeZone: "rgba(80, 170, 120, 0.25)",
  nearZone: "rgba(215, 170, 70, 0.30)",
  crossingZone: "rgba(200, 90, 80, 0.30)",
  conflict: "#d8dee8",
  vehicle: "#6aa7e8",
  vehicleBrake: "#e8956a",
  ped: "#8fe86a",
  pedStanding: "#d8dee8",
  hud: "#c8d0dc",
  warn: "#e8a04a",
  error: "#e86a6a",
  barFill: "#5ac8b4",
  barRawMark: "#e8e3a0",
  trail: "#5ac8b4",
  banner: "rgba(16, 20, 26, 0.82)",
} as const;

export function draw(ctx: Canvas2D, view: RenderState, width: number, height: number): void {
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, width, height);

  if (view.geometry && view.hasTick) {
    drawScene(ctx, view, width, height);
  } else {
    ctx.fillStyle = COLORS.hud;
    ctx.font = "14px monospace";
    ctx.textAlign = "center";
    ctx.fillText(`waiting for session (${view.connection})`, width / 2, height / 2);
  }

  drawHud(ctx, view, width);
  drawOverlayBar(ctx, view, width);
  drawTrail(ctx, view.trail);

  if (view.episode.done) {
    drawBanner(ctx, view, width, height);
  }
}

function drawScene(ctx: Canvas2D, view: RenderState, width: number, height: number): void {
  const g = view.geometry!;
  const pad = 16;
  const xMin = -(g.sensing_range + 5);
  const xMax = g.veh_passed_clearance + 10;
  const yMin = g.safe_zone[0] - 1.5;
  const yMax = g.crossing_zone[1] + 1.5;
  const px = (x: number) => pad + ((x - xMin) / (xMax - xMin)) * (width - 2 * pad);
  // world y points across the road; screen y grows downward
  const py = (y: number) => height - pad - ((y - yMin) / (yMax - yMin)) * (height - 2 * pad - 100);
  const sx = (width - 2 * pad) / (xMax - xMin);
  const sy = (height - 2 * pad - 100) / (yMax - yMin);

  // roadway: the vehicle corridor spans the crossing band
  ctx.fillStyle = COLORS.road;
  ctx.fillRect(0, py(g.crossing_zone[1]), width, (g.crossing_zone[1] - g.crossing_zone[0]) * sy);
  ctx.strokeStyle = COLORS.laneMark;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(0, py(g.conflict_y));
  ctx.lineTo(width, py(g.conflict_y));
  ctx.stroke();

  // crossing column with zone bands along the pedestrian axis
  const cwHalf = 1.0 * sx;
  const cwLeft = px(g.conflict_x) - cwHalf;
  ctx.fillStyle = COLORS.crosswalk;
  ctx.fillRect(cwLeft, py(g.crossing_zone[1]), 2 * cwHalf, (g.crossing_zone[1] - g.crossing_zone[0]) * sy);
  const bands: Array<[readonly [number, number], string]> = [
    [g.safe_zone, COLORS.safeZone],
    [g.near_zone, COLORS.nearZone],
    [g.crossing_zone, COLORS.crossingZone],
  ];
  for (const [zone, color] of bands) {
    ctx.fillStyle = color;
    ctx.fillRect(cwLeft, py(zone[1]), 2 * cwHalf, (zone[1] - zone[0]) * sy);
  }

  // conflict point marker
  const cx = px(g.conflict_x);
  const cy = py(g.conflict_y);
  ctx.strokeStyle = COLORS.conflict;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(cx - 5, cy);
  ctx.lineTo(cx + 5, cy);
  ctx.moveTo(cx, cy - 5);
  ctx.lineTo(cx, cy + 5);
  ctx.stroke();

  // vehicle rectangle, front bumper at x_veh, driving along +x
  const vehLen = 4.5 * sx;
  const vehW = 1.8 * sy;
  ctx.fillStyle = view.hud.uCmd < -0.5 ? COLORS.vehicleBrake : COLORS.vehicle;
  ctx.fillRect(px(view.xVeh) - vehLen, py(g.conflict_y) - vehW / 2, vehLen, vehW);

  // pedestrian dot on the crossing column
  ctx.fillStyle = Math.abs(view.hud.vPed) < 0.05 ? COLORS.pedStanding : COLORS.ped;
  ctx.beginPath();
  ctx.arc(px(g.conflict_x), py(view.yPed), 5, 0, Math.PI * 2);
  ctx.fill();
}

function drawHud(ctx: Canvas2D, view: RenderState, width: number): void {
  ctx.font = "12px monospace";
  ctx.textAlign = "left";
  ctx.fillStyle = COLORS.hud;
  const h = view.hud;
  ctx.fillText(
    `t=${h.t.toFixed(2)}s  v_veh=${h.vVeh.toFixed(2)}  v_ped=${h.vPed.toFixed(2)}  u=${h.uCmd.toFixed(2)}  zone=${h.zone}`,
    10, 18,
  );
  ctx.fillText(`controller=${view.controller || "-"}  conn=${view.connection}`, 10, 34);
  let flagX = width - OVERLAY_BAR_W - 30 - 150;
  if (h.clamped) {
    ctx.fillStyle = COLORS.warn;
    ctx.fillText("CLAMPED", flagX, 18);
    flagX += 70;
  }
  if (h.overrun) {
    ctx.fillStyle = COLORS.warn;
    ctx.fillText("OVERRUN", flagX, 18);
  }
  if (view.lastError) {
    ctx.fillStyle = COLORS.error;
    ctx.fillText(`error: ${view.lastError}`, 10, 48);
  }
}

function drawOverlayBar(ctx: Canvas2D, view: RenderState, width: number): void {
  const x = width - OVERLAY_BAR_W - 14;
  const y = 8;
  ctx.strokeStyle = COLORS.hud;
  ctx.lineWidth = 1;
  ctx.strokeRect(x, y, OVERLAY_BAR_W, OVERLAY_BAR_H);
  // filled width is the tick's intention_eff untouched, scaled to the bar
  ctx.fillStyle = COLORS.barFill;
  ctx.fillRect(x, y, view.overlay.eff * OVERLAY_BAR_W, OVERLAY_BAR_H);
  ctx.strokeStyle = COLORS.barRawMark;
  ctx.beginPath();
  ctx.moveTo(x + view.overlay.raw * OVERLAY_BAR_W, y);
  ctx.lineTo(x + view.overlay.raw * OVERLAY_BAR_W, y + OVERLAY_BAR_H);
  ctx.stroke();
  ctx.font = "12px monospace";
  ctx.textAlign = "left";
  ctx.fillStyle = COLORS.hud;
  ctx.fillText(`intent eff=${view.overlay.eff.toFixed(4)} raw=${view.overlay.raw.toFixed(2)}`, x, y + OVERLAY_BAR_H + 14);
}

function drawTrail(ctx: Canvas2D, trail: TrailSample[]): void {
  const { x, y, w, h } = TRAIL_BOX;
  ctx.strokeStyle = COLORS.laneMark;
  ctx.lineWidth = 1;
  ctx.strokeRect(x, y, w, h);
  ctx.font = "10px monospace";
  ctx.textAlign = "left";
  ctx.fillStyle = COLORS.hud;
  ctx.fillText("intention history", x + 4, y + 11);
  if (trail.length < 2) return;
  const t0 = trail[0].t;
  const span = Math.max(trail[trail.length - 1].t - t0, 1e-9);
  ctx.strokeStyle = COLORS.trail;
  ctx.beginPath();
  trail.forEach((s, i) => {
    const sxp = x + ((s.t - t0) / span) * w;
    const syp = y + h - s.eff * (h - 2) - 1;
    if (i === 0) ctx.moveTo(sxp, syp);
    else ctx.lineTo(sxp, syp);
  });
  ctx.stroke();
}

function drawBanner(ctx: Canvas2D, view: RenderState, width: number, height: number): void {
  const bw = 280;
  const bh = 60;
  const bx = (width - bw) / 2;
  const by = (height - bh) / 2;
  ctx.fillStyle = COLORS.banner;
  ctx.fillRect(bx, by, bw, bh);
  ctx.strokeStyle = COLORS.hud;
  ctx.lineWidth = 1;
  ctx.strokeRect(bx, by, bw, bh);
  ctx.fillStyle = COLORS.hud;
  ctx.font = "16px monospace";
  ctx.textAlign = "center";
  const tEnd = view.episode.tEnd;
  ctx.fillText(
    `${view.episode.outcome ?? "done"}  t_end=${tEnd === null ? "-" : tEnd.toFixed(2)}s`,
    width / 2, by + 36,
  );
}
