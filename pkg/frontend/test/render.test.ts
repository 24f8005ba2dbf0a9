import { describe, expect, it } from "vitest";

import type { GeometrySummary, JoinedMsg, TickMsg } from "../src/protocol.js";
import { OVERLAY_BAR_W, draw, type Canvas2D } from "../src/render.js";
import { ViewModel } from "../src/viewmodel.js";

class RecordingCtx implements Canvas2D {
  fillStyle: string | object = "";
  strokeStyle: string | object = "";
  lineWidth = 1;
  font = "";
  textAlign = "";
  calls: Array<{ op: string; args: unknown[] }> = [];

  private log(op: string, ...args: unknown[]): void {
    this.calls.push({ op, args });
  }

  fillRect(x: number, y: number, w: number, h: number) { this.log("fillRect", x, y, w, h); }
  strokeRect(x: number, y: number, w: number, h: number) { this.log("strokeRect", x, y, w, h); }
  beginPath() { this.log("beginPath"); }
  moveTo(x: number, y: number) { this.log("moveTo", x, y); }
  lineTo(x: number, y: number) { this.log("lineTo", x, y); }
  arc(x: number, y: number, r: number, a0: number, a1: number) { this.log("arc", x, y, r, a0, a1); }
  fill() { this.log("fill"); }
  stroke() { this.log("stroke"); }
  fillText(text: string, x: number, y: number) { this.log("fillText", text, x, y); }

  texts(): string[] {
    return this.calls.filter((c) => c.op === "fillText").map((c) => String(c.args[0]));
  }
}

const geometry: GeometrySummary = {
  conflict_x: 0, conflict_y: 0,
  safe_zone: [-7, -4], near_zone: [-4, -2], crossing_zone: [-2, 2],
  veh_passed_clearance: 2, sensing_range: 50,
};

function joinedMsg(): JoinedMsg {
  return {
    type: "joined", seq: 0, mode: "wall", controller: "mpc", seed: 0,
    config_hash: "abc123", controllers: ["mpc"], ped_input_range: [-0.5, 2.0],
    geometry, sim: { dt_sim: 0.05, t_max: 120, veh_start_x: -45, ped_start_y: -6.5 },
    serve: { tick_hz: 20, controller: "mpc" },
  };
}

function tickMsg(seq: number, overrides: Partial<TickMsg> = {}): TickMsg {
  return {
    type: "tick", seq, t: 0.05 * seq, x_veh: -45, v_veh: 8.33,
    y_ped: -6.5, v_ped: 0, u_cmd: 0, intention_raw: 1, intention_eff: 1,
    zone: "safe", clamped: false, overrun: false,
    ...overrides,
  };
}

describe("draw", () => {
  it("shows a waiting notice before the first tick", () => {
    const ctx = new RecordingCtx();
    const vm = new ViewModel();
    draw(ctx, vm.render(0), 960, 540);
    expect(ctx.texts().some((t) => t.includes("waiting"))).toBe(true);
  });

  it("fills the overlay bar with exactly eff * bar width", () => {
    const eff = Math.pow(0.9, 0.6); // an awkward float, no rounding allowed
    const vm = new ViewModel();
    vm.apply(joinedMsg(), 0);
    vm.apply(tickMsg(1, { intention_eff: eff, intention_raw: 1 }), 0);
    const ctx = new RecordingCtx();
    draw(ctx, vm.render(1), 960, 540);
    const widths = ctx.calls.filter((c) => c.op === "fillRect").map((c) => c.args[2]);
    expect(widths).toContain(eff * OVERLAY_BAR_W);
    expect(ctx.texts().some((t) => t.includes(`eff=${eff.toFixed(4)}`))).toBe(true);
  });

  it("draws the scene and hud for a live tick", () => {
    const vm = new ViewModel();
    vm.apply(joinedMsg(), 0);
    vm.apply(tickMsg(1, { zone: "near", u_cmd: -2.5, clamped: true, overrun: true }), 0);
    const ctx = new RecordingCtx();
    draw(ctx, vm.render(1), 960, 540);
    const texts = ctx.texts();
    expect(texts.some((t) => t.includes("zone=near"))).toBe(true);
    expect(texts).toContain("CLAMPED");
    expect(texts).toContain("OVERRUN");
    expect(ctx.calls.some((c) => c.op === "arc")).toBe(true); // the pedestrian
  });

  it("plots one trail vertex per retained tick", () => {
    const vm = new ViewModel();
    vm.apply(joinedMsg(), 0);
    for (let i = 0; i < 10; i++) {
      vm.apply(tickMsg(i + 1, { t: 0.2 * i, intention_eff: 1 - i / 20 }), i);
    }
    const ctx = new RecordingCtx();
    draw(ctx, vm.render(10), 960, 540);
    const vertices = ctx.calls.filter((c) => c.op === "moveTo" || c.op === "lineTo");
    // scene lines plus exactly ten trail vertices
    const inTrailBox = vertices.filter((c) => {
      const [x] = c.args as [number, number];
      return x >= 10 && x <= 190;
    });
    expect(inTrailBox.length).toBeGreaterThanOrEqual(10);
  });

  it("announces the outcome when the episode ends", () => {
    const vm = new ViewModel();
    vm.apply(joinedMsg(), 0);
    vm.apply(tickMsg(1), 0);
    vm.apply({ type: "episode_end", seq: 2, outcome: "ped_first", t_end: 12.4 }, 1);
    const ctx = new RecordingCtx();
    draw(ctx, vm.render(2), 960, 540);
    expect(ctx.texts().some((t) => t.includes("ped_first") && t.includes("12.40"))).toBe(true);
  });
});
