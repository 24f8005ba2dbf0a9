import { describe, expect, it } from "vitest";

import { clampSpeed, isTick, parseServerMessage } from "../src/protocol.js";

const tickBody = {
  type: "tick", seq: 3, t: 0.05, x_veh: -44.9, v_veh: 8.33,
  y_ped: -6.5, v_ped: 0, u_cmd: 0, intention_raw: 0, intention_eff: 0,
  zone: "safe", clamped: false, overrun: false,
};

describe("parseServerMessage", () => {
  it("accepts a well-formed tick", () => {
    const msg = parseServerMessage(JSON.stringify(tickBody));
    expect(msg).not.toBeNull();
    expect(msg!.type).toBe("tick");
    expect(msg!.seq).toBe(3);
    expect(isTick(msg!)).toBe(true);
  });

  it("accepts every advertised server type", () => {
    for (const type of ["joined", "episode_end", "input_ack", "advanced",
                        "controller_selected", "reset_done", "error"]) {
      const msg = parseServerMessage(JSON.stringify({ type, seq: 0 }));
      expect(msg?.type).toBe(type);
    }
  });

  it("rejects invalid json", () => {
    expect(parseServerMessage("{nope")).toBeNull();
  });

  it("rejects non-objects", () => {
    expect(parseServerMessage("42")).toBeNull();
    expect(parseServerMessage("null")).toBeNull();
    expect(parseServerMessage('"tick"')).toBeNull();
  });

  it("rejects unknown types and client types", () => {
    expect(parseServerMessage(JSON.stringify({ type: "telemetry", seq: 0 }))).toBeNull();
    expect(parseServerMessage(JSON.stringify({ type: "ped_input", seq: 0 }))).toBeNull();
  });

  it("rejects a missing or non-numeric seq", () => {
    expect(parseServerMessage(JSON.stringify({ type: "tick" }))).toBeNull();
    expect(parseServerMessage(JSON.stringify({ type: "tick", seq: "7" }))).toBeNull();
  });
});

describe("clampSpeed", () => {
  it("clamps to the input range", () => {
    expect(clampSpeed(3.5)).toBe(2.0);
    expect(clampSpeed(-1)).toBe(-0.5);
    expect(clampSpeed(1.4)).toBe(1.4);
    expect(clampSpeed(0)).toBe(0);
  });
});
