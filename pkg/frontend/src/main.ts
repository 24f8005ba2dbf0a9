// Browser entry point: wires the session client, keyboard pilot, view model
// and canvas renderer together. Everything testable lives in the modules
// this file imports; keep logic here to a minimum.

import { SessionClient } from "./client.js";
import { KeyboardPilot, isMappedKey } from "./input.js";
import type { ControllerName } from "./protocol.js";
import { draw } from "./render.js";
import { ViewModel } from "./viewmodel.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function fillControllerOptions(select: HTMLSelectElement, names: string[], active: string): void {
  select.innerHTML = "";
  for (const name of names) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    opt.selected = name === active;
    select.appendChild(opt);
  }
}

function start(): void {
  const canvas = byId<HTMLCanvasElement>("scene");
  const controllerSelect = byId<HTMLSelectElement>("controller");
  const resetButton = byId<HTMLButtonElement>("reset");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");

  const vm = new ViewModel();
  const pilot = new KeyboardPilot();

  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  const client = new SessionClient(`${proto}//${location.host}/ws`, {
    onMessage: (msg) => {
      if (msg.type === "joined") {
        fillControllerOptions(controllerSelect, msg.controllers, msg.controller);
      }
      if (msg.type === "reset_done") {
        pilot.forgetSent();
      }
      vm.apply(msg, performance.now());
    },
    onStatus: (status) => {
      vm.setConnection(status);
      if (status === "open") pilot.forgetSent();
    },
    onSeqGap: (expected, got) => {
      console.warn(`sequence gap: expected ${expected}, got ${got}`);
    },
  });

  // pre-fill the dropdown before the socket settles; joined refreshes it
  fetch("/config")
    .then((res) => (res.ok ? res.json() : null))
    .then((doc) => {
      if (doc && Array.isArray(doc.controllers)) {
        fillControllerOptions(controllerSelect, doc.controllers, doc.serve?.controller ?? "");
      }
    })
    .catch(() => undefined);

  window.addEventListener("keydown", (ev) => {
    if (ev.target instanceof HTMLSelectElement) return;
    if (isMappedKey(ev.code)) {
      ev.preventDefault();
      pilot.keyEvent("down", ev.code);
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (isMappedKey(ev.code)) {
      ev.preventDefault();
      pilot.keyEvent("up", ev.code);
    }
  });
  window.addEventListener("blur", () => {
    pilot.releaseAll();
  });

  resetButton.addEventListener("click", () => {
    client.send({ type: "reset" });
    resetButton.blur();
  });
  controllerSelect.addEventListener("change", () => {
    const name = controllerSelect.value as ControllerName;
    // staged by the server, then applied by the reset that follows
    client.send({ type: "select_controller", name });
    client.send({ type: "reset" });
    controllerSelect.blur();
  });

  const frame = () => {
    const now = performance.now();
    const msg = pilot.sample(now);
    if (msg && !client.send(msg)) {
      pilot.forgetSent(); // dropped during an outage; retry next frame
    }
    draw(ctx, vm.render(now), canvas.width, canvas.height);
    requestAnimationFrame(frame);
  };

  client.connect();
  requestAnimationFrame(frame);
}

start();
