// DOM bootstrap: connect, render loop, keyboard teleop, run controls.

import { Session } from "./net.js";
import { draw } from "./render.js";
import { TeleopController } from "./teleop.js";
import { ViewModel } from "./viewmodel.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

function bridgeUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("bridge") ?? "ws://127.0.0.1:8765";
}

const canvas = byId<HTMLCanvasElement>("arena");
const ctx = canvas.getContext("2d")!;
const statusEl = byId<HTMLDivElement>("status");
const clockEl = byId<HTMLSpanElement>("clock");
const droppedEl = byId<HTMLSpanElement>("dropped");
const targetSelect = byId<HTMLSelectElement>("teleop-target");

const vm = new ViewModel();
const session = new Session(bridgeUrl(), vm);
const teleop = new TeleopController((v, w, stamp) => {
  if (vm.teleopTarget) {
    session.sendTeleop(vm.teleopTarget, v, w, stamp / 1000);
  }
});

const KEYMAP: Record<string, "forward" | "back" | "left" | "right"> = {
  w: "forward", ArrowUp: "forward",
  s: "back", ArrowDown: "back",
  a: "left", ArrowLeft: "left",
  d: "right", ArrowRight: "right",
};

document.addEventListener("keydown", (e) => {
  const dir = KEYMAP[e.key];
  if (dir) {
    teleop.setKey(dir, true);
    e.preventDefault();
  }
});
document.addEventListener("keyup", (e) => {
  const dir = KEYMAP[e.key];
  if (dir) {
    teleop.setKey(dir, false);
    e.preventDefault();
  }
});

for (const [id, body] of [
  ["btn-pause", { pause: true }],
  ["btn-resume", { pause: false }],
  ["btn-reset", { reset: true }],
] as const) {
  byId<HTMLButtonElement>(id).addEventListener("click", () => session.sendControl(body));
}

targetSelect.addEventListener("change", () => {
  vm.teleopTarget = targetSelect.value || null;
});

let knownRobots = "";

function refreshSidebar(): void {
  statusEl.textContent = vm.status + (vm.lastError ? ` (${vm.lastError})` : "");
  statusEl.className = `status ${vm.status}`;
  clockEl.textContent = vm.simTime.toFixed(2) + (vm.paused ? " (paused)" : "")
    + (vm.done ? " (done)" : "");
  droppedEl.textContent = String(vm.droppedTotal);
  const names = vm.robotNames.join(",");
  if (names !== knownRobots) {
    knownRobots = names;
    targetSelect.innerHTML = "";
    for (const name of vm.robotNames) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      targetSelect.appendChild(opt);
    }
    if (vm.teleopTarget) {
      targetSelect.value = vm.teleopTarget;
    }
  }
}

function frame(nowMs: number): void {
  teleop.tick(nowMs);
  draw(ctx, vm, nowMs);
  refreshSidebar();
  requestAnimationFrame(frame);
}

session.open();
requestAnimationFrame(frame);
