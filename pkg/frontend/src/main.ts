// Operator console wiring: socket, inputs, canvases, readouts.

import { drawHeatmap } from "./heatmap";
import { InputState, gamepadToInput, keysToInput, neutralInput, toCommands } from "./input";
import type { Telemetry } from "./protocol";
import { SessionRecorder } from "./recorder";
import { DriveSocket, SocketStatus } from "./socket";
import { Trail, drawTrajectory, figure8Outline, fitViewport } from "./trajectory";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const url = `ws://${location.hostname || "127.0.0.1"}:8642/ws`;
const input: InputState = neutralInput();
let latest: Telemetry | null = null;
let status: SocketStatus = "disconnected";
const recorder = new SessionRecorder();
const trail = new Trail();
const pressedKeys = new Set<string>();
let inputSource: "sliders" | "keyboard" | "gamepad" = "sliders";

const course = figure8Outline();
const trajCanvas = $<HTMLCanvasElement>("trajectory");
const heatCanvas = $<HTMLCanvasElement>("heatmap");
const viewport = fitViewport(trajCanvas.width, trajCanvas.height,
                             course.map((p) => p[0]), course.map((p) => p[1]));

const socket = new DriveSocket(url, {
  onTelemetry: (t) => {
    latest = t;
    recorder.push(t);
    trail.push(t.pose.x, t.pose.y);
    render();
  },
  onStatus: (s) => {
    status = s;
    render();
  },
  onServerError: (message) => {
    $("log").textContent = message;
  },
});

function locked(): boolean {
  return status !== "connected" || latest?.mode === "safety_stopped";
}

function pushInputs(): void {
  // posture commands flow only while connected and running
  if (status !== "connected" || latest?.mode !== "running") return;
  for (const cmd of toCommands(input)) socket.send(cmd);
}

function render(): void {
  $("status").textContent = status;
  $("status").className = `pill ${status}`;
  const mode = latest?.mode ?? "-";
  $("mode").textContent = mode;
  $("banner").style.display = mode === "safety_stopped" ? "block" : "none";

  const t = latest;
  if (t) {
    $("readout").textContent =
      `v ${t.cmd.v.toFixed(2)} m/s   w ${t.cmd.w.toFixed(2)} rad/s   ` +
      `P ${t.p.toFixed(2)}   cop ${t.cop.toFixed(2)}   ` +
      `bend ${t.theta_b.toFixed(1)} deg   ${t.category}   ` +
      `progress ${(100 * t.path_progress).toFixed(0)}%`;
    const hctx = heatCanvas.getContext("2d");
    if (hctx) drawHeatmap(hctx, t.fsr, t.cop, heatCanvas.width, heatCanvas.height);
  }
  const ctx = trajCanvas.getContext("2d");
  if (ctx) drawTrajectory(ctx, course, trail, t ? t.pose : null, viewport);

  const disabled = locked();
  for (const id of ["forward", "bias", "bend", "bend-enable", "expert"]) {
    ($(id) as HTMLInputElement).disabled = disabled;
  }
  ($("start") as HTMLButtonElement).disabled = status !== "connected" || mode !== "idle";
  ($("stop") as HTMLButtonElement).disabled = status !== "connected" || mode !== "running";
  ($("reset") as HTMLButtonElement).disabled = status !== "connected";
  $("record").textContent = recorder.recording ? "Stop recording" : "Record";
  $("rows").textContent = `${recorder.rows.length} samples`;
}

function bindSlider(id: string, apply: (value: number) => void): void {
  const el = $<HTMLInputElement>(id);
  el.addEventListener("input", () => {
    inputSource = "sliders";
    apply(parseFloat(el.value));
  });
}

bindSlider("forward", (v) => { input.forward = v; });
bindSlider("bias", (v) => { input.bias = v; });
bindSlider("bend", (v) => {
  if (($("bend-enable") as HTMLInputElement).checked) input.bendDeg = v;
});
$("bend-enable").addEventListener("change", () => {
  const on = ($("bend-enable") as HTMLInputElement).checked;
  input.bendDeg = on ? parseFloat(($("bend") as HTMLInputElement).value) : null;
});
$("expert").addEventListener("change", () => {
  input.expert = ($("expert") as HTMLInputElement).checked;
  $("lambda-row").style.display = input.expert ? "flex" : "none";
});
for (let i = 0; i < 5; i++) {
  bindSlider(`lam${i}`, (v) => { input.lambda[i] = v; });
}

$("start").addEventListener("click", () => socket.send({ type: "start" }));
$("stop").addEventListener("click", () => socket.send({ type: "stop" }));
$("reset").addEventListener("click", () => {
  socket.send({ type: "reset" });
  trail.clear();
});
$("record").addEventListener("click", () => {
  if (recorder.recording) recorder.stop();
  else recorder.start();
  render();
});
$("download").addEventListener("click", () => {
  const blob = new Blob([recorder.toJsonl()], { type: "application/jsonl" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "session-trace.jsonl";
  a.click();
  URL.revokeObjectURL(a.href);
});

window.addEventListener("keydown", (ev) => {
  if ((ev.target as HTMLElement)?.tagName === "INPUT") return;
  pressedKeys.add(ev.code);
  inputSource = "keyboard";
});
window.addEventListener("keyup", (ev) => pressedKeys.delete(ev.code));

function pollSources(): void {
  if (inputSource === "keyboard") {
    Object.assign(input, keysToInput(pressedKeys));
  }
  const pads = navigator.getGamepads?.() ?? [];
  const pad = pads.find(Boolean);
  if (pad) {
    const mapped = gamepadToInput(pad.axes);
    if (mapped.forward > 0 || mapped.bias !== 0) {
      inputSource = "gamepad";
    }
    if (inputSource === "gamepad") Object.assign(input, mapped);
  }
  pushInputs();
}

setInterval(pollSources, 100); // 10 Hz command stream, well under the cap
socket.connect();
render();
