// torso-drive.v1 wire types and codecs.

export const WS_PROTOCOL = "torso-drive.v1";

export type Mode = "idle" | "running" | "safety_stopped";

export interface Telemetry {
  t: number;
  mode: Mode;
  pose: { x: number; y: number; heading: number };
  cmd: { v: number; w: number };
  cop: number;
  p: number;
  theta_b: number;
  category: string;
  fsr: number[];
  path_progress: number;
}

export type ClientCommand =
  | { type: "start" }
  | { type: "stop" }
  | { type: "reset" }
  | { type: "set_posture"; category: string; intensity: number; bias: number }
  | { type: "set_posture"; lambda: number[] }
  | { type: "set_bend_angle"; deg: number }
  | { type: "set_params"; mapping: Record<string, number | boolean> };

export function encodeCommand(cmd: ClientCommand): string {
  return JSON.stringify({ v: 1, ...cmd });
}

const MODES = new Set(["idle", "running", "safety_stopped"]);

function finite(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

/** Parse one server frame; returns null for error frames and junk. */
export function parseTelemetry(data: string): Telemetry | null {
  let obj: any;
  try {
    obj = JSON.parse(data);
  } catch {
    return null;
  }
  if (!obj || typeof obj !== "object" || obj.type === "error") return null;
  if (!MODES.has(obj.mode)) return null;
  if (!obj.pose || !finite(obj.pose.x) || !finite(obj.pose.y) || !finite(obj.pose.heading)) return null;
  if (!obj.cmd || !finite(obj.cmd.v) || !finite(obj.cmd.w)) return null;
  if (!finite(obj.t) || !finite(obj.cop) || !finite(obj.p) || !finite(obj.theta_b)) return null;
  if (!Array.isArray(obj.fsr) || !obj.fsr.every(finite)) return null;
  if (!finite(obj.path_progress) || typeof obj.category !== "string") return null;
  return obj as Telemetry;
}

/** Error text of a server error frame, else null. */
export function errorFrame(data: string): string | null {
  try {
    const obj = JSON.parse(data);
    if (obj && obj.type === "error" && typeof obj.error === "string") return obj.error;
  } catch {
    /* not json */
  }
  return null;
}
