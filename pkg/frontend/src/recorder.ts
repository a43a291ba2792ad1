// Session recorder: telemetry -> run-trace JSON lines.
//
// Produces exactly the persisted trace schema ({t, x, y, heading, v, w})
// so a downloaded session scores directly with `torsodrive metrics`.

import type { Telemetry } from "./protocol";

export interface TraceRow {
  t: number;
  x: number;
  y: number;
  heading: number;
  v: number;
  w: number;
}

export class SessionRecorder {
  recording = false;
  rows: TraceRow[] = [];

  start(): void {
    this.rows = [];
    this.recording = true;
  }

  stop(): void {
    this.recording = false;
  }

  push(t: Telemetry): void {
    if (!this.recording) return;
    const last = this.rows[this.rows.length - 1];
    if (last && t.t <= last.t) return; // trace timestamps must strictly increase
    this.rows.push({ t: t.t, x: t.pose.x, y: t.pose.y,
                     heading: t.pose.heading, v: t.cmd.v, w: t.cmd.w });
  }

  toJsonl(): string {
    return this.rows.map((r) => JSON.stringify(r)).join("\n") + (this.rows.length ? "\n" : "");
  }
}
