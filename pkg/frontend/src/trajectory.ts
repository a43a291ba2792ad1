// Trajectory plot: course outline, pose trail and current heading tick.
//
// Aerial view with canvas orientation (y down): positive angular command
// turns clockwise on screen, so the turn-left posture steers left.

export interface Viewport {
  width: number;
  height: number;
  scale: number;   // px per meter
  cx: number;      // canvas x of world origin
  cy: number;      // canvas y of world origin
}

export function worldToCanvas(x: number, y: number, vp: Viewport): [number, number] {
  return [vp.cx + x * vp.scale, vp.cy + y * vp.scale];
}

/** Viewport that fits a bounding box with a margin. */
export function fitViewport(width: number, height: number,
                            xs: number[], ys: number[], margin = 20): Viewport {
  const minX = Math.min(...xs), maxX = Math.max(...xs);
  const minY = Math.min(...ys), maxY = Math.max(...ys);
  const scale = Math.min(
    (width - 2 * margin) / Math.max(maxX - minX, 1e-6),
    (height - 2 * margin) / Math.max(maxY - minY, 1e-6));
  return {
    width, height, scale,
    cx: margin - minX * scale + (width - 2 * margin - (maxX - minX) * scale) / 2,
    cy: margin - minY * scale + (height - 2 * margin - (maxY - minY) * scale) / 2,
  };
}

/**
 * Default figure-8 outline for display: two stadium lobes tangent at the
 * crossing (outer straights 3/4 of straightLen, middle 3/2). Display-only;
 * simulation truth always comes from telemetry.
 */
export function figure8Outline(straightLen = 4, radius = 1, step = 0.05): [number, number][] {
  const a = 0.75 * straightLen;
  const b = 1.5 * straightLen;
  const r = radius;
  const pts: [number, number][] = [];
  const line = (x0: number, y0: number, x1: number, y1: number) => {
    const len = Math.hypot(x1 - x0, y1 - y0);
    const n = Math.max(1, Math.ceil(len / step));
    for (let i = 0; i <= n; i++) pts.push([x0 + (x1 - x0) * i / n, y0 + (y1 - y0) * i / n]);
  };
  const arc = (cx: number, cy: number, phi0: number, sweep: number) => {
    const n = Math.max(2, Math.ceil(Math.abs(sweep) * r / step));
    for (let i = 0; i <= n; i++) {
      const phi = phi0 + sweep * i / n;
      pts.push([cx + r * Math.cos(phi), cy + r * Math.sin(phi)]);
    }
  };
  line(0, 0, 0, a);
  arc(r, a, Math.PI, -Math.PI);
  line(2 * r, a, 2 * r, a - b);
  arc(3 * r, a - b, Math.PI, Math.PI);
  line(4 * r, a - b, 4 * r, 0);
  arc(3 * r, 0, 0, Math.PI);
  arc(r, 0, 0, -Math.PI);
  return pts;
}

export class Trail {
  points: [number, number][] = [];

  constructor(private cap = 20000) {}

  push(x: number, y: number): void {
    this.points.push([x, y]);
    if (this.points.length > this.cap) this.points.shift();
  }

  clear(): void {
    this.points = [];
  }
}

interface Ctx2D {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

function polyline(ctx: Ctx2D, pts: [number, number][], vp: Viewport): void {
  ctx.beginPath();
  pts.forEach(([x, y], i) => {
    const [px, py] = worldToCanvas(x, y, vp);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

export function drawTrajectory(ctx: Ctx2D, course: [number, number][],
                               trail: Trail,
                               pose: { x: number; y: number; heading: number } | null,
                               vp: Viewport): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  ctx.strokeStyle = "#2c4a3e";
  ctx.lineWidth = 6;
  polyline(ctx, course, vp);
  if (trail.points.length > 1) {
    ctx.strokeStyle = "#68c4ff";
    ctx.lineWidth = 2;
    polyline(ctx, trail.points, vp);
  }
  if (pose) {
    const [px, py] = worldToCanvas(pose.x, pose.y, vp);
    ctx.fillStyle = "#ffd166";
    ctx.beginPath();
    ctx.arc(px, py, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#ffd166";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(px, py);
    ctx.lineTo(px + 12 * Math.cos(pose.heading), py + 12 * Math.sin(pose.heading));
    ctx.stroke();
  }
}
