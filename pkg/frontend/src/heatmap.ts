// FSR strip heatmap: one cell per sensor, left to right in array order,
// with a center-of-pressure marker along the same axis.

export interface CellRect {
  x: number;
  w: number;
}

export function cellRects(n: number, width: number, gap = 3): CellRect[] {
  const w = (width - gap * (n - 1)) / n;
  return Array.from({ length: n }, (_, i) => ({ x: i * (w + gap), w }));
}

/** Cold-to-hot color for a normalized conductance value in [0, 1]. */
export function heatColor(v: number): string {
  const c = Math.min(Math.max(v, 0), 1);
  const r = Math.round(40 + 215 * c);
  const g = Math.round(60 + 60 * (1 - c));
  const b = Math.round(160 * (1 - c) + 30);
  return `rgb(${r},${g},${b})`;
}

/** COP in [-1, 1] -> x pixel on the strip. */
export function copToX(cop: number, width: number): number {
  const c = Math.min(Math.max(cop, -1), 1);
  return ((c + 1) / 2) * width;
}

interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  fillRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

export function drawHeatmap(ctx: Ctx2D, fsr: number[], cop: number | null,
                            width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  const rects = cellRects(fsr.length, width);
  const barH = height - 10;
  fsr.forEach((v, i) => {
    ctx.fillStyle = heatColor(v);
    ctx.fillRect(rects[i].x, 0, rects[i].w, barH);
  });
  if (cop !== null) {
    ctx.fillStyle = "#ffffff";
    ctx.fillRect(copToX(cop, width) - 2, 0, 4, height);
  }
}
