/**
 * Canvas-layer rendering.
 *
 * A deformed grid has thousands of segments, so everything is drawn in
 * immediate mode onto stacked canvases (image, grid, path, scribbles,
 * seeds) rather than retained DOM nodes. The renderer only needs the small
 * Draw2D subset of CanvasRenderingContext2D below, which lets tests drive
 * it with a recording stub.
 */

import type { GridPayload } from "./api.js";
import type { TracedPath, ViewState } from "./state.js";
import { snapToDevicePixel, ViewTransform } from "./transform.js";

export interface Draw2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fill(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
}

export interface RenderStyle {
  gridColor: string;
  gridRejectedColor: string;
  pathColor: string;
  seedColor: string;
  scribbleColor: string;
  devicePixelRatio: number;
}

export const DEFAULT_STYLE: RenderStyle = {
  gridColor: "#3ec46d",
  gridRejectedColor: "#e0483e",
  pathColor: "#ffd23f",
  seedColor: "#4fb3ff",
  scribbleColor: "#ff7edb",
  devicePixelRatio: 1,
};

/** Unique undirected vertex-index pairs of every triangle in the grid. */
export function gridEdges(grid: GridPayload): [number, number][] {
  const seen = new Set<number>();
  const edges: [number, number][] = [];
  const n = grid.vertices.length;
  for (const [a, b, c] of grid.cells) {
    for (const [u, v] of [
      [a, b],
      [b, c],
      [c, a],
    ]) {
      const lo = Math.min(u, v);
      const hi = Math.max(u, v);
      const key = lo * n + hi;
      if (!seen.has(key)) {
        seen.add(key);
        edges.push([lo, hi]);
      }
    }
  }
  return edges;
}

export class GridRenderer {
  constructor(private readonly style: RenderStyle = DEFAULT_STYLE) {}

  private snap(v: number): number {
    return snapToDevicePixel(v, this.style.devicePixelRatio);
  }

  drawGrid(
    ctx: Draw2D,
    grid: GridPayload,
    view: ViewTransform,
    rejected = false,
  ): void {
    ctx.strokeStyle = rejected
      ? this.style.gridRejectedColor
      : this.style.gridColor;
    ctx.lineWidth = 1;
    ctx.globalAlpha = 0.9;
    ctx.beginPath();
    for (const [u, v] of gridEdges(grid)) {
      const a = view.toScreen({ x: grid.vertices[u][0], y: grid.vertices[u][1] });
      const b = view.toScreen({ x: grid.vertices[v][0], y: grid.vertices[v][1] });
      ctx.moveTo(this.snap(a.x), this.snap(a.y));
      ctx.lineTo(this.snap(b.x), this.snap(b.y));
    }
    ctx.stroke();
  }

  drawPath(ctx: Draw2D, path: TracedPath, view: ViewTransform): void {
    if (path.polygon.length === 0) return;
    ctx.strokeStyle = this.style.pathColor;
    ctx.lineWidth = 2;
    ctx.globalAlpha = 1;
    ctx.beginPath();
    const first = view.toScreen({ x: path.polygon[0][0], y: path.polygon[0][1] });
    ctx.moveTo(first.x, first.y);
    for (const [x, y] of path.polygon.slice(1)) {
      const p = view.toScreen({ x, y });
      ctx.lineTo(p.x, p.y);
    }
    ctx.closePath();
    ctx.stroke();
  }

  drawSeeds(
    ctx: Draw2D,
    seeds: [number, number][],
    view: ViewTransform,
  ): void {
    ctx.fillStyle = this.style.seedColor;
    ctx.globalAlpha = 1;
    for (const [x, y] of seeds) {
      const p = view.toScreen({ x, y });
      ctx.beginPath();
      ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  drawScribbles(
    ctx: Draw2D,
    strokes: [number, number][][],
    view: ViewTransform,
  ): void {
    ctx.strokeStyle = this.style.scribbleColor;
    ctx.lineWidth = 2;
    ctx.globalAlpha = 0.8;
    for (const stroke of strokes) {
      if (stroke.length < 2) continue;
      ctx.beginPath();
      const first = view.toScreen({ x: stroke[0][0], y: stroke[0][1] });
      ctx.moveTo(first.x, first.y);
      for (const [x, y] of stroke.slice(1)) {
        const p = view.toScreen({ x, y });
        ctx.lineTo(p.x, p.y);
      }
      ctx.stroke();
    }
  }

  render(ctx: Draw2D, state: ViewState, viewW: number, viewH: number): void {
    ctx.clearRect(0, 0, viewW, viewH);
    if (state.grid && state.layers.grid) {
      this.drawGrid(ctx, state.grid, state.transform, state.flashRejected);
    }
    if (state.path && state.layers.path) {
      this.drawPath(ctx, state.path, state.transform);
    }
    if (state.layers.scribbles) {
      this.drawScribbles(ctx, state.scribbles, state.transform);
    }
    this.drawSeeds(ctx, state.pendingSeeds, state.transform);
  }
}

/** Scale the loss tail into a polyline for a small sparkline canvas. */
export function sparklinePoints(
  values: number[],
  width: number,
  height: number,
): [number, number][] {
  if (values.length === 0) return [];
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  return values.map((v, i) => [
    values.length === 1 ? width / 2 : (i / (values.length - 1)) * width,
    height - ((v - lo) / span) * height,
  ]);
}
