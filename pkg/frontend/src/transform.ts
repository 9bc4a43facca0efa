/**
 * Zoom/pan viewport math shared by the canvas layers.
 *
 * Image space uses pixel units with the origin at the top-left corner;
 * screen space uses CSS pixels. The transform is uniform scale plus
 * translation, so conversions stay exact and invertible.
 */

export interface Point {
  x: number;
  y: number;
}

export const MIN_ZOOM = 0.25;
export const MAX_ZOOM = 64;

export class ViewTransform {
  constructor(
    public scale = 1,
    public offsetX = 0,
    public offsetY = 0,
  ) {}

  toScreen(p: Point): Point {
    return {
      x: p.x * this.scale + this.offsetX,
      y: p.y * this.scale + this.offsetY,
    };
  }

  toImage(p: Point): Point {
    return {
      x: (p.x - this.offsetX) / this.scale,
      y: (p.y - this.offsetY) / this.scale,
    };
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }

  /** Zoom by `factor` keeping the screen point `pivot` fixed. */
  zoomAt(pivot: Point, factor: number): void {
    const next = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, this.scale * factor));
    const applied = next / this.scale;
    this.offsetX = pivot.x - (pivot.x - this.offsetX) * applied;
    this.offsetY = pivot.y - (pivot.y - this.offsetY) * applied;
    this.scale = next;
  }

  /** Center the image rectangle in a viewport, filling ~90% of it. */
  fit(imageW: number, imageH: number, viewW: number, viewH: number): void {
    this.scale = Math.min(viewW / imageW, viewH / imageH) * 0.9;
    this.offsetX = (viewW - imageW * this.scale) / 2;
    this.offsetY = (viewH - imageH * this.scale) / 2;
  }

  clone(): ViewTransform {
    return new ViewTransform(this.scale, this.offsetX, this.offsetY);
  }
}

/**
 * Snap a screen coordinate to the device pixel grid so that one-pixel grid
 * edges land on pixel centers instead of anti-aliasing across two rows.
 */
export function snapToDevicePixel(v: number, devicePixelRatio = 1): number {
  return (Math.round(v * devicePixelRatio - 0.5) + 0.5) / devicePixelRatio;
}
