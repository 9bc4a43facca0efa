/**
 * Client-side view state.
 *
 * The server is the single source of truth for geometry: the grid and the
 * traced polygon stored here are always the last server-acknowledged
 * payloads, tagged with the revision they arrived with. Responses carrying
 * a revision older than the one already applied are discarded, which keeps
 * rendering consistent when a slow request resolves after a fast one.
 */

import type { GridPayload } from "./api.js";
import { ViewTransform } from "./transform.js";

export type LayerName = "image" | "grid" | "path" | "scribbles" | "mask";

export interface DragState {
  vertexIndex: number;
  startX: number;
  startY: number;
}

export interface TracedPath {
  polygon: [number, number][];
  vertexIndices: number[];
  energy: number;
}

export class ViewState {
  sessionId: string | null = null;
  revision = -1;
  grid: GridPayload | null = null;
  path: TracedPath | null = null;
  transform = new ViewTransform();
  layers: Record<LayerName, boolean> = {
    image: true,
    grid: true,
    path: true,
    scribbles: true,
    mask: false,
  };
  pendingSeeds: [number, number][] = [];
  scribbles: [number, number][][] = [];
  drag: DragState | null = null;
  lossTail: number[] = [];
  flashRejected = false;

  startSession(id: string, revision: number, grid: GridPayload): void {
    this.sessionId = id;
    this.revision = revision;
    this.grid = grid;
    this.path = null;
    this.pendingSeeds = [];
    this.scribbles = [];
    this.lossTail = [];
    this.drag = null;
    this.flashRejected = false;
  }

  /**
   * Apply a server grid payload. Returns false (and changes nothing) when
   * the payload is stale, i.e. older than what is already displayed.
   */
  applyGrid(revision: number, grid: GridPayload): boolean {
    if (revision < this.revision) return false;
    this.revision = revision;
    this.grid = grid;
    return true;
  }

  applyPath(revision: number, path: TracedPath): boolean {
    if (revision < this.revision) return false;
    this.revision = revision;
    this.path = path;
    return true;
  }

  noteRevision(revision: number): void {
    if (revision > this.revision) this.revision = revision;
  }

  toggleLayer(name: LayerName): void {
    this.layers[name] = !this.layers[name];
  }

  addSeed(x: number, y: number): void {
    this.pendingSeeds.push([x, y]);
  }

  clearSeeds(): void {
    this.pendingSeeds = [];
  }

  addScribble(stroke: [number, number][]): void {
    if (stroke.length >= 2) this.scribbles.push(stroke);
  }
}
