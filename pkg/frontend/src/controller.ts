/**
 * Orchestrates the annotation workflow against the HTTP service.
 *
 * All geometry decisions happen server-side; the controller forwards user
 * intents, applies acknowledged payloads to the ViewState (discarding stale
 * revisions), and surfaces rejection feedback. Vertex drags are rate
 * limited to at most 30 requests per second and serialized so responses
 * cannot interleave.
 */

import { ApiError, DefgridClient } from "./api.js";
import { RateLimiter } from "./ratelimit.js";
import { ViewState } from "./state.js";

export const DRAG_REQUESTS_PER_SECOND = 30;
export const REJECT_FLASH_MS = 350;

export interface ExportedAnnotation {
  polygonJson: string;
  maskPngBytes: Uint8Array;
  revision: number;
}

function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export class AnnotatorController {
  readonly state = new ViewState();
  onChange: () => void = () => {};
  onError: (message: string) => void = () => {};

  private inflightDrag: Promise<void> = Promise.resolve();
  private readonly dragLimiter = new RateLimiter<[number, number, number]>(
    (index, x, y) => this.sendVertex(index, x, y),
    DRAG_REQUESTS_PER_SECOND,
  );
  private flashTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly client: DefgridClient,
    private readonly scheduleFlash: (
      fn: () => void,
      ms: number,
    ) => void = (fn, ms) => {
      if (this.flashTimer !== null) clearTimeout(this.flashTimer);
      this.flashTimer = setTimeout(fn, ms);
    },
  ) {}

  private fail(err: unknown): void {
    const msg = err instanceof ApiError ? err.message : String(err);
    this.onError(msg);
  }

  async loadImage(imageB64: string, rows = 20, cols = 20): Promise<void> {
    try {
      const reply = await this.client.createSession(imageB64, rows, cols);
      this.state.startSession(reply.id, reply.revision, reply.grid);
      this.onChange();
    } catch (err) {
      this.fail(err);
      throw err;
    }
  }

  async runDeform(iters: number, params: Record<string, number | string> = {}): Promise<void> {
    const sid = this.requireSession();
    try {
      const reply = await this.client.deform(sid, { iters, ...params });
      if (this.state.applyGrid(reply.revision, reply.grid)) {
        this.state.lossTail = reply.l_total_tail;
      }
      this.onChange();
    } catch (err) {
      this.fail(err);
    }
  }

  async uploadMask(maskB64: string): Promise<void> {
    const sid = this.requireSession();
    try {
      const reply = await this.client.setMaskEnergy(sid, maskB64);
      this.state.noteRevision(reply.revision);
      this.onChange();
    } catch (err) {
      this.fail(err);
    }
  }

  /** Send all collected scribble strokes as the energy source. */
  async commitScribbles(): Promise<void> {
    const sid = this.requireSession();
    if (this.state.scribbles.length === 0) {
      this.onError("draw a scribble or upload a mask first");
      return;
    }
    try {
      const reply = await this.client.setScribbleEnergy(
        sid,
        this.state.scribbles,
      );
      this.state.noteRevision(reply.revision);
      this.onChange();
    } catch (err) {
      this.fail(err);
    }
  }

  async traceFromSeeds(snapK = 6): Promise<void> {
    const sid = this.requireSession();
    if (this.state.pendingSeeds.length < 3) {
      this.onError("place at least 3 seed points");
      return;
    }
    try {
      const reply = await this.client.trace(
        sid,
        this.state.pendingSeeds,
        snapK,
      );
      this.state.applyPath(reply.revision, {
        polygon: reply.polygon,
        vertexIndices: reply.vertex_indices,
        energy: reply.energy,
      });
      this.onChange();
    } catch (err) {
      this.fail(err);
    }
  }

  /** Pointer-move handler during a vertex drag (rate limited). */
  dragVertex(index: number, x: number, y: number): void {
    this.dragLimiter.call(index, x, y);
  }

  /** Pointer-up handler: flush the trailing drag position immediately. */
  endDrag(): void {
    this.dragLimiter.flush();
    this.state.drag = null;
  }

  private sendVertex(index: number, x: number, y: number): void {
    this.inflightDrag = this.inflightDrag.then(async () => {
      const sid = this.state.sessionId;
      if (sid === null) return;
      try {
        const reply = await this.client.moveVertex(sid, index, x, y);
        this.state.applyGrid(reply.revision, reply.grid);
        if (reply.flipped) this.flashRejection();
        this.onChange();
      } catch (err) {
        this.fail(err);
      }
    });
  }

  /** Await any queued drag requests; used by pointer-up and tests. */
  drainDrags(): Promise<void> {
    return this.inflightDrag;
  }

  private flashRejection(): void {
    this.state.flashRejected = true;
    this.scheduleFlash(() => {
      this.state.flashRejected = false;
      this.onChange();
    }, REJECT_FLASH_MS);
  }

  async exportAnnotation(): Promise<ExportedAnnotation | null> {
    const sid = this.requireSession();
    try {
      const reply = await this.client.exportSession(sid);
      if (reply.polygon_json === null || reply.mask_png_b64 === null) {
        this.onError("nothing to export: trace a polygon first");
        return null;
      }
      return {
        polygonJson: reply.polygon_json,
        maskPngBytes: base64ToBytes(reply.mask_png_b64),
        revision: reply.revision,
      };
    } catch (err) {
      this.fail(err);
      return null;
    }
  }

  private requireSession(): string {
    if (this.state.sessionId === null) {
      throw new Error("no active session; load an image first");
    }
    return this.state.sessionId;
  }
}
