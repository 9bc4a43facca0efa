/**
 * Typed client for the defgrid annotation service.
 *
 * The UI performs no geometric computation of its own; every grid, polygon
 * and export payload comes verbatim from these endpoints.
 */

export interface GridPayload {
  rows: number;
  cols: number;
  width: number;
  height: number;
  variant: string;
  vertices: [number, number][];
  cells: [number, number, number][];
}

export interface SessionReply {
  id: string;
  revision: number;
  grid: GridPayload;
}

export interface DeformParams {
  iters?: number;
  lambda_recons?: number;
  lambda_area?: number;
  lambda_lap?: number;
  delta?: number;
  mean_mode?: string;
}

export interface DeformReply {
  revision: number;
  grid: GridPayload;
  l_total_tail: number[];
}

export interface TraceReply {
  revision: number;
  polygon: [number, number][];
  vertex_indices: number[];
  energy: number;
}

export interface VertexReply {
  revision: number;
  grid: GridPayload;
  flipped: boolean;
}

export interface ExportReply {
  revision: number;
  polygons: [number, number][][];
  polygon_json: string | null;
  mask_png_b64: string | null;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class DefgridClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchImpl(this.baseUrl + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const parsed = await res.json();
        if (parsed && parsed.detail !== undefined) {
          detail =
            typeof parsed.detail === "string"
              ? parsed.detail
              : JSON.stringify(parsed.detail);
        }
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  createSession(
    imageB64: string,
    rows = 20,
    cols = 20,
    variant = "alternating",
  ): Promise<SessionReply> {
    return this.request("POST", "/session", {
      image_b64: imageB64,
      rows,
      cols,
      variant,
    });
  }

  deform(sessionId: string, params: DeformParams): Promise<DeformReply> {
    return this.request("POST", `/session/${sessionId}/deform`, params);
  }

  setMaskEnergy(
    sessionId: string,
    maskB64: string,
  ): Promise<{ ok: boolean; revision: number }> {
    return this.request("POST", `/session/${sessionId}/energy`, {
      mask_b64: maskB64,
    });
  }

  setScribbleEnergy(
    sessionId: string,
    strokes: [number, number][][],
  ): Promise<{ ok: boolean; revision: number }> {
    return this.request("POST", `/session/${sessionId}/energy`, { strokes });
  }

  trace(
    sessionId: string,
    seeds: [number, number][],
    snapK = 6,
  ): Promise<TraceReply> {
    return this.request("POST", `/session/${sessionId}/trace`, {
      seeds,
      snap_k: snapK,
    });
  }

  moveVertex(
    sessionId: string,
    index: number,
    x: number,
    y: number,
  ): Promise<VertexReply> {
    return this.request("POST", `/session/${sessionId}/vertex`, {
      index,
      x,
      y,
    });
  }

  exportSession(sessionId: string): Promise<ExportReply> {
    return this.request("GET", `/session/${sessionId}/export`);
  }

  deleteSession(sessionId: string): Promise<{ ok: boolean }> {
    return this.request("DELETE", `/session/${sessionId}`);
  }
}
