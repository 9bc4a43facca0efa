"""HTTP service backing the annotator UI.

JSON over HTTP; images travel base64-encoded.  State lives in per-session
objects guarded by a lock, with a revision counter the UI uses to discard
stale responses.  All geometry runs through the same pipeline helpers as
the CLI, so both surfaces emit identical artifacts.
"""

from __future__ import annotations

import base64
import io
import secrets
import threading

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from . import assignment as asg
from . import energy as en
from . import imageio as iio
from . import optimizer as opt
from . import tracer as tr
from .grid import GridError, build_uniform_grid, grid_to_json, signed_areas
from .pipeline import PipelineConfig

MAX_EXTENT = 2048


class Session:
    def __init__(self, image, rows, cols, variant):
        h, w = image.shape[:2]
        self.image = image
        self.features = asg.FeatureMap.from_rgb(image)
        self.grid = build_uniform_grid(rows, cols, w, h, variant)
        self.energy = None
        self.seeds = None
        self.polygon = None
        self.revision = 0
        self.lock = threading.Lock()


class CreateSession(BaseModel):
    image_b64: str
    rows: int = 20
    cols: int = 20
    variant: str = "alternating"


class DeformRequest(BaseModel):
    iters: int = 100
    lambda_recons: float = 0.5
    lambda_area: float = 0.02
    lambda_lap: float = 0.1
    delta: float = 1.0
    mean_mode: str = "soft-grad"


class EnergyRequest(BaseModel):
    mask_b64: str | None = None
    strokes: list[list[list[float]]] | None = None


class TraceRequest(BaseModel):
    seeds: list[list[float]]
    snap_k: int = 6


class VertexRequest(BaseModel):
    index: int
    x: float
    y: float


def _decode_image(b64):
    try:
        raw = base64.b64decode(b64)
        img = Image.open(io.BytesIO(raw)).convert("RGB")
    except Exception as exc:
        raise HTTPException(422, f"cannot decode image: {exc}")
    if img.width > MAX_EXTENT or img.height > MAX_EXTENT:
        raise HTTPException(
            422, f"image exceeds {MAX_EXTENT}x{MAX_EXTENT} limit")
    return np.asarray(img, dtype=np.float64) / 255.0


def _grid_payload(session):
    import json
    return {"revision": session.revision,
            "grid": json.loads(grid_to_json(session.grid))}


def create_app():
    app = FastAPI(title="defgrid annotation service")
    sessions: dict[str, Session] = {}

    def get_session(sid):
        s = sessions.get(sid)
        if s is None:
            raise HTTPException(404, f"unknown session {sid}")
        return s

    @app.exception_handler(GridError)
    async def grid_error(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.post("/session")
    def create_session(req: CreateSession):
        image = _decode_image(req.image_b64)
        try:
            s = Session(image, req.rows, req.cols, req.variant)
        except GridError as exc:
            raise HTTPException(422, str(exc))
        sid = secrets.token_hex(8)
        sessions[sid] = s
        return {"id": sid, **_grid_payload(s)}

    @app.post("/session/{sid}/deform")
    def deform(sid: str, req: DeformRequest):
        s = get_session(sid)
        with s.lock:
            weights = en.LossWeights(
                lambda_recons=req.lambda_recons, lambda_area=req.lambda_area,
                lambda_lap=req.lambda_lap, delta=req.delta,
                mean_mode=req.mean_mode)
            cfg = PipelineConfig(weights=weights,
                                 iterations=req.iters).optimizer_config()
            trace = opt.deform(s.grid, s.features, cfg)
            s.grid = trace.grid
            if req.iters > 0:
                s.revision += 1
            tail = [float(x) for x in trace.l_total[-min(50, len(
                trace.l_total)):]]
            return {**_grid_payload(s), "l_total_tail": tail}

    @app.post("/session/{sid}/energy")
    def set_energy(sid: str, req: EnergyRequest):
        s = get_session(sid)
        with s.lock:
            if req.mask_b64 is not None:
                raw = base64.b64decode(req.mask_b64)
                mask = np.asarray(
                    Image.open(io.BytesIO(raw)).convert("L")) > 0
                if mask.shape != s.image.shape[:2]:
                    raise HTTPException(422, "mask extent mismatch")
                s.energy = tr.distance_transform(mask)
            elif req.strokes:
                pts = []
                for stroke in req.strokes:
                    arr = np.asarray(stroke, dtype=np.float64)
                    for a, b in zip(arr[:-1], arr[1:]):
                        n = max(2, int(np.ceil(np.linalg.norm(b - a) * 2)))
                        t = np.linspace(0, 1, n)
                        pts.append(a + t[:, None] * (b - a))
                    pts.append(arr)
                pts = np.concatenate(pts)
                s.energy = tr.energy_from_points(
                    pts, s.features.width, s.features.height)
            else:
                raise HTTPException(422, "need mask_b64 or strokes")
            s.revision += 1
            return {"ok": True, "revision": s.revision}

    @app.post("/session/{sid}/trace")
    def trace_polygon(sid: str, req: TraceRequest):
        s = get_session(sid)
        with s.lock:
            if s.energy is None:
                raise HTTPException(422, "no energy map; POST /energy first")
            ve = tr.vertex_energy(s.grid, s.energy)
            edges, weights = tr.edge_energy(s.grid, s.energy)
            try:
                snapped = tr.snap_seeds(s.grid, ve, req.seeds, k=req.snap_k)
                poly = tr.trace_path(s.grid, edges, weights, snapped)
            except tr.DegenerateSeedsError as exc:
                raise HTTPException(422, str(exc))
            s.polygon = poly
            s.revision += 1
            return {
                "revision": s.revision,
                "polygon": [[float(x), float(y)] for x, y in poly.vertices],
                "vertex_indices": [int(i) for i in poly.vertex_indices],
                "energy": float(poly.total_energy),
            }

    @app.post("/session/{sid}/vertex")
    def move_vertex(sid: str, req: VertexRequest):
        s = get_session(sid)
        with s.lock:
            n = s.grid.topology.vertex_count
            if not 0 <= req.index < n:
                raise HTTPException(422, f"vertex index out of range [0,{n})")
            off = s.grid.offsets.copy()
            off[req.index] = (req.x - s.grid.base_positions[req.index, 0],
                              req.y - s.grid.base_positions[req.index, 1])
            from .grid import constrain_offsets
            off = constrain_offsets(s.grid, off)
            trial = s.grid.with_offsets(off)
            if np.any(signed_areas(trial) <= opt.AREA_FLOOR):
                return {**_grid_payload(s), "flipped": True}
            s.grid = trial
            s.revision += 1
            return {**_grid_payload(s), "flipped": False}

    @app.get("/session/{sid}/export")
    def export(sid: str):
        s = get_session(sid)
        with s.lock:
            if s.polygon is None:
                return {"revision": s.revision, "polygons": [],
                        "polygon_json": None, "mask_png_b64": None}
            mask_png = iio.png_bytes(s.polygon.mask * 255)
            return {
                "revision": s.revision,
                "polygons": [[[float(x), float(y)]
                              for x, y in s.polygon.vertices]],
                "polygon_json": s.polygon.to_json(),
                "mask_png_b64": base64.b64encode(mask_png).decode("ascii"),
            }

    @app.delete("/session/{sid}")
    def delete(sid: str):
        get_session(sid)
        del sessions[sid]
        return {"ok": True}

    return app
