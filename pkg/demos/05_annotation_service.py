"""Drive the annotation HTTP service end to end, in process.

Creates a session from a synthetic image, deforms the grid, uploads a
mask-derived energy, traces a polygon, tries a vertex drag that would
flip a cell (rejected), and exports the result.

Run:  python3 demos/05_annotation_service.py
"""

import base64
import io

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from defgrid.server import create_app
from defgrid.tracer import rasterize_polygon, sample_seed_points


def png_b64(array):
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def main():
    rng = np.random.default_rng(0)
    size = 48
    ang = np.sort(rng.uniform(0, 2 * np.pi, 6))
    rad = rng.uniform(0.5, 0.9, 6) * size * 0.4
    verts = np.stack([size / 2 + rad * np.cos(ang),
                      size / 2 + rad * np.sin(ang)], axis=1)
    mask = rasterize_polygon(verts, size, size).astype(bool)
    img = np.where(mask[..., None], [210, 80, 60], [30, 60, 190])

    client = TestClient(create_app())
    s = client.post("/session", json={
        "image_b64": png_b64(img.astype(np.uint8)),
        "rows": 6, "cols": 6}).json()
    sid = s["id"]
    print("session", sid, "grid",
          s["grid"]["rows"], "x", s["grid"]["cols"])

    d = client.post(f"/session/{sid}/deform", json={"iters": 80}).json()
    print(f"deformed: l_total {d['l_total_tail'][0]:.2f} -> "
          f"{d['l_total_tail'][-1]:.2f}")

    client.post(f"/session/{sid}/energy", json={
        "mask_b64": png_b64((mask * 255).astype(np.uint8))})
    seeds = sample_seed_points(mask, 24).tolist()
    t = client.post(f"/session/{sid}/trace", json={"seeds": seeds}).json()
    print("traced polygon with", len(t["vertex_indices"]),
          f"vertices, energy {t['energy']:.3f}")

    v = client.post(f"/session/{sid}/vertex",
                    json={"index": 8, "x": 47.0, "y": 47.0}).json()
    print("flipping vertex drag rejected:", v["flipped"])

    exp = client.get(f"/session/{sid}/export").json()
    print("export: polygon json bytes:", len(exp["polygon_json"]),
          "mask png bytes:", len(base64.b64decode(exp["mask_png_b64"])))
    client.delete(f"/session/{sid}")


if __name__ == "__main__":
    main()
