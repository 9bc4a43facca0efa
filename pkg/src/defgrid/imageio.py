"""Minimal image file I/O: PNG/PPM via Pillow, binary PGM directly.

PGM writing is done by hand so label maps round-trip byte-stably
(8-bit for cell labels / masks, 16-bit big-endian for segmentations,
per the netpbm convention).
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def load_image(path):
    """(H, W, 3) float64 RGB in [0, 1]."""
    img = Image.open(path).convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_png(path, array):
    """Save HxW (grayscale/bool) or HxWx3 data; floats taken as [0, 1]."""
    a = np.asarray(array)
    if a.dtype == bool:
        a = a.astype(np.uint8) * 255
    elif np.issubdtype(a.dtype, np.floating):
        a = np.clip(np.round(a * 255.0), 0, 255).astype(np.uint8)
    else:
        a = a.astype(np.uint8)
    Image.fromarray(a).save(path, format="PNG")


def png_bytes(array):
    import io
    a = np.asarray(array)
    if a.dtype == bool:
        a = a.astype(np.uint8) * 255
    elif np.issubdtype(a.dtype, np.floating):
        a = np.clip(np.round(a * 255.0), 0, 255).astype(np.uint8)
    else:
        a = a.astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(a).save(buf, format="PNG")
    return buf.getvalue()


def save_pgm(path, array, maxval=None):
    """Binary (P5) PGM; 16-bit big-endian when maxval > 255."""
    a = np.asarray(array)
    if maxval is None:
        maxval = 255 if a.max() <= 255 else 65535
    h, w = a.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    if maxval > 255:
        body = a.astype(">u2").tobytes()
    else:
        body = a.astype(np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(header + body)


def load_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        # fall back to Pillow for ascii PGM / other formats
        return np.asarray(Image.open(path))
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1
    w, h, maxval = fields
    dt = ">u2" if maxval > 255 else np.uint8
    return np.frombuffer(data, dtype=dt, count=w * h,
                         offset=pos).reshape(h, w).astype(np.int64)
