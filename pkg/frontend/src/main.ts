/**
 * Browser entry point: wires DOM events to the controller and renders the
 * layered canvases. Everything testable lives in the other modules; this
 * file is intentionally thin glue.
 */

import { DefgridClient } from "./api.js";
import { AnnotatorController } from "./controller.js";
import { DEFAULT_STYLE, GridRenderer, sparklinePoints } from "./renderer.js";

const SERVICE_URL = "http://127.0.0.1:8000";

function nearestVertex(
  grid: { vertices: [number, number][] },
  x: number,
  y: number,
  maxDist: number,
): number | null {
  let best = -1;
  let bestD = maxDist * maxDist;
  grid.vertices.forEach(([vx, vy], i) => {
    const d = (vx - x) ** 2 + (vy - y) ** 2;
    if (d < bestD) {
      bestD = d;
      best = i;
    }
  });
  return best >= 0 ? best : null;
}

async function fileToBase64(file: File): Promise<string> {
  const buf = await file.arrayBuffer();
  let bin = "";
  for (const byte of new Uint8Array(buf)) bin += String.fromCharCode(byte);
  return btoa(bin);
}

function download(name: string, data: BlobPart, type: string): void {
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([data], { type }));
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

function main(): void {
  const stage = document.getElementById("stage") as HTMLDivElement;
  const imageCanvas = document.getElementById("layer-image") as HTMLCanvasElement;
  const overlayCanvas = document.getElementById("layer-overlay") as HTMLCanvasElement;
  const sparkCanvas = document.getElementById("sparkline") as HTMLCanvasElement;
  const banner = document.getElementById("banner") as HTMLDivElement;

  const controller = new AnnotatorController(new DefgridClient(SERVICE_URL));
  const dpr = window.devicePixelRatio || 1;
  const renderer = new GridRenderer({ ...DEFAULT_STYLE, devicePixelRatio: dpr });
  let imageBitmap: ImageBitmap | null = null;
  let tool: "seed" | "drag" | "scribble" | "pan" = "seed";
  let activeStroke: [number, number][] | null = null;
  let panning: { x: number; y: number } | null = null;

  function resize(): void {
    for (const canvas of [imageCanvas, overlayCanvas]) {
      canvas.width = stage.clientWidth * dpr;
      canvas.height = stage.clientHeight * dpr;
      canvas.style.width = `${stage.clientWidth}px`;
      canvas.style.height = `${stage.clientHeight}px`;
      canvas.getContext("2d")!.setTransform(dpr, 0, 0, dpr, 0, 0);
    }
    redraw();
  }

  function redraw(): void {
    const state = controller.state;
    const ictx = imageCanvas.getContext("2d")!;
    ictx.clearRect(0, 0, stage.clientWidth, stage.clientHeight);
    if (imageBitmap && state.layers.image) {
      ictx.imageSmoothingEnabled = state.transform.scale < 4;
      const t = state.transform;
      ictx.drawImage(
        imageBitmap,
        t.offsetX,
        t.offsetY,
        imageBitmap.width * t.scale,
        imageBitmap.height * t.scale,
      );
    }
    renderer.render(
      overlayCanvas.getContext("2d")!,
      state,
      stage.clientWidth,
      stage.clientHeight,
    );
    const sctx = sparkCanvas.getContext("2d")!;
    sctx.clearRect(0, 0, sparkCanvas.width, sparkCanvas.height);
    const pts = sparklinePoints(state.lossTail, sparkCanvas.width, sparkCanvas.height);
    if (pts.length > 1) {
      sctx.strokeStyle = "#888";
      sctx.beginPath();
      sctx.moveTo(pts[0][0], pts[0][1]);
      for (const [x, y] of pts.slice(1)) sctx.lineTo(x, y);
      sctx.stroke();
    }
  }

  controller.onChange = redraw;
  controller.onError = (msg) => {
    banner.textContent = msg;
    banner.classList.add("visible");
    setTimeout(() => banner.classList.remove("visible"), 4000);
  };

  (document.getElementById("file") as HTMLInputElement).addEventListener(
    "change",
    async (ev) => {
      const file = (ev.target as HTMLInputElement).files?.[0];
      if (!file) return;
      imageBitmap = await createImageBitmap(file);
      const rows = Number((document.getElementById("rows") as HTMLInputElement).value);
      const cols = Number((document.getElementById("cols") as HTMLInputElement).value);
      await controller.loadImage(await fileToBase64(file), rows, cols);
      controller.state.transform.fit(
        imageBitmap.width,
        imageBitmap.height,
        stage.clientWidth,
        stage.clientHeight,
      );
      redraw();
    },
  );

  document.getElementById("deform")!.addEventListener("click", () => {
    const iters = Number((document.getElementById("iters") as HTMLInputElement).value);
    void controller.runDeform(iters);
  });
  document.getElementById("trace")!.addEventListener("click", () => {
    void controller.traceFromSeeds();
  });
  document.getElementById("scribble-commit")!.addEventListener("click", () => {
    void controller.commitScribbles();
  });
  document.getElementById("export")!.addEventListener("click", async () => {
    const exported = await controller.exportAnnotation();
    if (!exported) return;
    download("polygon.json", exported.polygonJson, "application/json");
    download("mask.png", exported.maskPngBytes.buffer as ArrayBuffer, "image/png");
  });
  (document.getElementById("mask-file") as HTMLInputElement).addEventListener(
    "change",
    async (ev) => {
      const file = (ev.target as HTMLInputElement).files?.[0];
      if (file) void controller.uploadMask(await fileToBase64(file));
    },
  );
  for (const name of ["image", "grid", "path", "scribbles", "mask"] as const) {
    document.getElementById(`layer-${name}-toggle`)?.addEventListener("change", () => {
      controller.state.toggleLayer(name);
      redraw();
    });
  }
  for (const t of ["seed", "drag", "scribble", "pan"] as const) {
    document.getElementById(`tool-${t}`)?.addEventListener("click", () => {
      tool = t;
    });
  }

  overlayCanvas.addEventListener("pointerdown", (ev) => {
    const p = controller.state.transform.toImage({ x: ev.offsetX, y: ev.offsetY });
    if (tool === "seed") {
      controller.state.addSeed(p.x, p.y);
      redraw();
    } else if (tool === "scribble") {
      activeStroke = [[p.x, p.y]];
    } else if (tool === "pan") {
      panning = { x: ev.offsetX, y: ev.offsetY };
    } else if (tool === "drag" && controller.state.grid) {
      const hit = nearestVertex(
        controller.state.grid,
        p.x,
        p.y,
        8 / controller.state.transform.scale,
      );
      if (hit !== null) {
        controller.state.drag = { vertexIndex: hit, startX: p.x, startY: p.y };
      }
    }
    overlayCanvas.setPointerCapture(ev.pointerId);
  });

  overlayCanvas.addEventListener("pointermove", (ev) => {
    const p = controller.state.transform.toImage({ x: ev.offsetX, y: ev.offsetY });
    if (activeStroke) {
      activeStroke.push([p.x, p.y]);
      redraw();
    } else if (panning) {
      controller.state.transform.panBy(ev.offsetX - panning.x, ev.offsetY - panning.y);
      panning = { x: ev.offsetX, y: ev.offsetY };
      redraw();
    } else if (controller.state.drag) {
      controller.dragVertex(controller.state.drag.vertexIndex, p.x, p.y);
    }
  });

  overlayCanvas.addEventListener("pointerup", () => {
    if (activeStroke) {
      controller.state.addScribble(activeStroke);
      activeStroke = null;
      redraw();
    }
    panning = null;
    controller.endDrag();
  });

  overlayCanvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
    controller.state.transform.zoomAt({ x: ev.offsetX, y: ev.offsetY }, factor);
    redraw();
  });

  window.addEventListener("resize", resize);
  resize();
}

main();
