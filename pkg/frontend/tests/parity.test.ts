/**
 * End-to-end parity: a scripted annotator session against the real HTTP
 * service must export polygon JSON and mask PNG byte-identical to the
 * `defgrid trace` CLI run on the same inputs, and a vertex drag that would
 * flip a cell must be rejected without changing server geometry.
 *
 * Requires the defgrid Python package to be installed (python3 importable);
 * the suite generates its fixture and spawns `defgrid serve` itself.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { DefgridClient } from "../src/api.js";
import { AnnotatorController } from "../src/controller.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const PYTHON = process.env.DEFGRID_PYTHON ?? "python3";
const PORT = 8731 + (process.pid % 100);
const BASE = `http://127.0.0.1:${PORT}`;

let fixtureDir: string;
let server: ChildProcess;

function b64(path: string): string {
  return readFileSync(path).toString("base64");
}

async function waitForServer(timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/session/none/export`);
      if (res.status === 404) return;
    } catch {
      /* not listening yet */
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  fixtureDir = mkdtempSync(join(tmpdir(), "defgrid-parity-"));
  const gen = spawnSync(
    PYTHON,
    [join(HERE, "make_parity_fixture.py"), fixtureDir],
    { encoding: "utf8" },
  );
  if (gen.status !== 0) {
    throw new Error(`fixture generation failed:\n${gen.stderr}`);
  }
  server = spawn(PYTHON, [
    "-m",
    "defgrid.cli",
    "serve",
    "--port",
    String(PORT),
  ]);
  await waitForServer();
}, 120000);

afterAll(() => {
  server?.kill();
  if (fixtureDir) rmSync(fixtureDir, { recursive: true, force: true });
});

describe("scripted session parity with the CLI", () => {
  it(
    "exports byte-identical polygon JSON and mask PNG",
    async () => {
      const client = new DefgridClient(BASE);
      const controller = new AnnotatorController(client);

      await controller.loadImage(b64(join(fixtureDir, "img.png")), 4, 4);
      await controller.runDeform(15);
      await controller.uploadMask(b64(join(fixtureDir, "mask.png")));

      const seeds: [number, number][] = JSON.parse(
        readFileSync(join(fixtureDir, "seeds.json"), "utf8"),
      );
      for (const [x, y] of seeds) controller.state.addSeed(x, y);
      await controller.traceFromSeeds();
      expect(controller.state.path).not.toBeNull();

      const exported = await controller.exportAnnotation();
      expect(exported).not.toBeNull();

      const cliPolygon = readFileSync(
        join(fixtureDir, "cli", "polygon.json"),
        "utf8",
      );
      expect(exported!.polygonJson).toBe(cliPolygon);

      const cliMask = readFileSync(join(fixtureDir, "cli", "mask.png"));
      expect(Buffer.from(exported!.maskPngBytes).equals(cliMask)).toBe(true);

      await client.deleteSession(controller.state.sessionId!);
    },
    120000,
  );

  it(
    "rejects a flipping vertex drag and leaves geometry unchanged",
    async () => {
      const client = new DefgridClient(BASE);
      const flashes: number[] = [];
      const controller = new AnnotatorController(client, (fn, ms) => {
        flashes.push(ms);
        fn();
      });
      await controller.loadImage(b64(join(fixtureDir, "img.png")), 4, 4);
      const before = JSON.parse(JSON.stringify(controller.state.grid));
      const revBefore = controller.state.revision;

      // Dragging an interior vertex across the lattice inverts a cell.
      controller.dragVertex(6, 31, 31);
      controller.endDrag();
      await controller.drainDrags();

      expect(flashes.length).toBe(1); // rejection was surfaced visibly
      expect(controller.state.grid).toEqual(before);
      expect(controller.state.revision).toBe(revBefore);

      // A small, valid drag on the same vertex is accepted.
      controller.dragVertex(6, 9.0, 9.0);
      controller.endDrag();
      await controller.drainDrags();
      expect(controller.state.revision).toBe(revBefore + 1);
      expect(controller.state.grid!.vertices[6]).toEqual([9.0, 9.0]);

      await client.deleteSession(controller.state.sessionId!);
    },
    60000,
  );
});
