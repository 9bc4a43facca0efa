import { describe, expect, it } from "vitest";

import type { GridPayload } from "../src/api.js";
import { ViewState } from "../src/state.js";

function grid(tag: number): GridPayload {
  return {
    rows: 1,
    cols: 1,
    width: 10,
    height: 10,
    variant: "alternating",
    vertices: [
      [0, 0],
      [10, tag],
      [0, 10],
      [10, 10],
    ],
    cells: [
      [0, 1, 3],
      [0, 3, 2],
    ],
  };
}

describe("ViewState revisions", () => {
  it("applies newer grids and reports success", () => {
    const s = new ViewState();
    s.startSession("abc", 0, grid(0));
    expect(s.applyGrid(1, grid(1))).toBe(true);
    expect(s.revision).toBe(1);
    expect(s.grid).toEqual(grid(1));
  });

  it("discards stale grid responses unchanged", () => {
    const s = new ViewState();
    s.startSession("abc", 0, grid(0));
    s.applyGrid(5, grid(5));
    expect(s.applyGrid(3, grid(3))).toBe(false);
    expect(s.revision).toBe(5);
    expect(s.grid).toEqual(grid(5));
  });

  it("discards stale traced paths", () => {
    const s = new ViewState();
    s.startSession("abc", 4, grid(4));
    const ok = s.applyPath(2, {
      polygon: [[0, 0]],
      vertexIndices: [0],
      energy: 1,
    });
    expect(ok).toBe(false);
    expect(s.path).toBeNull();
  });

  it("starting a session resets annotation state", () => {
    const s = new ViewState();
    s.startSession("one", 0, grid(0));
    s.addSeed(1, 1);
    s.addScribble([
      [0, 0],
      [2, 2],
    ]);
    s.lossTail = [3, 2, 1];
    s.startSession("two", 0, grid(0));
    expect(s.pendingSeeds).toEqual([]);
    expect(s.scribbles).toEqual([]);
    expect(s.lossTail).toEqual([]);
    expect(s.path).toBeNull();
  });

  it("toggles layers independently", () => {
    const s = new ViewState();
    s.toggleLayer("grid");
    expect(s.layers.grid).toBe(false);
    expect(s.layers.image).toBe(true);
    s.toggleLayer("grid");
    expect(s.layers.grid).toBe(true);
  });

  it("ignores degenerate one-point scribbles", () => {
    const s = new ViewState();
    s.addScribble([[1, 1]]);
    expect(s.scribbles).toEqual([]);
  });
});
