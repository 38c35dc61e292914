import { describe, expect, it } from "vitest";

import {
  clampViewport,
  computeVisibleTiles,
  GridLevel,
  navigate,
  Viewport,
} from "../src/viewport.js";

const levels: GridLevel[] = [
  { level: 0, cols: 8, rows: 8, tileSize: 256 },
  { level: 1, cols: 4, rows: 4, tileSize: 256 },
  { level: 2, cols: 2, rows: 2, tileSize: 256 },
];

function vp(partial: Partial<Viewport>): Viewport {
  return {
    slideId: "s",
    level: 0,
    centerX: 1024,
    centerY: 1024,
    canvasW: 512,
    canvasH: 512,
    ...partial,
  };
}

describe("computeVisibleTiles", () => {
  it("returns 4 tiles for a 512px canvas centered on a tile corner", () => {
    const tiles = computeVisibleTiles(vp({ centerX: 512, centerY: 512 }), 256, levels[0]);
    expect(tiles).toEqual([
      { level: 0, col: 1, row: 1 },
      { level: 0, col: 2, row: 1 },
      { level: 0, col: 1, row: 2 },
      { level: 0, col: 2, row: 2 },
    ]);
  });

  it("returns 1 tile for a sub-tile viewport centered inside a tile", () => {
    const tiles = computeVisibleTiles(
      vp({ centerX: 128, centerY: 128, canvasW: 100, canvasH: 100 }),
      256,
      levels[0],
    );
    expect(tiles).toEqual([{ level: 0, col: 0, row: 0 }]);
  });

  it("never emits out-of-grid coordinates at the slide corner", () => {
    const tiles = computeVisibleTiles(vp({ centerX: 0, centerY: 0 }), 256, levels[0]);
    expect(tiles).toEqual([
      { level: 0, col: 0, row: 0 },
      { level: 0, col: 1, row: 0 },
      { level: 0, col: 0, row: 1 },
      { level: 0, col: 1, row: 1 },
    ]);
    const farCorner = computeVisibleTiles(
      vp({ centerX: 8 * 256, centerY: 8 * 256 }),
      256,
      levels[0],
    );
    for (const t of farCorner) {
      expect(t.col).toBeGreaterThanOrEqual(0);
      expect(t.col).toBeLessThan(8);
      expect(t.row).toBeGreaterThanOrEqual(0);
      expect(t.row).toBeLessThan(8);
    }
  });

  it("lists each tile once, row-major", () => {
    const tiles = computeVisibleTiles(vp({ centerX: 640, centerY: 640 }), 256, levels[0]);
    const keys = tiles.map((t) => `${t.col},${t.row}`);
    expect(new Set(keys).size).toBe(keys.length);
    const sorted = [...tiles].sort((a, b) => a.row - b.row || a.col - b.col);
    expect(tiles).toEqual(sorted);
  });
});

describe("navigate", () => {
  it("pan translates and clamps to bounds", () => {
    const v = navigate(vp({}), { kind: "pan", dx: -100, dy: 50 }, levels);
    expect(v.centerX).toBe(924);
    expect(v.centerY).toBe(1074);
    const clamped = navigate(vp({ centerX: 10, centerY: 10 }),
      { kind: "pan", dx: -500, dy: -500 }, levels);
    expect(clamped.centerX).toBe(0);
    expect(clamped.centerY).toBe(0);
    const far = navigate(vp({}), { kind: "pan", dx: 1e9, dy: 1e9 }, levels);
    expect(far.centerX).toBe(8 * 256);
    expect(far.centerY).toBe(8 * 256);
  });

  it("zoom_in then zoom_out is the identity when unclamped", () => {
    const start = vp({ level: 1, centerX: 300, centerY: 400 });
    const back = navigate(navigate(start, { kind: "zoom_in" }, levels),
      { kind: "zoom_out" }, levels);
    expect(back).toEqual(start);
  });

  it("zoom_out at the coarsest level leaves the level unchanged", () => {
    const start = vp({ level: 2, centerX: 100, centerY: 100 });
    const v = navigate(start, { kind: "zoom_out" }, levels);
    expect(v.level).toBe(2);
    expect(v.centerX).toBe(100);
  });

  it("zoom_in at the finest level leaves the viewport unchanged", () => {
    const start = vp({ level: 0 });
    expect(navigate(start, { kind: "zoom_in" }, levels)).toEqual(start);
  });

  it("zoom doubles and halves center coordinates", () => {
    const v = navigate(vp({ level: 1, centerX: 200, centerY: 150 }),
      { kind: "zoom_in" }, levels);
    expect(v.level).toBe(0);
    expect(v.centerX).toBe(400);
    expect(v.centerY).toBe(300);
  });
});

describe("clampViewport", () => {
  it("clamps level and center", () => {
    const v = clampViewport(vp({ level: 9, centerX: 1e6, centerY: -5 }), levels);
    expect(v.level).toBe(2);
    expect(v.centerX).toBe(2 * 256);
    expect(v.centerY).toBe(0);
  });
});
