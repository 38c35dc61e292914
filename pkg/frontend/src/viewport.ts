/**
 * Viewport math: which tiles intersect the view, and how pan/zoom move it.
 * Pure functions so the tile selection is unit-testable without a browser.
 */

export interface GridLevel {
  level: number;
  cols: number;
  rows: number;
  tileSize: number;
  /** pixel dimensions; default cols*tileSize x rows*tileSize */
  width?: number;
  height?: number;
}

export interface Viewport {
  slideId: string;
  /** pyramid level; 0 is finest */
  level: number;
  /** view center in level-pixel coordinates */
  centerX: number;
  centerY: number;
  /** canvas size in screen pixels (1 screen px == 1 level px) */
  canvasW: number;
  canvasH: number;
}

export interface TileRef {
  level: number;
  col: number;
  row: number;
}

export type NavAction =
  | { kind: "pan"; dx: number; dy: number }
  | { kind: "zoom_in" }
  | { kind: "zoom_out" };

export function levelWidth(g: GridLevel): number {
  return g.width ?? g.cols * g.tileSize;
}

export function levelHeight(g: GridLevel): number {
  return g.height ?? g.rows * g.tileSize;
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

export function clampViewport(v: Viewport, levels: GridLevel[]): Viewport {
  const level = clamp(v.level, 0, levels.length - 1);
  const g = levels[level];
  return {
    ...v,
    level,
    centerX: clamp(v.centerX, 0, levelWidth(g)),
    centerY: clamp(v.centerY, 0, levelHeight(g)),
  };
}

/**
 * Exactly the tiles whose pixel rectangles intersect the viewport
 * rectangle [cx - w/2, cx + w/2) x [cy - h/2, cy + h/2), clamped to the
 * grid, each listed once in row-major order.
 */
export function computeVisibleTiles(
  v: Viewport,
  tileSize: number,
  grid: { cols: number; rows: number },
): TileRef[] {
  const left = v.centerX - v.canvasW / 2;
  const right = v.centerX + v.canvasW / 2;
  const top = v.centerY - v.canvasH / 2;
  const bottom = v.centerY + v.canvasH / 2;
  const c0 = Math.max(0, Math.floor(left / tileSize));
  const c1 = Math.min(grid.cols - 1, Math.ceil(right / tileSize) - 1);
  const r0 = Math.max(0, Math.floor(top / tileSize));
  const r1 = Math.min(grid.rows - 1, Math.ceil(bottom / tileSize) - 1);
  const out: TileRef[] = [];
  for (let row = r0; row <= r1; row++) {
    for (let col = c0; col <= c1; col++) {
      out.push({ level: v.level, col, row });
    }
  }
  return out;
}

/**
 * Pan translates the center in level pixels; zoom_in moves one level finer
 * and doubles the center coordinates, zoom_out the inverse.  Results are
 * always clamped to the slide bounds; zooming past the level range leaves
 * the viewport unchanged.
 */
export function navigate(v: Viewport, action: NavAction, levels: GridLevel[]): Viewport {
  switch (action.kind) {
    case "pan":
      return clampViewport(
        { ...v, centerX: v.centerX + action.dx, centerY: v.centerY + action.dy },
        levels,
      );
    case "zoom_in": {
      if (v.level <= 0) return clampViewport(v, levels);
      return clampViewport(
        { ...v, level: v.level - 1, centerX: v.centerX * 2, centerY: v.centerY * 2 },
        levels,
      );
    }
    case "zoom_out": {
      if (v.level >= levels.length - 1) return clampViewport(v, levels);
      return clampViewport(
        { ...v, level: v.level + 1, centerX: v.centerX / 2, centerY: v.centerY / 2 },
        levels,
      );
    }
  }
}
