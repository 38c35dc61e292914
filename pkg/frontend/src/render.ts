/**
 * Render loop: fetch exactly the visible tiles that are neither cached nor
 * already in flight, draw as responses arrive, and drop (but still cache)
 * responses whose tile scrolled out of view meanwhile.
 */

import { TileCache } from "./cache.js";
import { computeVisibleTiles, GridLevel, TileRef, Viewport } from "./viewport.js";

export interface RendererOptions<Img> {
  fetchTile: (url: string) => Promise<Img>;
  /** draw one tile image at its viewport position */
  draw: (ref: TileRef, img: Img, viewport: Viewport) => void;
  urlFor: (slideId: string, ref: TileRef) => string;
  cacheCapacity?: number;
  onError?: (url: string, err: unknown) => void;
}

export class TileRenderer<Img> {
  readonly cache: TileCache<Img>;
  private inflight = new Set<string>();
  private viewport: Viewport | null = null;
  /** total network requests issued (for tests and debugging) */
  fetchCount = 0;

  constructor(private opts: RendererOptions<Img>) {
    this.cache = new TileCache<Img>(opts.cacheCapacity ?? 512);
  }

  visible(): TileRef[] {
    if (!this.viewport || !this.grid) return [];
    return computeVisibleTiles(this.viewport, this.grid.tileSize, this.grid);
  }

  private grid: GridLevel | null = null;

  /** Recompute visible tiles for a new viewport; returns a promise that
   * settles when every fetch started by this update has settled. */
  update(viewport: Viewport, grid: GridLevel): Promise<void> {
    this.viewport = viewport;
    this.grid = grid;
    const needed = computeVisibleTiles(viewport, grid.tileSize, grid);
    const pending: Promise<void>[] = [];
    for (const ref of needed) {
      const url = this.opts.urlFor(viewport.slideId, ref);
      const cached = this.cache.get(url);
      if (cached !== undefined) {
        this.opts.draw(ref, cached, viewport);
        continue;
      }
      if (this.inflight.has(url)) continue;
      this.inflight.add(url);
      this.fetchCount += 1;
      pending.push(
        this.opts
          .fetchTile(url)
          .then((img) => {
            this.cache.set(url, img);
            this.drawIfVisible(ref, img);
          })
          .catch((err) => this.opts.onError?.(url, err))
          .finally(() => this.inflight.delete(url)),
      );
    }
    return Promise.all(pending).then(() => undefined);
  }

  private drawIfVisible(ref: TileRef, img: Img): void {
    if (!this.viewport || !this.grid) return;
    if (this.viewport.level !== ref.level) return; // stale: level changed
    const visible = computeVisibleTiles(this.viewport, this.grid.tileSize, this.grid);
    if (visible.some((t) => t.col === ref.col && t.row === ref.row)) {
      this.opts.draw(ref, img, this.viewport);
    }
  }
}
