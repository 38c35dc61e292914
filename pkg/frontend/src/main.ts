/** Browser bootstrap: slide picker, canvas, keyboard/mouse navigation. */

import { TileRenderer } from "./render.js";
import {
  clampViewport,
  GridLevel,
  levelHeight,
  levelWidth,
  navigate,
  NavAction,
  TileRef,
  Viewport,
} from "./viewport.js";

interface SlideMeta {
  id: string;
  levels: number;
  tile_size: number;
  level_dims: { level: number; width: number; height: number; cols: number; rows: number; tile_size: number }[];
}

function gridLevels(meta: SlideMeta): GridLevel[] {
  return meta.level_dims.map((d) => ({
    level: d.level,
    cols: d.cols,
    rows: d.rows,
    tileSize: d.tile_size,
    width: d.width,
    height: d.height,
  }));
}

async function fetchJson<T>(url: string): Promise<T> {
  const r = await fetch(url);
  if (!r.ok) throw new Error(`${url} -> ${r.status}`);
  return (await r.json()) as T;
}

async function start(): Promise<void> {
  const canvas = document.getElementById("slide") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLElement;
  const ctx = canvas.getContext("2d")!;
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight - 40;

  const slides = await fetchJson<{ id: string }[]>("/slides");
  if (slides.length === 0) {
    status.textContent = "no slides registered";
    return;
  }
  const meta = await fetchJson<SlideMeta>(`/slides/${slides[0].id}/meta`);
  const levels = gridLevels(meta);
  const coarsest = levels[levels.length - 1];

  let viewport: Viewport = clampViewport(
    {
      slideId: meta.id,
      level: coarsest.level,
      centerX: levelWidth(coarsest) / 2,
      centerY: levelHeight(coarsest) / 2,
      canvasW: canvas.width,
      canvasH: canvas.height,
    },
    levels,
  );

  const renderer = new TileRenderer<ImageBitmap>({
    fetchTile: async (url) => {
      const r = await fetch(url);
      if (!r.ok) throw new Error(`${url} -> ${r.status}`);
      return createImageBitmap(await r.blob());
    },
    urlFor: (slideId, ref: TileRef) =>
      `/slides/${slideId}/tiles/${ref.level}/${ref.col}/${ref.row}`,
    draw: (ref, img, v) => {
      const g = levels[v.level];
      const x = ref.col * g.tileSize - (v.centerX - v.canvasW / 2);
      const y = ref.row * g.tileSize - (v.centerY - v.canvasH / 2);
      ctx.drawImage(img, Math.round(x), Math.round(y));
    },
    onError: (url) => {
      status.textContent = `failed to load ${url}`;
    },
  });

  function redraw(): void {
    ctx.fillStyle = "#202020";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const g = levels[viewport.level];
    status.textContent =
      `${meta.id}  level ${viewport.level}/${levels.length - 1}  ` +
      `center (${Math.round(viewport.centerX)}, ${Math.round(viewport.centerY)})  ` +
      `${levelWidth(g)}x${levelHeight(g)} px`;
    void renderer.update(viewport, g);
  }

  function act(action: NavAction): void {
    viewport = navigate(viewport, action, levels);
    redraw();
  }

  const PAN = 64;
  window.addEventListener("keydown", (e) => {
    const actions: Record<string, NavAction> = {
      ArrowLeft: { kind: "pan", dx: -PAN, dy: 0 },
      ArrowRight: { kind: "pan", dx: PAN, dy: 0 },
      ArrowUp: { kind: "pan", dx: 0, dy: -PAN },
      ArrowDown: { kind: "pan", dx: 0, dy: PAN },
      "+": { kind: "zoom_in" },
      "=": { kind: "zoom_in" },
      "-": { kind: "zoom_out" },
    };
    const a = actions[e.key];
    if (a) {
      e.preventDefault();
      act(a);
    }
  });

  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    act({ kind: e.deltaY < 0 ? "zoom_in" : "zoom_out" });
  });

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
  window.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    act({ kind: "pan", dx: lastX - e.clientX, dy: lastY - e.clientY });
    lastX = e.clientX;
    lastY = e.clientY;
  });

  redraw();
}

start().catch((err) => {
  const status = document.getElementById("status");
  if (status) status.textContent = String(err);
});
