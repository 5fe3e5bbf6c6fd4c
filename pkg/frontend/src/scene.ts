/** Scene construction: turns API layers into renderable primitives.
 *
 * The scene is pure data (no DOM): hex prisms on the ground plane with a
 * height and color per bin, and flow arcs lifted toward the viewer. The
 * canvas renderer in app.ts draws it; the e2e suite asserts on it directly.
 * Displayed figures always come verbatim from the API payloads; geometry may
 * round, labels never do.
 */

import { ARC_SOURCE, ARC_TARGET, clamp01, css, diverging, mix, sequential } from "./color.js";
import type { BinLayer, FlowArc } from "./types.js";

const EARTH_RADIUS_M = 6378137;

export function mercator(lat: number, lon: number): { x: number; y: number } {
  const x = (EARTH_RADIUS_M * lon * Math.PI) / 180;
  const y = EARTH_RADIUS_M * Math.log(Math.tan(Math.PI / 4 + (lat * Math.PI) / 360));
  return { x, y };
}

/** 2.5D camera: ground plane compressed by cos(pitch), heights rise by
 * sin(pitch). pitch 0 is a flat top-down map; raising it reveals the prisms. */
export class Camera {
  constructor(
    public centerLat: number,
    public centerLon: number,
    public metersPerPixel: number,
    public pitchDeg: number,
    public viewportW: number,
    public viewportH: number,
  ) {}

  get pitchRad(): number {
    return (this.pitchDeg * Math.PI) / 180;
  }

  ground(lat: number, lon: number): { x: number; y: number } {
    const p = mercator(lat, lon);
    const c = mercator(this.centerLat, this.centerLon);
    const x = (p.x - c.x) / this.metersPerPixel + this.viewportW / 2;
    const y =
      this.viewportH / 2 -
      ((p.y - c.y) / this.metersPerPixel) * Math.cos(this.pitchRad);
    return { x, y };
  }

  lift(height: number): number {
    return height * Math.sin(this.pitchRad);
  }
}

/** Zoom level to hex resolution: one resolution step per zoom step, clamped
 * to the server's 0..12 range (the mapping is a client policy). */
export function zoomToResolution(zoom: number): number {
  return Math.max(0, Math.min(12, Math.round(zoom)));
}

export interface HexPrism {
  q: number;
  r: number;
  x: number;
  y: number;
  radiusPx: number;
  heightPx: number;
  color: string;
  /** Raw API value (kept verbatim, may be a big-int string). */
  value: number | string;
  tooltip: string[];
  selected: boolean;
}

export interface ArcPrimitive {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  /** control point of the quadratic arc, lifted off the ground plane */
  cx: number;
  cy: number;
  colorFrom: string;
  colorTo: string;
  opacity: number;
  widthPx: number;
  amount: number | string;
  direction: string;
}

export interface Scene {
  prisms: HexPrism[];
  arcs: ArcPrimitive[];
}

export interface SceneOptions {
  maxHeightPx: number;
  selection: { q: number; r: number } | null;
}

function magnitude(v: number | string): number {
  return typeof v === "number" ? v : Number(v);
}

function formatBreakdown(breakdown: Record<string, number> | undefined): string[] {
  if (!breakdown) return [];
  return Object.entries(breakdown)
    .sort((a, b) => b[1] - a[1])
    .map(([sector, pct]) => `${sector}: ${pct.toFixed(1)}%`);
}

/** Build prisms from one layer, or from two keyframe layers blended at
 * alpha in [0, 1] (linear interpolation per bin, endpoints exact). */
export function buildPrisms(
  layer: BinLayer,
  camera: Camera,
  options: SceneOptions,
  previous: BinLayer | null = null,
  alpha = 1,
): HexPrism[] {
  const absolute = layer.mode === "absolute";
  const valueOf = (bin: { value?: unknown; delta?: unknown }): number =>
    magnitude((absolute ? bin.value : bin.delta) as number | string);

  const prevValues = new Map<string, number>();
  if (previous) {
    for (const bin of previous.bins) {
      prevValues.set(`${bin.q}:${bin.r}`, valueOf(bin));
    }
  }
  const blended = new Map<string, number>();
  let peak = 0;
  for (const bin of layer.bins) {
    const now = valueOf(bin);
    const before = previous ? (prevValues.get(`${bin.q}:${bin.r}`) ?? 0) : now;
    const value = alpha >= 1 ? now : alpha <= 0 ? before : before + (now - before) * alpha;
    blended.set(`${bin.q}:${bin.r}`, value);
    peak = Math.max(peak, Math.abs(value));
  }

  const radiusPx = (layer.hex_edge_m / camera.metersPerPixel) * (Math.sqrt(3) / 2);
  const prisms: HexPrism[] = [];
  for (const bin of layer.bins) {
    const value = blended.get(`${bin.q}:${bin.r}`) ?? 0;
    const t = peak > 0 ? Math.abs(value) / peak : 0;
    const color = absolute
      ? css(sequential(t))
      : css(diverging(peak > 0 ? value / peak : 0));
    const { x, y } = camera.ground(bin.center_lat, bin.center_lon);
    const tooltip = absolute
      ? [
          `firms: ${bin.firm_count}`,
          `cash flow: ${bin.cash_flow_cents} cents`,
          ...formatBreakdown(bin.sector_breakdown),
        ]
      : [`change: ${bin.delta} cents`, `magnitude: ${bin.magnitude} cents`];
    prisms.push({
      q: bin.q,
      r: bin.r,
      x,
      y,
      radiusPx,
      heightPx: camera.lift(t * options.maxHeightPx),
      color,
      value: absolute ? bin.value : bin.delta,
      tooltip,
      selected: options.selection !== null &&
        options.selection.q === bin.q && options.selection.r === bin.r,
    });
  }
  // painter's order: back (small y) first so closer prisms overdraw
  prisms.sort((a, b) => a.y - b.y);
  return prisms;
}

export function buildArcs(arcs: FlowArc[], camera: Camera): ArcPrimitive[] {
  return arcs.map((arc) => {
    const from = camera.ground(arc.from.lat, arc.from.lon);
    const to = camera.ground(arc.to.lat, arc.to.lon);
    const span = Math.hypot(to.x - from.x, to.y - from.y);
    const lift = camera.lift(Math.max(40, span * 0.35));
    return {
      x1: from.x,
      y1: from.y,
      x2: to.x,
      y2: to.y,
      cx: (from.x + to.x) / 2,
      cy: (from.y + to.y) / 2 - lift,
      colorFrom: css(ARC_SOURCE),
      colorTo: css(ARC_TARGET),
      opacity: 0.25 + 0.75 * clamp01(arc.relative_weight),
      widthPx: 1 + 3 * clamp01(arc.relative_weight),
      amount: arc.amount_cents,
      direction: arc.direction,
    };
  });
}

export function buildScene(
  layer: BinLayer | null,
  arcs: FlowArc[],
  camera: Camera,
  options: SceneOptions,
  previous: BinLayer | null = null,
  alpha = 1,
): Scene {
  return {
    prisms: layer ? buildPrisms(layer, camera, options, previous, alpha) : [],
    arcs: buildArcs(arcs, camera),
  };
}

/** Hit test for hover/click: nearest prism center within its radius. */
export function pickPrism(scene: Scene, x: number, y: number): HexPrism | null {
  let best: HexPrism | null = null;
  let bestDist = Infinity;
  for (const prism of scene.prisms) {
    const d = Math.hypot(prism.x - x, prism.y - y);
    if (d <= prism.radiusPx && d < bestDist) {
      best = prism;
      bestDist = d;
    }
  }
  return best;
}

/** Legend entries for the details panel (red = outgoing, green = incoming). */
export function arcLegend(): { label: string; color: string }[] {
  return [
    { label: "transaction source (money out)", color: css(ARC_SOURCE) },
    { label: "transaction target (money in)", color: css(ARC_TARGET) },
    { label: "midpoint", color: css(mix(ARC_SOURCE, ARC_TARGET, 0.5)) },
  ];
}
