/** Color ramps. Absolute values use a single-hue sequential blue ramp;
 * year-over-year deltas use a diverging blue-white-red ramp (blue = decrease,
 * red = increase). Flow arcs fade red (money leaving the source) to green
 * (money arriving at the target), with saturation/opacity from the arc's
 * relative weight. */

export type Rgb = [number, number, number];

const SEQUENTIAL_LO: Rgb = [239, 243, 255];
const SEQUENTIAL_HI: Rgb = [8, 81, 156];
const DIVERGING_NEG: Rgb = [33, 102, 172]; // blue: decrease
const DIVERGING_MID: Rgb = [247, 247, 247];
const DIVERGING_POS: Rgb = [178, 24, 43]; // red: increase
export const ARC_SOURCE: Rgb = [215, 48, 39]; // red near the transaction source
export const ARC_TARGET: Rgb = [26, 152, 80]; // green near the target

export function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

export function mix(a: Rgb, b: Rgb, t: number): Rgb {
  return [
    Math.round(lerp(a[0], b[0], t)),
    Math.round(lerp(a[1], b[1], t)),
    Math.round(lerp(a[2], b[2], t)),
  ];
}

export function css(color: Rgb, alpha = 1): string {
  return alpha >= 1
    ? `rgb(${color[0]},${color[1]},${color[2]})`
    : `rgba(${color[0]},${color[1]},${color[2]},${alpha.toFixed(3)})`;
}

/** t in [0, 1] relative to the layer maximum. */
export function sequential(t: number): Rgb {
  return mix(SEQUENTIAL_LO, SEQUENTIAL_HI, clamp01(t));
}

/** t in [-1, 1]: sign of the change maps blue (decrease) to red (increase). */
export function diverging(t: number): Rgb {
  const c = Math.max(-1, Math.min(1, t));
  return c < 0 ? mix(DIVERGING_MID, DIVERGING_NEG, -c) : mix(DIVERGING_MID, DIVERGING_POS, c);
}

export function clamp01(t: number): number {
  return Math.max(0, Math.min(1, t));
}
