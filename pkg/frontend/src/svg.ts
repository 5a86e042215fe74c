/** Deterministic SVG helpers.
 *
 * Layout constants, number formatting, and element order are all fixed, and
 * nothing here reads the clock, the environment, or a random source, so
 * equal inputs always assemble byte-equal documents.
 */

export const WIDTH = 640;
export const HEIGHT = 440;
export const MARGIN = { left: 72, right: 24, top: 40, bottom: 56 } as const;

/** Okabe-Ito colors: distinguishable in print and for color-blind readers. */
export const PALETTE = [
  "#0072b2", "#d55e00", "#009e73", "#cc79a7", "#e69f00", "#56b4e9",
] as const;

export const FONT_FAMILY = "DejaVu Sans Mono, Menlo, Consolas, monospace";

/** Pixel coordinate: two fixed decimals, normalized so -0.00 never appears. */
export function fmt(v: number): string {
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface LogAxis {
  toPx(v: number): number;
  /** Tick positions in data units (powers of ten when the span allows). */
  ticks: number[];
  tickLabel(v: number): string;
}

/**
 * Log10 mapping from positive data values onto [pxA, pxB] (pxA may exceed
 * pxB for a y axis).  The domain is the data extent padded by 4% of the log
 * span on each side.
 */
export function logAxis(values: readonly number[], pxA: number, pxB: number): LogAxis {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const logLo = Math.log10(lo);
  const logHi = Math.log10(hi);
  const pad = 0.04 * (logHi - logLo || 1);
  const a = logLo - pad;
  const b = logHi + pad;
  const toPx = (v: number) => pxA + ((Math.log10(v) - a) / (b - a)) * (pxB - pxA);

  const ticks: number[] = [];
  for (let k = Math.ceil(a); k <= Math.floor(b); k++) {
    ticks.push(10 ** k);
  }
  const decades = ticks.length > 0;
  if (!decades) {
    ticks.push(lo, hi);
  }
  const tickLabel = (v: number) =>
    decades ? `1e${Math.round(Math.log10(v))}` : v.toExponential(1);
  return { toPx, ticks, tickLabel };
}

/** Series marker (shape cycles with the series index) centered at (x, y). */
export function marker(index: number, x: number, y: number, color: string): string {
  const X = fmt(x);
  const Y = fmt(y);
  switch (index % 4) {
    case 0:
      return `<circle cx="${X}" cy="${Y}" r="4" fill="${color}"/>`;
    case 1:
      return `<rect x="${fmt(x - 3.5)}" y="${fmt(y - 3.5)}" width="7" height="7" fill="${color}"/>`;
    case 2:
      return `<path d="M ${X} ${fmt(y - 5)} L ${fmt(x + 5)} ${Y} ` +
             `L ${X} ${fmt(y + 5)} L ${fmt(x - 5)} ${Y} Z" fill="${color}"/>`;
    default:
      return `<path d="M ${X} ${fmt(y - 4.5)} L ${fmt(x + 4.5)} ${fmt(y + 3.5)} ` +
             `L ${fmt(x - 4.5)} ${fmt(y + 3.5)} Z" fill="${color}"/>`;
  }
}
