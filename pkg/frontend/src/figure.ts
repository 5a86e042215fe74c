/** Cost-vs-MSE figure rendering.
 *
 * A figure spec names a sweep CSV, the variants to overlay, and an output
 * path; `render` draws one log-log scatter series per variant with an
 * optional least-squares line, annotating each fitted slope.  Slopes are
 * always re-fitted from the raw points; when a rates CSV is supplied it is
 * only cross-checked, so a stale file triggers a warning instead of a wrong
 * annotation.
 *
 * Rendering is a pure function of the CSV bytes and the spec: re-rendering
 * writes a byte-identical SVG.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { resolve } from "node:path";

import { parseCsv, ratesSlopes, sweepSeries, SweepPoint } from "./csv.js";
import { NonPositive } from "./errors.js";
import { fitRate, RateFit } from "./fit.js";
import {
  escapeXml,
  fmt,
  FONT_FAMILY,
  HEIGHT,
  logAxis,
  MARGIN,
  marker,
  PALETTE,
  WIDTH,
} from "./svg.js";

export interface FigureSpec {
  sweepCsv: string;
  ratesCsv?: string;
  variants: string[];
  fitLines: boolean;
  output: string;
  title?: string;
}

const SPEC_KEYS = ["sweep_csv", "rates_csv", "variants", "fit_lines",
                   "output", "title"];

/** Validate a decoded spec object; relative paths resolve against baseDir. */
export function parseSpec(data: unknown, baseDir = "."): FigureSpec {
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new Error("figure spec must be a JSON object");
  }
  const obj = data as Record<string, unknown>;
  const unknown = Object.keys(obj).filter((k) => !SPEC_KEYS.includes(k));
  if (unknown.length > 0) {
    throw new Error(`unknown keys in figure spec: ${unknown.join(", ")} ` +
                    `(expected ${SPEC_KEYS.join(", ")})`);
  }
  for (const key of ["sweep_csv", "output"]) {
    if (typeof obj[key] !== "string" || obj[key] === "") {
      throw new Error(`figure spec needs a non-empty string "${key}"`);
    }
  }
  const variants = obj.variants;
  if (!Array.isArray(variants) || variants.length === 0 ||
      !variants.every((v) => typeof v === "string")) {
    throw new Error('figure spec needs a non-empty string array "variants"');
  }
  if (new Set(variants).size !== variants.length) {
    throw new Error('figure spec "variants" contains duplicates');
  }
  if ("fit_lines" in obj && typeof obj.fit_lines !== "boolean") {
    throw new Error('figure spec "fit_lines" must be a boolean');
  }
  if ("title" in obj && typeof obj.title !== "string") {
    throw new Error('figure spec "title" must be a string');
  }
  if ("rates_csv" in obj && (typeof obj.rates_csv !== "string" ||
                             obj.rates_csv === "")) {
    throw new Error('figure spec "rates_csv" must be a non-empty string');
  }
  return {
    sweepCsv: resolve(baseDir, obj.sweep_csv as string),
    ratesCsv: "rates_csv" in obj
      ? resolve(baseDir, obj.rates_csv as string)
      : undefined,
    variants: [...(variants as string[])],
    fitLines: "fit_lines" in obj ? (obj.fit_lines as boolean) : true,
    output: resolve(baseDir, obj.output as string),
    title: "title" in obj ? (obj.title as string) : undefined,
  };
}

export interface RenderResult {
  svg: string;
  fits: Map<string, RateFit>;
  warnings: string[];
}

/** Difference between a re-fitted slope and the rates CSV that is reported. */
export const SLOPE_WARN_TOL = 1e-6;

/** Pure renderer: CSV text in, SVG text out.  No file system access. */
export function renderString(
  spec: FigureSpec,
  sweepText: string,
  ratesText?: string,
): RenderResult {
  const table = parseCsv(sweepText, spec.sweepCsv);
  const series = sweepSeries(table, spec.variants, spec.sweepCsv);
  for (const [variant, pts] of series) {
    for (const p of pts) {
      if (p.mse <= 0 || p.cost <= 0) {
        throw new NonPositive(`variant "${variant}": log axes need strictly ` +
                              `positive data, got (${p.mse}, ${p.cost})`);
      }
    }
  }
  const fits = new Map<string, RateFit>();
  for (const [variant, pts] of series) {
    fits.set(variant, fitRate(pts.map((p) => [p.mse, p.cost] as const)));
  }

  const warnings: string[] = [];
  if (ratesText !== undefined) {
    const path = spec.ratesCsv ?? "<rates csv>";
    const listed = ratesSlopes(parseCsv(ratesText, path), path);
    for (const [variant, fit] of fits) {
      const slope = listed.get(variant);
      if (slope === undefined) {
        warnings.push(`rates file ${path} has no row for variant "${variant}"`);
      } else if (Math.abs(slope - fit.slope) > SLOPE_WARN_TOL) {
        warnings.push(`rates file ${path} lists slope ${slope} for ` +
                      `"${variant}" but the raw points refit to ${fit.slope}; ` +
                      `the rates file may be stale`);
      }
    }
  }

  return { svg: assemble(spec, series, fits), fits, warnings };
}

/** Render from the file system and write the SVG (only on full success). */
export function render(spec: FigureSpec): RenderResult {
  if (!spec.output.endsWith(".svg")) {
    throw new Error(`output must be an .svg path, got "${spec.output}": ` +
                    "vector output is required so re-renders stay byte-identical");
  }
  const sweepText = readFileSync(spec.sweepCsv, "utf8");
  const ratesText = spec.ratesCsv === undefined
    ? undefined
    : readFileSync(spec.ratesCsv, "utf8");
  const result = renderString(spec, sweepText, ratesText);
  writeFileSync(spec.output, result.svg);
  return result;
}

function assemble(
  spec: FigureSpec,
  series: Map<string, SweepPoint[]>,
  fits: Map<string, RateFit>,
): string {
  const left = MARGIN.left;
  const right = WIDTH - MARGIN.right;
  const top = MARGIN.top;
  const bottom = HEIGHT - MARGIN.bottom;
  const allPts = [...series.values()].flat();
  const x = logAxis(allPts.map((p) => p.mse), left, right);
  const y = logAxis(allPts.map((p) => p.cost), bottom, top);

  const out: string[] = [];
  out.push('<?xml version="1.0" encoding="UTF-8"?>');
  out.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
           `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`);
  out.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  out.push(`<g font-family="${FONT_FAMILY}" font-size="12" fill="#222222">`);
  if (spec.title !== undefined) {
    out.push(`<text x="${WIDTH / 2}" y="24" text-anchor="middle" ` +
             `font-size="14">${escapeXml(spec.title)}</text>`);
  }

  out.push('<g class="grid" stroke="#dddddd">');
  for (const t of x.ticks) {
    const px = fmt(x.toPx(t));
    out.push(`<line x1="${px}" y1="${top}" x2="${px}" y2="${bottom}"/>`);
  }
  for (const t of y.ticks) {
    const py = fmt(y.toPx(t));
    out.push(`<line x1="${left}" y1="${py}" x2="${right}" y2="${py}"/>`);
  }
  out.push("</g>");

  out.push('<g class="axes" stroke="#222222">');
  out.push(`<line x1="${left}" y1="${bottom}" x2="${right}" y2="${bottom}"/>`);
  out.push(`<line x1="${left}" y1="${top}" x2="${left}" y2="${bottom}"/>`);
  for (const t of x.ticks) {
    const px = fmt(x.toPx(t));
    out.push(`<line x1="${px}" y1="${bottom}" x2="${px}" y2="${bottom + 5}"/>`);
  }
  for (const t of y.ticks) {
    const py = fmt(y.toPx(t));
    out.push(`<line x1="${left - 5}" y1="${py}" x2="${left}" y2="${py}"/>`);
  }
  out.push("</g>");

  for (const t of x.ticks) {
    out.push(`<text x="${fmt(x.toPx(t))}" y="${bottom + 18}" ` +
             `text-anchor="middle">${x.tickLabel(t)}</text>`);
  }
  for (const t of y.ticks) {
    out.push(`<text x="${left - 8}" y="${fmt(y.toPx(t) + 4)}" ` +
             `text-anchor="end">${y.tickLabel(t)}</text>`);
  }
  out.push(`<text x="${(left + right) / 2}" y="${HEIGHT - 14}" ` +
           'text-anchor="middle">MSE</text>');
  out.push(`<text transform="translate(18 ${(top + bottom) / 2}) rotate(-90)" ` +
           'text-anchor="middle">cost</text>');

  let index = 0;
  for (const [variant, pts] of series) {
    const fit = fits.get(variant)!;
    const color = PALETTE[index % PALETTE.length];
    out.push(`<g class="series" data-variant="${escapeXml(variant)}" ` +
             `data-slope="${fit.slope}" data-intercept="${fit.intercept}" ` +
             `data-r2="${fit.r2}" data-n="${fit.nPoints}">`);
    if (spec.fitLines) {
      let lo = Infinity;
      let hi = -Infinity;
      for (const p of pts) {
        if (p.mse < lo) lo = p.mse;
        if (p.mse > hi) hi = p.mse;
      }
      const yAt = (v: number) =>
        y.toPx(Math.exp(fit.intercept + fit.slope * Math.log(v)));
      out.push(`<path class="fit" d="M ${fmt(x.toPx(lo))} ${fmt(yAt(lo))} ` +
               `L ${fmt(x.toPx(hi))} ${fmt(yAt(hi))}" stroke="${color}" ` +
               'stroke-dasharray="6 4" stroke-width="1.5" fill="none"/>');
    }
    for (const p of pts) {
      out.push(marker(index, x.toPx(p.mse), y.toPx(p.cost), color));
    }
    out.push("</g>");
    index += 1;
  }

  index = 0;
  const legendX = right - 248;
  for (const [variant, fit] of fits) {
    const rowY = top + 12 + index * 18;
    out.push('<g class="legend-entry">');
    out.push(marker(index, legendX + 8, rowY, PALETTE[index % PALETTE.length]));
    out.push(`<text x="${legendX + 20}" y="${fmt(rowY + 4)}">` +
             `${escapeXml(variant)}  slope ${fit.slope.toFixed(7)}</text>`);
    out.push("</g>");
    index += 1;
  }

  out.push("</g>");
  out.push("</svg>");
  return out.join("\n") + "\n";
}
