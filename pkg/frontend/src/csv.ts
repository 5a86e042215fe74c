/** Strict reader for the benchmark CSV outputs.
 *
 * The harness writes plain comma-separated tables: no quoting, no escaped
 * separators, floats via Python's repr().  The reader enforces that shape
 * rather than accommodating departures from it, so corrupt or foreign files
 * fail loudly instead of plotting garbage.
 */

import { EmptySeries, MissingColumn } from "./errors.js";

export interface Table {
  columns: string[];
  rows: string[][];
}

export function parseCsv(text: string, path = "<csv>"): Table {
  if (text.trim() === "") {
    throw new EmptySeries(`${path} is empty`);
  }
  const lines = text.split("\n");
  if (lines[lines.length - 1] === "") {
    lines.pop();
  }
  const columns = lines[0].split(",");
  const rows: string[][] = [];
  for (let i = 1; i < lines.length; i++) {
    const fields = lines[i].split(",");
    if (fields.length !== columns.length) {
      throw new Error(`${path} line ${i + 1}: expected ${columns.length} ` +
                      `fields, got ${fields.length}`);
    }
    rows.push(fields);
  }
  return { columns, rows };
}

export function columnIndex(table: Table, name: string, path?: string): number {
  const i = table.columns.indexOf(name);
  if (i < 0) {
    throw new MissingColumn(name, path);
  }
  return i;
}

export function numberAt(row: string[], index: number, context: string): number {
  const v = Number(row[index]);
  if (!Number.isFinite(v)) {
    throw new Error(`${context}: "${row[index]}" is not a finite number`);
  }
  return v;
}

export interface SweepPoint {
  mse: number;
  cost: number;
}

/** Per-variant (mse, cost_paper) series, in CSV row order. */
export function sweepSeries(
  table: Table,
  variants: readonly string[],
  path = "<csv>",
): Map<string, SweepPoint[]> {
  const iVariant = columnIndex(table, "variant", path);
  const iMse = columnIndex(table, "mse", path);
  const iCost = columnIndex(table, "cost_paper", path);
  const series = new Map<string, SweepPoint[]>(
    variants.map((v) => [v, []]),
  );
  table.rows.forEach((row, r) => {
    const pts = series.get(row[iVariant]);
    if (pts !== undefined) {
      const where = `${path} line ${r + 2}`;
      pts.push({
        mse: numberAt(row, iMse, where),
        cost: numberAt(row, iCost, where),
      });
    }
  });
  for (const [variant, pts] of series) {
    if (pts.length === 0) {
      throw new EmptySeries(`variant "${variant}" has no rows in ${path}`);
    }
  }
  return series;
}

/** variant -> fitted slope from a rates CSV (`variant,slope,...`). */
export function ratesSlopes(table: Table, path = "<csv>"): Map<string, number> {
  const iVariant = columnIndex(table, "variant", path);
  const iSlope = columnIndex(table, "slope", path);
  const slopes = new Map<string, number>();
  table.rows.forEach((row, r) => {
    slopes.set(row[iVariant],
               numberAt(row, iSlope, `${path} line ${r + 2}`));
  });
  return slopes;
}
