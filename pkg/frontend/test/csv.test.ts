import { readFileSync } from "node:fs";

import { describe, expect, it } from "vitest";

import {
  columnIndex,
  numberAt,
  parseCsv,
  ratesSlopes,
  sweepSeries,
} from "../src/csv.js";
import { EmptySeries, MissingColumn } from "../src/errors.js";

const sweepText = readFileSync(
  new URL("./fixtures/headline_sweep.csv", import.meta.url), "utf8");
const ratesText = readFileSync(
  new URL("./fixtures/headline_rates.csv", import.meta.url), "utf8");

describe("parseCsv", () => {
  it("reads the sweep schema", () => {
    const table = parseCsv(sweepText);
    expect(table.columns).toEqual([
      "variant", "dx", "dy", "T", "eps", "level", "L", "N_total",
      "cost_paper", "cost_actual", "mse", "stderr", "reps", "seed", "wall_ms",
    ]);
    expect(table.rows.length).toBe(15);
    expect(table.rows[0][0]).toBe("EnKBF");
  });

  it("rejects empty input", () => {
    expect(() => parseCsv("", "x.csv")).toThrow(EmptySeries);
    expect(() => parseCsv("\n", "x.csv")).toThrow(EmptySeries);
  });

  it("accepts a header-only file as zero rows", () => {
    expect(parseCsv("a,b\n").rows).toEqual([]);
  });

  it("rejects ragged rows with the line number", () => {
    expect(() => parseCsv("a,b\n1,2\n3\n", "bad.csv"))
      .toThrow(/bad\.csv line 3: expected 2 fields, got 1/);
  });
});

describe("column access", () => {
  it("finds columns by name and rejects unknown ones", () => {
    const table = parseCsv(sweepText, "sweep.csv");
    expect(columnIndex(table, "mse")).toBe(10);
    expect(() => columnIndex(table, "msa", "sweep.csv"))
      .toThrow(MissingColumn);
    expect(() => columnIndex(table, "msa", "sweep.csv")).toThrow(/"msa"/);
  });

  it("parses repr() floats exactly and rejects junk", () => {
    const table = parseCsv(sweepText);
    const i = columnIndex(table, "mse");
    expect(numberAt(table.rows[0], i, "r0")).toBe(0.0354504496851521);
    expect(() => numberAt(["x"], 0, "ctx")).toThrow(/not a finite number/);
  });
});

describe("sweepSeries", () => {
  it("splits rows by variant in file order", () => {
    const series = sweepSeries(parseCsv(sweepText), ["EnKBF", "MLEnKBF"]);
    expect([...series.keys()]).toEqual(["EnKBF", "MLEnKBF"]);
    const en = series.get("EnKBF")!;
    expect(en.length).toBe(5);
    expect(en[0].cost).toBe(2560.0);
    expect(en.map((p) => p.mse)).toEqual(
      [...en.map((p) => p.mse)].sort((a, b) => b - a)); // eps shrinks down the file
  });

  it("raises EmptySeries for a variant with no rows", () => {
    expect(() => sweepSeries(parseCsv(sweepText), ["DEnKBF"], "s.csv"))
      .toThrow(EmptySeries);
    expect(() => sweepSeries(parseCsv(sweepText), ["DEnKBF"], "s.csv"))
      .toThrow(/"DEnKBF"/);
  });

  it("raises MissingColumn when the schema does not match", () => {
    const table = parseCsv("variant,mse\nEnKBF,0.5\n");
    expect(() => sweepSeries(table, ["EnKBF"])).toThrow(MissingColumn);
  });
});

describe("ratesSlopes", () => {
  it("maps variants to their fitted slopes", () => {
    const slopes = ratesSlopes(parseCsv(ratesText));
    expect(slopes.get("EnKBF")).toBe(-1.5078886242311935);
    expect(slopes.get("MLEnKBF")).toBe(-1.1542711051810572);
    expect(slopes.get("MLDEnKBF")).toBe(-1.211257806588483);
  });
});
