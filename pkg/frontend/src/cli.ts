/** `plots <spec.json>` — render a cost-vs-MSE figure from benchmark CSVs.
 *
 * The spec file is a JSON object: `sweep_csv`, `variants`, `output`
 * (required), `rates_csv`, `fit_lines`, `title` (optional).  Relative paths
 * resolve against the spec file's directory.
 *
 * Exit codes: 0 success, 1 usage or spec errors, 2 rendering errors.
 */

import { readFileSync } from "node:fs";
import { dirname } from "node:path";

import { parseSpec, render } from "./figure.js";

const USAGE = "usage: plots <spec.json>";

export function main(argv: string[]): number {
  if (argv.includes("-h") || argv.includes("--help")) {
    console.log(USAGE);
    return 0;
  }
  if (argv.length !== 1) {
    console.error(USAGE);
    return 1;
  }
  const specPath = argv[0];
  let spec;
  try {
    let decoded: unknown;
    try {
      decoded = JSON.parse(readFileSync(specPath, "utf8"));
    } catch (e) {
      throw new Error(`cannot load spec ${specPath}: ${(e as Error).message}`);
    }
    spec = parseSpec(decoded, dirname(specPath));
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }
  try {
    const result = render(spec);
    for (const warning of result.warnings) {
      console.warn(`warning: ${warning}`);
    }
    for (const [variant, fit] of result.fits) {
      console.log(`${variant}: slope ${fit.slope.toFixed(7)} ` +
                  `(r2 ${fit.r2.toFixed(4)}, ${fit.nPoints} points)`);
    }
    console.log(`wrote ${spec.output}`);
    return 0;
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    return 2;
  }
}
