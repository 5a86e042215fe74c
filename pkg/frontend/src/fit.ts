/** Least-squares slope of ln y against ln x.
 *
 * This mirrors the benchmark harness's fit exactly (ordinary least squares
 * on the log points; a constant series fits slope 0 with r2 = 1), so slopes
 * annotated on figures can be cross-checked against the harness's rates CSV.
 */

import { NonPositive, TooFewPoints } from "./errors.js";

export interface RateFit {
  slope: number;
  intercept: number;
  r2: number;
  nPoints: number;
}

export function fitRate(
  points: ReadonlyArray<readonly [number, number]>,
): RateFit {
  if (points.length < 2) {
    throw new TooFewPoints(`rate fit needs >= 2 points, got ${points.length}`);
  }
  for (const [x, y] of points) {
    if (x <= 0 || y <= 0) {
      throw new NonPositive(`log-log fit needs positive points, got (${x}, ${y})`);
    }
  }
  const lx = points.map(([x]) => Math.log(x));
  const ly = points.map(([, y]) => Math.log(y));
  const mx = lx.reduce((a, b) => a + b, 0) / lx.length;
  const my = ly.reduce((a, b) => a + b, 0) / ly.length;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < lx.length; i++) {
    const dx = lx[i] - mx;
    sxx += dx * dx;
    sxy += dx * (ly[i] - my);
  }
  if (sxx === 0) {
    throw new TooFewPoints("rate fit needs at least two distinct x values");
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  let ssRes = 0;
  let ssTot = 0;
  for (let i = 0; i < lx.length; i++) {
    const r = ly[i] - (slope * lx[i] + intercept);
    ssRes += r * r;
    const d = ly[i] - my;
    ssTot += d * d;
  }
  const r2 = ssTot === 0 ? 1 : 1 - ssRes / ssTot;
  return { slope, intercept, r2, nPoints: points.length };
}
