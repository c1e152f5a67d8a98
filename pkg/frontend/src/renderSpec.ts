/** Draws render specs the service hands out.
 *
 * A swatch_curve spec becomes a colored tile with a y = x^g silhouette
 * drawn over it. Output is a plain SVG string, a pure function of the
 * spec, so identical specs always produce identical markup and the
 * pieces are testable without a DOM.
 */

import type { RenderSpec } from "./api.js";

export const SWATCH_SIZE = 120;
const CURVE_SAMPLES = 33;

/** Sampled points of y = x^g over [0, 1], in SVG pixel coordinates. */
export function curvePoints(exponent: number, size = SWATCH_SIZE): Array<[number, number]> {
  const points: Array<[number, number]> = [];
  for (let i = 0; i < CURVE_SAMPLES; i++) {
    const x = i / (CURVE_SAMPLES - 1);
    const y = Math.pow(x, exponent);
    // SVG y axis grows downward
    points.push([x * size, size - y * size]);
  }
  return points;
}

function fmt(value: number): string {
  // fixed precision keeps the markup byte-stable across runs
  return value.toFixed(3);
}

export function renderSwatch(spec: RenderSpec): string {
  if (spec.kind !== "swatch_curve") {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${SWATCH_SIZE} ${SWATCH_SIZE}" role="img">` +
      `<rect width="${SWATCH_SIZE}" height="${SWATCH_SIZE}" fill="#888"/>` +
      `<text x="${SWATCH_SIZE / 2}" y="${SWATCH_SIZE / 2}" text-anchor="middle" fill="#fff">?</text>` +
      `</svg>`
    );
  }
  const fill = `hsl(${fmt(spec.hue)}, ${fmt(spec.saturation * 100)}%, ${fmt(spec.lightness * 100)}%)`;
  const stroke = spec.lightness > 0.5 ? "#222" : "#eee";
  const path = curvePoints(spec.curve_exponent)
    .map(([x, y]) => `${fmt(x)},${fmt(y)}`)
    .join(" ");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${SWATCH_SIZE} ${SWATCH_SIZE}" role="img">` +
    `<rect width="${SWATCH_SIZE}" height="${SWATCH_SIZE}" fill="${fill}"/>` +
    `<polyline points="${path}" fill="none" stroke="${stroke}" stroke-width="2"/>` +
    `</svg>`
  );
}
