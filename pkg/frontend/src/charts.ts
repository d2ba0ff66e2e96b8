/**
 * Pure chart-model builders. Every numeric value in a model is the payload
 * value itself (no parsing, no rounding in the data path); display rounding
 * happens only in axis tick labels. SVG strings are produced from the models
 * so views stay testable without a DOM.
 */

import type { CountyRow, DemographicRow, EstimateRow, PpcPayload } from './api.js';

export interface RibbonPoint {
  x: number;
  label: string;
  y: number;
  lo: number;
  hi: number;
  overlay?: number;
}

export interface TrendModel {
  points: RibbonPoint[];
  yMax: number;
  title: string;
}

export function trendModel(
  rows: EstimateRow[],
  title: string,
  overlay?: Map<number, number>,
): TrendModel {
  const points = rows.map((row) => ({
    x: row.week_index ?? 0,
    label: row.week_label ?? String(row.week_index ?? ''),
    y: row.mean,
    lo: row['l-95%'],
    hi: row['u-95%'],
    overlay: overlay?.get(row.week_index ?? -1),
  }));
  const yMax = Math.max(...points.map((p) => p.hi), ...points.map((p) => p.overlay ?? 0), 1e-9);
  return { points, yMax, title };
}

const W = 640;
const H = 240;
const PAD = 36;

function sx(x: number, n: number): number {
  return PAD + (x / Math.max(n - 1, 1)) * (W - 2 * PAD);
}

function sy(y: number, yMax: number): number {
  return H - PAD - (y / yMax) * (H - 2 * PAD);
}

export function trendSvg(model: TrendModel): string {
  const n = model.points.length;
  const { yMax } = model;
  const band = model.points
    .map((p, i) => `${sx(i, n).toFixed(1)},${sy(p.hi, yMax).toFixed(1)}`)
    .concat(
      [...model.points]
        .reverse()
        .map((p, ri) => `${sx(n - 1 - ri, n).toFixed(1)},${sy(p.lo, yMax).toFixed(1)}`),
    )
    .join(' ');
  const line = model.points
    .map((p, i) => `${i === 0 ? 'M' : 'L'}${sx(i, n).toFixed(1)} ${sy(p.y, yMax).toFixed(1)}`)
    .join(' ');
  const overlay = model.points
    .filter((p) => p.overlay !== undefined)
    .map(
      (p) =>
        `<circle class="overlay" cx="${sx(model.points.indexOf(p), n).toFixed(1)}" ` +
        `cy="${sy(p.overlay as number, yMax).toFixed(1)}" r="2.5">` +
        `<title>raw ${String(p.overlay)}</title></circle>`,
    )
    .join('');
  const markers = model.points
    .map(
      (p, i) =>
        `<circle class="pt" cx="${sx(i, n).toFixed(1)}" cy="${sy(p.y, yMax).toFixed(1)}" r="2" ` +
        `data-week="${p.label}" data-mean="${String(p.y)}" data-lo="${String(p.lo)}" ` +
        `data-hi="${String(p.hi)}"><title>${p.label}: ${String(p.y)} [${String(p.lo)}, ${String(
          p.hi,
        )}]</title></circle>`,
    )
    .join('');
  return (
    `<svg viewBox="0 0 ${W} ${H}" role="img" aria-label="${model.title}">` +
    `<polygon class="band" points="${band}"/>` +
    `<path class="line" d="${line}" fill="none"/>` +
    overlay +
    markers +
    `</svg>`
  );
}

export interface ChoroplethCell {
  fips: string;
  value: number | null;
  display: string;
  className: string;
  path: string;
}

export interface GeoFeature {
  properties: { fips: string };
  geometry: { type: 'Polygon'; coordinates: number[][][] };
}

export interface CountyGeometry {
  type: 'FeatureCollection';
  features: GeoFeature[];
}

function polygonPath(coords: number[][][]): string {
  return coords
    .map(
      (ring) =>
        'M' + ring.map(([x, y]) => `${x.toFixed(2)} ${y.toFixed(2)}`).join(' L') + ' Z',
    )
    .join(' ');
}

/**
 * County map cells from estimate rows. Counties present in the geometry but
 * absent from the rows render as "no data", never as zero.
 */
export function choroplethModel(
  geometry: CountyGeometry,
  values: Map<string, number>,
  quantize = 5,
): ChoroplethCell[] {
  const present = [...values.values()];
  const lo = present.length ? Math.min(...present) : 0;
  const hi = present.length ? Math.max(...present) : 1;
  return geometry.features.map((feature) => {
    const fips = feature.properties.fips;
    const has = values.has(fips);
    const value = has ? (values.get(fips) as number) : null;
    let className = 'no-data';
    if (has) {
      const t = hi > lo ? ((value as number) - lo) / (hi - lo) : 0;
      className = `q${Math.min(quantize - 1, Math.floor(t * quantize))}`;
    }
    return {
      fips,
      value,
      display: has ? String(value) : 'no data',
      className,
      path: polygonPath(feature.geometry.coordinates),
    };
  });
}

export function choroplethSvg(cells: ChoroplethCell[], title: string): string {
  const shapes = cells
    .map(
      (cell) =>
        `<path class="county ${cell.className}" d="${cell.path}" data-fips="${cell.fips}" ` +
        `data-value="${cell.display}"><title>${cell.fips}: ${cell.display}</title></path>`,
    )
    .join('');
  return `<svg viewBox="0 0 400 300" role="img" aria-label="${title}">${shapes}</svg>`;
}

export interface BarPair {
  dimension: string;
  level: string;
  sample: number;
  population: number;
}

export function demographicBars(rows: DemographicRow[]): BarPair[] {
  return rows.map((row) => ({
    dimension: row.dimension,
    level: row.level,
    sample: row.sample_share,
    population: row.population_share,
  }));
}

export function countyValueMap(rows: CountyRow[], field: 'max_weekly_positivity' | 'n_tests') {
  return new Map(rows.map((row) => [row.county_fips, row[field]]));
}

export interface PpcSeries {
  weeks: number[];
  observed: number[];
  replicates: number[][]; // one array per replicate, aligned with weeks
}

export function ppcModel(payload: PpcPayload): PpcSeries {
  const weeks = payload.observed.map((o) => o.week_index);
  const byRep = new Map<number, Map<number, number>>();
  for (const row of payload.replicates) {
    if (!byRep.has(row.rep)) byRep.set(row.rep, new Map());
    byRep.get(row.rep)!.set(row.week_index, row.rate);
  }
  const replicates = [...byRep.keys()]
    .sort((a, b) => a - b)
    .map((rep) => weeks.map((w) => byRep.get(rep)!.get(w) ?? NaN));
  return { weeks, observed: payload.observed.map((o) => o.rate), replicates };
}
