/**
 * HTML renderers for each screen. All are pure payload -> string functions;
 * numbers shown in tables and tooltips are the payload values stringified
 * (formatting helpers only abbreviate axis ticks, never the displayed data).
 */

import type {
  ComparisonPayload,
  DemographicRow,
  DescribePayload,
  EstimatesPayload,
  JobInfo,
  PpcPayload,
  SummaryPayload,
  WeeklyRow,
} from './api.js';
import {
  choroplethModel,
  choroplethSvg,
  countyValueMap,
  demographicBars,
  ppcModel,
  trendModel,
  trendSvg,
  type CountyGeometry,
} from './charts.js';
import type { ModelSpec } from './specs.js';
import { GEO_PREDICTORS, validateSpec } from './specs.js';

const esc = (value: unknown): string =>
  String(value).replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');

export const SUMMARY_COLUMNS = [
  'Estimate',
  'Est.Error',
  'l-95%',
  'u-95%',
  'R-hat',
  'Bulk_ESS',
  'Tail_ESS',
] as const;

// -- data screen -------------------------------------------------------------

export function renderValidation(payload: {
  rows_read: number;
  accepted: number;
  rejected: number;
  reject_reasons: Record<string, number>;
}): string {
  const reasons = Object.entries(payload.reject_reasons)
    .map(([reason, count]) => `<li>${esc(reason)}: ${String(count)}</li>`)
    .join('');
  return (
    `<div class="validation"><p>${String(payload.accepted)} of ${String(
      payload.rows_read,
    )} rows accepted; ${String(payload.rejected)} rejected.</p>` +
    (reasons ? `<ul>${reasons}</ul>` : '') +
    `</div>`
  );
}

export function renderDemographics(rows: DemographicRow[]): string {
  const pairs = demographicBars(rows);
  const byDim = new Map<string, typeof pairs>();
  for (const pair of pairs) {
    if (!byDim.has(pair.dimension)) byDim.set(pair.dimension, []);
    byDim.get(pair.dimension)!.push(pair);
  }
  const blocks = [...byDim.entries()].map(([dim, levels]) => {
    const bars = levels
      .map(
        (p) =>
          `<div class="bar-pair" data-level="${esc(p.level)}">` +
          `<span class="lvl">${esc(p.level)}</span>` +
          `<div class="bar sample" style="width:${(p.sample * 100).toFixed(1)}%" ` +
          `data-share="${String(p.sample)}"><title>sample ${String(p.sample)}</title></div>` +
          `<div class="bar population" style="width:${(p.population * 100).toFixed(1)}%" ` +
          `data-share="${String(p.population)}"><title>population ${String(
            p.population,
          )}</title></div></div>`,
      )
      .join('');
    return `<section class="demo-dim" data-dimension="${esc(dim)}"><h4>${esc(dim)}</h4>${bars}</section>`;
  });
  return `<div class="demographics">${blocks.join('')}</div>`;
}

export function renderWeeklyRaw(rows: WeeklyRow[]): string {
  const model = trendModel(
    rows.map((r) => ({
      week_index: r.week_index,
      week_label: r.week_label,
      mean: r.positivity,
      sd: 0,
      'l-95%': r.positivity,
      'u-95%': r.positivity,
    })),
    'Weekly raw positivity',
  );
  return trendSvg(model);
}

export function renderDataScreen(payload: DescribePayload, geometry: CountyGeometry): string {
  const positivity = choroplethSvg(
    choroplethModel(geometry, countyValueMap(payload.county, 'max_weekly_positivity')),
    'Highest weekly positivity by county',
  );
  const samples = choroplethSvg(
    choroplethModel(geometry, countyValueMap(payload.county, 'n_tests')),
    'Sample size by county',
  );
  return (
    `<div class="data-screen">` +
    `<section><h3>Weekly raw positivity</h3>${renderWeeklyRaw(payload.weekly)}</section>` +
    `<section><h3>Sample vs population</h3>${renderDemographics(payload.demographics)}</section>` +
    `<section class="maps"><h3>County coverage</h3>${positivity}${samples}</section>` +
    `</div>`
  );
}

// -- model builder ------------------------------------------------------------

export function renderBuilder(spec: ModelSpec): string {
  const issues = validateSpec(spec);
  const fixedToggles = ['male', ...GEO_PREDICTORS]
    .map(
      (name) =>
        `<label><input type="checkbox" data-toggle="fixed" value="${name}" ` +
        `${spec.fixed_effects.includes(name) ? 'checked' : ''}/> ${name}</label>`,
    )
    .join('');
  const varyingToggles = ['age', 'race', 'time', 'zip']
    .map(
      (group) =>
        `<label><input type="checkbox" data-toggle="varying" value="${group}" ` +
        `${spec.varying_intercepts.includes(group) ? 'checked' : ''}/> ${group}</label>`,
    )
    .join('');
  const slopeChecked = spec.varying_slopes.some(([g, p]) => g === 'race' && p === 'college');
  const issueList = issues
    .map((issue) => `<li class="issue" data-field="${issue.field}">${esc(issue.msg)}</li>`)
    .join('');
  return (
    `<div class="builder">` +
    `<div class="presets">` +
    `<button data-preset="A">Model A</button>` +
    `<button data-preset="B">Model B</button>` +
    `<button data-preset="C">Model C</button>` +
    `</div>` +
    `<fieldset><legend>Cell and zip-level predictors</legend>${fixedToggles}</fieldset>` +
    `<fieldset><legend>Varying intercepts</legend>${varyingToggles}</fieldset>` +
    `<fieldset><legend>Interactions</legend>` +
    `<label><input type="checkbox" data-toggle="race-college" ${slopeChecked ? 'checked' : ''}/>` +
    ` race x college</label></fieldset>` +
    `<fieldset><legend>Test characteristics</legend>` +
    `<label>sensitivity <input type="number" step="0.01" data-field="sensitivity" ` +
    `value="${String(spec.sensitivity)}"/></label>` +
    `<label>specificity <input type="number" step="0.01" data-field="specificity" ` +
    `value="${String(spec.specificity)}"/></label></fieldset>` +
    (issueList ? `<ul class="issues">${issueList}</ul>` : '') +
    `<button class="launch" ${issues.length ? 'disabled' : ''}>Launch fit</button>` +
    `<pre class="spec-json">${esc(JSON.stringify(spec, null, 2))}</pre>` +
    `</div>`
  );
}

// -- jobs ----------------------------------------------------------------------

export function renderJob(info: JobInfo): string {
  const progress = info.progress?.stage
    ? `${info.progress.stage}` +
      (info.progress.iteration
        ? ` ${info.progress.iteration}/${info.progress.total ?? '?'}` +
          (info.progress.chain !== undefined && info.progress.chain !== null
            ? ` (chain ${info.progress.chain})`
            : '')
        : '')
    : '';
  return (
    `<li class="job ${info.state}" data-job="${info.id}">` +
    `<span class="kind">${info.kind}</span> <span class="state">${info.state}</span>` +
    (progress ? ` <span class="progress">${esc(progress)}</span>` : '') +
    (info.error ? ` <span class="error">${esc(info.error)}</span>` : '') +
    `</li>`
  );
}

// -- results ---------------------------------------------------------------------

export function renderSummaryTable(payload: SummaryPayload): string {
  const header = ['parameter', ...SUMMARY_COLUMNS]
    .map((col) => `<th>${esc(col)}</th>`)
    .join('');
  const rows = payload.rows
    .map((row) => {
      const cells = SUMMARY_COLUMNS.map(
        (col) => `<td data-col="${esc(col)}">${String((row as never)[col])}</td>`,
      ).join('');
      return `<tr><td class="param">${esc(row.parameter)}</td>${cells}</tr>`;
    })
    .join('');
  const flags = payload.flags.map((f) => `<p class="flag">${esc(f)}</p>`).join('');
  return (
    `${flags}<table class="summary"><thead><tr>${header}</tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderComparison(payload: ComparisonPayload): string {
  const rows = payload.rows
    .map((row) => {
      const covers = payload.diff_interval_covers_zero[row.model];
      return (
        `<tr data-model="${esc(row.model)}"><td>${esc(row.model)}</td>` +
        `<td data-col="elpd_diff">${String(row.elpd_diff)}</td>` +
        `<td data-col="se_diff">${String(row.se_diff)}</td>` +
        `<td class="covers">${covers ? 'interval covers 0' : 'clear difference'}</td></tr>`
      );
    })
    .join('');
  return (
    `<table class="comparison"><thead><tr><th>model</th><th>elpd_diff</th>` +
    `<th>se_diff</th><th>rule of thumb</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderPpc(payload: PpcPayload): string {
  const model = ppcModel(payload);
  const n = model.weeks.length || 1;
  const yMax = Math.max(...model.observed, ...model.replicates.flat().filter(Number.isFinite), 1e-9);
  const W = 640;
  const H = 240;
  const PAD = 36;
  const sx = (i: number) => PAD + (i / Math.max(n - 1, 1)) * (W - 2 * PAD);
  const sy = (v: number) => H - PAD - (v / yMax) * (H - 2 * PAD);
  const reps = model.replicates
    .map((series) => {
      const d = series
        .map((v, i) => (Number.isFinite(v) ? `${i === 0 ? 'M' : 'L'}${sx(i).toFixed(1)} ${sy(v).toFixed(1)}` : ''))
        .join(' ');
      return `<path class="replicate" d="${d}" fill="none"/>`;
    })
    .join('');
  const observed = model.observed
    .map(
      (v, i) =>
        `<circle class="observed" cx="${sx(i).toFixed(1)}" cy="${sy(v).toFixed(1)}" r="2.5" ` +
        `data-rate="${String(v)}"><title>week ${model.weeks[i]}: ${String(v)}</title></circle>`,
    )
    .join('');
  return (
    `<svg viewBox="0 0 ${W} ${H}" role="img" aria-label="Posterior predictive check">` +
    `${reps}${observed}</svg>`
  );
}

export function renderTrend(payload: EstimatesPayload, overlay?: Map<number, number>): string {
  return trendSvg(trendModel(payload.rows, 'Estimated weekly incidence', overlay));
}

export function renderSubgroupTrends(payload: EstimatesPayload, key: 'sex' | 'race' | 'age_group'): string {
  const levels = [...new Set(payload.rows.map((r) => r[key]))];
  const blocks = levels.map((level) => {
    const rows = payload.rows.filter((r) => r[key] === level);
    return (
      `<section class="subgroup" data-level="${esc(level)}"><h4>${esc(level)}</h4>` +
      trendSvg(trendModel(rows, `Weekly incidence, ${level}`)) +
      `</section>`
    );
  });
  return `<div class="subgroups">${blocks.join('')}</div>`;
}

export function renderCountyEstimates(
  payload: EstimatesPayload,
  geometry: CountyGeometry,
  layer: 'mean' | 'sd',
): string {
  const values = new Map(
    payload.rows.map((row) => [row.county_fips as string, row[layer]]),
  );
  return choroplethSvg(
    choroplethModel(geometry, values),
    layer === 'mean' ? 'Estimated incidence by county' : 'Posterior sd by county',
  );
}
