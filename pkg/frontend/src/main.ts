/**
 * SPA wiring: hash routing between screens, event handling, polling. All
 * statistics arrive from the server; this file only moves payloads into the
 * pure renderers.
 */

import { ApiClient, type EstimatesPayload } from './api.js';
import type { CountyGeometry } from './charts.js';
import { presetA, presetB, presetC, toggleFixedEffect, toggleRaceCollegeSlope, toggleVaryingIntercept, validateSpec, type ModelSpec } from './specs.js';
import { emptyState, persistable, pollJob, restoreState, type WorkflowState } from './state.js';
import {
  renderBuilder,
  renderComparison,
  renderCountyEstimates,
  renderDataScreen,
  renderJob,
  renderPpc,
  renderSubgroupTrends,
  renderSummaryTable,
  renderTrend,
  renderValidation,
} from './views.js';

const api = new ApiClient('');
const STORAGE_KEY = 'mrp-workflow';

let state: WorkflowState = emptyState();
let draft: ModelSpec = presetA();
let geometry: CountyGeometry = { type: 'FeatureCollection', features: [] };

function save(): void {
  localStorage.setItem(STORAGE_KEY, JSON.stringify(persistable(state)));
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element ${id}`);
  return node;
}

async function boot(): Promise<void> {
  geometry = (await fetch('assets/counties.geo.json').then((r) => r.json())) as CountyGeometry;
  const stored = localStorage.getItem(STORAGE_KEY);
  if (stored) {
    try {
      state = await restoreState(api, JSON.parse(stored));
    } catch {
      state = emptyState();
    }
  }
  render();
  window.addEventListener('hashchange', render);
}

function currentScreen(): string {
  return location.hash.replace('#', '') || 'data';
}

function render(): void {
  for (const name of ['data', 'builder', 'jobs', 'results']) {
    el(`screen-${name}`).hidden = name !== currentScreen();
  }
  renderDataTab();
  renderBuilderTab();
  renderJobsTab();
  void renderResultsTab();
}

function renderDataTab(): void {
  const target = el('data-content');
  if (!state.dataset) {
    target.innerHTML = '<p>Upload a dataset to begin.</p>';
    return;
  }
  let html = renderValidation(state.dataset.validation);
  if (state.dataset.dedup_note) html += `<p class="dedup">${state.dataset.dedup_note}</p>`;
  if (state.describe) {
    html += renderDataScreen(state.describe, geometry);
  } else {
    html += '<p class="placeholder">Preprocessing has not finished; poll the jobs tab.</p>';
  }
  target.innerHTML = html;
}

function renderBuilderTab(): void {
  el('builder-content').innerHTML = renderBuilder(draft);
  el('builder-content').querySelectorAll('[data-preset]').forEach((button) => {
    button.addEventListener('click', () => {
      const preset = (button as HTMLElement).dataset.preset;
      draft = preset === 'B' ? presetB() : preset === 'C' ? presetC() : presetA();
      renderBuilderTab();
    });
  });
  el('builder-content').querySelectorAll('input[data-toggle]').forEach((input) => {
    input.addEventListener('change', () => {
      const kind = (input as HTMLInputElement).dataset.toggle;
      const value = (input as HTMLInputElement).value;
      if (kind === 'fixed') draft = toggleFixedEffect(draft, value);
      else if (kind === 'varying') draft = toggleVaryingIntercept(draft, value);
      else if (kind === 'race-college') draft = toggleRaceCollegeSlope(draft);
      draft.label = 'custom';
      renderBuilderTab();
    });
  });
  el('builder-content').querySelectorAll('input[data-field]').forEach((input) => {
    input.addEventListener('change', () => {
      const field = (input as HTMLInputElement).dataset.field as 'sensitivity' | 'specificity';
      draft = { ...draft, [field]: Number((input as HTMLInputElement).value) };
      renderBuilderTab();
    });
  });
  const launch = el('builder-content').querySelector('.launch');
  launch?.addEventListener('click', () => void launchFit());
}

async function launchFit(): Promise<void> {
  if (!state.datasetId || validateSpec(draft).length) return;
  const ids = await api.submitFit({ dataset_id: state.datasetId, spec: draft });
  state.jobs.push({ jobId: ids.job_id, fitId: ids.fit_id, label: draft.label });
  save();
  location.hash = 'jobs';
  void trackJob(ids.job_id);
}

async function trackJob(jobId: string): Promise<void> {
  await pollJob(api, jobId, {
    onUpdate: (info) => {
      const tracked = state.jobs.find((j) => j.jobId === jobId);
      if (tracked) tracked.info = info;
      renderJobsTab();
      if (info.state === 'succeeded' && info.kind === 'preprocess' && state.datasetId) {
        void api.describe(state.datasetId).then((d) => {
          state.describe = d;
          renderDataTab();
        });
      }
      if (info.state === 'succeeded' && info.fit_id) {
        state.selectedFit = info.fit_id;
        save();
        void renderResultsTab();
      }
    },
  });
}

function renderJobsTab(): void {
  const items = state.jobs
    .map((job) => (job.info ? renderJob(job.info) : `<li class="job queued">${job.jobId}</li>`))
    .join('');
  el('jobs-content').innerHTML = `<ul class="jobs">${items || '<li>No jobs yet.</li>'}</ul>`;
}

async function renderResultsTab(): Promise<void> {
  const target = el('results-content');
  if (!state.selectedFit) {
    target.innerHTML = '<p>No completed fit selected.</p>';
    return;
  }
  const fitId = state.selectedFit;
  try {
    const [summary, loo, ppc, weekly] = await Promise.all([
      api.summary(fitId),
      api.loo(fitId),
      api.ppc(fitId),
      api.estimates(fitId, 'week'),
    ]);
    const raw = new Map(ppc.observed.map((o) => [o.week_index, o.rate]));
    const county: EstimatesPayload = state.week
      ? await api.estimates(fitId, 'county', state.week)
      : await api.estimates(fitId, 'county');
    const race = await api.estimates(fitId, 'race');
    const weeks = [...new Set(county.rows.map((r) => r.week_label))];
    const weekOptions = weeks
      .map((w) => `<option value="${w}" ${w === state.week ? 'selected' : ''}>${w}</option>`)
      .join('');
    const selectedWeek = state.week ?? (weeks[0] as string | undefined);
    const countyRows = selectedWeek
      ? { ...county, rows: county.rows.filter((r) => r.week_label === selectedWeek) }
      : county;
    target.innerHTML =
      `<section><h3>Fit summary (${summary.label})</h3>${renderSummaryTable(summary)}</section>` +
      `<section><h3>Model comparison</h3>${renderComparison(loo.comparison)}</section>` +
      `<section><h3>Posterior predictive check</h3>${renderPpc(ppc)}</section>` +
      `<section><h3>Weekly incidence</h3>${renderTrend(weekly, raw)}</section>` +
      `<section><h3>By race</h3>${renderSubgroupTrends(race, 'race')}</section>` +
      `<section><h3>County map</h3>` +
      `<label>week <select id="week-select">${weekOptions}</select></label>` +
      renderCountyEstimates(countyRows, geometry, 'mean') +
      renderCountyEstimates(countyRows, geometry, 'sd') +
      `</section>`;
    document.getElementById('week-select')?.addEventListener('change', (event) => {
      state.week = (event.target as HTMLSelectElement).value;
      save();
      void renderResultsTab();
    });
  } catch (error) {
    target.innerHTML = `<p class="error">Results unavailable: ${String(error)}</p>`;
  }
}

el('upload-form').addEventListener('submit', (event) => {
  event.preventDefault();
  const form = new FormData(event.target as HTMLFormElement);
  void (async () => {
    const info = await api.uploadDataset(form);
    state.datasetId = info.id;
    state.dataset = info;
    state.describe = undefined;
    save();
    const job = await api.submitPreprocess(info.id);
    state.jobs.push({ jobId: job.job_id });
    save();
    renderDataTab();
    renderJobsTab();
    void trackJob(job.job_id);
  })();
});

void boot();
