/**
 * Workflow state: the analyst's current dataset, spec drafts, jobs, and
 * result selection. Only identifiers persist client-side; every detail view
 * is reconstructed from server endpoints, so a reload restores the workflow.
 */

import type { ApiClient, DatasetInfo, DescribePayload, JobInfo } from './api.js';
import type { ModelSpec } from './specs.js';

export interface TrackedJob {
  jobId: string;
  fitId?: string;
  label?: string;
  info?: JobInfo;
}

export interface WorkflowState {
  datasetId?: string;
  dataset?: DatasetInfo;
  describe?: DescribePayload;
  specs: ModelSpec[];
  jobs: TrackedJob[];
  selectedFit?: string;
  grouping: string;
  week?: string;
}

export function emptyState(): WorkflowState {
  return { specs: [], jobs: [], grouping: 'week' };
}

export interface PersistedIds {
  datasetId?: string;
  jobs: { jobId: string; fitId?: string; label?: string }[];
  selectedFit?: string;
  grouping: string;
  week?: string;
}

export function persistable(state: WorkflowState): PersistedIds {
  return {
    datasetId: state.datasetId,
    jobs: state.jobs.map(({ jobId, fitId, label }) => ({ jobId, fitId, label })),
    selectedFit: state.selectedFit,
    grouping: state.grouping,
    week: state.week,
  };
}

/** Rebuild the full state from the server given persisted identifiers. */
export async function restoreState(api: ApiClient, ids: PersistedIds): Promise<WorkflowState> {
  const state = emptyState();
  state.grouping = ids.grouping || 'week';
  state.week = ids.week;
  state.selectedFit = ids.selectedFit;
  if (ids.datasetId) {
    state.datasetId = ids.datasetId;
    state.dataset = await api.dataset(ids.datasetId);
    if (state.dataset.preprocessed) {
      state.describe = await api.describe(ids.datasetId);
    }
  }
  for (const job of ids.jobs) {
    const tracked: TrackedJob = { ...job };
    tracked.info = await api.job(job.jobId);
    state.jobs.push(tracked);
  }
  return state;
}

export interface PollOptions {
  intervalMs?: number;
  backoffFactor?: number;
  maxIntervalMs?: number;
  onUpdate?: (info: JobInfo) => void;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Poll a job until it reaches a terminal state. Starts at 2 s and backs off
 * geometrically toward maxIntervalMs.
 */
export async function pollJob(
  api: ApiClient,
  jobId: string,
  options: PollOptions = {},
): Promise<JobInfo> {
  const interval = options.intervalMs ?? 2000;
  const factor = options.backoffFactor ?? 1.5;
  const cap = options.maxIntervalMs ?? 15000;
  const sleep = options.sleep ?? defaultSleep;
  let wait = interval;
  for (;;) {
    const info = await api.job(jobId);
    options.onUpdate?.(info);
    if (info.state === 'succeeded' || info.state === 'failed') {
      return info;
    }
    await sleep(wait);
    wait = Math.min(wait * factor, cap);
  }
}
