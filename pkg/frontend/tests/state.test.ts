/** Polling cadence and server-driven state restoration. */

import { describe, expect, it, vi } from 'vitest';

import type { ApiClient, JobInfo } from '../src/api.js';
import { emptyState, persistable, pollJob, restoreState } from '../src/state.js';

function jobInfo(state: JobInfo['state'], stage?: string): JobInfo {
  return {
    id: 'j1',
    kind: 'fit',
    state,
    progress: stage ? { stage } : {},
    error: null,
    dataset_id: 'd1',
    fit_id: 'f1',
  };
}

describe('pollJob', () => {
  it('polls at 2 s and backs off until the job is terminal', async () => {
    const states: JobInfo[] = [
      jobInfo('queued'),
      jobInfo('running', 'warmup'),
      jobInfo('running', 'sampling'),
      jobInfo('succeeded'),
    ];
    let call = 0;
    const api = {
      job: vi.fn(async () => states[Math.min(call++, states.length - 1)]),
    } as unknown as ApiClient;
    const waits: number[] = [];
    const result = await pollJob(api, 'j1', {
      sleep: async (ms) => {
        waits.push(ms);
      },
    });
    expect(result.state).toBe('succeeded');
    expect(waits).toEqual([2000, 3000, 4500]);
    expect((api.job as ReturnType<typeof vi.fn>).mock.calls.length).toBe(4);
  });

  it('caps the backoff at maxIntervalMs', async () => {
    let calls = 0;
    const api = {
      job: vi.fn(async () => (calls++ < 6 ? jobInfo('running') : jobInfo('succeeded'))),
    } as unknown as ApiClient;
    const waits: number[] = [];
    await pollJob(api, 'j1', {
      intervalMs: 1000,
      backoffFactor: 2,
      maxIntervalMs: 3000,
      sleep: async (ms) => {
        waits.push(ms);
      },
    });
    expect(Math.max(...waits)).toBeLessThanOrEqual(3000);
  });
});

describe('state restoration', () => {
  it('rebuilds the workflow from persisted ids via server endpoints', async () => {
    const api = {
      dataset: vi.fn(async (id: string) => ({
        id,
        digest: 'abc',
        files: ['records'],
        validation: { rows_read: 10, accepted: 9, rejected: 1, reject_reasons: {} },
        preprocessed: true,
        dedup_note: null,
      })),
      describe: vi.fn(async () => ({ report: {}, weekly: [], county: [], demographics: [] })),
      job: vi.fn(async () => jobInfo('succeeded')),
    } as unknown as ApiClient;

    const state = emptyState();
    state.datasetId = 'd1';
    state.jobs = [{ jobId: 'j1', fitId: 'f1', label: 'A' }];
    state.selectedFit = 'f1';
    state.grouping = 'race';
    state.week = '2021-11-08';

    const restored = await restoreState(api, persistable(state));
    expect(restored.datasetId).toBe('d1');
    expect(restored.dataset?.preprocessed).toBe(true);
    expect(restored.describe).toBeDefined();
    expect(restored.jobs[0].info?.state).toBe('succeeded');
    expect(restored.selectedFit).toBe('f1');
    expect(restored.grouping).toBe('race');
    expect(restored.week).toBe('2021-11-08');
  });
});
