/** Typed client for the service endpoints. All numbers pass through untouched. */

export interface ValidationSummary {
  rows_read: number;
  accepted: number;
  rejected: number;
  reject_reasons: Record<string, number>;
}

export interface DatasetInfo {
  id: string;
  digest: string;
  files: string[];
  validation: ValidationSummary;
  preprocessed: boolean;
  dedup_note: string | null;
}

export interface JobInfo {
  id: string;
  kind: 'preprocess' | 'fit';
  state: 'queued' | 'running' | 'succeeded' | 'failed';
  progress: { stage?: string; chain?: number; iteration?: number; total?: number };
  error: string | null;
  dataset_id: string | null;
  fit_id: string | null;
}

export interface WeeklyRow {
  week_index: number;
  week_label: string;
  n_tests: number;
  n_positive: number;
  positivity: number;
}

export interface CountyRow {
  county_fips: string;
  n_tests: number;
  max_weekly_positivity: number;
}

export interface DemographicRow {
  dimension: string;
  level: string;
  sample_share: number;
  population_share: number;
}

export interface DescribePayload {
  report: Record<string, unknown>;
  weekly: WeeklyRow[];
  county: CountyRow[];
  demographics: DemographicRow[];
}

export interface SummaryRow {
  parameter: string;
  Estimate: number;
  'Est.Error': number;
  'l-95%': number;
  'u-95%': number;
  'R-hat': number | null;
  Bulk_ESS: number | null;
  Tail_ESS: number | null;
}

export interface SummaryPayload {
  label: string;
  rows: SummaryRow[];
  flags: string[];
}

export interface ComparisonPayload {
  columns: string[];
  rows: { model: string; elpd_diff: number; se_diff: number }[];
  elpd_loo: Record<string, number>;
  diff_interval_covers_zero: Record<string, boolean>;
  rule: string;
}

export interface LooPayload {
  label: string;
  loo: { elpd_loo: number; se_elpd: number; warnings: string[] };
  comparison: ComparisonPayload;
}

export interface PpcPayload {
  group: string;
  observed: { week_index: number; rate: number; n_tests: number }[];
  replicates: { rep: number; week_index: number; rate: number }[];
  notes: string[];
}

export interface EstimateRow {
  week_index?: number;
  week_label?: string;
  sex?: string;
  race?: string;
  age_group?: string;
  county_fips?: string;
  mean: number;
  sd: number;
  'l-95%': number;
  'u-95%': number;
}

export interface EstimatesPayload {
  grouping: string[];
  notes: string[];
  rows: EstimateRow[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`API error ${status}`);
  }
}

export class ApiClient {
  constructor(private base: string = '') {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      throw new ApiError(response.status, body?.detail ?? body);
    }
    return body as T;
  }

  uploadDataset(form: FormData): Promise<DatasetInfo> {
    return this.request('/datasets', { method: 'POST', body: form });
  }

  dataset(id: string): Promise<DatasetInfo> {
    return this.request(`/datasets/${id}`);
  }

  submitPreprocess(id: string, seed = 0): Promise<{ job_id: string }> {
    return this.request(`/datasets/${id}/preprocess`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ seed }),
    });
  }

  describe(id: string): Promise<DescribePayload> {
    return this.request(`/datasets/${id}/describe`);
  }

  submitFit(body: {
    dataset_id: string;
    spec: unknown;
    sampler?: Record<string, number>;
    ppc_replicates?: number;
  }): Promise<{ job_id: string; fit_id: string }> {
    return this.request('/fits', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  job(id: string): Promise<JobInfo> {
    return this.request(`/jobs/${id}`);
  }

  summary(fitId: string): Promise<SummaryPayload> {
    return this.request(`/fits/${fitId}/summary`);
  }

  loo(fitId: string): Promise<LooPayload> {
    return this.request(`/fits/${fitId}/loo`);
  }

  ppc(fitId: string): Promise<PpcPayload> {
    return this.request(`/fits/${fitId}/ppc`);
  }

  estimates(fitId: string, group: string, week?: string): Promise<EstimatesPayload> {
    const query = week ? `?group=${group}&week=${encodeURIComponent(week)}` : `?group=${group}`;
    return this.request(`/fits/${fitId}/estimates${query}`);
  }
}
