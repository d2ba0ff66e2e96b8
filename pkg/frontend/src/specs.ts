/**
 * Model specification drafts: the predictor toggle matrix, the three presets,
 * and client-side validation mirroring the server's constraints.
 *
 * The JSON produced here is sent verbatim to POST /fits; the golden tests pin
 * the presets to the server's own serialization.
 */

export interface ModelSpec {
  label: string;
  sensitivity: number;
  specificity: number;
  fixed_effects: string[];
  varying_intercepts: string[];
  varying_slopes: [string, string][];
  zip_regression: boolean;
  prior_scales: Record<string, number>;
}

export const GEO_PREDICTORS = [
  'urbanicity',
  'college',
  'employment',
  'income',
  'poverty',
  'adi',
] as const;

export const VARYING_GROUPS = ['age', 'race', 'time', 'zip'] as const;

export function presetA(): ModelSpec {
  return {
    label: 'A',
    sensitivity: 0.7,
    specificity: 1.0,
    fixed_effects: ['male', ...GEO_PREDICTORS],
    varying_intercepts: ['age', 'race', 'time', 'zip'],
    varying_slopes: [],
    zip_regression: true,
    prior_scales: {},
  };
}

export function presetB(): ModelSpec {
  const spec = presetA();
  spec.label = 'B';
  spec.varying_slopes = [['race', 'college']];
  return spec;
}

export function presetC(): ModelSpec {
  const spec = presetA();
  spec.label = 'C';
  spec.varying_intercepts = ['age', 'race', 'time'];
  spec.zip_regression = false;
  return spec;
}

export interface SpecIssue {
  field: string;
  msg: string;
}

/** Mirrors the server-side constraints so the launch button can be disabled early. */
export function validateSpec(spec: ModelSpec): SpecIssue[] {
  const issues: SpecIssue[] = [];
  if (!(spec.sensitivity > 0 && spec.sensitivity <= 1)) {
    issues.push({ field: 'sensitivity', msg: 'sensitivity must be in (0, 1]' });
  }
  if (!(spec.specificity > 0 && spec.specificity <= 1)) {
    issues.push({ field: 'specificity', msg: 'specificity must be in (0, 1]' });
  }
  if (spec.sensitivity <= 1 - spec.specificity) {
    issues.push({
      field: 'sensitivity',
      msg: 'test is uninformative: sensitivity must exceed 1 - specificity',
    });
  }
  for (const group of spec.varying_intercepts) {
    if (!VARYING_GROUPS.includes(group as (typeof VARYING_GROUPS)[number])) {
      issues.push({ field: 'varying_intercepts', msg: `unknown group ${group}` });
    }
  }
  for (const [group, pred] of spec.varying_slopes) {
    if (!spec.fixed_effects.includes(pred)) {
      issues.push({
        field: 'varying_slopes',
        msg: `slope predictor ${pred} is not among the selected predictors`,
      });
    }
    if (!VARYING_GROUPS.includes(group as (typeof VARYING_GROUPS)[number])) {
      issues.push({ field: 'varying_slopes', msg: `unknown slope group ${group}` });
    }
  }
  return issues;
}

/** Toggle one entry of the predictor matrix, returning a new draft. */
export function toggleFixedEffect(spec: ModelSpec, name: string): ModelSpec {
  const fixed = spec.fixed_effects.includes(name)
    ? spec.fixed_effects.filter((f) => f !== name)
    : [...spec.fixed_effects, name];
  return { ...spec, fixed_effects: fixed };
}

export function toggleVaryingIntercept(spec: ModelSpec, group: string): ModelSpec {
  const groups = spec.varying_intercepts.includes(group)
    ? spec.varying_intercepts.filter((g) => g !== group)
    : [...spec.varying_intercepts, group];
  return {
    ...spec,
    varying_intercepts: groups,
    zip_regression: groups.includes('zip'),
  };
}

export function toggleRaceCollegeSlope(spec: ModelSpec): ModelSpec {
  const has = spec.varying_slopes.some(([g, p]) => g === 'race' && p === 'college');
  return {
    ...spec,
    varying_slopes: has ? [] : [['race', 'college']],
  };
}
