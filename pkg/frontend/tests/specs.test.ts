/**
 * Model-builder fidelity: the presets serialize to exactly the engine's own
 * spec JSON (golden files recorded from the server implementation).
 */

import { readFileSync } from 'node:fs';
import { describe, expect, it } from 'vitest';

import {
  presetA,
  presetB,
  presetC,
  toggleFixedEffect,
  toggleRaceCollegeSlope,
  toggleVaryingIntercept,
  validateSpec,
} from '../src/specs.js';

function golden(name: string): unknown {
  return JSON.parse(readFileSync(new URL(`./golden/${name}.json`, import.meta.url), 'utf8'));
}

describe('preset fidelity (golden JSON)', () => {
  it('preset A matches the engine serialization', () => {
    expect(presetA()).toEqual(golden('model_a'));
  });

  it('preset B matches the engine serialization', () => {
    expect(presetB()).toEqual(golden('model_b'));
  });

  it('preset C matches the engine serialization', () => {
    expect(presetC()).toEqual(golden('model_c'));
  });

  it('toggling race x college on preset A yields preset B', () => {
    const toggled = { ...toggleRaceCollegeSlope(presetA()), label: 'B' };
    expect(toggled).toEqual(presetB());
  });

  it('removing the zip varying intercept from A yields C', () => {
    const toggled = { ...toggleVaryingIntercept(presetA(), 'zip'), label: 'C' };
    expect(toggled).toEqual(presetC());
  });
});

describe('client-side validation mirrors the server constraints', () => {
  it('accepts the presets', () => {
    expect(validateSpec(presetA())).toEqual([]);
    expect(validateSpec(presetB())).toEqual([]);
    expect(validateSpec(presetC())).toEqual([]);
  });

  it('rejects an uninformative test (sensitivity <= 1 - specificity)', () => {
    const spec = { ...presetA(), sensitivity: 0.2, specificity: 0.5 };
    const issues = validateSpec(spec);
    expect(issues.some((i) => i.field === 'sensitivity' && /uninformative/.test(i.msg))).toBe(true);
  });

  it('rejects a slope whose predictor is not selected', () => {
    const spec = toggleFixedEffect(presetB(), 'college');
    const issues = validateSpec(spec);
    expect(issues.some((i) => i.field === 'varying_slopes')).toBe(true);
  });

  it('rejects out-of-range sensitivity', () => {
    expect(validateSpec({ ...presetA(), sensitivity: 0 }).length).toBeGreaterThan(0);
    expect(validateSpec({ ...presetA(), specificity: 1.5 }).length).toBeGreaterThan(0);
  });
});
