/**
 * Annotation records: intro/credits time intervals per video, converted to
 * one binary label per second. Second t covers [t, t+1); it is labeled 1
 * iff it intersects any annotated interval.
 */

import { readFileSync } from 'node:fs';

export interface Interval {
  startS: number;
  endS: number;
}

export interface AnnotationRecord {
  id: string;
  seriesId: string;
  intervals: Interval[];
}

export class AnnotationError extends Error {}

function asInterval(raw: unknown, context: string): Interval {
  if (typeof raw !== 'object' || raw === null) {
    throw new AnnotationError(`${context}: interval must be an object`);
  }
  const { start_s: startS, end_s: endS } = raw as Record<string, unknown>;
  if (typeof startS !== 'number' || typeof endS !== 'number' || !isFinite(startS) || !isFinite(endS)) {
    throw new AnnotationError(`${context}: interval needs numeric start_s and end_s`);
  }
  return { startS, endS };
}

function asRecord(raw: unknown, context: string): AnnotationRecord {
  if (typeof raw !== 'object' || raw === null) {
    throw new AnnotationError(`${context}: record must be an object`);
  }
  const obj = raw as Record<string, unknown>;
  if (typeof obj.id !== 'string' || obj.id.length === 0) {
    throw new AnnotationError(`${context}: missing string "id"`);
  }
  if (typeof obj.series_id !== 'string' || obj.series_id.length === 0) {
    throw new AnnotationError(`${context}: missing string "series_id"`);
  }
  if (!Array.isArray(obj.intervals)) {
    throw new AnnotationError(`${context}: "intervals" must be an array`);
  }
  const intervals = obj.intervals.map((iv, i) => asInterval(iv, `${context}.intervals[${i}]`));
  return { id: obj.id, seriesId: obj.series_id, intervals };
}

/**
 * Parse a JSON annotations file: either one record or an array of records,
 * each {id, series_id, intervals: [{start_s, end_s}, ...]}.
 */
export function parseAnnotations(path: string): AnnotationRecord[] {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, 'utf-8'));
  } catch (err) {
    throw new AnnotationError(`${path}: ${(err as Error).message}`);
  }
  const items = Array.isArray(raw) ? raw : [raw];
  const records = items.map((item, i) => asRecord(item, `${path}[${i}]`));
  const seen = new Set<string>();
  for (const r of records) {
    if (seen.has(r.id)) {
      throw new AnnotationError(`${path}: duplicate annotation id ${JSON.stringify(r.id)}`);
    }
    seen.add(r.id);
  }
  return records;
}

/**
 * Check intervals are well-formed, inside [0, durationS], and non-overlapping
 * (shared endpoints are fine). Returns them sorted by start.
 */
export function validateIntervals(intervals: Interval[], durationS: number, id: string): Interval[] {
  const sorted = [...intervals].sort((a, b) => a.startS - b.startS);
  for (const iv of sorted) {
    if (iv.endS <= iv.startS) {
      throw new AnnotationError(`${id}: interval [${iv.startS}, ${iv.endS}) is empty or reversed`);
    }
    if (iv.startS < 0 || iv.endS > durationS) {
      throw new AnnotationError(
        `${id}: interval [${iv.startS}, ${iv.endS}) outside video duration ${durationS}s`,
      );
    }
  }
  for (let i = 1; i < sorted.length; i++) {
    if (sorted[i].startS < sorted[i - 1].endS) {
      throw new AnnotationError(
        `${id}: intervals [${sorted[i - 1].startS}, ${sorted[i - 1].endS}) and ` +
        `[${sorted[i].startS}, ${sorted[i].endS}) overlap`,
      );
    }
  }
  return sorted;
}

/** Per-second labels: labels[t] = 1 iff [t, t+1) intersects any interval. */
export function intervalsToLabels(intervals: Interval[], totalSeconds: number): Uint8Array {
  const labels = new Uint8Array(totalSeconds);
  for (const iv of intervals) {
    const first = Math.max(0, Math.floor(iv.startS));
    const last = Math.min(totalSeconds - 1, Math.ceil(iv.endS) - 1);
    for (let t = first; t <= last; t++) {
      if (t < iv.endS && t + 1 > iv.startS) {
        labels[t] = 1;
      }
    }
  }
  return labels;
}
