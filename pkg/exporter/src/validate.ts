/**
 * Post-export sanity checks: every .icsq in a directory must decode cleanly
 * (checksum enforced by the reader), share one embedding width, carry binary
 * labels, and hold finite, nonzero embedding rows.
 */

import { readdirSync } from 'node:fs';
import { join } from 'node:path';

import { readSequenceFile } from './icsq.js';

export interface ValidationIssue {
  file: string;
  problem: string;
}

export interface ValidationReport {
  ok: boolean;
  checked: number;
  issues: ValidationIssue[];
  /** Range of embedding row L2 norms across all decodable files. */
  normMin: number;
  normMax: number;
}

export function validateExportDir(dir: string): ValidationReport {
  const files = readdirSync(dir)
    .filter((f) => f.endsWith('.icsq'))
    .sort();
  const issues: ValidationIssue[] = [];
  let dim: number | null = null;
  let normMin = Infinity;
  let normMax = -Infinity;

  for (const file of files) {
    let seq;
    try {
      seq = readSequenceFile(join(dir, file));
    } catch (err) {
      issues.push({ file, problem: (err as Error).message });
      continue;
    }
    if (dim === null) {
      dim = seq.dim;
    } else if (seq.dim !== dim) {
      issues.push({ file, problem: `dim ${seq.dim} differs from ${dim} seen earlier` });
    }
    if (seq.labels) {
      for (let t = 0; t < seq.t; t++) {
        if (seq.labels[t] > 1) {
          issues.push({ file, problem: `label at t=${t} is not binary` });
          break;
        }
      }
    }
    for (let t = 0; t < seq.t; t++) {
      let sq = 0;
      let finite = true;
      for (let d = 0; d < seq.dim; d++) {
        const v = seq.embeddings[t * seq.dim + d];
        if (!Number.isFinite(v)) {
          finite = false;
          break;
        }
        sq += v * v;
      }
      if (!finite) {
        issues.push({ file, problem: `non-finite embedding at t=${t}` });
        break;
      }
      const norm = Math.sqrt(sq);
      if (norm === 0) {
        issues.push({ file, problem: `zero embedding at t=${t}` });
        break;
      }
      normMin = Math.min(normMin, norm);
      normMax = Math.max(normMax, norm);
    }
  }

  return {
    ok: issues.length === 0 && files.length > 0,
    checked: files.length,
    issues,
    normMin: Number.isFinite(normMin) ? normMin : 0,
    normMax: Number.isFinite(normMax) ? normMax : 0,
  };
}
