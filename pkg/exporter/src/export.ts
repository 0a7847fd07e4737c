/**
 * Export pipeline: video -> one frame per second -> preprocess -> encode ->
 * ICSQ file, with per-second labels derived from annotation intervals.
 * Frames are sampled at the start of each second (t + 0.0 s).
 */

import { existsSync, mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import { AnnotationRecord, intervalsToLabels, validateIntervals } from './annotations.js';
import { DEFAULT_ENCODER, FrameEncoder, getEncoder, mulberry32 } from './encoder.js';
import { augmentRgb, preprocessFrame } from './image.js';
import { EmbeddingSequence, ManifestEntry, renderManifest, writeSequenceFile } from './icsq.js';
import { Y4mVideo } from './y4m.js';

export class ExportError extends Error {}

export interface ExportConfig {
  outDir: string;
  encoder?: string;
  fps?: number;
  batchSize?: number;
  /** Seeded pixel jitter before encoding; off by default. */
  augment?: boolean;
  augmentSeed?: number;
}

interface ResolvedConfig {
  outDir: string;
  encoderId: string;
  fps: number;
  batchSize: number;
  augment: boolean;
  augmentSeed: number;
}

function resolve(cfg: ExportConfig): ResolvedConfig {
  const fps = cfg.fps ?? 1.0;
  const batchSize = cfg.batchSize ?? 16;
  if (fps <= 0 || batchSize < 1) {
    throw new ExportError('fps must be > 0 and batchSize >= 1');
  }
  return {
    outDir: cfg.outDir,
    encoderId: cfg.encoder ?? DEFAULT_ENCODER,
    fps,
    batchSize,
    augment: cfg.augment ?? false,
    augmentSeed: cfg.augmentSeed ?? 0,
  };
}

/** Sample output step k at the video frame nearest its timestamp k/fps. */
function frameIndexAt(k: number, outFps: number, fpsNum: number, fpsDen: number): number {
  return Math.round(((k / outFps) * fpsNum) / fpsDen);
}

export interface ExportResult {
  path: string;
  id: string;
  seriesId: string;
  t: number;
  dim: number;
  labeled: boolean;
}

/**
 * Export one video. With an annotation record attached, labels cover every
 * exported second; without one, the file is written unlabeled.
 */
export function exportVideo(
  videoPath: string,
  annotation: AnnotationRecord | null,
  cfg: ExportConfig,
  encoder?: FrameEncoder,
): ExportResult {
  const rc = resolve(cfg);
  const enc = encoder ?? getEncoder(rc.encoderId);
  const video = Y4mVideo.fromFile(videoPath);
  const { width, height, fpsNum, fpsDen, durationS, frameCount } = video.info;

  const totalSeconds = Math.floor(durationS * rc.fps + 1e-9);
  if (totalSeconds < 1) {
    throw new ExportError(`${videoPath}: shorter than one sample step (${durationS.toFixed(3)}s)`);
  }

  let labels: Uint8Array | undefined;
  let id = basenameNoExt(videoPath);
  let seriesId = id;
  if (annotation) {
    if (rc.fps !== 1.0) {
      throw new ExportError('labels are defined per second; annotated export requires fps=1');
    }
    const intervals = validateIntervals(annotation.intervals, durationS, annotation.id);
    labels = intervalsToLabels(intervals, totalSeconds);
    id = annotation.id;
    seriesId = annotation.seriesId;
  }

  const rand = mulberry32(rc.augmentSeed);
  const embeddings = new Float32Array(totalSeconds * enc.dim);
  for (let start = 0; start < totalSeconds; start += rc.batchSize) {
    const batch: Float32Array[] = [];
    for (let t = start; t < Math.min(start + rc.batchSize, totalSeconds); t++) {
      const idx = Math.min(frameIndexAt(t, rc.fps, fpsNum, fpsDen), frameCount - 1);
      let rgb = video.frameRgb(idx);
      if (rc.augment) {
        rgb = augmentRgb(rgb, width, height, rand);
      }
      batch.push(preprocessFrame(rgb, width, height));
    }
    const encoded = enc.encode(batch);
    for (let i = 0; i < encoded.length; i++) {
      if (encoded[i].length !== enc.dim) {
        throw new ExportError(
          `encoder ${enc.id} returned dim ${encoded[i].length}, declared ${enc.dim}`,
        );
      }
      embeddings.set(encoded[i], (start + i) * enc.dim);
    }
  }

  const seq: EmbeddingSequence = {
    id, seriesId, fps: rc.fps, t: totalSeconds, dim: enc.dim, embeddings, labels,
  };
  mkdirSync(rc.outDir, { recursive: true });
  const outPath = join(rc.outDir, `${id}.icsq`);
  writeSequenceFile(seq, outPath);
  return { path: outPath, id, seriesId, t: totalSeconds, dim: enc.dim, labeled: !!labels };
}

function basenameNoExt(path: string): string {
  const base = path.split('/').pop() ?? path;
  return base.replace(/\.[^.]+$/, '');
}

/**
 * Export a corpus: every annotation record maps to <videoDir>/<id>.y4m.
 * Writes one .icsq per record plus manifest.tsv and export_config.json
 * (the settings needed to reproduce the export, sampling phase included).
 */
export function exportCorpus(
  records: AnnotationRecord[],
  videoDir: string,
  cfg: ExportConfig,
): { manifestPath: string; results: ExportResult[] } {
  const rc = resolve(cfg);
  const enc = getEncoder(rc.encoderId);
  const missing = records
    .map((r) => r.id)
    .filter((id) => !existsSync(join(videoDir, `${id}.y4m`)));
  if (missing.length > 0) {
    throw new ExportError(`no video file for annotation ids: ${missing.join(', ')}`);
  }
  const results: ExportResult[] = [];
  const entries: ManifestEntry[] = [];
  for (const record of records) {
    const result = exportVideo(join(videoDir, `${record.id}.y4m`), record, cfg, enc);
    results.push(result);
    entries.push({
      id: result.id, seriesId: result.seriesId, path: `${result.id}.icsq`,
      hasLabels: result.labeled, t: result.t,
    });
  }
  const manifestPath = join(rc.outDir, 'manifest.tsv');
  writeFileSync(manifestPath, renderManifest(entries));
  writeFileSync(
    join(rc.outDir, 'export_config.json'),
    JSON.stringify(
      {
        encoder: enc.id, dim: enc.dim, fps: rc.fps, sample_phase_s: 0.0,
        batch_size: rc.batchSize, augment: rc.augment,
        augment_seed: rc.augment ? rc.augmentSeed : null,
      },
      null,
      2,
    ) + '\n',
  );
  return { manifestPath, results };
}
