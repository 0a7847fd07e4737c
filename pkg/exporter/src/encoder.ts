/**
 * Pluggable frame encoders: normalized CHW tensors in, fixed-dim embedding
 * vectors out. Encoders register by identifier so the export pipeline stays
 * independent of any specific model runtime.
 *
 * The built-in default is a deterministic stand-in with the same interface
 * and output shape as a 512-d image encoder: it average-pools each channel
 * to a 16x16 grid and projects the pooled values through a fixed seeded
 * random matrix, then L2-normalizes. It needs no model weights, runs
 * anywhere, and is sensitive to frame content, which is what the format
 * and pipeline tests require of it.
 */

import { TARGET_SIZE } from './image.js';

export interface FrameEncoder {
  readonly id: string;
  /** Output embedding dimension (D in the sequence files). */
  readonly dim: number;
  /** Encode a batch of normalized CHW frames (3 * 224 * 224 each). */
  encode(batch: Float32Array[]): Float32Array[];
}

export class EncoderError extends Error {}

const registry = new Map<string, () => FrameEncoder>();

export function registerEncoder(id: string, factory: () => FrameEncoder): void {
  registry.set(id, factory);
}

export function getEncoder(id: string): FrameEncoder {
  const factory = registry.get(id);
  if (!factory) {
    throw new EncoderError(
      `unknown encoder ${JSON.stringify(id)}; registered: ${[...registry.keys()].join(', ')}`,
    );
  }
  return factory();
}

export function listEncoders(): string[] {
  return [...registry.keys()].sort();
}

/** FNV-1a, folded to a 32-bit PRNG seed. */
function hashString(s: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: tiny deterministic PRNG, uniform in [0, 1). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const POOL_GRID = 16;

class PooledProjectionEncoder implements FrameEncoder {
  readonly id: string;
  readonly dim: number;
  private readonly projection: Float32Array; // dim x (3 * POOL_GRID^2)

  constructor(id: string, dim: number) {
    this.id = id;
    this.dim = dim;
    const inDim = 3 * POOL_GRID * POOL_GRID;
    const rand = mulberry32(hashString(id));
    this.projection = new Float32Array(dim * inDim);
    const scale = 1 / Math.sqrt(inDim);
    for (let i = 0; i < this.projection.length; i++) {
      // Box-Muller; two uniforms per normal keeps the draw order fixed.
      const u = Math.max(rand(), 1e-12);
      const v = rand();
      this.projection[i] = Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v) * scale;
    }
  }

  encode(batch: Float32Array[]): Float32Array[] {
    return batch.map((chw) => this.encodeOne(chw));
  }

  private encodeOne(chw: Float32Array): Float32Array {
    if (chw.length !== 3 * TARGET_SIZE * TARGET_SIZE) {
      throw new EncoderError(
        `frame tensor has ${chw.length} values, expected ${3 * TARGET_SIZE * TARGET_SIZE}`,
      );
    }
    const cell = TARGET_SIZE / POOL_GRID;
    const pooled = new Float32Array(3 * POOL_GRID * POOL_GRID);
    for (let c = 0; c < 3; c++) {
      const plane = c * TARGET_SIZE * TARGET_SIZE;
      for (let gy = 0; gy < POOL_GRID; gy++) {
        for (let gx = 0; gx < POOL_GRID; gx++) {
          let sum = 0;
          for (let y = gy * cell; y < (gy + 1) * cell; y++) {
            for (let x = gx * cell; x < (gx + 1) * cell; x++) {
              sum += chw[plane + y * TARGET_SIZE + x];
            }
          }
          pooled[c * POOL_GRID * POOL_GRID + gy * POOL_GRID + gx] = sum / (cell * cell);
        }
      }
    }
    const out = new Float32Array(this.dim);
    const inDim = pooled.length;
    for (let d = 0; d < this.dim; d++) {
      let acc = 0;
      const row = d * inDim;
      for (let i = 0; i < inDim; i++) {
        acc += this.projection[row + i] * pooled[i];
      }
      out[d] = acc;
    }
    let norm = 0;
    for (let d = 0; d < this.dim; d++) {
      norm += out[d] * out[d];
    }
    norm = Math.sqrt(norm) || 1;
    for (let d = 0; d < this.dim; d++) {
      out[d] /= norm;
    }
    return out;
  }
}

export const DEFAULT_ENCODER = 'pooled-projection-512';

registerEncoder(DEFAULT_ENCODER, () => new PooledProjectionEncoder(DEFAULT_ENCODER, 512));
registerEncoder('pooled-projection-64', () => new PooledProjectionEncoder('pooled-projection-64', 64));
