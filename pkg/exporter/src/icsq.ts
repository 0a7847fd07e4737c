/**
 * Binary embedding-sequence files ("ICSQ") and the tab-separated manifest
 * that indexes them. Layout, all integers little-endian:
 *
 *   bytes 0..3   magic "ICSQ"
 *   u32          version (1)
 *   u32 + utf-8  sequence id (length-prefixed)
 *   u32 + utf-8  series id (length-prefixed)
 *   f32          frames per second
 *   u32          T (frame count)
 *   u32          D (embedding dim)
 *   u8           has_labels (0/1)
 *   f32[T*D]     frame embeddings, row-major
 *   u8[T]        labels in {0,1}, present iff has_labels
 *   u32          CRC-32 of everything above
 */

import { readFileSync, writeFileSync } from 'node:fs';
import { basename } from 'node:path';

export const ICSQ_MAGIC = 'ICSQ';
export const ICSQ_VERSION = 1;
export const MANIFEST_HEADER = '# tseg-manifest v1';

export interface EmbeddingSequence {
  id: string;
  seriesId: string;
  fps: number;
  t: number;
  dim: number;
  /** Row-major (t * dim) frame embeddings. */
  embeddings: Float32Array;
  labels?: Uint8Array;
}

export class FormatError extends Error {}

const CRC_TABLE = buildCrcTable();

function buildCrcTable(): Uint32Array {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
}

/** CRC-32 (IEEE, same polynomial as zip/png) of a byte buffer. */
export function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function encodeSequence(seq: EmbeddingSequence): Buffer {
  if (seq.t < 1 || seq.dim < 1) {
    throw new FormatError(`sequence ${seq.id}: T and D must be >= 1`);
  }
  if (seq.embeddings.length !== seq.t * seq.dim) {
    throw new FormatError(
      `sequence ${seq.id}: embeddings length ${seq.embeddings.length} != T*D ${seq.t * seq.dim}`,
    );
  }
  if (seq.labels && seq.labels.length !== seq.t) {
    throw new FormatError(`sequence ${seq.id}: labels length != T`);
  }
  if (seq.labels && seq.labels.some((v) => v > 1)) {
    throw new FormatError(`sequence ${seq.id}: labels must be 0/1`);
  }
  const idBytes = Buffer.from(seq.id, 'utf-8');
  const seriesBytes = Buffer.from(seq.seriesId, 'utf-8');
  const bodyLen =
    4 + 4 + 4 + idBytes.length + 4 + seriesBytes.length + 4 + 8 + 1 +
    4 * seq.t * seq.dim + (seq.labels ? seq.t : 0);
  const out = Buffer.alloc(bodyLen + 4);
  let off = 0;
  out.write(ICSQ_MAGIC, off, 'ascii');
  off += 4;
  off = out.writeUInt32LE(ICSQ_VERSION, off);
  off = out.writeUInt32LE(idBytes.length, off);
  off += idBytes.copy(out, off);
  off = out.writeUInt32LE(seriesBytes.length, off);
  off += seriesBytes.copy(out, off);
  off = out.writeFloatLE(seq.fps, off);
  off = out.writeUInt32LE(seq.t, off);
  off = out.writeUInt32LE(seq.dim, off);
  off = out.writeUInt8(seq.labels ? 1 : 0, off);
  for (let i = 0; i < seq.embeddings.length; i++) {
    off = out.writeFloatLE(seq.embeddings[i], off);
  }
  if (seq.labels) {
    off += Buffer.from(seq.labels).copy(out, off);
  }
  out.writeUInt32LE(crc32(out.subarray(0, bodyLen)), bodyLen);
  return out;
}

export function decodeSequence(blob: Buffer, name = 'buffer'): EmbeddingSequence {
  if (blob.length < 8 || blob.toString('ascii', 0, 4) !== ICSQ_MAGIC) {
    throw new FormatError(`${name}: not an ICSQ file (bad magic)`);
  }
  const version = blob.readUInt32LE(4);
  if (version !== ICSQ_VERSION) {
    throw new FormatError(`${name}: unsupported ICSQ version ${version}`);
  }
  let off = 8;
  const take = (n: number): number => {
    if (off + n > blob.length) {
      throw new FormatError(`${name}: truncated ICSQ file`);
    }
    const at = off;
    off += n;
    return at;
  };
  const idLen = blob.readUInt32LE(take(4));
  const id = blob.toString('utf-8', take(idLen), off);
  const seriesLen = blob.readUInt32LE(take(4));
  const seriesId = blob.toString('utf-8', take(seriesLen), off);
  const fps = blob.readFloatLE(take(4));
  const t = blob.readUInt32LE(take(4));
  const dim = blob.readUInt32LE(take(4));
  const hasLabels = blob.readUInt8(take(1));
  if (hasLabels > 1) {
    throw new FormatError(`${name}: has_labels flag must be 0/1`);
  }
  const expected = off + 4 * t * dim + (hasLabels ? t : 0) + 4;
  if (blob.length !== expected) {
    throw new FormatError(`${name}: wrong size (${blob.length} bytes, expected ${expected})`);
  }
  const stored = blob.readUInt32LE(blob.length - 4);
  const actual = crc32(blob.subarray(0, blob.length - 4));
  if (stored !== actual) {
    throw new FormatError(
      `${name}: checksum mismatch (stored 0x${stored.toString(16)}, computed 0x${actual.toString(16)})`,
    );
  }
  const embeddings = new Float32Array(t * dim);
  for (let i = 0; i < embeddings.length; i++) {
    embeddings[i] = blob.readFloatLE(off + 4 * i);
  }
  off += 4 * t * dim;
  let labels: Uint8Array | undefined;
  if (hasLabels) {
    labels = new Uint8Array(blob.subarray(off, off + t));
    if (labels.some((v) => v > 1)) {
      throw new FormatError(`${name}: label bytes outside {0,1}`);
    }
  }
  return { id, seriesId, fps, t, dim, embeddings, labels };
}

export function writeSequenceFile(seq: EmbeddingSequence, path: string): void {
  writeFileSync(path, encodeSequence(seq));
}

export function readSequenceFile(path: string): EmbeddingSequence {
  return decodeSequence(readFileSync(path), basename(path));
}

export interface ManifestEntry {
  id: string;
  seriesId: string;
  /** Path relative to the manifest file. */
  path: string;
  hasLabels: boolean;
  t: number;
}

/** Render manifest lines in the layout the training side consumes. */
export function renderManifest(entries: ManifestEntry[]): string {
  const lines = [MANIFEST_HEADER];
  for (const e of entries) {
    for (const field of [e.id, e.seriesId]) {
      if (field.includes('\t') || field.includes('\n')) {
        throw new FormatError(`manifest field ${JSON.stringify(field)} contains tab/newline`);
      }
    }
    lines.push([e.id, e.seriesId, e.path, e.hasLabels ? '1' : '0', String(e.t), '-'].join('\t'));
  }
  return lines.join('\n') + '\n';
}
