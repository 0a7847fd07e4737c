/**
 * Minimal YUV4MPEG2 (.y4m) reader: uncompressed planar YCbCr with a plain
 * text header, so videos are decodable without any native codec. Frames
 * convert to RGB with the JFIF full-range BT.601 matrix.
 */

import { readFileSync } from 'node:fs';

export class VideoError extends Error {}

export interface VideoInfo {
  width: number;
  height: number;
  fpsNum: number;
  fpsDen: number;
  colorspace: string;
  frameCount: number;
  durationS: number;
}

const SIGNATURE = 'YUV4MPEG2';

interface PlaneLayout {
  chromaW: (w: number) => number;
  chromaH: (h: number) => number;
}

const LAYOUTS: Record<string, PlaneLayout> = {
  '420': { chromaW: (w) => w >> 1, chromaH: (h) => h >> 1 },
  '422': { chromaW: (w) => w >> 1, chromaH: (h) => h },
  '444': { chromaW: (w) => w, chromaH: (h) => h },
  mono: { chromaW: () => 0, chromaH: () => 0 },
};

function layoutFor(colorspace: string): PlaneLayout {
  const key = colorspace === 'mono' ? 'mono' : colorspace.slice(0, 3);
  const layout = LAYOUTS[key];
  if (!layout) {
    throw new VideoError(`unsupported colorspace C${colorspace}`);
  }
  return layout;
}

export class Y4mVideo {
  readonly info: VideoInfo;
  private readonly data: Buffer;
  private readonly frameOffsets: number[];
  private readonly frameBytes: number;

  private constructor(data: Buffer, info: VideoInfo, offsets: number[], frameBytes: number) {
    this.data = data;
    this.info = info;
    this.frameOffsets = offsets;
    this.frameBytes = frameBytes;
  }

  static fromFile(path: string): Y4mVideo {
    let data: Buffer;
    try {
      data = readFileSync(path);
    } catch (err) {
      throw new VideoError(`cannot read ${path}: ${(err as Error).message}`);
    }
    return Y4mVideo.fromBuffer(data, path);
  }

  static fromBuffer(data: Buffer, name = 'buffer'): Y4mVideo {
    const headerEnd = data.indexOf(0x0a);
    if (headerEnd < 0 || data.toString('ascii', 0, SIGNATURE.length) !== SIGNATURE) {
      throw new VideoError(`${name}: not a YUV4MPEG2 stream`);
    }
    let width = 0;
    let height = 0;
    let fpsNum = 0;
    let fpsDen = 1;
    let colorspace = '420';
    for (const param of data.toString('ascii', SIGNATURE.length, headerEnd).trim().split(/\s+/)) {
      if (!param) continue;
      const value = param.slice(1);
      switch (param[0]) {
        case 'W': width = parseInt(value, 10); break;
        case 'H': height = parseInt(value, 10); break;
        case 'F': {
          const [num, den] = value.split(':');
          fpsNum = parseInt(num, 10);
          fpsDen = parseInt(den, 10);
          break;
        }
        case 'C': colorspace = value; break;
        default: break; // interlace/aspect/extensions are irrelevant here
      }
    }
    if (!(width > 0) || !(height > 0) || !(fpsNum > 0) || !(fpsDen > 0)) {
      throw new VideoError(`${name}: header is missing W/H/F fields`);
    }
    const layout = layoutFor(colorspace);
    const frameBytes =
      width * height + 2 * layout.chromaW(width) * layout.chromaH(height);

    const offsets: number[] = [];
    let pos = headerEnd + 1;
    while (pos < data.length) {
      const lineEnd = data.indexOf(0x0a, pos);
      if (lineEnd < 0 || data.toString('ascii', pos, pos + 5) !== 'FRAME') {
        throw new VideoError(`${name}: malformed FRAME header at byte ${pos}`);
      }
      if (lineEnd + 1 + frameBytes > data.length) {
        throw new VideoError(`${name}: truncated frame ${offsets.length}`);
      }
      offsets.push(lineEnd + 1);
      pos = lineEnd + 1 + frameBytes;
    }
    if (offsets.length === 0) {
      throw new VideoError(`${name}: no frames`);
    }
    const info: VideoInfo = {
      width, height, fpsNum, fpsDen, colorspace,
      frameCount: offsets.length,
      durationS: (offsets.length * fpsDen) / fpsNum,
    };
    return new Y4mVideo(data, info, offsets, frameBytes);
  }

  /** Interleaved RGB (width * height * 3) for one frame. */
  frameRgb(index: number): Uint8ClampedArray {
    if (index < 0 || index >= this.frameOffsets.length) {
      throw new VideoError(`frame ${index} out of range [0, ${this.frameOffsets.length})`);
    }
    const { width: w, height: h, colorspace } = this.info;
    const layout = layoutFor(colorspace);
    const cw = layout.chromaW(w);
    const ch = layout.chromaH(h);
    const base = this.frameOffsets[index];
    const yPlane = this.data.subarray(base, base + w * h);
    const cbPlane = this.data.subarray(base + w * h, base + w * h + cw * ch);
    const crPlane = this.data.subarray(base + w * h + cw * ch, base + this.frameBytes);

    const rgb = new Uint8ClampedArray(w * h * 3);
    const mono = cw === 0;
    const sx = mono ? 0 : w / cw;
    const sy = mono ? 0 : h / ch;
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        const luma = yPlane[y * w + x];
        let cb = 128;
        let cr = 128;
        if (!mono) {
          const ci = Math.floor(y / sy) * cw + Math.floor(x / sx);
          cb = cbPlane[ci];
          cr = crPlane[ci];
        }
        const o = (y * w + x) * 3;
        rgb[o] = luma + 1.402 * (cr - 128);
        rgb[o + 1] = luma - 0.344136 * (cb - 128) - 0.714136 * (cr - 128);
        rgb[o + 2] = luma + 1.772 * (cb - 128);
      }
    }
    return rgb;
  }
}
