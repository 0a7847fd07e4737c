/** Shared fixtures: synthesized YUV4MPEG2 buffers, no codec needed. */

import { Buffer } from 'node:buffer';

export interface SolidFrame {
  y: number;
  cb: number;
  cr: number;
}

export interface Y4mSpec {
  width: number;
  height: number;
  fpsNum: number;
  fpsDen?: number;
  colorspace?: string;
  frames: SolidFrame[];
}

function planeSizes(cs: string, w: number, h: number): [number, number] {
  if (cs === 'mono') return [0, 0];
  if (cs.startsWith('444')) return [w, h];
  if (cs.startsWith('422')) return [w >> 1, h];
  return [w >> 1, h >> 1]; // 420 family
}

/** Build a .y4m buffer of solid-color frames. */
export function buildY4m(spec: Y4mSpec): Buffer {
  const cs = spec.colorspace ?? '420jpeg';
  const den = spec.fpsDen ?? 1;
  const [cw, chh] = planeSizes(cs, spec.width, spec.height);
  const header = Buffer.from(
    `YUV4MPEG2 W${spec.width} H${spec.height} F${spec.fpsNum}:${den} Ip A1:1 C${cs}\n`,
    'ascii',
  );
  const parts: Buffer[] = [header];
  for (const f of spec.frames) {
    parts.push(Buffer.from('FRAME\n', 'ascii'));
    parts.push(Buffer.alloc(spec.width * spec.height, f.y));
    if (cw > 0) {
      parts.push(Buffer.alloc(cw * chh, f.cb));
      parts.push(Buffer.alloc(cw * chh, f.cr));
    }
  }
  return Buffer.concat(parts);
}

/**
 * A 1 fps test video whose frame colors change every second, with a visually
 * distinct band for the first `introSeconds`. Distinct content per second
 * keeps encoder outputs distinguishable across time.
 */
export function secondsVideo(
  totalSeconds: number,
  introSeconds: number,
  width = 32,
  height = 32,
): Buffer {
  const frames: SolidFrame[] = [];
  for (let t = 0; t < totalSeconds; t++) {
    const intro = t < introSeconds;
    frames.push({
      y: 40 + ((t * 7) % 160),
      cb: intro ? 200 : 80,
      cr: intro ? 60 : 170,
    });
  }
  return buildY4m({ width, height, fpsNum: 1, frames });
}
