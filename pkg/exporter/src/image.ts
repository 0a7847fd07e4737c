/**
 * Frame preprocessing: bilinear resize to the encoder's input size and
 * channel-wise normalization with the usual ImageNet statistics, producing
 * CHW float tensors in the layout image encoders expect.
 */

export const TARGET_SIZE = 224;
export const IMAGENET_MEAN = [0.485, 0.456, 0.406] as const;
export const IMAGENET_STD = [0.229, 0.224, 0.225] as const;

/**
 * Bilinear resize of interleaved RGB. Sample positions use the half-pixel
 * convention: src = (dst + 0.5) * scale - 0.5, clamped at the borders.
 */
export function resizeBilinear(
  rgb: Uint8ClampedArray,
  srcW: number,
  srcH: number,
  dstW: number,
  dstH: number,
): Uint8ClampedArray {
  if (rgb.length !== srcW * srcH * 3) {
    throw new Error(`rgb length ${rgb.length} != ${srcW}x${srcH}x3`);
  }
  const out = new Uint8ClampedArray(dstW * dstH * 3);
  const scaleX = srcW / dstW;
  const scaleY = srcH / dstH;
  for (let dy = 0; dy < dstH; dy++) {
    const sy = Math.min(Math.max((dy + 0.5) * scaleY - 0.5, 0), srcH - 1);
    const y0 = Math.floor(sy);
    const y1 = Math.min(y0 + 1, srcH - 1);
    const fy = sy - y0;
    for (let dx = 0; dx < dstW; dx++) {
      const sx = Math.min(Math.max((dx + 0.5) * scaleX - 0.5, 0), srcW - 1);
      const x0 = Math.floor(sx);
      const x1 = Math.min(x0 + 1, srcW - 1);
      const fx = sx - x0;
      for (let c = 0; c < 3; c++) {
        const p00 = rgb[(y0 * srcW + x0) * 3 + c];
        const p01 = rgb[(y0 * srcW + x1) * 3 + c];
        const p10 = rgb[(y1 * srcW + x0) * 3 + c];
        const p11 = rgb[(y1 * srcW + x1) * 3 + c];
        const top = p00 + (p01 - p00) * fx;
        const bottom = p10 + (p11 - p10) * fx;
        out[(dy * dstW + dx) * 3 + c] = top + (bottom - top) * fy;
      }
    }
  }
  return out;
}

/** Interleaved RGB -> normalized CHW float32 ((p/255 - mean) / std). */
export function toNormalizedChw(rgb: Uint8ClampedArray, w: number, h: number): Float32Array {
  const out = new Float32Array(3 * w * h);
  for (let c = 0; c < 3; c++) {
    const mean = IMAGENET_MEAN[c];
    const std = IMAGENET_STD[c];
    for (let i = 0; i < w * h; i++) {
      out[c * w * h + i] = (rgb[i * 3 + c] / 255 - mean) / std;
    }
  }
  return out;
}

/** Full preprocessing for one frame: resize to 224x224, then normalize. */
export function preprocessFrame(rgb: Uint8ClampedArray, srcW: number, srcH: number): Float32Array {
  const resized =
    srcW === TARGET_SIZE && srcH === TARGET_SIZE
      ? rgb
      : resizeBilinear(rgb, srcW, srcH, TARGET_SIZE, TARGET_SIZE);
  return toNormalizedChw(resized, TARGET_SIZE, TARGET_SIZE);
}

/** Deterministic per-frame pixel jitter (horizontal flip, brightness,
 * contrast), used only when augmentation is switched on at export time. */
export function augmentRgb(
  rgb: Uint8ClampedArray,
  w: number,
  h: number,
  rand: () => number,
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(rgb.length);
  const flip = rand() < 0.5;
  const brightness = (rand() - 0.5) * 40; // +-20 levels
  const contrast = 1 + (rand() - 0.5) * 0.4; // 0.8..1.2
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const src = (y * w + (flip ? w - 1 - x : x)) * 3;
      const dst = (y * w + x) * 3;
      for (let c = 0; c < 3; c++) {
        out[dst + c] = (rgb[src + c] - 128) * contrast + 128 + brightness;
      }
    }
  }
  return out;
}
