/** Mask overlay pixels: tint where the mask is set, transparent elsewhere. */

export interface Tint {
  r: number;
  g: number;
  b: number;
  /** overlay opacity over the image, 0..1 */
  alpha: number;
}

export const DEFAULT_TINT: Tint = { r: 220, g: 40, b: 40, alpha: 0.4 };

/**
 * Build RGBA overlay bytes from decoded mask pixels (any channel > 127 counts
 * as shadow). `maskRgba` is the RGBA buffer of the mask PNG drawn 1:1.
 */
export function buildOverlay(maskRgba: Uint8ClampedArray, tint: Tint = DEFAULT_TINT) {
  const out = new Uint8ClampedArray(maskRgba.length);
  const a = Math.round(tint.alpha * 255);
  for (let i = 0; i < maskRgba.length; i += 4) {
    if (maskRgba[i] > 127) {
      out[i] = tint.r;
      out[i + 1] = tint.g;
      out[i + 2] = tint.b;
      out[i + 3] = a;
    }
  }
  return out;
}

/** Count of opaque overlay pixels (used to cross-check against the mask). */
export function overlayPixelCount(overlay: Uint8ClampedArray): number {
  let n = 0;
  for (let i = 3; i < overlay.length; i += 4) {
    if (overlay[i] > 0) {
      n += 1;
    }
  }
  return n;
}
