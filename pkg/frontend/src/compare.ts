/** Before/after comparison split. The slider reveals the original on the
 * left of the split column and the result on the right; 0 means pure result,
 * 1 pure original. Pixel coordinates stay consistent across the split. */

export function splitColumn(slider: number, width: number): number {
  const t = Math.min(Math.max(slider, 0), 1);
  return Math.round(t * width);
}

export interface SplitRegions {
  original: { x: number; width: number };
  result: { x: number; width: number };
}

export function splitRegions(slider: number, width: number): SplitRegions {
  const split = splitColumn(slider, width);
  return {
    original: { x: 0, width: split },
    result: { x: split, width: width - split },
  };
}
