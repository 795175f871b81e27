/** Zoom/pan view state mapping between screen and image coordinates. */

export interface ViewTransform {
  /** image pixels are drawn `scale` screen pixels wide */
  scale: number;
  /** screen position of the image origin */
  offsetX: number;
  offsetY: number;
}

export interface Point {
  x: number;
  y: number;
}

export function identityTransform(): ViewTransform {
  return { scale: 1, offsetX: 0, offsetY: 0 };
}

export function screenToImage(t: ViewTransform, p: Point): Point {
  return { x: (p.x - t.offsetX) / t.scale, y: (p.y - t.offsetY) / t.scale };
}

export function imageToScreen(t: ViewTransform, p: Point): Point {
  return { x: p.x * t.scale + t.offsetX, y: p.y * t.scale + t.offsetY };
}

/** Zoom by `factor` keeping the screen point `anchor` on the same image pixel. */
export function zoomAt(t: ViewTransform, factor: number, anchor: Point): ViewTransform {
  const scale = clampScale(t.scale * factor);
  const applied = scale / t.scale;
  return {
    scale,
    offsetX: anchor.x - (anchor.x - t.offsetX) * applied,
    offsetY: anchor.y - (anchor.y - t.offsetY) * applied,
  };
}

export function pan(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { scale: t.scale, offsetX: t.offsetX + dx, offsetY: t.offsetY + dy };
}

function clampScale(s: number): number {
  return Math.min(Math.max(s, 0.125), 32);
}

/** Fit an image inside a viewport, centered. */
export function fitTransform(imageW: number, imageH: number, viewW: number, viewH: number): ViewTransform {
  const scale = Math.min(viewW / imageW, viewH / imageH);
  return {
    scale,
    offsetX: (viewW - imageW * scale) / 2,
    offsetY: (viewH - imageH * scale) / 2,
  };
}
