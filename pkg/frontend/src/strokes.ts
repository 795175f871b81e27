/** Stroke capture: decimation, bounds checks and an ordered upload queue. */

import { Point } from "./transform.js";

export type StrokeLabel = "shadow" | "lit";

export interface CanvasStroke {
  label: StrokeLabel;
  radius: number;
  /** image coordinates, not screen coordinates */
  points: Point[];
}

export const DECIMATE_DISTANCE = 2;

/** Drop points closer than `minDist` (image px) to the last kept point.
 * The final point is always kept so short final segments survive. */
export function decimate(points: Point[], minDist = DECIMATE_DISTANCE): Point[] {
  if (points.length <= 1) {
    return points.slice();
  }
  const kept: Point[] = [points[0]];
  for (let i = 1; i < points.length - 1; i++) {
    const last = kept[kept.length - 1];
    if (Math.hypot(points[i].x - last.x, points[i].y - last.y) >= minDist) {
      kept.push(points[i]);
    }
  }
  const tail = points[points.length - 1];
  const last = kept[kept.length - 1];
  if (tail.x !== last.x || tail.y !== last.y) {
    kept.push(tail);
  }
  return kept;
}

/** Clip a stroke against the image bounds; null when nothing remains. */
export function finalizeStroke(
  label: StrokeLabel,
  radius: number,
  rawPoints: Point[],
  imageW: number,
  imageH: number,
): CanvasStroke | null {
  const inside = rawPoints.filter(
    (p) => p.x >= 0 && p.y >= 0 && p.x <= imageW - 1 && p.y <= imageH - 1,
  );
  if (inside.length === 0) {
    return null;
  }
  return { label, radius, points: decimate(inside) };
}

export function strokePayload(strokes: CanvasStroke[]): string {
  return JSON.stringify({
    strokes: strokes.map((s) => ({
      label: s.label,
      radius: s.radius,
      points: s.points.map((p) => [p.x, p.y]),
    })),
  });
}

export interface MaskInfo {
  maskUrl: string;
  shadowPixelCount: number;
  revision: number;
}

type Uploader = (stroke: CanvasStroke) => Promise<MaskInfo>;

/** Serializes stroke uploads: at most one in flight, order preserved. */
export class StrokeQueue {
  private queue: CanvasStroke[] = [];
  private busy = false;

  constructor(
    private readonly upload: Uploader,
    private readonly onMask: (info: MaskInfo) => void,
    private readonly onError: (err: unknown) => void = () => undefined,
  ) {}

  enqueue(stroke: CanvasStroke): void {
    this.queue.push(stroke);
    void this.drain();
  }

  get pending(): number {
    return this.queue.length + (this.busy ? 1 : 0);
  }

  /** Resolves when everything queued so far has been sent. */
  async idle(): Promise<void> {
    while (this.busy || this.queue.length > 0) {
      await new Promise((r) => setTimeout(r, 1));
    }
  }

  private async drain(): Promise<void> {
    if (this.busy) {
      return;
    }
    this.busy = true;
    try {
      while (this.queue.length > 0) {
        const stroke = this.queue.shift()!;
        try {
          const info = await this.upload(stroke);
          this.onMask(info);
        } catch (err) {
          this.onError(err);
        }
      }
    } finally {
      this.busy = false;
    }
  }
}
