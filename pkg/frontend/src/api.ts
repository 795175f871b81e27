/** Typed client for the shadow-removal session service. */

import { CanvasStroke, MaskInfo, strokePayload } from "./strokes.js";

export interface SessionInfo {
  id: string;
  width: number;
  height: number;
}

export interface RemovalOptions {
  noColorCorrect?: boolean;
  params?: Record<string, number>;
}

export interface RemovalInfo {
  resultUrl: string;
  cached: boolean;
}

export type ArtifactKind = "mask" | "fusion" | "sparse" | "dense" | "result" | "original";

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly conflicts: ReadonlyArray<[number, number]> = [],
  ) {
    super(message);
  }
}

async function raiseOnError(res: Response): Promise<void> {
  if (res.ok) {
    return;
  }
  let code = "http-error";
  let message = `request failed with ${res.status}`;
  let conflicts: [number, number][] = [];
  try {
    const body = await res.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
      conflicts = body.error.conflicts ?? [];
    }
  } catch {
    // non-JSON error body; keep defaults
  }
  throw new ServiceError(res.status, code, message, conflicts);
}

export interface UmbraClient {
  createSession(image: Blob, filename?: string): Promise<SessionInfo>;
  addStrokes(id: string, strokes: CanvasStroke[]): Promise<MaskInfo>;
  getStrokes(id: string): Promise<CanvasStroke[]>;
  runRemoval(id: string, options?: RemovalOptions): Promise<RemovalInfo>;
  artifactUrl(id: string, kind: ArtifactKind, revision?: number): string;
  fetchArtifact(id: string, kind: ArtifactKind): Promise<Blob>;
  deleteSession(id: string): Promise<void>;
}

export function makeClient(root = "", f: typeof fetch = fetch): UmbraClient {
  const base = root.replace(/\/$/, "");

  return {
    async createSession(image: Blob, filename = "upload.png"): Promise<SessionInfo> {
      const form = new FormData();
      form.append("image", image, filename);
      const res = await f(`${base}/sessions`, { method: "POST", body: form });
      await raiseOnError(res);
      const body = await res.json();
      return { id: body.id, width: body.width, height: body.height };
    },

    async addStrokes(id: string, strokes: CanvasStroke[]): Promise<MaskInfo> {
      const res = await f(`${base}/sessions/${id}/strokes`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: strokePayload(strokes),
      });
      await raiseOnError(res);
      const body = await res.json();
      return {
        maskUrl: body.mask_url,
        shadowPixelCount: body.shadow_pixel_count,
        revision: body.revision,
      };
    },

    async getStrokes(id: string): Promise<CanvasStroke[]> {
      const res = await f(`${base}/sessions/${id}/strokes`);
      await raiseOnError(res);
      const body = await res.json();
      return body.strokes.map((s: { label: string; radius: number; points: [number, number][] }) => ({
        label: s.label,
        radius: s.radius,
        points: s.points.map(([x, y]) => ({ x, y })),
      }));
    },

    async runRemoval(id: string, options: RemovalOptions = {}): Promise<RemovalInfo> {
      const payload: Record<string, unknown> = {};
      if (options.noColorCorrect) {
        payload.no_color_correct = true;
      }
      if (options.params) {
        payload.params = options.params;
      }
      const res = await f(`${base}/sessions/${id}/removal`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      });
      await raiseOnError(res);
      const body = await res.json();
      return { resultUrl: body.result_url, cached: Boolean(body.cached) };
    },

    artifactUrl(id: string, kind: ArtifactKind, revision?: number): string {
      const suffix = revision === undefined ? "" : `?rev=${revision}`;
      return `${base}/sessions/${id}/artifacts/${kind}${suffix}`;
    },

    async fetchArtifact(id: string, kind: ArtifactKind): Promise<Blob> {
      const res = await f(this.artifactUrl(id, kind));
      await raiseOnError(res);
      return res.blob();
    },

    async deleteSession(id: string): Promise<void> {
      const res = await f(`${base}/sessions/${id}`, { method: "DELETE" });
      await raiseOnError(res);
    },
  };
}

/** Poll `probe` every `intervalMs` until it resolves true or `timeoutMs` passes. */
export async function pollUntil(
  probe: () => Promise<boolean>,
  intervalMs = 500,
  timeoutMs = 120_000,
  sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
): Promise<boolean> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (await probe()) {
      return true;
    }
    await sleep(intervalMs);
  }
  return false;
}
