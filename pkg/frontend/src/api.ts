/**
 * Typed client for the review service. The client never renders pixels
 * itself: every displayed image is fetched from the service, so what the
 * reviewer sees always matches persisted state after a refresh.
 */

import type {
  BoxInfo,
  OverrideRecord,
  OverrideSetPayload,
  PatientReport,
  VideoInfo,
  ViewMode,
} from './types.js';

export class StaleRevisionError extends Error {}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function checkedJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = `${res.status} ${res.statusText}`;
    try {
      const body = await res.json();
      if (body && typeof body.detail === 'string') detail = body.detail;
    } catch {
      /* non-json error body */
    }
    if (res.status === 409) throw new StaleRevisionError(detail);
    throw new ApiError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

export class ReviewApi {
  constructor(private base: string = '') {}

  listVideos(): Promise<VideoInfo[]> {
    return fetch(`${this.base}/videos`).then((r) => checkedJson<VideoInfo[]>(r));
  }

  /** Image URL for a frame; `revision` only busts stale browser caches. */
  frameUrl(stem: string, index: number, view: ViewMode, revision: number): string {
    return `${this.base}/videos/${encodeURIComponent(stem)}/frames/${index}?view=${view}&rev=${revision}`;
  }

  async frameBytes(stem: string, index: number, view: ViewMode): Promise<ArrayBuffer> {
    const res = await fetch(this.frameUrl(stem, index, view, Date.now()));
    if (!res.ok) throw new ApiError(res.status, `frame fetch failed (${res.status})`);
    return res.arrayBuffer();
  }

  getBoxes(stem: string, frame: number): Promise<BoxInfo[]> {
    return fetch(
      `${this.base}/videos/${encodeURIComponent(stem)}/boxes?frame=${frame}`,
    ).then((r) => checkedJson<BoxInfo[]>(r));
  }

  getOverrides(stem: string): Promise<OverrideSetPayload> {
    return fetch(`${this.base}/videos/${encodeURIComponent(stem)}/overrides`).then((r) =>
      checkedJson<OverrideSetPayload>(r),
    );
  }

  async putOverrides(
    stem: string,
    overrides: OverrideRecord[],
    baseRevision: number,
  ): Promise<number> {
    const res = await fetch(`${this.base}/videos/${encodeURIComponent(stem)}/overrides`, {
      method: 'PUT',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ base_revision: baseRevision, overrides }),
    });
    const body = await checkedJson<{ revision: number }>(res);
    return body.revision;
  }

  signOff(stem: string): Promise<{ stem: string; quality_state: string }> {
    return fetch(`${this.base}/videos/${encodeURIComponent(stem)}/signoff`, {
      method: 'POST',
    }).then((r) => checkedJson(r));
  }

  getPatient(stem: string): Promise<PatientReport> {
    return fetch(`${this.base}/videos/${encodeURIComponent(stem)}/patient`).then((r) =>
      checkedJson<PatientReport>(r),
    );
  }

  setPatient(stem: string, trackId: number): Promise<{ patient_track_id: number }> {
    return fetch(`${this.base}/videos/${encodeURIComponent(stem)}/patient`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ track_id: trackId }),
    }).then((r) => checkedJson(r));
  }
}

let counter = 0;

/** Unique-enough override id: readable, sortable, collision-free locally. */
export function freshOverrideId(prefix: string): string {
  counter += 1;
  return `${prefix}-${Date.now().toString(36)}-${counter}`;
}

/** Append an unblur edit for an existing box over a frame range. */
export function buildUnblur(
  stem: string,
  boxId: string,
  startFrame: number,
  endFrame: number,
): OverrideRecord {
  return {
    id: freshOverrideId('unblur'),
    stem,
    start_frame: Math.min(startFrame, endFrame),
    end_frame: Math.max(startFrame, endFrame),
    action: 'unblur',
    target_box_id: boxId,
  };
}

/** Append a manual blur rectangle (image pixel space) over a frame range. */
export function buildManualBlur(
  stem: string,
  rect: { x: number; y: number; w: number; h: number },
  startFrame: number,
  endFrame: number,
  style?: 'gaussian' | 'solid',
): OverrideRecord {
  return {
    id: freshOverrideId('manual'),
    stem,
    start_frame: Math.min(startFrame, endFrame),
    end_frame: Math.max(startFrame, endFrame),
    action: 'manual_blur',
    x: rect.x,
    y: rect.y,
    w: rect.w,
    h: rect.h,
    ...(style ? { style } : {}),
  };
}
