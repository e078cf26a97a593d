/**
 * Pure review-session state and its transitions. Keeping these free of
 * DOM and network makes every navigation rule unit-testable: frame
 * clamping, pending-edit discard on navigation, and the sign-off guard
 * (every video must have been opened in rendered view at least once).
 */

import type { Rect, VideoInfo, ViewMode } from './types.js';

export interface SessionState {
  videos: VideoInfo[];
  currentStem: string | null;
  frameIndex: number;
  view: ViewMode;
  pendingRect: Rect | null;
  selectedBoxId: string | null;
  revision: number;
  viewedRendered: Set<string>;
  notice: string | null;
}

export function initialState(videos: VideoInfo[]): SessionState {
  const state: SessionState = {
    videos,
    currentStem: null,
    frameIndex: 0,
    view: 'rendered',
    pendingRect: null,
    selectedBoxId: null,
    revision: 0,
    viewedRendered: new Set(),
    notice: null,
  };
  return videos.length ? selectVideo(state, videos[0].stem) : state;
}

export function currentVideo(state: SessionState): VideoInfo | null {
  return state.videos.find((v) => v.stem === state.currentStem) ?? null;
}

function markViewed(state: SessionState): Set<string> {
  const viewed = new Set(state.viewedRendered);
  if (state.view === 'rendered' && state.currentStem) viewed.add(state.currentStem);
  return viewed;
}

export function selectVideo(state: SessionState, stem: string): SessionState {
  const video = state.videos.find((v) => v.stem === stem);
  if (!video) return { ...state, notice: `unknown video ${stem}` };
  const next: SessionState = {
    ...state,
    currentStem: stem,
    frameIndex: 0,
    pendingRect: null,
    selectedBoxId: null,
    revision: video.revision,
    notice: null,
  };
  next.viewedRendered = markViewed(next);
  return next;
}

/** Absolute jump; out-of-range targets clamp with a visible notice.
 * Navigation discards any unsaved pending edit. */
export function navigateTo(state: SessionState, target: number): SessionState {
  const video = currentVideo(state);
  if (!video) return state;
  const max = video.frame_count - 1;
  const clamped = Math.min(Math.max(target, 0), max);
  return {
    ...state,
    frameIndex: clamped,
    pendingRect: null,
    selectedBoxId: null,
    notice: clamped !== target ? `frame ${target} is out of range (0..${max})` : null,
  };
}

export function stepFrame(state: SessionState, delta: number): SessionState {
  return navigateTo(state, state.frameIndex + delta);
}

export function setView(state: SessionState, view: ViewMode): SessionState {
  const next = { ...state, view, notice: null };
  next.viewedRendered = markViewed(next);
  return next;
}

export function toggleView(state: SessionState): SessionState {
  return setView(state, state.view === 'raw' ? 'rendered' : 'raw');
}

export function beginRect(state: SessionState, x: number, y: number): SessionState {
  return { ...state, pendingRect: { x, y, w: 0, h: 0 }, selectedBoxId: null };
}

export function dragRect(state: SessionState, x: number, y: number): SessionState {
  if (!state.pendingRect) return state;
  const { x: x0, y: y0 } = state.pendingRect;
  return { ...state, pendingRect: { x: x0, y: y0, w: x - x0, h: y - y0 } };
}

export function clearPendingEdit(state: SessionState): SessionState {
  return { ...state, pendingRect: null, selectedBoxId: null };
}

export function selectBox(state: SessionState, boxId: string | null): SessionState {
  return { ...state, selectedBoxId: boxId, pendingRect: null };
}

export function acknowledgeRevision(state: SessionState, revision: number): SessionState {
  return {
    ...state,
    revision,
    pendingRect: null,
    selectedBoxId: null,
    videos: state.videos.map((v) =>
      v.stem === state.currentStem ? { ...v, revision } : v,
    ),
  };
}

export function setNotice(state: SessionState, notice: string | null): SessionState {
  return { ...state, notice };
}

export function markSignedOff(state: SessionState, stem: string): SessionState {
  return {
    ...state,
    videos: state.videos.map((v) =>
      v.stem === stem ? { ...v, quality_state: 'signed_off' } : v,
    ),
  };
}

/** The reviewer must actually have looked: sign-off stays disabled until
 * every video has been opened in rendered view. */
export function canSignOff(state: SessionState): boolean {
  return (
    state.videos.length > 0 &&
    state.videos.every((v) => state.viewedRendered.has(v.stem))
  );
}

export function allSignedOff(state: SessionState): boolean {
  return state.videos.every((v) => v.quality_state !== 'pending');
}
