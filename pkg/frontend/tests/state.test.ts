import { describe, expect, it } from 'vitest';

import {
  acknowledgeRevision,
  beginRect,
  canSignOff,
  currentVideo,
  dragRect,
  initialState,
  navigateTo,
  selectBox,
  selectVideo,
  setView,
  stepFrame,
  toggleView,
} from '../src/state.js';
import type { VideoInfo } from '../src/types.js';

const videos: VideoInfo[] = [
  { stem: 'a', frame_count: 10, quality_state: 'pending', revision: 0 },
  { stem: 'b', frame_count: 5, quality_state: 'pending', revision: 3 },
];

describe('frame navigation', () => {
  it('starts on the first video at frame 0 in rendered view', () => {
    const s = initialState(videos);
    expect(s.currentStem).toBe('a');
    expect(s.frameIndex).toBe(0);
    expect(s.view).toBe('rendered');
  });

  it('clamps backward steps at frame 0 with a notice', () => {
    const s = stepFrame(initialState(videos), -1);
    expect(s.frameIndex).toBe(0);
    expect(s.notice).toMatch(/out of range/);
  });

  it('clamps jumps past the last frame', () => {
    const s = navigateTo(initialState(videos), 99);
    expect(s.frameIndex).toBe(9);
    expect(s.notice).toMatch(/out of range/);
  });

  it('jumps to the last frame without a notice', () => {
    const s = navigateTo(initialState(videos), 9);
    expect(s.frameIndex).toBe(9);
    expect(s.notice).toBeNull();
  });

  it('discards the pending edit on navigation', () => {
    let s = beginRect(initialState(videos), 5, 5);
    s = dragRect(s, 25, 20);
    expect(s.pendingRect).toEqual({ x: 5, y: 5, w: 20, h: 15 });
    s = stepFrame(s, 1);
    expect(s.pendingRect).toBeNull();
  });

  it('discards the selected box on navigation', () => {
    let s = selectBox(initialState(videos), 'track0');
    s = navigateTo(s, 3);
    expect(s.selectedBoxId).toBeNull();
  });

  it('switching video resets the frame and adopts its revision', () => {
    const s = selectVideo(initialState(videos), 'b');
    expect(s.frameIndex).toBe(0);
    expect(s.revision).toBe(3);
    expect(currentVideo(s)?.stem).toBe('b');
  });
});

describe('view toggling', () => {
  it('toggles between raw and rendered', () => {
    const s = initialState(videos);
    expect(toggleView(s).view).toBe('raw');
    expect(toggleView(toggleView(s)).view).toBe('rendered');
  });

  it('records which videos were opened in rendered view', () => {
    let s = initialState(videos); // starts rendered on 'a'
    expect(s.viewedRendered.has('a')).toBe(true);
    expect(s.viewedRendered.has('b')).toBe(false);
    s = setView(selectVideo(s, 'b'), 'rendered');
    expect(s.viewedRendered.has('b')).toBe(true);
  });

  it('raw-only visits do not count as reviewed', () => {
    let s = setView(initialState(videos), 'raw');
    s = selectVideo(s, 'b'); // lands in raw view
    expect(s.viewedRendered.has('b')).toBe(false);
  });
});

describe('sign-off guard', () => {
  it('is disabled until every video was seen rendered', () => {
    let s = initialState(videos);
    expect(canSignOff(s)).toBe(false);
    s = selectVideo(s, 'b');
    expect(canSignOff(s)).toBe(true);
  });

  it('is disabled with no videos', () => {
    expect(canSignOff(initialState([]))).toBe(false);
  });
});

describe('revision handling', () => {
  it('acknowledging a revision clears the pending edit and updates the video', () => {
    let s = beginRect(initialState(videos), 1, 1);
    s = acknowledgeRevision(s, 7);
    expect(s.revision).toBe(7);
    expect(s.pendingRect).toBeNull();
    expect(currentVideo(s)?.revision).toBe(7);
  });
});
