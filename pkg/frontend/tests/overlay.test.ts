import { describe, expect, it } from 'vitest';

import {
  boxContains,
  clampRectToImage,
  hitTest,
  imageToViewport,
  normalizeRect,
  rectIsUsable,
  viewportToImage,
} from '../src/overlay.js';
import type { BoxInfo } from '../src/types.js';

const vp = { clientWidth: 320, clientHeight: 180, imageWidth: 640, imageHeight: 360 };

function box(id: string, cx: number, cy: number, w: number, h: number): BoxInfo {
  return { box_id: id, frame: 0, cx, cy, width: w, height: h, active: true };
}

describe('coordinate transforms', () => {
  it('maps viewport clicks to image pixels under scaling', () => {
    expect(viewportToImage(vp, 160, 90)).toEqual({ x: 320, y: 180 });
    expect(viewportToImage(vp, 0, 0)).toEqual({ x: 0, y: 0 });
  });

  it('round-trips viewport -> image -> viewport', () => {
    const p = viewportToImage(vp, 123, 45);
    const back = imageToViewport(vp, p.x, p.y);
    expect(back.x).toBeCloseTo(123, 10);
    expect(back.y).toBeCloseTo(45, 10);
  });

  it('rect coordinates are sent in image space regardless of display scale', () => {
    const zoomed = { ...vp, clientWidth: 1280, clientHeight: 720 };
    expect(viewportToImage(zoomed, 640, 360)).toEqual({ x: 320, y: 180 });
  });
});

describe('rectangles', () => {
  it('normalizes negative drags', () => {
    expect(normalizeRect({ x: 50, y: 60, w: -20, h: -10 })).toEqual({
      x: 30,
      y: 50,
      w: 20,
      h: 10,
    });
  });

  it('rejects degenerate drags', () => {
    expect(rectIsUsable({ x: 5, y: 5, w: 1, h: 30 })).toBe(false);
    expect(rectIsUsable({ x: 5, y: 5, w: 10, h: 10 })).toBe(true);
  });

  it('clamps to the image bounds', () => {
    expect(clampRectToImage({ x: -10, y: 350, w: 30, h: 30 }, 640, 360)).toEqual({
      x: 0,
      y: 350,
      w: 20,
      h: 10,
    });
  });
});

describe('hit testing', () => {
  it('finds the box under the cursor', () => {
    const boxes = [box('track0', 100, 100, 40, 40), box('track1', 300, 100, 40, 40)];
    expect(hitTest(boxes, 100, 100)?.box_id).toBe('track0');
    expect(hitTest(boxes, 301, 95)?.box_id).toBe('track1');
    expect(hitTest(boxes, 500, 500)).toBeNull();
  });

  it('prefers the topmost (last listed) box on overlap', () => {
    const boxes = [box('under', 100, 100, 60, 60), box('over', 110, 100, 60, 60)];
    expect(hitTest(boxes, 110, 100)?.box_id).toBe('over');
  });

  it('uses half-open box membership', () => {
    const b = box('b', 100, 100, 40, 40);
    expect(boxContains(b, 80, 80)).toBe(true);
    expect(boxContains(b, 120, 100)).toBe(false);
  });
});
