/**
 * Coordinate plumbing between the scaled viewport and image pixel space.
 * Rectangles are sent to the service in image pixels no matter how the
 * canvas is scaled on screen.
 */

import type { BoxInfo, Rect } from './types.js';

export interface Viewport {
  /** CSS size of the displayed element */
  clientWidth: number;
  clientHeight: number;
  /** natural image size in pixels */
  imageWidth: number;
  imageHeight: number;
}

export function viewportToImage(
  vp: Viewport,
  clientX: number,
  clientY: number,
): { x: number; y: number } {
  return {
    x: (clientX * vp.imageWidth) / vp.clientWidth,
    y: (clientY * vp.imageHeight) / vp.clientHeight,
  };
}

export function imageToViewport(
  vp: Viewport,
  imageX: number,
  imageY: number,
): { x: number; y: number } {
  return {
    x: (imageX * vp.clientWidth) / vp.imageWidth,
    y: (imageY * vp.clientHeight) / vp.imageHeight,
  };
}

/** Drag rectangles may have negative extents; normalize to positive dims. */
export function normalizeRect(rect: Rect): Rect {
  return {
    x: Math.min(rect.x, rect.x + rect.w),
    y: Math.min(rect.y, rect.y + rect.h),
    w: Math.abs(rect.w),
    h: Math.abs(rect.h),
  };
}

export function rectIsUsable(rect: Rect, minSide = 2): boolean {
  const n = normalizeRect(rect);
  return n.w >= minSide && n.h >= minSide;
}

export function boxContains(box: BoxInfo, x: number, y: number): boolean {
  return (
    x >= box.cx - box.width / 2 &&
    x < box.cx + box.width / 2 &&
    y >= box.cy - box.height / 2 &&
    y < box.cy + box.height / 2
  );
}

/** Topmost (last drawn) box under the cursor, manual boxes included. */
export function hitTest(boxes: BoxInfo[], x: number, y: number): BoxInfo | null {
  for (let i = boxes.length - 1; i >= 0; i -= 1) {
    if (boxContains(boxes[i], x, y)) return boxes[i];
  }
  return null;
}

export function clampRectToImage(rect: Rect, width: number, height: number): Rect {
  const n = normalizeRect(rect);
  const clamp = (v: number, hi: number) => Math.max(0, Math.min(v, hi));
  const x0 = clamp(n.x, width);
  const y0 = clamp(n.y, height);
  const x1 = clamp(n.x + n.w, width);
  const y1 = clamp(n.y + n.h, height);
  return { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
}
