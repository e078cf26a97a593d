/**
 * DOM controller: wires the canvas, keyboard and edit controls to the
 * pure session state and the service API. All mutations are optimistic
 * only in UI affordances; displayed pixels always come back from the
 * service after the edit is acknowledged.
 */

import { ReviewApi, StaleRevisionError, buildManualBlur, buildUnblur } from './api.js';
import {
  SessionState,
  acknowledgeRevision,
  beginRect,
  canSignOff,
  clearPendingEdit,
  currentVideo,
  dragRect,
  initialState,
  markSignedOff,
  navigateTo,
  selectBox,
  selectVideo,
  setNotice,
  toggleView,
} from './state.js';
import {
  clampRectToImage,
  hitTest,
  normalizeRect,
  rectIsUsable,
  viewportToImage,
} from './overlay.js';
import type { BoxInfo, OverrideSetPayload, Rect, ViewMode } from './types.js';

const PREFETCH_RADIUS = 2;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export class ReviewApp {
  private state: SessionState;
  private boxes: BoxInfo[] = [];
  private overrides: OverrideSetPayload = { revision: 0, overrides: [] };
  private image = new Image();
  private busy = false;
  private prefetched = new Map<string, HTMLImageElement>();

  private canvas = el<HTMLCanvasElement>('frame-canvas');
  private videoSelect = el<HTMLSelectElement>('video-select');
  private frameInput = el<HTMLInputElement>('frame-input');
  private frameSlider = el<HTMLInputElement>('frame-slider');
  private viewToggle = el<HTMLButtonElement>('view-toggle');
  private rangeStart = el<HTMLInputElement>('range-start');
  private rangeEnd = el<HTMLInputElement>('range-end');
  private unblurBtn = el<HTMLButtonElement>('unblur-btn');
  private blurBtn = el<HTMLButtonElement>('blur-btn');
  private styleSelect = el<HTMLSelectElement>('style-select');
  private signoffBtn = el<HTMLButtonElement>('signoff-btn');
  private noticeBar = el<HTMLDivElement>('notice');
  private boxList = el<HTMLUListElement>('box-list');
  private overrideList = el<HTMLUListElement>('override-list');
  private patientSelect = el<HTMLSelectElement>('patient-select');

  constructor(private api: ReviewApi) {
    this.state = initialState([]);
  }

  async start(): Promise<void> {
    const videos = await this.api.listVideos();
    this.state = initialState(videos);
    this.videoSelect.innerHTML = '';
    for (const v of videos) {
      const opt = document.createElement('option');
      opt.value = v.stem;
      opt.textContent = `${v.stem} (${v.frame_count} frames)`;
      this.videoSelect.appendChild(opt);
    }
    this.bindEvents();
    await this.refreshAll();
  }

  private bindEvents(): void {
    this.videoSelect.addEventListener('change', () => {
      this.apply(selectVideo(this.state, this.videoSelect.value));
      void this.refreshAll();
    });
    this.frameInput.addEventListener('change', () => {
      this.goTo(Number(this.frameInput.value));
    });
    this.frameSlider.addEventListener('input', () => {
      this.goTo(Number(this.frameSlider.value));
    });
    this.viewToggle.addEventListener('click', () => {
      this.apply(toggleView(this.state));
      void this.refreshFrame();
    });
    this.unblurBtn.addEventListener('click', () => void this.submitUnblur());
    this.blurBtn.addEventListener('click', () => void this.submitManualBlur());
    this.signoffBtn.addEventListener('click', () => void this.submitSignOff());
    this.patientSelect.addEventListener('change', () => void this.submitPatient());

    window.addEventListener('keydown', (event) => {
      if (event.target instanceof HTMLInputElement || event.target instanceof HTMLSelectElement) {
        return;
      }
      switch (event.key) {
        case 'ArrowLeft':
          event.preventDefault();
          this.goTo(this.state.frameIndex - 1);
          break;
        case 'ArrowRight':
          event.preventDefault();
          this.goTo(this.state.frameIndex + 1);
          break;
        case 'Home':
          event.preventDefault();
          this.goTo(0);
          break;
        case 'End': {
          event.preventDefault();
          const video = currentVideo(this.state);
          if (video) this.goTo(video.frame_count - 1);
          break;
        }
        case 'v':
          event.preventDefault();
          this.apply(toggleView(this.state));
          void this.refreshFrame();
          break;
      }
    });

    this.canvas.addEventListener('mousedown', (event) => {
      const p = this.eventToImage(event);
      const hit = hitTest(this.boxes, p.x, p.y);
      if (hit) {
        this.apply(selectBox(this.state, hit.box_id));
        this.drawOverlay();
      } else {
        this.apply(beginRect(this.state, p.x, p.y));
      }
    });
    this.canvas.addEventListener('mousemove', (event) => {
      if (!this.state.pendingRect || !(event.buttons & 1)) return;
      const p = this.eventToImage(event);
      this.apply(dragRect(this.state, p.x, p.y));
      this.drawOverlay();
    });
    this.canvas.addEventListener('mouseup', () => {
      if (this.state.pendingRect && !rectIsUsable(this.state.pendingRect)) {
        this.apply(clearPendingEdit(this.state));
      }
      this.drawOverlay();
    });
  }

  private apply(next: SessionState): void {
    this.state = next;
    this.syncControls();
  }

  private goTo(target: number): void {
    this.apply(navigateTo(this.state, target));
    void this.refreshFrame();
    void this.refreshBoxes();
  }

  private eventToImage(event: MouseEvent): { x: number; y: number } {
    const rect = this.canvas.getBoundingClientRect();
    return viewportToImage(
      {
        clientWidth: rect.width,
        clientHeight: rect.height,
        imageWidth: this.canvas.width,
        imageHeight: this.canvas.height,
      },
      event.clientX - rect.left,
      event.clientY - rect.top,
    );
  }

  // -- rendering ------------------------------------------------------

  private frameKey(stem: string, index: number, view: ViewMode): string {
    return `${stem}:${index}:${view}:${this.state.revision}`;
  }

  private loadImage(url: string): Promise<HTMLImageElement> {
    return new Promise((resolve, reject) => {
      const img = new Image();
      img.onload = () => resolve(img);
      img.onerror = () => reject(new Error(`failed to load ${url}`));
      img.src = url;
    });
  }

  private async refreshFrame(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video) return;
    const { frameIndex, view, revision } = this.state;
    const key = this.frameKey(video.stem, frameIndex, view);
    let img = this.prefetched.get(key);
    if (!img) {
      img = await this.loadImage(this.api.frameUrl(video.stem, frameIndex, view, revision));
    }
    this.image = img;
    this.canvas.width = img.naturalWidth;
    this.canvas.height = img.naturalHeight;
    this.drawOverlay();
    this.prefetchNeighbors(video.stem, frameIndex, view);
  }

  private prefetchNeighbors(stem: string, index: number, view: ViewMode): void {
    const video = currentVideo(this.state);
    if (!video) return;
    for (let d = -PREFETCH_RADIUS; d <= PREFETCH_RADIUS; d += 1) {
      const i = index + d;
      if (d === 0 || i < 0 || i >= video.frame_count) continue;
      const key = this.frameKey(stem, i, view);
      if (this.prefetched.has(key)) continue;
      void this.loadImage(this.api.frameUrl(stem, i, view, this.state.revision)).then((img) => {
        this.prefetched.set(key, img);
        if (this.prefetched.size > 16) {
          const oldest = this.prefetched.keys().next().value;
          if (oldest) this.prefetched.delete(oldest);
        }
      });
    }
  }

  private drawOverlay(): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    ctx.drawImage(this.image, 0, 0);
    for (const box of this.boxes) {
      ctx.lineWidth = 2;
      ctx.strokeStyle =
        box.box_id === this.state.selectedBoxId ? '#ff9800' : box.active ? '#4caf50' : '#9e9e9e';
      ctx.setLineDash(box.active ? [] : [6, 4]);
      ctx.strokeRect(box.cx - box.width / 2, box.cy - box.height / 2, box.width, box.height);
      ctx.setLineDash([]);
    }
    if (this.state.pendingRect) {
      const r = normalizeRect(this.state.pendingRect);
      ctx.strokeStyle = '#e91e63';
      ctx.lineWidth = 2;
      ctx.strokeRect(r.x, r.y, r.w, r.h);
    }
  }

  // -- state -> controls ----------------------------------------------

  private syncControls(): void {
    const video = currentVideo(this.state);
    const max = video ? video.frame_count - 1 : 0;
    this.frameInput.value = String(this.state.frameIndex);
    this.frameInput.max = String(max);
    this.frameSlider.max = String(max);
    this.frameSlider.value = String(this.state.frameIndex);
    this.viewToggle.textContent = this.state.view === 'rendered' ? 'view: rendered' : 'view: raw';
    this.noticeBar.textContent = this.state.notice ?? '';
    this.noticeBar.classList.toggle('visible', Boolean(this.state.notice));
    this.unblurBtn.disabled = this.busy || !this.state.selectedBoxId;
    this.blurBtn.disabled =
      this.busy || !this.state.pendingRect || !rectIsUsable(this.state.pendingRect);
    this.signoffBtn.disabled =
      this.busy || !canSignOff(this.state) || video?.quality_state !== 'pending';
    this.signoffBtn.title = canSignOff(this.state)
      ? 'mark the quality check complete'
      : 'open every video in rendered view first';
  }

  private async refreshBoxes(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video) return;
    this.boxes = await this.api.getBoxes(video.stem, this.state.frameIndex);
    this.boxList.innerHTML = '';
    for (const box of this.boxes) {
      const li = document.createElement('li');
      li.textContent = `${box.box_id} ${box.active ? '' : '(unblurred)'}`;
      li.className = box.box_id === this.state.selectedBoxId ? 'selected' : '';
      li.addEventListener('click', () => {
        this.apply(selectBox(this.state, box.box_id));
        void this.refreshBoxes();
        this.drawOverlay();
      });
      this.boxList.appendChild(li);
    }
    this.drawOverlay();
  }

  private async refreshOverrides(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video) return;
    this.overrides = await this.api.getOverrides(video.stem);
    this.overrideList.innerHTML = '';
    for (const ov of this.overrides.overrides) {
      const li = document.createElement('li');
      const label =
        ov.action === 'unblur'
          ? `unblur ${ov.target_box_id} @ ${ov.start_frame}-${ov.end_frame}`
          : `manual blur @ ${ov.start_frame}-${ov.end_frame}`;
      li.textContent = label;
      const remove = document.createElement('button');
      remove.textContent = 'delete';
      remove.addEventListener('click', () => void this.deleteOverride(ov.id));
      li.appendChild(remove);
      this.overrideList.appendChild(li);
    }
  }

  private async refreshPatient(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video) return;
    try {
      const report = await this.api.getPatient(video.stem);
      this.patientSelect.innerHTML = '';
      for (const row of report.scores) {
        const opt = document.createElement('option');
        opt.value = String(row.track_id);
        const distance =
          row.mean_center_distance === null ? 'n/a' : row.mean_center_distance.toFixed(1);
        opt.textContent = `track ${row.track_id} (presence ${(row.presence_ratio * 100).toFixed(0)}%, center dist ${distance})`;
        opt.selected = row.track_id === report.patient_track_id;
        this.patientSelect.appendChild(opt);
      }
    } catch {
      this.patientSelect.innerHTML = '<option>n/a</option>';
    }
  }

  private async refreshAll(): Promise<void> {
    await Promise.all([
      this.refreshFrame(),
      this.refreshBoxes(),
      this.refreshOverrides(),
      this.refreshPatient(),
    ]);
    this.syncControls();
  }

  // -- edits ------------------------------------------------------------

  private frameRange(): { start: number; end: number } {
    const start = Number(this.rangeStart.value || this.state.frameIndex);
    const end = Number(this.rangeEnd.value || this.state.frameIndex);
    return { start, end };
  }

  /** PUT the new override list; the rendered view refreshes to the new
   * revision before controls re-enable. */
  private async submitOverrides(records: OverrideSetPayload['overrides']): Promise<void> {
    const video = currentVideo(this.state);
    if (!video) return;
    this.busy = true;
    this.syncControls();
    try {
      const revision = await this.api.putOverrides(video.stem, records, this.state.revision);
      this.prefetched.clear();
      this.apply(acknowledgeRevision(this.state, revision));
      await this.refreshFrame();
      await this.refreshBoxes();
      await this.refreshOverrides();
    } catch (err) {
      if (err instanceof StaleRevisionError) {
        this.apply(setNotice(this.state, 'edits changed elsewhere; reloading current state'));
        await this.reloadRevision();
      } else {
        this.apply(setNotice(this.state, err instanceof Error ? err.message : String(err)));
      }
    } finally {
      this.busy = false;
      this.syncControls();
    }
  }

  private async reloadRevision(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video) return;
    const current = await this.api.getOverrides(video.stem);
    this.apply(acknowledgeRevision(this.state, current.revision));
    await this.refreshAll();
  }

  private async submitUnblur(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video || !this.state.selectedBoxId) return;
    const { start, end } = this.frameRange();
    const record = buildUnblur(video.stem, this.state.selectedBoxId, start, end);
    await this.submitOverrides([...this.overrides.overrides, record]);
  }

  private async submitManualBlur(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video || !this.state.pendingRect) return;
    const rect: Rect = clampRectToImage(
      this.state.pendingRect,
      this.canvas.width,
      this.canvas.height,
    );
    const { start, end } = this.frameRange();
    const style = this.styleSelect.value === 'default' ? undefined : (this.styleSelect.value as 'gaussian' | 'solid');
    const record = buildManualBlur(video.stem, rect, start, end, style);
    await this.submitOverrides([...this.overrides.overrides, record]);
  }

  private async deleteOverride(id: string): Promise<void> {
    await this.submitOverrides(this.overrides.overrides.filter((o) => o.id !== id));
  }

  private async submitSignOff(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video) return;
    this.busy = true;
    this.syncControls();
    try {
      await this.api.signOff(video.stem);
      this.apply(markSignedOff(this.state, video.stem));
    } catch (err) {
      this.apply(setNotice(this.state, err instanceof Error ? err.message : String(err)));
    } finally {
      this.busy = false;
      this.syncControls();
    }
  }

  private async submitPatient(): Promise<void> {
    const video = currentVideo(this.state);
    if (!video) return;
    try {
      await this.api.setPatient(video.stem, Number(this.patientSelect.value));
      this.prefetched.clear();
      await this.refreshFrame();
      await this.refreshBoxes();
    } catch (err) {
      this.apply(setNotice(this.state, err instanceof Error ? err.message : String(err)));
    }
  }
}
