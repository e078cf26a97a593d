export interface VideoInfo {
  stem: string;
  frame_count: number;
  quality_state: 'pending' | 'signed_off' | 'skipped';
  revision: number;
}

export interface BoxInfo {
  box_id: string;
  frame: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
  active: boolean;
}

export interface UnblurOverride {
  id: string;
  stem: string;
  start_frame: number;
  end_frame: number;
  action: 'unblur';
  target_box_id: string;
  note?: string;
}

export interface ManualBlurOverride {
  id: string;
  stem: string;
  start_frame: number;
  end_frame: number;
  action: 'manual_blur';
  x: number;
  y: number;
  w: number;
  h: number;
  style?: 'gaussian' | 'solid';
  note?: string;
}

export type OverrideRecord = UnblurOverride | ManualBlurOverride;

export interface OverrideSetPayload {
  revision: number;
  overrides: OverrideRecord[];
}

export interface PatientReport {
  patient_track_id: number | null;
  scores: {
    track_id: number;
    presence_ratio: number;
    eligible: boolean;
    mean_center_distance: number | null;
    selected: boolean;
  }[];
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type ViewMode = 'raw' | 'rendered';
