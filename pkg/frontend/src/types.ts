/** Shared types mirroring the study service's JSON payloads. */

export interface VideoTiming {
  media: string;
  video_id: string;
  viewing_duration_ms: number;
  post_delay_ms: number;
}

/** Timing payload for one stimulus; mirrors the design-file serialization. */
export interface StimulusTimingPayload {
  version: string;
  stimulus_id: string;
  videos: VideoTiming[];
}

export interface Playlist {
  version: string;
  participant_id: string;
  training: string[];
  stimuli: string[];
  total: number;
}

export interface Progress {
  version: string;
  participant_id: string;
  rated: number;
  total: number;
}

export type InputKind = "wheel" | "drag" | "key" | "script";

export type InteractionType =
  | "video_start"
  | "indicator_shown"
  | "swipe"
  | "swipe_ignored"
  | "loading_start"
  | "loading_end"
  | "video_end"
  | "stimulus_done"
  | "media_error";

export interface InteractionEvent {
  t_ms: number;
  type: InteractionType;
  video_id?: string;
  input?: InputKind;
  detail?: Record<string, unknown>;
}

/** ACR scale: label shown to the participant and the submitted score. */
export const ACR_OPTIONS: ReadonlyArray<{ label: string; score: number }> = [
  { label: "Excellent", score: 5 },
  { label: "Good", score: 4 },
  { label: "Fair", score: 3 },
  { label: "Poor", score: 2 },
  { label: "Bad", score: 1 },
];
