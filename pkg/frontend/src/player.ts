/**
 * Stimulus playback engine.
 *
 * Renders one vertically stacked video at a time, shows the swipe-down
 * indicator exactly at the payload's viewing duration (monotonic clock), and
 * on each accepted swipe injects a full-screen loading state for exactly the
 * payload's post-delay before the next video starts.  Swipes before the
 * indicator are ignored but logged, preserving the controlled exposure of
 * the design.  The player renders from the timing payload alone and never
 * recomputes delay patterns.
 */

import { now, waitUntil } from "./clock.js";
import type {
  InputKind,
  InteractionEvent,
  StimulusTimingPayload,
  VideoTiming,
} from "./types.js";

export class StimulusAbortedError extends Error {}

/** Pluggable media preloading; playback never starts on unready media. */
export interface MediaLoader {
  preload(videos: VideoTiming[]): Promise<void>;
}

/** Loads media through hidden <video> elements (real-study loader). */
export class HtmlVideoLoader implements MediaLoader {
  constructor(private readonly timeoutMs = 30000) {}

  preload(videos: VideoTiming[]): Promise<void> {
    const jobs = videos.map(
      (v) =>
        new Promise<void>((resolve, reject) => {
          const el = document.createElement("video");
          el.preload = "auto";
          const timer = setTimeout(
            () => reject(new Error(`preload timeout for ${v.media}`)),
            this.timeoutMs,
          );
          el.addEventListener("canplaythrough", () => {
            clearTimeout(timer);
            resolve();
          });
          el.addEventListener("error", () => {
            clearTimeout(timer);
            reject(new Error(`preload failed for ${v.media}`));
          });
          el.src = v.media;
          el.load();
        }),
    );
    return Promise.all(jobs).then(() => undefined);
  }
}

/** No-op loader for payloads whose media are placeholders (tests, dry runs). */
export class NullLoader implements MediaLoader {
  preload(): Promise<void> {
    return Promise.resolve();
  }
}

interface PlayerOptions {
  loader?: MediaLoader;
  /** Minimum pointer travel (px) for a drag to count as a swipe. */
  dragThresholdPx?: number;
}

export class StimulusPlayer {
  private readonly loader: MediaLoader;
  private readonly dragThresholdPx: number;
  private readonly videoArea: HTMLDivElement;
  private readonly indicator: HTMLDivElement;
  private readonly loadingOverlay: HTMLDivElement;

  private log: InteractionEvent[] = [];
  private swipeArmed = false;
  private currentVideo: string | undefined;
  private pendingSwipe: ((input: InputKind) => void) | undefined;
  private dragStartY: number | null = null;

  constructor(private readonly root: HTMLElement, options: PlayerOptions = {}) {
    this.loader = options.loader ?? new HtmlVideoLoader();
    this.dragThresholdPx = options.dragThresholdPx ?? 30;

    this.videoArea = document.createElement("div");
    this.videoArea.className = "sq-video-area";

    this.indicator = document.createElement("div");
    this.indicator.className = "sq-swipe-indicator";
    this.indicator.textContent = "↓ swipe down";
    this.indicator.hidden = true;

    this.loadingOverlay = document.createElement("div");
    this.loadingOverlay.className = "sq-loading-overlay";
    this.loadingOverlay.hidden = true;
    const spinner = document.createElement("div");
    spinner.className = "sq-spinner";
    this.loadingOverlay.appendChild(spinner);

    root.append(this.videoArea, this.indicator, this.loadingOverlay);
    this.bindInputs();
  }

  private record(type: InteractionEvent["type"],
                 extra: Partial<InteractionEvent> = {}): void {
    this.log.push({ t_ms: now(), type, video_id: this.currentVideo, ...extra });
  }

  private bindInputs(): void {
    this.root.addEventListener("wheel", (ev) => {
      if ((ev as WheelEvent).deltaY > 0) this.handleSwipe("wheel");
    });
    this.root.addEventListener("keydown", (ev) => {
      const key = (ev as KeyboardEvent).key;
      if (key === "ArrowDown" || key === "PageDown") this.handleSwipe("key");
    });
    this.root.addEventListener("pointerdown", (ev) => {
      this.dragStartY = (ev as PointerEvent).clientY;
    });
    this.root.addEventListener("pointerup", (ev) => {
      if (this.dragStartY === null) return;
      const travel = Math.abs((ev as PointerEvent).clientY - this.dragStartY);
      this.dragStartY = null;
      if (travel >= this.dragThresholdPx) this.handleSwipe("drag");
    });
  }

  private handleSwipe(input: InputKind): void {
    if (!this.swipeArmed) {
      this.record("swipe_ignored", { input });
      return;
    }
    this.swipeArmed = false;
    const resolve = this.pendingSwipe;
    this.pendingSwipe = undefined;
    this.record("swipe", { input });
    resolve?.(input);
  }

  /** Programmatic swipe used by scripted drivers; same gating as real input. */
  swipeNow(input: InputKind = "script"): void {
    this.handleSwipe(input);
  }

  get indicatorVisible(): boolean {
    return !this.indicator.hidden;
  }

  private showVideo(video: VideoTiming): void {
    this.videoArea.replaceChildren();
    const slide = document.createElement("div");
    slide.className = "sq-slide";
    slide.dataset.videoId = video.video_id;
    slide.dataset.media = video.media;
    this.videoArea.appendChild(slide);
  }

  private awaitSwipe(): Promise<InputKind> {
    return new Promise((resolve) => {
      this.pendingSwipe = resolve;
      this.swipeArmed = true;
    });
  }

  /**
   * Play one stimulus end to end and return the interaction log.
   * Rejects with StimulusAbortedError when media cannot be preloaded.
   */
  async play(payload: StimulusTimingPayload): Promise<InteractionEvent[]> {
    this.log = [];
    try {
      await this.loader.preload(payload.videos);
    } catch (err) {
      this.record("media_error", { detail: { message: String(err) } });
      throw new StimulusAbortedError(
        `stimulus ${payload.stimulus_id} aborted: ${String(err)}`,
      );
    }

    for (const video of payload.videos) {
      this.currentVideo = video.video_id;
      this.indicator.hidden = true;
      this.showVideo(video);
      const startMs = now();
      this.record("video_start", { detail: { planned_ms: video.viewing_duration_ms } });

      await waitUntil(startMs + video.viewing_duration_ms);
      this.indicator.hidden = false;
      this.record("indicator_shown");

      const input = await this.awaitSwipe();
      this.indicator.hidden = true;

      if (video.post_delay_ms > 0) {
        this.loadingOverlay.hidden = false;
        const loadingStart = now();
        this.record("loading_start", {
          input,
          detail: { planned_ms: video.post_delay_ms },
        });
        await waitUntil(loadingStart + video.post_delay_ms);
        this.loadingOverlay.hidden = true;
        this.record("loading_end");
      }
      this.record("video_end");
    }
    this.currentVideo = undefined;
    this.record("stimulus_done", { detail: { stimulus_id: payload.stimulus_id } });
    return this.log.slice();
  }
}
