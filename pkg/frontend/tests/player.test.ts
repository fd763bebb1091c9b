import { beforeEach, describe, expect, it } from "vitest";

import { NullLoader, StimulusAbortedError, StimulusPlayer } from "../src/player.js";
import type { InteractionEvent, StimulusTimingPayload } from "../src/types.js";

function payload(overrides: Partial<StimulusTimingPayload> = {}): StimulusTimingPayload {
  return {
    version: "swipeqoe-study/1",
    stimulus_id: "test_stim",
    videos: [
      { media: "/media/a.mp4", video_id: "a", viewing_duration_ms: 120, post_delay_ms: 200 },
      { media: "/media/b.mp4", video_id: "b", viewing_duration_ms: 100, post_delay_ms: 0 },
    ],
    ...overrides,
  };
}

/** Swipe as soon as the indicator appears (polling the player state). */
function autoSwiper(player: StimulusPlayer, input: "wheel" | "key" | "drag" | "script" = "script") {
  const timer = setInterval(() => {
    if (player.indicatorVisible) player.swipeNow(input);
  }, 5);
  return () => clearInterval(timer);
}

function spans(log: InteractionEvent[], startType: string, endType: string): number[] {
  const starts = log.filter((e) => e.type === startType).map((e) => e.t_ms);
  const ends = log.filter((e) => e.type === endType).map((e) => e.t_ms);
  return starts.map((s, i) => ends[i] - s);
}

describe("StimulusPlayer", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "";
    root = document.createElement("div");
    document.body.appendChild(root);
  });

  it("shows the indicator at the viewing duration and times the loading screen", async () => {
    const player = new StimulusPlayer(root, { loader: new NullLoader() });
    const stop = autoSwiper(player);
    const log = await player.play(payload());
    stop();

    const indicatorDelays = spans(log, "video_start", "indicator_shown");
    expect(indicatorDelays).toHaveLength(2);
    expect(Math.abs(indicatorDelays[0] - 120)).toBeLessThan(100);
    expect(Math.abs(indicatorDelays[1] - 100)).toBeLessThan(100);

    const loading = spans(log, "loading_start", "loading_end");
    expect(loading).toHaveLength(1);
    expect(Math.abs(loading[0] - 200)).toBeLessThan(100);
  });

  it("skips the loading screen entirely for zero delays", async () => {
    const player = new StimulusPlayer(root, { loader: new NullLoader() });
    const stop = autoSwiper(player);
    const log = await player.play(payload({
      videos: [
        { media: "m", video_id: "a", viewing_duration_ms: 60, post_delay_ms: 0 },
        { media: "m", video_id: "b", viewing_duration_ms: 60, post_delay_ms: 0 },
      ],
    }));
    stop();
    expect(log.some((e) => e.type === "loading_start")).toBe(false);
    // next video starts promptly after the swipe
    const swipe = log.find((e) => e.type === "swipe" && e.video_id === "a")!;
    const nextStart = log.find((e) => e.type === "video_start" && e.video_id === "b")!;
    expect(nextStart.t_ms - swipe.t_ms).toBeLessThan(100);
  });

  it("ignores but logs swipes before the indicator", async () => {
    const player = new StimulusPlayer(root, { loader: new NullLoader() });
    const early = setTimeout(() => player.swipeNow("wheel"), 5);
    const stop = autoSwiper(player);
    const log = await player.play(payload({
      videos: [{ media: "m", video_id: "a", viewing_duration_ms: 150, post_delay_ms: 0 }],
    }));
    stop();
    clearTimeout(early);
    const ignored = log.filter((e) => e.type === "swipe_ignored");
    expect(ignored.length).toBeGreaterThanOrEqual(1);
    const indicator = log.find((e) => e.type === "indicator_shown")!;
    const swipe = log.find((e) => e.type === "swipe")!;
    expect(swipe.t_ms).toBeGreaterThanOrEqual(indicator.t_ms);
  });

  it("accepts wheel, keyboard, and drag inputs and logs the input kind", async () => {
    const stage = root;
    const player = new StimulusPlayer(stage, { loader: new NullLoader(), dragThresholdPx: 10 });
    const kinds: string[] = [];
    const timer = setInterval(() => {
      if (!player.indicatorVisible) return;
      const kind = ["wheel", "key", "drag"][kinds.length % 3];
      kinds.push(kind);
      if (kind === "wheel") {
        stage.dispatchEvent(new WheelEvent("wheel", { deltaY: 120 }));
      } else if (kind === "key") {
        stage.dispatchEvent(new KeyboardEvent("keydown", { key: "ArrowDown" }));
      } else {
        // jsdom has no PointerEvent; MouseEvent carries the clientY we read
        stage.dispatchEvent(new MouseEvent("pointerdown", { clientY: 300 }));
        stage.dispatchEvent(new MouseEvent("pointerup", { clientY: 100 }));
      }
    }, 5);
    const log = await player.play(payload({
      videos: [
        { media: "m", video_id: "a", viewing_duration_ms: 40, post_delay_ms: 0 },
        { media: "m", video_id: "b", viewing_duration_ms: 40, post_delay_ms: 0 },
        { media: "m", video_id: "c", viewing_duration_ms: 40, post_delay_ms: 0 },
      ],
    }));
    clearInterval(timer);
    const inputs = log.filter((e) => e.type === "swipe").map((e) => e.input);
    expect(inputs).toEqual(["wheel", "key", "drag"]);
  });

  it("aborts and reports when media cannot be preloaded", async () => {
    const failingLoader = { preload: () => Promise.reject(new Error("404 media")) };
    const player = new StimulusPlayer(root, { loader: failingLoader });
    await expect(player.play(payload())).rejects.toThrow(StimulusAbortedError);
  });

  it("renders from the payload alone (no recomputation of delays)", async () => {
    const player = new StimulusPlayer(root, { loader: new NullLoader() });
    const stop = autoSwiper(player);
    // Deliberately inconsistent with any design-table pattern; the player
    // must honor it verbatim.
    const log = await player.play(payload({
      videos: [
        { media: "m", video_id: "a", viewing_duration_ms: 50, post_delay_ms: 130 },
        { media: "m", video_id: "b", viewing_duration_ms: 50, post_delay_ms: 70 },
        { media: "m", video_id: "c", viewing_duration_ms: 50, post_delay_ms: 0 },
      ],
    }));
    stop();
    const loading = spans(log, "loading_start", "loading_end");
    expect(loading).toHaveLength(2);
    expect(Math.abs(loading[0] - 130)).toBeLessThan(100);
    expect(Math.abs(loading[1] - 70)).toBeLessThan(100);
  });
});
