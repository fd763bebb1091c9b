/**
 * Study orchestration: fetch the participant playlist, loop stimuli through
 * playback and rating, submit each score, and track progress.  Ratings are
 * never reordered or dropped: the app advances only after the server
 * acknowledged (or already held) the submission.
 */

import { StudyApi } from "./api.js";
import { NullLoader, StimulusAbortedError, StimulusPlayer } from "./player.js";
import type { MediaLoader } from "./player.js";
import { RatingPanel } from "./rating.js";
import { now } from "./clock.js";
import type { InteractionEvent } from "./types.js";

export interface RunResult {
  participantId: string;
  submitted: string[];
  aborted: string[];
  logs: Map<string, InteractionEvent[]>;
}

export interface AppOptions {
  loader?: MediaLoader;
  includeTraining?: boolean;
  /** Invoked whenever a new stimulus is about to play (progress hook). */
  onStimulus?: (stimulusId: string, index: number, total: number) => void;
}

export class StudyApp {
  readonly player: StimulusPlayer;
  readonly rating: RatingPanel;
  private readonly progressLabel: HTMLDivElement;

  constructor(
    root: HTMLElement,
    private readonly api: StudyApi,
    private readonly options: AppOptions = {},
  ) {
    const stage = document.createElement("div");
    stage.className = "sq-stage";
    stage.tabIndex = 0;
    root.appendChild(stage);
    this.player = new StimulusPlayer(stage, { loader: options.loader ?? new NullLoader() });
    this.rating = new RatingPanel(root);
    this.progressLabel = document.createElement("div");
    this.progressLabel.className = "sq-progress";
    root.appendChild(this.progressLabel);
  }

  async run(participantId?: string): Promise<RunResult> {
    const playlist = await this.api.playlist(participantId);
    const queue = [
      ...(this.options.includeTraining === false ? [] : playlist.training),
      ...playlist.stimuli,
    ];
    const result: RunResult = {
      participantId: playlist.participant_id,
      submitted: [],
      aborted: [],
      logs: new Map(),
    };

    for (let index = 0; index < queue.length; index += 1) {
      const stimulusId = queue[index];
      this.options.onStimulus?.(stimulusId, index, queue.length);
      this.progressLabel.textContent = `stimulus ${index + 1} / ${queue.length}`;
      const payload = await this.api.stimulus(stimulusId);

      let log: InteractionEvent[];
      const startedMs = now();
      try {
        log = await this.player.play(payload);
      } catch (err) {
        if (err instanceof StimulusAbortedError) {
          result.aborted.push(stimulusId);
          continue;
        }
        throw err;
      }
      result.logs.set(stimulusId, log);

      const score = await this.rating.collect();
      for (;;) {
        try {
          const outcome = await this.api.submitRating(
            result.participantId, stimulusId, score,
            { started_ms: startedMs, submitted_ms: now() },
          );
          if (outcome === "duplicate") {
            this.rating.showNotice("Already rated; moving on.");
          }
          result.submitted.push(stimulusId);
          break;
        } catch {
          await this.rating.askRetry("Submission failed. Check the connection and retry.");
        }
      }
    }
    this.progressLabel.textContent = "study complete, thank you";
    return result;
  }
}
