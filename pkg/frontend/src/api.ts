/** Thin client over the study service endpoints. */

import type { Playlist, Progress, StimulusTimingPayload } from "./types.js";

export type RatingOutcome = "accepted" | "duplicate";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class StudyApi {
  constructor(private readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async playlist(participantId?: string): Promise<Playlist> {
    const query = participantId ? `?participant=${encodeURIComponent(participantId)}` : "";
    const resp = await fetch(this.url(`/playlist${query}`));
    if (!resp.ok) throw new ApiError(resp.status, "playlist fetch failed");
    return (await resp.json()) as Playlist;
  }

  async stimulus(stimulusId: string): Promise<StimulusTimingPayload> {
    const resp = await fetch(this.url(`/stimulus/${encodeURIComponent(stimulusId)}`));
    if (!resp.ok) throw new ApiError(resp.status, `stimulus ${stimulusId} fetch failed`);
    return (await resp.json()) as StimulusTimingPayload;
  }

  /**
   * Submit one rating.  Resolves only once the server acknowledged the write
   * ("accepted") or reported the pair as already stored ("duplicate");
   * anything else throws so the caller can offer a retry.
   */
  async submitRating(
    participantId: string,
    stimulusId: string,
    score: number,
    timestamps?: { started_ms?: number; submitted_ms?: number },
  ): Promise<RatingOutcome> {
    const resp = await fetch(this.url("/rating"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        participant_id: participantId,
        stimulus_id: stimulusId,
        score,
        client_started_ms: timestamps?.started_ms,
        client_submitted_ms: timestamps?.submitted_ms,
      }),
    });
    if (resp.status === 200) return "accepted";
    if (resp.status === 409) return "duplicate";
    throw new ApiError(resp.status, `rating submission failed (${resp.status})`);
  }

  async progress(participantId: string): Promise<Progress> {
    const resp = await fetch(
      this.url(`/progress?participant=${encodeURIComponent(participantId)}`),
    );
    if (!resp.ok) throw new ApiError(resp.status, "progress fetch failed");
    return (await resp.json()) as Progress;
  }
}
