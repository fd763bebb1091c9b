/**
 * Monotonic-clock scheduling.  Playback timing is driven by performance.now()
 * deadlines, never by media-element progress events, so indicator and loading
 * durations stay faithful to the payload even when media stutters.
 */

export const now = (): number => performance.now();

/** Resolve as close as possible to the absolute monotonic deadline. */
export async function waitUntil(deadlineMs: number): Promise<void> {
  for (;;) {
    const remaining = deadlineMs - now();
    if (remaining <= 0) return;
    // Coarse sleep, then spin-correct with short sleeps near the deadline;
    // keeps the wake-up error well under the 100 ms study budget.
    const chunk = remaining > 40 ? remaining - 20 : Math.min(remaining, 4);
    await new Promise((resolve) => setTimeout(resolve, chunk));
  }
}

export async function waitFor(durationMs: number): Promise<void> {
  return waitUntil(now() + durationMs);
}
