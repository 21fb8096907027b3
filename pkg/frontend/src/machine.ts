/**
 * Per-trial phase machine driven by an injected monotonic clock and scheduler,
 * so tests can step time deterministically.
 *
 * Phases advance strictly: fixation -> stimulus -> response -> feedback ->
 * done. The stimulus phase targets the trial's display_ms; clicks register
 * only during the response phase, and latency is measured from stimulus onset.
 */

export type Phase = "fixation" | "stimulus" | "response" | "feedback" | "done";

export interface Scheduler {
  setTimeout(fn: () => void, ms: number): number;
  clearTimeout(id: number): void;
}

export interface TrialTimings {
  fixationMs: number;
  feedbackMs: number;
}

export const DEFAULT_TIMINGS: TrialTimings = { fixationMs: 500, feedbackMs: 500 };

export interface TrialState {
  phase: Phase;
  trialIndex: number;
  stimulusShownAt: number | null;
  stimulusHiddenAt: number | null;
  chosenSide: "left" | "right" | null;
  latencyMs: number | null;
}

export interface TrialHooks {
  onPhase?: (state: TrialState) => void;
  /** called exactly once per trial when a click is accepted */
  onChoice?: (side: "left" | "right", latencyMs: number) => void;
}

export class TrialMachine {
  private state: TrialState;
  private timer: number | null = null;

  constructor(
    trialIndex: number,
    private readonly displayMs: number,
    private readonly timings: TrialTimings,
    private readonly now: () => number,
    private readonly scheduler: Scheduler,
    private readonly hooks: TrialHooks = {},
  ) {
    this.state = {
      phase: "fixation",
      trialIndex,
      stimulusShownAt: null,
      stimulusHiddenAt: null,
      chosenSide: null,
      latencyMs: null,
    };
  }

  snapshot(): TrialState {
    return { ...this.state };
  }

  start(): void {
    this.emit();
    this.timer = this.scheduler.setTimeout(
      () => this.showStimulus(),
      this.timings.fixationMs,
    );
  }

  private showStimulus(): void {
    this.state.phase = "stimulus";
    this.state.stimulusShownAt = this.now();
    this.emit();
    this.timer = this.scheduler.setTimeout(() => this.hideStimulus(), this.displayMs);
  }

  private hideStimulus(): void {
    this.state.phase = "response";
    this.state.stimulusHiddenAt = this.now();
    this.emit();
  }

  /** Returns true when the click was accepted (response phase only). */
  click(side: "left" | "right"): boolean {
    if (this.state.phase !== "response" || this.state.stimulusShownAt === null) {
      return false;
    }
    this.state.phase = "feedback";
    this.state.chosenSide = side;
    this.state.latencyMs = this.now() - this.state.stimulusShownAt;
    this.emit();
    this.hooks.onChoice?.(side, this.state.latencyMs);
    return true;
  }

  /** Advance feedback -> done after the feedback sound has played. */
  finishFeedback(onDone: () => void): void {
    this.timer = this.scheduler.setTimeout(() => {
      this.state.phase = "done";
      this.emit();
      onDone();
    }, this.timings.feedbackMs);
  }

  cancel(): void {
    if (this.timer !== null) this.scheduler.clearTimeout(this.timer);
  }

  visibleStimulusMs(): number | null {
    if (this.state.stimulusShownAt === null || this.state.stimulusHiddenAt === null) {
      return null;
    }
    return this.state.stimulusHiddenAt - this.state.stimulusShownAt;
  }

  private emit(): void {
    this.hooks.onPhase?.(this.snapshot());
  }
}
