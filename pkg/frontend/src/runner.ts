/**
 * Session orchestration: fetch the schedule, run all trials in order, post
 * each response, and sonify the server's verdict. Rendering, input, and
 * audio are injected so the loop is fully testable off-browser.
 */

import { SessionClient, type ParticipantFields, type UiTrial } from "./api.js";
import {
  DEFAULT_TIMINGS,
  TrialMachine,
  type Scheduler,
  type TrialState,
  type TrialTimings,
} from "./machine.js";

export interface RunnerIO {
  /** draw the stimulus (or clear it when `trial` is null) */
  render: (trial: UiTrial | null, state: TrialState) => void;
  /** verdict true/false, or null when the ack was recovered without one */
  playFeedback: (correct: boolean | null) => void;
  /** receives the machine accepting clicks, or null between trials */
  bindInput?: (machine: TrialMachine | null) => void;
  onProgress?: (done: number, total: number) => void;
}

export interface RunnerDeps {
  now: () => number;
  scheduler: Scheduler;
  timings?: TrialTimings;
}

export interface CompletedTrial {
  trial_id: string;
  chosen_side: "left" | "right";
  latency_ms: number;
  correct: boolean | null;
  visible_ms: number;
}

export async function runSession(
  client: SessionClient,
  participant: ParticipantFields,
  io: RunnerIO,
  deps: RunnerDeps,
): Promise<{ sessionId: string; trials: CompletedTrial[] }> {
  const timings = deps.timings ?? DEFAULT_TIMINGS;
  const session = await client.createSession(participant);
  const schedule = await client.fetchSchedule(session.session_id);
  const completed: CompletedTrial[] = [];

  for (let index = 0; index < schedule.trials.length; index += 1) {
    const trial = schedule.trials[index];
    const choice = await runTrial(trial, index, io, deps, timings);
    const ack = await client.postResponse(session.session_id, index, {
      trial_id: trial.trial_id,
      chosen_side: choice.side,
      latency_ms: choice.latencyMs,
    });
    io.playFeedback(ack.correct);
    completed.push({
      trial_id: trial.trial_id,
      chosen_side: choice.side,
      latency_ms: choice.latencyMs,
      correct: ack.correct,
      visible_ms: choice.visibleMs,
    });
    io.onProgress?.(index + 1, schedule.trials.length);
  }
  return { sessionId: session.session_id, trials: completed };
}

export interface TrialChoice {
  side: "left" | "right";
  latencyMs: number;
  visibleMs: number;
  machine: TrialMachine;
}

/**
 * Run one trial to the feedback phase and resolve with the accepted click.
 * The returned machine is still in its feedback phase; the caller decides
 * when to advance.
 */
export function runTrial(
  trial: UiTrial,
  index: number,
  io: RunnerIO,
  deps: RunnerDeps,
  timings: TrialTimings,
): Promise<TrialChoice> {
  return new Promise((resolve) => {
    const machine = new TrialMachine(
      index,
      trial.display_ms,
      timings,
      deps.now,
      deps.scheduler,
      {
        onPhase: (state) => {
          io.render(state.phase === "stimulus" ? trial : null, state);
        },
        onChoice: (side, latencyMs) => {
          io.bindInput?.(null);
          resolve({
            side,
            latencyMs,
            visibleMs: machine.visibleStimulusMs() ?? trial.display_ms,
            machine,
          });
        },
      },
    );
    io.bindInput?.(machine);
    machine.start();
  });
}
