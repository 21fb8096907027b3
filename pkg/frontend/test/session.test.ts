import { describe, expect, it } from "vitest";

import { SessionClient, type UiTrial } from "../src/api.js";
import type { TrialMachine, TrialState } from "../src/machine.js";
import { runSession } from "../src/runner.js";
import { buildScene } from "../src/scene.js";
import { FakeTime, MockServer, settle } from "./fakes.js";

const PARTICIPANT = { participant_id: "kid7", age_days: 1700, gender: "male" };

describe("full session round trip", () => {
  it("runs 30 trials in order and exports cleanly", async () => {
    const server = new MockServer();
    const client = new SessionClient("", server.fetchFn, {
      retries: 2,
      backoffMs: 1,
      sleep: async () => {},
    });
    const fake = new FakeTime();

    let active: TrialMachine | null = null;
    const renderedCounts: Array<{ left: number; right: number }> = [];
    const visibleDurations: number[] = [];
    const feedback: Array<boolean | null> = [];

    const sessionPromise = runSession(
      client,
      PARTICIPANT,
      {
        render: (trial: UiTrial | null, state: TrialState) => {
          if (trial && state.phase === "stimulus") {
            const scene = buildScene(trial, 900, 520);
            renderedCounts.push({
              left: scene.left.dots.length,
              right: scene.right.dots.length,
            });
          }
        },
        playFeedback: (correct) => void feedback.push(correct),
        bindInput: (machine) => {
          active = machine;
        },
      },
      { now: () => fake.now, scheduler: fake },
    );

    for (let index = 0; index < 30; index += 1) {
      await settle(); // let the next trial begin
      fake.advance(500); // fixation
      fake.advance(2500); // stimulus window
      const machine = active as TrialMachine | null;
      expect(machine).not.toBeNull();
      visibleDurations.push(machine!.visibleStimulusMs()!);
      fake.advance(120); // think time
      expect(machine!.click(index % 2 === 0 ? "left" : "right")).toBe(true);
      await settle(); // let the POST settle
    }

    const result = await sessionPromise;
    expect(result.trials).toHaveLength(30);

    // stimulus visibility stayed in the 2500 +/- 50 ms acceptance band
    for (const ms of visibleDurations) {
      expect(Math.abs(ms - 2500)).toBeLessThanOrEqual(50);
    }

    // every stimulus rendered the scheduled counts (10 vs 5 in the mock)
    expect(renderedCounts).toHaveLength(30);
    for (const counts of renderedCounts) {
      expect(counts.left + counts.right).toBe(15);
      expect(Math.max(counts.left, counts.right)).toBe(10);
    }

    // responses landed in schedule order with the server's verdicts
    const session = [...server.sessions.values()][0];
    expect(session.responses.map((r) => r.trial_id)).toEqual(
      session.trials.map((t) => t.trial_id),
    );
    expect(feedback).toHaveLength(30);
    feedback.forEach((verdict, i) => {
      expect(verdict).toBe(session.responses[i].correct);
    });

    // latency is measured from stimulus onset (display 2500 + think 120)
    for (const response of session.responses) {
      expect(response.latency_ms).toBe(2620);
    }

    // the export mirrors the run: header plus 30 ordered rows
    const exportResp = await server.fetchFn(`/sessions/${result.sessionId}/export`);
    const lines = (await exportResp.text()).trim().split("\n");
    expect(lines).toHaveLength(31);
    expect(lines[0]).toContain("trial_id");
    expect(lines[1].startsWith("t00,kid7,")).toBe(true);
  });

  it("completion leaves no extra performance disclosure", async () => {
    const server = new MockServer();
    const client = new SessionClient("", server.fetchFn, {
      retries: 2,
      backoffMs: 1,
      sleep: async () => {},
    });
    const fake = new FakeTime();
    let active: TrialMachine | null = null;

    const done = runSession(
      client,
      PARTICIPANT,
      {
        render: () => {},
        playFeedback: () => {},
        bindInput: (machine) => {
          active = machine;
        },
      },
      { now: () => fake.now, scheduler: fake },
    );
    for (let i = 0; i < 30; i += 1) {
      await settle();
      fake.advance(3000);
      (active as TrialMachine | null)!.click("left");
      await settle();
    }
    const result = await done;
    // the result reports per-trial verdicts only; no aggregate is computed
    expect(Object.keys(result)).toEqual(["sessionId", "trials"]);
  });
});
