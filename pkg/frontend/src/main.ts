/** Browser wiring: form, canvas rendering, click zones, session loop. */

import { SessionClient, type UiTrial } from "./api.js";
import { FeedbackSounds } from "./audio.js";
import type { TrialMachine, TrialState } from "./machine.js";
import { runSession } from "./runner.js";
import { buildScene } from "./scene.js";

function mustGet<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const canvas = mustGet<HTMLCanvasElement>("stage");
const status = mustGet<HTMLDivElement>("status");
const form = mustGet<HTMLFormElement>("setup");
const sounds = new FeedbackSounds();

let currentMachine: TrialMachine | null = null;

function draw(trial: UiTrial | null, state: TrialState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (state.phase === "fixation") {
    ctx.fillStyle = "#555";
    ctx.font = "48px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("+", canvas.width / 2, canvas.height / 2);
    return;
  }
  if (trial && state.phase === "stimulus") {
    const scene = buildScene(trial, canvas.width, canvas.height);
    for (const panel of [scene.left, scene.right]) {
      ctx.strokeStyle = "#999";
      ctx.strokeRect(panel.offsetX, panel.offsetY, panel.width, panel.height);
      ctx.fillStyle = "#333";
      ctx.font = "16px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(
        panel.character,
        panel.offsetX + panel.width / 2,
        panel.offsetY + panel.height + 14,
      );
      ctx.fillStyle = "#1d4ed8";
      for (const dot of panel.dots) {
        ctx.beginPath();
        ctx.arc(panel.offsetX + dot.x, panel.offsetY + dot.y, dot.r, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
    return;
  }
  if (state.phase === "response") {
    ctx.fillStyle = "#333";
    ctx.font = "24px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(
      "Which side had more dots? Click left or right.",
      canvas.width / 2,
      canvas.height / 2,
    );
  }
}

canvas.addEventListener("click", (event) => {
  if (!currentMachine) return;
  const rect = canvas.getBoundingClientRect();
  const side = event.clientX - rect.left < rect.width / 2 ? "left" : "right";
  currentMachine.click(side);
});

document.addEventListener("keydown", (event) => {
  if (!currentMachine) return;
  if (event.key === "ArrowLeft") currentMachine.click("left");
  if (event.key === "ArrowRight") currentMachine.click("right");
});

form.addEventListener("submit", async (event) => {
  event.preventDefault();
  form.style.display = "none";
  canvas.style.display = "block";
  const fields = new FormData(form);
  const client = new SessionClient("");
  try {
    const result = await runSession(
      client,
      {
        participant_id: String(fields.get("participant_id") || "anon"),
        age_days: Number(fields.get("age_days") || 1825),
        gender: String(fields.get("gender") || "other"),
      },
      {
        render: draw,
        playFeedback: (correct) => sounds.play(correct),
        bindInput: (machine) => {
          currentMachine = machine;
        },
        onProgress: (done, total) => {
          status.textContent = `Trial ${done} of ${total}`;
        },
      },
      { now: () => performance.now(), scheduler: window },
    );
    status.textContent = `All done — thank you for playing! (${result.trials.length} trials)`;
    const ctx = canvas.getContext("2d");
    ctx?.clearRect(0, 0, canvas.width, canvas.height);
  } catch (err) {
    status.textContent = `Something went wrong: ${String(err)}`;
  }
});
