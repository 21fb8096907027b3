/**
 * Pure scene construction: map a trial's two dot arrays onto side-by-side
 * viewport panels with uniform scaling, plus placeholder character labels.
 */

import type { UiTrial } from "./api.js";

export interface DrawDot {
  x: number;
  y: number;
  r: number;
}

export interface Panel {
  dots: DrawDot[];
  /** top-left corner of the panel inside the viewport */
  offsetX: number;
  offsetY: number;
  width: number;
  height: number;
  character: string;
}

export interface TrialScene {
  left: Panel;
  right: Panel;
  scale: number;
}

const GUTTER = 16;
export const CHARACTERS: [string, string] = ["Char A", "Char B"];

export function buildScene(
  trial: UiTrial,
  viewportWidth: number,
  viewportHeight: number,
): TrialScene {
  const panelWidth = (viewportWidth - 3 * GUTTER) / 2;
  const panelHeight = viewportHeight - 2 * GUTTER;
  const canvasW = trial.left_array.canvas_width;
  const canvasH = trial.left_array.canvas_height;
  const scale = Math.min(panelWidth / canvasW, panelHeight / canvasH);

  const panel = (
    array: typeof trial.left_array,
    offsetX: number,
    character: string,
  ): Panel => ({
    dots: array.dots.map((d) => ({ x: d.x * scale, y: d.y * scale, r: d.radius * scale })),
    offsetX,
    offsetY: GUTTER,
    width: canvasW * scale,
    height: canvasH * scale,
    character,
  });

  return {
    left: panel(trial.left_array, GUTTER, CHARACTERS[0]),
    right: panel(trial.right_array, 2 * GUTTER + panelWidth, CHARACTERS[1]),
    scale,
  };
}
