import { describe, expect, it } from "vitest";

import { buildScene } from "../src/scene.js";
import { makeTrial } from "./fakes.js";

describe("scene construction", () => {
  it("renders exactly the scheduled dot counts on both sides", () => {
    const trial = makeTrial(0, "left");
    const scene = buildScene(trial, 900, 520);
    expect(scene.left.dots).toHaveLength(trial.left_array.dots.length);
    expect(scene.right.dots).toHaveLength(trial.right_array.dots.length);
    expect(scene.left.dots).toHaveLength(10);
    expect(scene.right.dots).toHaveLength(5);
  });

  it("scales positions and radii uniformly", () => {
    const trial = makeTrial(1, "right");
    const scene = buildScene(trial, 900, 520);
    const source = trial.left_array.dots[0];
    const drawn = scene.left.dots[0];
    expect(drawn.x).toBeCloseTo(source.x * scene.scale, 10);
    expect(drawn.y).toBeCloseTo(source.y * scene.scale, 10);
    expect(drawn.r).toBeCloseTo(source.radius * scene.scale, 10);
  });

  it("keeps both panels inside the viewport", () => {
    const trial = makeTrial(2, "left");
    const width = 900;
    const height = 520;
    const scene = buildScene(trial, width, height);
    for (const panel of [scene.left, scene.right]) {
      expect(panel.offsetX).toBeGreaterThanOrEqual(0);
      expect(panel.offsetX + panel.width).toBeLessThanOrEqual(width + 1e-9);
      expect(panel.offsetY + panel.height).toBeLessThanOrEqual(height + 1e-9);
    }
    expect(scene.right.offsetX).toBeGreaterThan(scene.left.offsetX + scene.left.width);
  });
});
