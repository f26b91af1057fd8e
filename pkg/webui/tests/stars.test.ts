// The star widget must offer exactly the four graded judgment levels, in
// order, and emit the level that corresponds to the clicked star count.

import { describe, expect, it } from "vitest";

import { STAR_LEVELS, createStarWidget, levelForStars, starsForLevel } from "../src/stars.js";
import type { JudgmentLevel } from "../src/types.js";

describe("star widget", () => {
  it("offers exactly the four levels in graded order", () => {
    expect(STAR_LEVELS.map((entry) => entry.level)).toEqual([
      "relevant_to_request",
      "relevant_to_task",
      "neutral",
      "not_relevant",
    ]);
    expect(STAR_LEVELS.map((entry) => entry.stars)).toEqual([4, 3, 2, 1]);
  });

  it("maps star counts to levels bijectively", () => {
    for (const entry of STAR_LEVELS) {
      expect(levelForStars(entry.stars)).toBe(entry.level);
      expect(starsForLevel(entry.level)).toBe(entry.stars);
    }
    expect(levelForStars(0)).toBeNull();
    expect(levelForStars(5)).toBeNull();
  });

  it("emits each level exactly once across the four buttons", () => {
    const emitted: JudgmentLevel[] = [];
    const widget = createStarWidget(null, (level) => emitted.push(level));
    const buttons = widget.querySelectorAll<HTMLButtonElement>(".star");
    expect(buttons.length).toBe(4);
    for (const button of buttons) {
      button.click();
    }
    expect([...emitted].sort()).toEqual([
      "neutral",
      "not_relevant",
      "relevant_to_request",
      "relevant_to_task",
    ]);
  });

  it("carries the level descriptions as tooltips", () => {
    const widget = createStarWidget(null, () => undefined);
    const titles = [...widget.querySelectorAll<HTMLButtonElement>(".star")].map(
      (button) => button.title);
    expect(titles.some((t) => t.includes("Relevant to the current query"))).toBe(true);
    expect(titles.some((t) => t.includes("not be shown again"))).toBe(true);
  });

  it("renders the active level as filled stars", () => {
    const widget = createStarWidget("relevant_to_task", () => undefined);
    const active = widget.querySelectorAll(".star.active");
    expect(active.length).toBe(3);
    expect(widget.querySelector(".star-label")?.textContent).toBe(
      "Relevant to task");
  });
});
