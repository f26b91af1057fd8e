// Four-level star widget. Star counts map onto the graded judgment levels
// (most relevant = most stars); tooltips carry the level descriptions.

import type { JudgmentLevel } from "./types.js";

export interface StarLevel {
  stars: number;
  level: JudgmentLevel;
  label: string;
  description: string;
}

export const STAR_LEVELS: StarLevel[] = [
  {
    stars: 4,
    level: "relevant_to_request",
    label: "Relevant to request",
    description: "Relevant to the current query (hence also relevant to the task)",
  },
  {
    stars: 3,
    level: "relevant_to_task",
    label: "Relevant to task",
    description: "Relevant to the task but not to the query (request)",
  },
  {
    stars: 2,
    level: "neutral",
    label: "Neutral",
    description:
      "No label; this sentence will not be shown again in the next iteration",
  },
  {
    stars: 1,
    level: "not_relevant",
    label: "Not relevant",
    description: "Not relevant to the task nor the request",
  },
];

export function levelForStars(stars: number): JudgmentLevel | null {
  const found = STAR_LEVELS.find((entry) => entry.stars === stars);
  return found ? found.level : null;
}

export function starsForLevel(level: JudgmentLevel): number {
  const found = STAR_LEVELS.find((entry) => entry.level === level);
  return found ? found.stars : 0;
}

export function createStarWidget(
  current: JudgmentLevel | null,
  onSelect: (level: JudgmentLevel) => void,
): HTMLElement {
  const widget = document.createElement("div");
  widget.className = "stars";
  widget.setAttribute("role", "radiogroup");
  const activeStars = current ? starsForLevel(current) : 0;
  for (let n = 1; n <= 4; n += 1) {
    const star = document.createElement("button");
    star.type = "button";
    star.className = "star";
    star.dataset.stars = String(n);
    const level = STAR_LEVELS.find((entry) => entry.stars === n)!;
    star.dataset.level = level.level;
    star.title = `${level.label}: ${level.description}`;
    star.textContent = n <= activeStars ? "★" : "☆";
    if (n <= activeStars) {
      star.classList.add("active");
    }
    star.addEventListener("click", () => {
      const selected = levelForStars(n);
      if (selected) {
        onSelect(selected);
      }
    });
    widget.appendChild(star);
  }
  if (current) {
    const label = document.createElement("span");
    label.className = "star-label";
    label.textContent =
      STAR_LEVELS.find((entry) => entry.level === current)?.label ?? "";
    widget.appendChild(label);
  }
  return widget;
}
