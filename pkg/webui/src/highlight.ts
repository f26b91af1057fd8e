// Matched-term highlighting: terms the user typed render as "primary"
// (red), terms the query matched in addition render as "expanded" (blue).
// The server decides the partition; this module only paints spans.

import type { MatchedTerms } from "./types.js";

const WORD_RE = /[^\W_]+/gu;

export function highlightText(text: string, matched: MatchedTerms): HTMLElement {
  const container = document.createElement("span");
  container.className = "sentence-text";
  const primary = new Set(matched.primary.map((t) => t.toLowerCase()));
  const expanded = new Set(matched.expanded.map((t) => t.toLowerCase()));
  let cursor = 0;
  for (const match of text.matchAll(WORD_RE)) {
    const start = match.index ?? 0;
    const word = match[0];
    if (start > cursor) {
      container.appendChild(document.createTextNode(text.slice(cursor, start)));
    }
    const lower = word.toLowerCase();
    if (primary.has(lower) || expanded.has(lower)) {
      const mark = document.createElement("mark");
      mark.className = primary.has(lower) ? "match-primary" : "match-expanded";
      mark.textContent = word;
      container.appendChild(mark);
    } else {
      container.appendChild(document.createTextNode(word));
    }
    cursor = start + word.length;
  }
  if (cursor < text.length) {
    container.appendChild(document.createTextNode(text.slice(cursor)));
  }
  return container;
}
