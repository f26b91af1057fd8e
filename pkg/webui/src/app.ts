// Two-panel annotation client: query controls and statistics on the left,
// retrieved sentences with star ratings on the right. All state lives in
// the server's session snapshot; every mutation re-renders from the
// snapshot the server returns, so optimistic paints can never drift.

import {
  ApiError,
  createSession,
  enrich,
  exportQuery,
  judge,
  search,
  sessionStats,
} from "./api.js";
import { highlightText } from "./highlight.js";
import { createStarWidget } from "./stars.js";
import type {
  JudgmentLevel,
  ResultRow,
  SessionSnapshot,
  StatsResponse,
} from "./types.js";

const STAGE1_GUIDANCE = 5;

interface AppState {
  session: SessionSnapshot | null;
  results: ResultRow[];
  resultsStage: "initial" | "enrichment" | null;
  busy: boolean;
}

export function mountApp(root: HTMLElement): void {
  const state: AppState = {
    session: null,
    results: [],
    resultsStage: null,
    busy: false,
  };

  root.innerHTML = "";
  const layout = el("div", "layout");

  // -- left panel: session, search, export, stats -----------------------------

  const left = el("section", "panel panel-left");
  const setup = el("form", "setup") as HTMLFormElement;
  setup.innerHTML = `
    <h2>New session</h2>
    <label>Task narrative
      <textarea name="task" class="task-narrative" rows="3"
        placeholder="The overarching task, as a short narrative"></textarea>
    </label>
    <label>Request narrative
      <textarea name="request" class="request-narrative" rows="3"
        placeholder="The specific request this query should cover"></textarea>
    </label>
    <button type="submit" class="start-session">Start session</button>
  `;

  const controls = el("div", "controls hidden");
  const searchForm = el("form", "search-form") as HTMLFormElement;
  searchForm.innerHTML = `
    <input type="text" class="search-input" placeholder="search terms" />
    <button type="submit" class="search-button">Search</button>
  `;
  const enrichButton = button("Enrich (similar sentences)", "enrich-button");
  const exportButton = button("Export query", "export-button");
  const statsButton = button("Refresh statistics", "stats-button");
  const counters = el("div", "counters");
  const statsPanel = el("div", "stats-panel");
  const exportView = el("pre", "export-view hidden");
  controls.append(searchForm, enrichButton, exportButton, counters,
                  exportView, statsButton, statsPanel);

  const status = el("div", "status");
  left.append(setup, controls, status);

  // -- right panel: results ----------------------------------------------------

  const right = el("section", "panel panel-right");
  const resultsHeader = el("div", "results-header");
  const resultsList = el("ul", "results");
  right.append(resultsHeader, resultsList);

  layout.append(left, right);
  root.appendChild(layout);

  // -- rendering -----------------------------------------------------------------

  function renderCounters(): void {
    const session = state.session;
    if (!session) {
      counters.textContent = "";
      return;
    }
    const positives = session.positive_count;
    const parts = [
      `iteration ${session.iteration} (${session.stage})`,
      `selected ${positives}/${STAGE1_GUIDANCE} (stage 1 guidance)`,
      `collected ${positives}/${session.selection_cap} overall`,
    ];
    counters.textContent = parts.join(" · ");
    counters.classList.toggle("cap-warning", session.cap_warning);
    if (session.cap_warning) {
      counters.textContent += " — enough sentences collected; consider exporting";
    }
  }

  function renderResults(): void {
    resultsList.innerHTML = "";
    const stageName = state.resultsStage === "enrichment"
      ? "similar sentences" : "search results";
    resultsHeader.textContent = state.results.length
      ? `${state.results.length} ${stageName}`
      : "no results yet";
    const judged = new Map(
      (state.session?.judgments ?? []).map((j) => [j.sentence_id, j.level]),
    );
    for (const row of state.results) {
      const item = el("li", "result-card");
      item.dataset.sentenceId = row.sentence_id;
      const header = el("div", "result-meta");
      header.textContent = `${row.doc_id} · score ${row.score.toFixed(3)}`;
      const body = el("div", "result-body");
      body.appendChild(highlightText(row.text, row.matched_terms));
      const current = judged.get(row.sentence_id) ?? null;
      const stars = createStarWidget(current, (level) => {
        void onJudge(row.sentence_id, level);
      });
      if (current) {
        item.classList.add("judged");
      }
      item.append(header, body, stars);
      resultsList.appendChild(item);
    }
  }

  function renderStats(stats: StatsResponse): void {
    statsPanel.innerHTML = "";
    const heading = el("h3", "stats-heading");
    heading.textContent = "Session statistics";
    const pre = el("pre", "stats-table");
    pre.textContent = stats.rendered;
    statsPanel.append(heading, pre);
  }

  function setStatus(message: string, kind: "info" | "error" | "guidance" = "info"):
      void {
    status.textContent = message;
    status.className = `status status-${kind}`;
  }

  function freezeUi(): void {
    for (const element of controls.querySelectorAll("button, input")) {
      (element as HTMLButtonElement | HTMLInputElement).disabled = true;
    }
    root.querySelector(".layout")?.classList.add("frozen");
  }

  function reconcile(session: SessionSnapshot): void {
    state.session = session;
    renderCounters();
    renderResults();
    if (session.status === "exported") {
      freezeUi();
    }
  }

  async function refreshStats(): Promise<void> {
    if (!state.session) {
      return;
    }
    try {
      renderStats(await sessionStats(state.session.session_id));
    } catch {
      // stats are advisory; leave the old panel in place
    }
  }

  // -- actions ----------------------------------------------------------------------

  async function guarded(action: () => Promise<void>): Promise<void> {
    if (state.busy) {
      return;
    }
    state.busy = true;
    try {
      await action();
    } catch (error) {
      if (error instanceof ApiError && error.code === "no_example_sentences") {
        setStatus(
          "Mark at least one sentence as relevant before enriching.",
          "guidance",
        );
      } else if (error instanceof ApiError) {
        setStatus(`${error.message} — you can retry.`, "error");
      } else {
        setStatus("request failed — you can retry.", "error");
      }
    } finally {
      state.busy = false;
    }
  }

  setup.addEventListener("submit", (event) => {
    event.preventDefault();
    const task = (setup.querySelector(".task-narrative") as HTMLTextAreaElement)
      .value;
    const request = (setup.querySelector(
      ".request-narrative") as HTMLTextAreaElement).value;
    void guarded(async () => {
      const session = await createSession(task, request);
      reconcile(session);
      setup.classList.add("hidden");
      controls.classList.remove("hidden");
      setStatus(`session ${session.session_id} started`);
    });
  });

  searchForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const input = searchForm.querySelector(".search-input") as HTMLInputElement;
    void guarded(async () => {
      if (!state.session) {
        return;
      }
      const response = await search(state.session.session_id, input.value);
      state.results = response.results;
      state.resultsStage = "initial";
      reconcile(response.session);
      setStatus(`search iteration ${response.iteration}`);
    });
  });

  enrichButton.addEventListener("click", () => {
    void guarded(async () => {
      if (!state.session) {
        return;
      }
      const response = await enrich(state.session.session_id);
      state.results = response.results;
      state.resultsStage = "enrichment";
      reconcile(response.session);
      setStatus(`enrichment iteration ${response.iteration}`);
    });
  });

  statsButton.addEventListener("click", () => {
    void guarded(refreshStats);
  });

  exportButton.addEventListener("click", () => {
    void guarded(async () => {
      if (!state.session) {
        return;
      }
      const record = await exportQuery(state.session.session_id);
      const payload = JSON.stringify(record, null, 2);
      exportView.textContent = payload;
      exportView.classList.remove("hidden");
      downloadJson(payload, `${record.session_id}-query.json`);
      state.session = { ...state.session, status: "exported" };
      freezeUi();
      setStatus("query exported; session is now read-only");
    });
  });

  async function onJudge(sentenceId: string, level: JudgmentLevel):
      Promise<void> {
    await guarded(async () => {
      if (!state.session) {
        return;
      }
      const session = await judge(state.session.session_id, sentenceId, level);
      reconcile(session);
    });
  }
}

function downloadJson(payload: string, filename: string): void {
  if (typeof URL.createObjectURL !== "function") {
    return; // headless environments render the export inline instead
  }
  const blob = new Blob([payload], { type: "application/json" });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}

function button(label: string, className: string): HTMLButtonElement {
  const node = document.createElement("button");
  node.type = "button";
  node.className = className;
  node.textContent = label;
  return node;
}
