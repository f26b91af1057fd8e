// Stateful in-memory stand-in for the session API, faithful to the wire
// contract: judged sentences never reappear in later result lists, export
// freezes the session, errors come back as {"error": {code, message}}.

import type {
  JudgmentLevel,
  JudgmentRow,
  ResultRow,
  SessionSnapshot,
} from "../src/types.js";

const LEVELS: JudgmentLevel[] = [
  "relevant_to_request",
  "relevant_to_task",
  "neutral",
  "not_relevant",
];

interface MockSentence {
  sentence_id: string;
  doc_id: string;
  text: string;
}

interface MockSession {
  snapshot: SessionSnapshot;
  judgments: Map<string, JudgmentRow>;
}

export class MockApi {
  sentences: MockSentence[];
  sessions = new Map<string, MockSession>();
  calls: { method: string; path: string; body: unknown }[] = [];
  private nextId = 1;

  constructor(sentenceCount = 30) {
    this.sentences = Array.from({ length: sentenceCount }, (_, i) => ({
      sentence_id: `d${String(i).padStart(3, "0")}:0`,
      doc_id: `d${String(i).padStart(3, "0")}`,
      text: `flint water sentence number ${i} with lead levels`,
    }));
  }

  install(): void {
    globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = typeof input === "string" ? input : input.toString();
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(init.body as string) : null;
      this.calls.push({ method, path: url, body });
      return this.route(method, url, body);
    }) as typeof fetch;
  }

  private json(status: number, payload: unknown): Response {
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => payload,
    } as unknown as Response;
  }

  private error(status: number, code: string, message: string): Response {
    return this.json(status, { error: { code, message } });
  }

  private route(method: string, url: string, body: any): Response {
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    let match = path.match(/^\/api\/sessions$/);
    if (match && method === "POST") {
      return this.createSession(body);
    }
    match = path.match(/^\/api\/sessions\/([^/]+)$/);
    if (match && method === "GET") {
      const session = this.sessions.get(match[1]);
      if (!session) {
        return this.error(404, "session_not_found", `no session ${match[1]}`);
      }
      return this.json(200, session.snapshot);
    }
    match = path.match(/^\/api\/sessions\/([^/]+)\/(search|judgments|enrich|export|stats)$/);
    if (!match) {
      return this.error(404, "not_found", `no route ${path}`);
    }
    const session = this.sessions.get(match[1]);
    if (!session) {
      return this.error(404, "session_not_found", `no session ${match[1]}`);
    }
    const action = match[2];
    if (action === "stats") {
      return this.stats(session);
    }
    if (session.snapshot.status === "exported") {
      return this.error(409, "session_frozen", "session frozen");
    }
    if (action === "search") {
      return this.search(session, body);
    }
    if (action === "judgments") {
      return this.judge(session, body);
    }
    if (action === "enrich") {
      return this.enrich(session, body);
    }
    return this.exportQuery(session);
  }

  private createSession(body: any): Response {
    if (!body?.task_narrative?.trim()) {
      return this.error(400, "empty_narrative", "empty task narrative");
    }
    const id = `session-${this.nextId++}`;
    const snapshot: SessionSnapshot = {
      session_id: id,
      status: "active",
      task_narrative: body.task_narrative,
      request_narrative: body.request_narrative,
      iteration: 0,
      stage: "initial",
      search_history: [],
      judgments: [],
      positive_count: 0,
      selected_sentence_ids: [],
      selection_cap: 25,
      cap_warning: false,
    };
    this.sessions.set(id, { snapshot, judgments: new Map() });
    return this.json(201, snapshot);
  }

  private refresh(session: MockSession): void {
    const rows = [...session.judgments.values()].sort((a, b) =>
      a.sentence_id < b.sentence_id ? -1 : 1);
    const positives = rows.filter(
      (j) => j.level === "relevant_to_request" || j.level === "relevant_to_task");
    session.snapshot.judgments = rows;
    session.snapshot.positive_count = positives.length;
    session.snapshot.selected_sentence_ids = rows
      .filter((j) => j.level === "relevant_to_request")
      .map((j) => j.sentence_id);
    session.snapshot.cap_warning =
      positives.length > session.snapshot.selection_cap;
  }

  private results(session: MockSession, k: number,
                  expanded: boolean): ResultRow[] {
    const judged = new Set(session.judgments.keys());
    return this.sentences
      .filter((s) => !judged.has(s.sentence_id))
      .slice(0, k)
      .map((s, rank) => ({
        sentence_id: s.sentence_id,
        doc_id: s.doc_id,
        position: 0,
        text: s.text,
        score: 1.0 - rank * 0.01,
        matched_terms: {
          primary: ["flint", "water"],
          expanded: expanded ? ["lead"] : [],
        },
      }));
  }

  private search(session: MockSession, body: any): Response {
    if (!body?.terms?.trim()) {
      return this.error(400, "empty_search_terms", "empty search terms");
    }
    session.snapshot.iteration += 1;
    session.snapshot.stage = "initial";
    session.snapshot.search_history.push(
      { iteration: session.snapshot.iteration, terms: body.terms });
    return this.json(200, {
      session: session.snapshot,
      iteration: session.snapshot.iteration,
      results: this.results(session, body.k ?? 20,
                            session.judgments.size > 0),
    });
  }

  private judge(session: MockSession, body: any): Response {
    if (!LEVELS.includes(body?.level)) {
      return this.error(400, "bad_judgment_level",
                        `bad judgment level ${body?.level}`);
    }
    if (!this.sentences.some((s) => s.sentence_id === body.sentence_id)) {
      return this.error(404, "sentence_not_found",
                        `unknown sentence_id ${body.sentence_id}`);
    }
    session.judgments.set(body.sentence_id, {
      sentence_id: body.sentence_id,
      level: body.level,
      iteration: session.snapshot.iteration,
      stage: session.snapshot.stage,
      timestamp: 0,
    });
    this.refresh(session);
    return this.json(200, session.snapshot);
  }

  private enrich(session: MockSession, body: any): Response {
    if (session.snapshot.positive_count === 0) {
      return this.error(400, "no_example_sentences",
                        "no example sentences selected");
    }
    session.snapshot.iteration += 1;
    session.snapshot.stage = "enrichment";
    return this.json(200, {
      session: session.snapshot,
      iteration: session.snapshot.iteration,
      results: this.results(session, body?.k ?? 10, true),
    });
  }

  private exportQuery(session: MockSession): Response {
    session.snapshot.status = "exported";
    return this.json(200, {
      session_id: session.snapshot.session_id,
      task_narrative: session.snapshot.task_narrative,
      request_narrative: session.snapshot.request_narrative,
      query: {
        terms: { flint: 3.0, water: 2.0 },
        feature_terms: {},
        provenance: `session:${session.snapshot.session_id}`,
      },
      selected_sentence_ids: session.snapshot.selected_sentence_ids,
    });
  }

  private stats(session: MockSession): Response {
    return this.json(200, {
      stats: {
        stage1: [],
        stage2: [],
        totals: {
          sessions: 1,
          positive_judgments: session.snapshot.positive_count,
          stage1_relevant: session.snapshot.positive_count,
          stage2_relevant: 0,
        },
      },
      rendered: "# search terms ...",
    });
  }
}
