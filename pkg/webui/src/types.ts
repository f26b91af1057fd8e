// Wire types for the session API.

export type JudgmentLevel =
  | "relevant_to_request"
  | "relevant_to_task"
  | "neutral"
  | "not_relevant";

export interface JudgmentRow {
  sentence_id: string;
  level: JudgmentLevel;
  iteration: number;
  stage: string;
  timestamp: number;
}

export interface SessionSnapshot {
  session_id: string;
  status: "active" | "exported";
  task_narrative: string;
  request_narrative: string;
  iteration: number;
  stage: string;
  search_history: { iteration: number; terms: string }[];
  judgments: JudgmentRow[];
  positive_count: number;
  selected_sentence_ids: string[];
  selection_cap: number;
  cap_warning: boolean;
}

export interface MatchedTerms {
  primary: string[];
  expanded: string[];
}

export interface ResultRow {
  sentence_id: string;
  doc_id: string;
  position: number;
  text: string;
  score: number;
  matched_terms: MatchedTerms;
}

export interface SearchResponse {
  session: SessionSnapshot;
  iteration: number;
  results: ResultRow[];
}

export interface ExportRecord {
  session_id: string;
  task_narrative: string;
  request_narrative: string;
  query: {
    terms: Record<string, number>;
    feature_terms: Record<string, number>;
    provenance: string;
  };
  selected_sentence_ids: string[];
}

export interface StatsRow {
  iteration: number;
  num_requests: number;
  total_relevant: number;
  mean_relevant_sentences: number;
  mean_relevant_sentence_length: number;
  mean_search_terms?: number;
}

export interface StatsResponse {
  stats: {
    stage1: StatsRow[];
    stage2: StatsRow[];
    totals: {
      sessions: number;
      positive_judgments: number;
      stage1_relevant: number;
      stage2_relevant: number;
    };
  };
  rendered: string;
}

export interface ApiErrorBody {
  error: { code: string; message: string };
}
