export interface SpanRange {
  start: number;
  end: number;
}

export interface Suggestion {
  surface: string;
  score: number;
  source: string;
}

export interface ResultPayload {
  columns: string[];
  rows: unknown[][];
  provenance: unknown[][] | null;
  provenance_columns: string[] | null;
  hidden_count: number;
  sql: string;
}

export interface MessageResponse {
  state: string;
  text: string;
  result: ResultPayload | null;
  suggestions: Suggestion[] | null;
  sql: string | null;
  corrected_question: string | null;
  span: SpanRange | null;
  question_tokens: string[] | null;
}

export interface ChatTurn {
  speaker: "user" | "system";
  text: string;
  state?: string;
  result?: ResultPayload | null;
  suggestions?: Suggestion[] | null;
  span?: SpanRange | null;
  questionTokens?: string[] | null;
  error?: boolean;
}

export interface DatabaseEntry {
  db_id: string;
  table_count: number;
}

export interface GraphNode {
  id: string;
  name: string;
  fields: string[];
}

export interface GraphEdge {
  source: string;
  target: string;
  fields: string[];
}

export interface SchemaGraph {
  db_id: string;
  nodes: GraphNode[];
  edges: GraphEdge[];
}
