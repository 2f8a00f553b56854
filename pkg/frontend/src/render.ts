// Pure HTML renderers for the three panels. Everything here is a string
// transform so the rendering behavior is unit-testable without a browser.

import type {
  ChatTurn,
  ResultPayload,
  SchemaGraph,
  SpanRange,
  Suggestion,
} from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function cell(value: unknown): string {
  if (value === null || value === undefined) return "<td class=\"null\">NULL</td>";
  return `<td>${escapeHtml(value)}</td>`;
}

export function renderTable(columns: string[], rows: unknown[][]): string {
  const head = columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  if (rows.length === 0) {
    return `<table><thead><tr>${head}</tr></thead></table>` +
      `<p class="placeholder">0 rows</p>`;
  }
  const body = rows
    .map((r) => `<tr>${r.map(cell).join("")}</tr>`)
    .join("");
  return `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>`;
}

// Result viewer: canonical SQL on top, the result as a sub-table (a single
// value still renders as a 1-cell table), provenance rows when present, and
// a notice when confidential records were withheld.
export function renderResult(result: ResultPayload): string {
  const parts = [
    `<div class="sql-header"><code>${escapeHtml(result.sql)}</code></div>`,
    renderTable(result.columns, result.rows),
  ];
  if (result.provenance !== null && result.provenance_columns !== null) {
    parts.push(
      `<div class="provenance"><h4>Supporting records</h4>` +
        renderTable(result.provenance_columns, result.provenance) +
        `</div>`,
    );
  }
  if (result.hidden_count > 0) {
    const plural = result.hidden_count === 1 ? "record" : "records";
    parts.push(
      `<p class="hidden-note">${result.hidden_count} ${plural} hidden</p>`,
    );
  }
  return `<div class="result-view">${parts.join("")}</div>`;
}

// Highlight the confusion span inside the question (1-based token range).
export function renderHighlightedQuestion(
  tokens: string[],
  span: SpanRange,
): string {
  const pieces = tokens.map((tok, idx) => {
    const pos = idx + 1;
    const safe = escapeHtml(tok);
    return pos >= span.start && pos <= span.end
      ? `<mark>${safe}</mark>`
      : safe;
  });
  return pieces.join(" ");
}

export function renderChips(suggestions: Suggestion[]): string {
  return suggestions
    .map(
      (s) =>
        `<button class="chip" data-surface="${escapeHtml(s.surface)}">` +
        `${escapeHtml(s.surface)}</button>`,
    )
    .join("");
}

const KNOWN_STATES = new Set([
  "CONFIRM_RESULT",
  "CONFIRM_CORRECTION",
  "NEED_REPHRASE",
  "INVALID_QUERY",
]);

export function renderTurn(turn: ChatTurn): string {
  if (turn.speaker === "user") {
    return `<div class="turn user"><p>${escapeHtml(turn.text)}</p></div>`;
  }
  const state = turn.state ?? "";
  const tag = KNOWN_STATES.has(state) ? state : "SYSTEM";
  const classes = ["turn", "system", `state-${tag.toLowerCase()}`];
  if (turn.error) classes.push("error");
  const parts = [
    `<span class="state-tag">${escapeHtml(tag)}</span>`,
    `<p>${escapeHtml(turn.text)}</p>`,
  ];
  if (state === "CONFIRM_CORRECTION" && turn.span && turn.questionTokens) {
    parts.push(
      `<p class="question-highlight">` +
        renderHighlightedQuestion(turn.questionTokens, turn.span) +
        `</p>`,
    );
    parts.push(
      `<div class="confirm-actions">` +
        `<button class="confirm-yes">yes</button>` +
        `<button class="confirm-no">no</button>` +
        renderChips(turn.suggestions ?? []) +
        `</div>`,
    );
  }
  if (state === "CONFIRM_RESULT" && turn.result) {
    parts.push(renderResult(turn.result));
  }
  if (turn.error) {
    parts.push(`<button class="retry">retry</button>`);
  }
  return `<div class="${classes.join(" ")}">${parts.join("")}</div>`;
}

export function renderChat(turns: ChatTurn[]): string {
  return turns.map(renderTurn).join("");
}

// Schema viewer: a simple boxes-and-lines SVG of the table graph.
export function renderGraph(graph: SchemaGraph): string {
  const n = graph.nodes.length;
  if (n === 0) return `<p class="placeholder">no database selected</p>`;
  const width = 640;
  const boxW = 150;
  const rowH = 16;
  const centers = new Map<string, { x: number; y: number }>();
  const boxes = graph.nodes
    .map((node, i) => {
      const x = 30 + (i % 3) * 210;
      const y = 20 + Math.floor(i / 3) * 150;
      const h = rowH * (node.fields.length + 1) + 10;
      centers.set(node.id, { x: x + boxW / 2, y: y + h / 2 });
      const fields = node.fields
        .map(
          (f, j) =>
            `<text x="${x + 8}" y="${y + rowH * (j + 2) + 2}" class="field">` +
            `${escapeHtml(f)}</text>`,
        )
        .join("");
      return (
        `<g class="table-node" data-table="${escapeHtml(node.id)}">` +
        `<rect x="${x}" y="${y}" width="${boxW}" height="${h}" rx="6"></rect>` +
        `<text x="${x + 8}" y="${y + rowH}" class="table-name">` +
        `${escapeHtml(node.name)}</text>${fields}</g>`
      );
    })
    .join("");
  const edges = graph.edges
    .map((e) => {
      const a = centers.get(e.source);
      const b = centers.get(e.target);
      if (!a || !b) return "";
      return (
        `<line class="fk-edge" x1="${a.x}" y1="${a.y}" x2="${b.x}" y2="${b.y}">` +
        `<title>${escapeHtml(e.fields.join(" = "))}</title></line>`
      );
    })
    .join("");
  const height = 40 + Math.ceil(n / 3) * 170;
  return (
    `<svg viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">` +
    `${edges}${boxes}</svg>`
  );
}

export function renderDatabaseOptions(
  databases: { db_id: string; table_count: number }[],
  selected: string | null,
): string {
  const options = databases
    .map((d) => {
      const sel = d.db_id === selected ? " selected" : "";
      return (
        `<option value="${escapeHtml(d.db_id)}"${sel}>` +
        `${escapeHtml(d.db_id)} (${d.table_count})</option>`
      );
    })
    .join("");
  return `<option value="">Selected Database</option>` + options;
}
