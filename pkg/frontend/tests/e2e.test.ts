// End-to-end browser flow against the real backend over a fixture database:
// untranslatable question -> highlighted span with candidate chips ->
// accept -> result table with SQL header, provenance sub-table and
// hidden-records notice.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, cpSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError } from "../src/api.js";
import { App } from "../src/app.js";
import { renderChat, renderGraph, renderTurn } from "../src/render.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const REPO = resolve(__dirname, "..", "..");

let server: ChildProcess;

async function waitForServer(timeoutMs = 90_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/databases`);
      if (resp.ok) return;
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error(`backend did not come up: ${lastError}`);
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "photon-e2e-"));
  for (const name of ["concert_singer", "worldbank"]) {
    cpSync(join(REPO, "tests", "fixture_data", name), join(dataDir, name), {
      recursive: true,
    });
  }
  server = spawn(
    "python3",
    ["-m", "photon.cli", "serve", "--port", String(PORT), "--data-dir",
     dataDir, "--dim", "128", "--beam", "8"],
    { cwd: REPO, stdio: "ignore" },
  );
  await waitForServer();
}, 120_000);

afterAll(() => {
  server?.kill();
});

describe("end-to-end correction flow", () => {
  it("walks untranslatable -> chips -> accept -> result tables", async () => {
    const app = new App(BASE);
    const dbs = await app.client.listDatabases();
    expect(dbs.map((d) => d.db_id)).toContain("concert_singer");
    await app.selectDatabase("concert_singer");

    // 1. untranslatable question: span highlighted, chips shown
    const correction = await app.send("show me the nation of singers");
    expect(correction.state).toBe("CONFIRM_CORRECTION");
    const correctionHtml = renderTurn(correction);
    expect(correctionHtml).toContain("<mark>nation</mark>");
    expect((correctionHtml.match(/class="chip"/g) ?? []).length)
      .toBeGreaterThanOrEqual(2);

    // 2. accept: corrected question re-enters the pipeline and executes
    const accepted = await app.send("yes");
    expect(accepted.state).toBe("CONFIRM_RESULT");
    const acceptedHtml = renderTurn(accepted);
    expect(acceptedHtml).toContain("sql-header");
    expect(acceptedHtml).toContain("<table>");

    // 3. aggregate turn: provenance sub-table + hidden-records notice
    const aggregate = await app.send("how many singers are there");
    expect(aggregate.state).toBe("CONFIRM_RESULT");
    expect(aggregate.result?.hidden_count).toBe(2);
    const aggregateHtml = renderTurn(aggregate);
    expect(aggregateHtml).toContain("SELECT COUNT(*) FROM singer");
    expect(aggregateHtml).toContain("Supporting records");
    expect(aggregateHtml).toContain("2 records hidden");
    expect(aggregateHtml).toContain("<td>4</td>");

    // arrival order is preserved in the chat rendering
    const chat = renderChat(app.turns);
    expect(chat.indexOf("nation")).toBeLessThan(chat.indexOf("COUNT"));
  }, 30_000);

  it("posts a chip click as the corrected question", async () => {
    const app = new App(BASE);
    await app.selectDatabase("concert_singer");
    const correction = await app.send("show me the nation of singers");
    expect(correction.state).toBe("CONFIRM_CORRECTION");
    // the UI splices the chip surface over the span and sends it fresh
    const tokens = [...(correction.questionTokens ?? [])];
    const span = correction.span!;
    tokens.splice(span.start - 1, span.end - span.start + 1, "country");
    const fresh = await app.send(tokens.join(" "));
    expect(fresh.state).toBe("CONFIRM_RESULT");
    expect(fresh.result?.sql).toBe("SELECT singer.country FROM singer");
  }, 30_000);

  it("rejecting suggestions three times asks for a rephrase", async () => {
    const app = new App(BASE);
    await app.selectDatabase("concert_singer");
    const first = await app.send("show me the nation of singers");
    expect(first.state).toBe("CONFIRM_CORRECTION");
    await app.send("no");
    await app.send("no");
    const third = await app.send("no");
    expect(third.state).toBe("NEED_REPHRASE");
  }, 30_000);
});

describe("dual query mode and the result viewer", () => {
  it("executes well-formed SQL immediately", async () => {
    const app = new App(BASE);
    await app.selectDatabase("concert_singer");
    const turn = await app.send("SELECT MAX(age) FROM singer");
    expect(turn.state).toBe("CONFIRM_RESULT");
    expect(renderTurn(turn)).toContain("<td>52</td>");
  }, 30_000);

  it("renders empty results with a placeholder", async () => {
    const app = new App(BASE);
    await app.selectDatabase("concert_singer");
    const turn = await app.send("SELECT name FROM singer WHERE age > 1000");
    expect(turn.state).toBe("CONFIRM_RESULT");
    expect(renderTurn(turn)).toContain("0 rows");
  }, 30_000);
});

describe("schema viewer data", () => {
  it("draws the fixture graph with one foreign-key edge", async () => {
    const app = new App(BASE);
    await app.selectDatabase("concert_singer");
    const graph = await app.client.graph("concert_singer");
    const svg = renderGraph(graph);
    expect((svg.match(/class="table-node"/g) ?? []).length).toBe(2);
    expect((svg.match(/class="fk-edge"/g) ?? []).length).toBe(1);
  }, 30_000);

  it("switching databases starts a new session", async () => {
    const app = new App(BASE);
    await app.selectDatabase("concert_singer");
    const before = app.sessionId;
    await app.send("SELECT COUNT(*) FROM singer");
    await app.selectDatabase("worldbank");
    expect(app.sessionId).not.toBe(before);
    expect(app.turns).toHaveLength(0);
    const turn = await app.send("SELECT COUNT(*) FROM economy");
    expect(turn.result?.rows).toEqual([[2]]);
  }, 30_000);
});

describe("error surfaces", () => {
  it("maps server 404s to inline error turns with retry", async () => {
    const app = new App(BASE);
    app.sessionId = "does-not-exist";
    const turn = await app.send("hello");
    expect(turn.error).toBe(true);
    expect(renderTurn(turn)).toContain("retry");
    await expect(app.client.graph("missing-db")).rejects.toBeInstanceOf(
      ApiError,
    );
  }, 30_000);
});
