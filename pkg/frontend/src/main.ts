// Browser bootstrap: wires the three panels to the App state.

import { App } from "./app.js";
import {
  renderChat,
  renderDatabaseOptions,
  renderGraph,
} from "./render.js";

const app = new App("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const chatEl = el<HTMLDivElement>("chat");
const inputEl = el<HTMLInputElement>("chat-input");
const sendEl = el<HTMLButtonElement>("chat-send");
const selectEl = el<HTMLSelectElement>("db-select");
const graphEl = el<HTMLDivElement>("schema-graph");
const toggleEl = el<HTMLButtonElement>("schema-toggle");
const uploadEl = el<HTMLInputElement>("db-upload");

function redrawChat(): void {
  chatEl.innerHTML = renderChat(app.turns);
  chatEl.scrollTop = chatEl.scrollHeight;
}

async function redrawGraph(): Promise<void> {
  if (!app.dbId) {
    graphEl.innerHTML = `<p class="placeholder">no database selected</p>`;
    return;
  }
  graphEl.innerHTML = renderGraph(await app.client.graph(app.dbId));
}

async function refreshDatabases(): Promise<void> {
  const dbs = await app.client.listDatabases();
  selectEl.innerHTML = renderDatabaseOptions(dbs, app.dbId);
}

async function send(text: string): Promise<void> {
  if (!text.trim() || !app.sessionId) return;
  inputEl.value = "";
  await app.send(text.trim());
  redrawChat();
}

sendEl.addEventListener("click", () => void send(inputEl.value));
inputEl.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter") void send(inputEl.value);
});

selectEl.addEventListener("change", async () => {
  if (!selectEl.value) return;
  await app.selectDatabase(selectEl.value);
  redrawChat();
  await redrawGraph();
});

toggleEl.addEventListener("click", () => {
  const visible = app.toggleSchema();
  el<HTMLDivElement>("schema-panel").classList.toggle("hidden", !visible);
  toggleEl.textContent = visible ? "hide" : "show";
});

chatEl.addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  if (target.classList.contains("confirm-yes")) void send("yes");
  else if (target.classList.contains("confirm-no")) void send("no");
  else if (target.classList.contains("chip")) {
    // a chip posts the corrected question as a fresh message
    const last = app.lastTurn();
    const surface = target.dataset.surface ?? "";
    if (last?.questionTokens && last.span) {
      const toks = [...last.questionTokens];
      toks.splice(
        last.span.start - 1,
        last.span.end - last.span.start + 1,
        surface,
      );
      void send(toks.join(" "));
    }
  } else if (target.classList.contains("retry")) {
    void app.retry().then(redrawChat);
  }
});

uploadEl.addEventListener("change", async () => {
  const file = uploadEl.files?.[0];
  if (!file) return;
  try {
    const dbId = await app.client.uploadBundle(file, file.name);
    await refreshDatabases();
    selectEl.value = dbId;
    await app.selectDatabase(dbId);
    await redrawGraph();
  } catch (err) {
    graphEl.innerHTML = `<p class="error">${String(err)}</p>`;
  }
  uploadEl.value = "";
});

void (async () => {
  await refreshDatabases();
  await redrawGraph();
})();
