// Thin typed client for the engine's HTTP API. The UI touches the backend
// exclusively through these calls.

import type {
  DatabaseEntry,
  MessageResponse,
  SchemaGraph,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(
  base: string,
  path: string,
  init?: RequestInit,
): Promise<T> {
  const resp = await fetch(base + path, init);
  if (!resp.ok) {
    let code = `HTTP_${resp.status}`;
    let message = resp.statusText;
    try {
      const body = (await resp.json()) as Record<string, unknown>;
      const detail = (body.detail ?? body) as Record<string, unknown>;
      if (typeof detail.code === "string") code = detail.code;
      if (typeof detail.message === "string") message = detail.message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

export class Client {
  constructor(public base: string) {}

  listDatabases(): Promise<DatabaseEntry[]> {
    return request<DatabaseEntry[]>(this.base, "/databases");
  }

  async createSession(dbId: string): Promise<string> {
    const out = await request<{ session_id: string }>(this.base, "/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ db_id: dbId }),
    });
    return out.session_id;
  }

  sendMessage(sessionId: string, text: string): Promise<MessageResponse> {
    return request<MessageResponse>(
      this.base,
      `/sessions/${sessionId}/messages`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      },
    );
  }

  history(sessionId: string): Promise<
    { speaker: string; text: string; timestamp: number; state: string | null }[]
  > {
    return request(this.base, `/sessions/${sessionId}/history`);
  }

  graph(dbId: string): Promise<SchemaGraph> {
    return request<SchemaGraph>(this.base, `/databases/${dbId}/graph`);
  }

  async uploadBundle(file: Blob, name: string): Promise<string> {
    const form = new FormData();
    form.append("bundle", file, name);
    const out = await request<{ db_id: string }>(this.base, "/databases", {
      method: "POST",
      body: form,
    });
    return out.db_id;
  }
}
