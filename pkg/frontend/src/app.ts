// Application state and transitions, kept DOM-free so the flow logic can be
// driven end-to-end from tests against a live backend.

import { ApiError, Client } from "./api.js";
import type { ChatTurn, MessageResponse } from "./types.js";

export function turnFromResponse(response: MessageResponse): ChatTurn {
  return {
    speaker: "system",
    text: response.text,
    state: response.state,
    result: response.result,
    suggestions: response.suggestions,
    span: response.span,
    questionTokens: response.question_tokens,
  };
}

export class App {
  client: Client;
  turns: ChatTurn[] = [];
  dbId: string | null = null;
  sessionId: string | null = null;
  schemaVisible = true;
  lastFailedText: string | null = null;

  constructor(base: string) {
    this.client = new Client(base);
  }

  async selectDatabase(dbId: string): Promise<void> {
    // switching databases always starts a fresh session
    this.dbId = dbId;
    this.sessionId = await this.client.createSession(dbId);
    this.turns = [];
  }

  toggleSchema(): boolean {
    this.schemaVisible = !this.schemaVisible;
    return this.schemaVisible;
  }

  async send(text: string): Promise<ChatTurn> {
    if (!this.sessionId) throw new Error("no session");
    this.turns.push({ speaker: "user", text });
    try {
      const response = await this.client.sendMessage(this.sessionId, text);
      const turn = turnFromResponse(response);
      this.turns.push(turn);
      this.lastFailedText = null;
      return turn;
    } catch (err) {
      const message =
        err instanceof ApiError
          ? `${err.code}: ${err.message}`
          : "network error";
      const turn: ChatTurn = {
        speaker: "system",
        text: message,
        error: true,
      };
      this.turns.push(turn);
      this.lastFailedText = text;
      return turn;
    }
  }

  async retry(): Promise<ChatTurn | null> {
    if (this.lastFailedText === null) return null;
    const text = this.lastFailedText;
    this.lastFailedText = null;
    // drop the failed user/system pair before resending
    this.turns = this.turns.slice(0, -2);
    return this.send(text);
  }

  lastTurn(): ChatTurn | undefined {
    return this.turns[this.turns.length - 1];
  }
}
