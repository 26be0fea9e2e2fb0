/**
 * HTTP transport to the gateway: SSE for the push stream (hello, snapshots,
 * alarm events), POST for commands, GET for history.  fetch-based so the same
 * code runs in the browser and under node (integration tests).
 */

import { CommandMessage, Outcome, ServerMessage, parseServerMessage } from "./protocol.js";

export interface TransportOptions {
  base: string; // e.g. "" (same origin) or "http://127.0.0.1:7701"
  token: string;
}

export class GatewayTransport {
  constructor(private readonly opts: TransportOptions) {}

  private url(path: string, params: Record<string, string> = {}): string {
    const q = new URLSearchParams({ token: this.opts.token, ...params });
    return `${this.opts.base}${path}?${q}`;
  }

  /** Yields parsed server messages from /stream until the stream ends. */
  async *stream(signal?: AbortSignal): AsyncGenerator<ServerMessage> {
    const resp = await fetch(this.url("/stream"), { signal });
    if (!resp.ok || resp.body === null) {
      throw new Error(`stream failed: ${resp.status}`);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      for (;;) {
        const sep = buffer.indexOf("\n\n");
        if (sep < 0) break;
        const frame = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        for (const line of frame.split("\n")) {
          if (!line.startsWith("data: ")) continue;
          const msg = parseServerMessage(line.slice(6));
          if (msg !== null) yield msg;
        }
      }
    }
  }

  async command(msg: CommandMessage): Promise<Outcome> {
    const resp = await fetch(this.url("/command"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(msg),
    });
    if (!resp.ok) {
      throw new Error(`command failed: HTTP ${resp.status}`);
    }
    return (await resp.json()) as Outcome;
  }

  async history(start: number, end: number, strut?: string): Promise<Array<Record<string, unknown>>> {
    const params: Record<string, string> = { start: String(start), end: String(end) };
    if (strut !== undefined) params.strut = strut;
    const resp = await fetch(this.url("/history", params));
    if (!resp.ok) {
      throw new Error(`history failed: HTTP ${resp.status}`);
    }
    return (await resp.json()) as Array<Record<string, unknown>>;
  }

  async state(): Promise<Record<string, unknown>> {
    const resp = await fetch(this.url("/state"));
    if (!resp.ok) {
      throw new Error(`state failed: HTTP ${resp.status}`);
    }
    return (await resp.json()) as Record<string, unknown>;
  }
}
