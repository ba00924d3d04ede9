/** Thin HTTP + WebSocket client for the agent service. */

import type { MessageJson } from "./types.js";

export interface SessionInfo {
  id: string;
  user: string;
  role: string;
  device: string;
  score: number;
}

export interface PostResult {
  messages: MessageJson[];
  score: number;
  error?: string;
}

export class ServiceClient {
  constructor(private base: string = "") {}

  async createSession(
    user: string,
    role: string,
    device = "phone",
    area?: string,
  ): Promise<SessionInfo> {
    const response = await fetch(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ user, role, device, area }),
    });
    if (!response.ok) {
      throw new Error(`session create failed: ${await response.text()}`);
    }
    return (await response.json()) as SessionInfo;
  }

  async post(sessionId: string, body: Record<string, unknown>): Promise<PostResult> {
    const response = await fetch(`${this.base}/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await response.json()) as PostResult;
  }

  /**
   * Connect the session stream.  The server replays the transcript on
   * every (re)connect and the view-model deduplicates, so dropping the
   * socket loses nothing.
   */
  connect(
    sessionId: string,
    onMessage: (message: MessageJson) => void,
    onState?: (connected: boolean) => void,
  ): () => void {
    let socket: WebSocket | null = null;
    let closed = false;
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    const url = `${scheme}://${location.host}${this.base}/sessions/${sessionId}/stream`;

    const open = () => {
      if (closed) return;
      socket = new WebSocket(url);
      socket.onopen = () => onState?.(true);
      socket.onmessage = (event) => onMessage(JSON.parse(event.data) as MessageJson);
      socket.onclose = () => {
        onState?.(false);
        if (!closed) setTimeout(open, 1000);
      };
    };
    open();
    return () => {
      closed = true;
      socket?.close();
    };
  }
}
