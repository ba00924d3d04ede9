/** Message envelope exactly as the agent service emits it. */
export interface MessageJson {
  id: string;
  conversation: string;
  sender: string;
  audience: string[];
  kind: string;
  body: Record<string, unknown>;
  in_reply_to: string | null;
  timestamp: number;
}

/** Who is looking at the transcript. */
export interface Viewer {
  session: string;
  user: string;
  agents: string[];
}

export type Lane = "user" | "agent" | "third-party";

export type Action = "accept" | "correct" | "why" | "expand" | "authorize";

export interface BubbleView {
  id: string;
  conversation: string;
  lane: Lane;
  sender: string;
  kind: string;
  /** gist-first primary text */
  text: string;
  /** full CE, revealed by a disclosure control */
  ce: string | null;
  gistId: string | null;
  score: number | null;
  rationale: boolean;
  pending: boolean;
  actions: Action[];
}

export interface Draft {
  id: string;
  text: string;
  conversation: string | null;
}

export interface ChatView {
  bubbles: BubbleView[];
  score: number;
}
