/**
 * Pure view-model: the rendered transcript is a function of the
 * received message stream plus local drafts.  Replaying the same
 * stream (in any arrival order, with duplicates) reproduces the view.
 *
 * Lanes follow the sender and audience alone: the viewer's own
 * messages are the user lane (blue); a message whose audience lists
 * the viewer's session before any machine agent is addressed to them
 * (green); everything else the viewer is merely permitted to observe
 * (grey).
 */

import type {
  Action,
  BubbleView,
  ChatView,
  Draft,
  Lane,
  MessageJson,
  Viewer,
} from "./types.js";

function messageOrder(a: MessageJson, b: MessageJson): number {
  if (a.timestamp !== b.timestamp) return a.timestamp - b.timestamp;
  return numericId(a.id) - numericId(b.id);
}

function numericId(id: string): number {
  const digits = id.replace(/\D+/g, "");
  return digits ? parseInt(digits, 10) : 0;
}

export function dedupe(messages: MessageJson[]): MessageJson[] {
  const seen = new Set<string>();
  const out: MessageJson[] = [];
  for (const message of messages) {
    if (!seen.has(message.id)) {
      seen.add(message.id);
      out.push(message);
    }
  }
  out.sort(messageOrder);
  return out;
}

export function laneFor(message: MessageJson, viewer: Viewer): Lane {
  if (message.sender === viewer.user) return "user";
  for (const entry of message.audience) {
    if (entry === viewer.session) return "agent";
    if (viewer.agents.includes(entry)) break; // addressed past the agents: observer only
  }
  return "third-party";
}

function asText(value: unknown): string | null {
  return typeof value === "string" && value.length > 0 ? value : null;
}

function primaryText(message: MessageJson): string {
  const body = message.body;
  const gist = body["gist"] as { text?: string } | undefined;
  return (
    asText(body["text"]) ??
    asText(gist?.text) ??
    asText(body["ce"]) ??
    asText(body["error"]) ??
    message.kind
  );
}

/** Score header: each accepted confirm adds its interpretation score. */
export function scoreOf(messages: MessageJson[]): number {
  const ordered = dedupe(messages);
  const previews = new Map<string, number>();
  let score = 0;
  for (const message of ordered) {
    if (message.kind === "ce_confirm_request") {
      const value = message.body["score"];
      previews.set(message.conversation, typeof value === "number" ? value : 0);
    } else if (message.kind === "confirm_accept") {
      score += previews.get(message.conversation) ?? 0;
      previews.delete(message.conversation);
    }
  }
  return score;
}

function actionsFor(
  message: MessageJson,
  lane: Lane,
  lastInConversation: Map<string, string>,
): Action[] {
  const last = lastInConversation.get(message.conversation);
  const actions: Action[] = [];
  if (message.kind === "ce_confirm_request" && lane === "agent" && last === message.id) {
    // still awaiting the human's decision
    if (typeof message.body["asset"] === "string") {
      actions.push("authorize");
    } else {
      actions.push("accept");
    }
    actions.push("correct");
  }
  if (message.kind === "gist" && asText(message.body["gist_id"])) {
    actions.push("expand");
  }
  if (message.kind === "tell" && asText(message.body["ce"]) && last === message.id) {
    // the ask/tell interaction just closed; why is a legal next move
    actions.push("why");
  }
  return actions;
}

export function renderTranscript(
  messages: MessageJson[],
  viewer: Viewer,
  drafts: Draft[] = [],
): ChatView {
  const ordered = dedupe(messages);
  const lastInConversation = new Map<string, string>();
  for (const message of ordered) {
    lastInConversation.set(message.conversation, message.id);
  }
  const bubbles: BubbleView[] = [];
  for (const message of ordered) {
    const lane = laneFor(message, viewer);
    bubbles.push({
      id: message.id,
      conversation: message.conversation,
      lane,
      sender: message.sender,
      kind: message.kind,
      text: primaryText(message),
      ce: asText(message.body["ce"]),
      gistId: asText(message.body["gist_id"]),
      score:
        message.kind === "ce_confirm_request" &&
        typeof message.body["score"] === "number"
          ? (message.body["score"] as number)
          : null,
      rationale: message.kind === "because",
      pending: false,
      actions: actionsFor(message, lane, lastInConversation),
    });
  }
  for (const draft of unreconciled(ordered, viewer, drafts)) {
    bubbles.push({
      id: draft.id,
      conversation: draft.conversation ?? "",
      lane: "user",
      sender: viewer.user,
      kind: "nl_input",
      text: draft.text,
      ce: null,
      gistId: null,
      score: null,
      rationale: false,
      pending: true,
      actions: [],
    });
  }
  return { bubbles, score: scoreOf(ordered) };
}

/** Drop local echoes once the server's copy of the message arrives. */
export function unreconciled(
  messages: MessageJson[],
  viewer: Viewer,
  drafts: Draft[],
): Draft[] {
  return drafts.filter(
    (draft) =>
      !messages.some(
        (message) =>
          message.sender === viewer.user && message.body["text"] === draft.text,
      ),
  );
}
