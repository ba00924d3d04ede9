/** DOM wiring: one rendering loop over the ordered message stream. */

import { ServiceClient } from "./client.js";
import { renderTranscript } from "./viewmodel.js";
import type { Action, BubbleView, Draft, MessageJson, Viewer } from "./types.js";

const AGENTS = ["moira", "sam", "fusion"];

interface State {
  messages: MessageJson[];
  drafts: Draft[];
  error: string | null;
  ceVisible: Set<string>;
  showCeInline: boolean;
  correctTarget: string | null; // conversation id being corrected
}

export function startApp(root: HTMLElement): void {
  const client = new ServiceClient("");
  const state: State = {
    messages: [],
    drafts: [],
    error: null,
    ceVisible: new Set(),
    showCeInline: false,
    correctTarget: null,
  };
  let viewer: Viewer | null = null;
  let draftSeq = 0;

  root.innerHTML = `
    <header class="topbar">
      <span id="who"></span>
      <label class="toggle"><input type="checkbox" id="ce-toggle"> full CE</label>
      <span id="score" class="score">score 0</span>
    </header>
    <div id="error" class="error" hidden></div>
    <main id="transcript" class="transcript"></main>
    <footer class="composer">
      <input id="input" placeholder="Describe what you see..." autocomplete="off">
      <button id="send">Submit</button>
    </footer>
  `;

  const transcript = root.querySelector<HTMLElement>("#transcript")!;
  const input = root.querySelector<HTMLInputElement>("#input")!;
  const send = root.querySelector<HTMLButtonElement>("#send")!;
  const scoreEl = root.querySelector<HTMLElement>("#score")!;
  const errorEl = root.querySelector<HTMLElement>("#error")!;
  const ceToggle = root.querySelector<HTMLInputElement>("#ce-toggle")!;

  ceToggle.addEventListener("change", () => {
    state.showCeInline = ceToggle.checked;
    render();
  });

  function render(): void {
    if (!viewer) return;
    const view = renderTranscript(state.messages, viewer, state.drafts);
    scoreEl.textContent = `score ${view.score}`;
    errorEl.hidden = state.error === null;
    errorEl.textContent = state.error ?? "";
    transcript.replaceChildren(...view.bubbles.map(bubbleElement));
    transcript.scrollTop = transcript.scrollHeight;
  }

  function bubbleElement(bubble: BubbleView): HTMLElement {
    const el = document.createElement("div");
    el.className = `bubble ${bubble.lane}${bubble.pending ? " pending" : ""}${
      bubble.rationale ? " rationale" : ""
    }`;
    const meta = document.createElement("div");
    meta.className = "meta";
    meta.textContent = bubble.sender + (bubble.score !== null ? ` · score ${bubble.score}` : "");
    el.appendChild(meta);
    const text = document.createElement("div");
    text.className = "text";
    text.textContent = bubble.text;
    el.appendChild(text);
    if (bubble.ce && bubble.ce !== bubble.text) {
      const details = document.createElement("details");
      if (state.showCeInline || state.ceVisible.has(bubble.id)) details.open = true;
      details.addEventListener("toggle", () => {
        if (details.open) state.ceVisible.add(bubble.id);
        else state.ceVisible.delete(bubble.id);
      });
      const summary = document.createElement("summary");
      summary.textContent = "CE";
      const pre = document.createElement("pre");
      pre.textContent = bubble.ce;
      details.append(summary, pre);
      el.appendChild(details);
    }
    if (bubble.actions.length) {
      const bar = document.createElement("div");
      bar.className = "actions";
      for (const action of bubble.actions) {
        const button = document.createElement("button");
        button.textContent = action;
        button.addEventListener("click", () => act(action, bubble));
        bar.appendChild(button);
      }
      el.appendChild(bar);
    }
    return el;
  }

  function ingest(message: MessageJson): void {
    state.messages.push(message);
    if (viewer) {
      state.drafts = state.drafts.filter(
        (draft) =>
          !(message.sender === viewer!.user && message.body["text"] === draft.text),
      );
    }
    render();
  }

  async function post(body: Record<string, unknown>): Promise<void> {
    if (!viewer) return;
    const result = await client.post(viewer.session, body);
    state.error = result.error ?? null;
    for (const message of result.messages) ingest(message);
    render();
  }

  async function act(action: Action, bubble: BubbleView): Promise<void> {
    if (action === "accept" || action === "authorize") {
      await post({ kind: "confirm_accept", conversation: bubble.conversation });
    } else if (action === "correct") {
      state.correctTarget = bubble.conversation;
      input.placeholder = "Correction (e.g. it's a truck not a saloon)...";
      input.focus();
    } else if (action === "expand" && bubble.gistId) {
      await post({
        kind: "expand_request",
        conversation: bubble.conversation,
        gist_id: bubble.gistId,
      });
    } else if (action === "why") {
      const about = prompt("Why about which instance or fact id?");
      if (about) {
        await post({ kind: "why", conversation: bubble.conversation, about });
      }
    }
  }

  async function submit(): Promise<void> {
    const text = input.value.trim();
    if (!text || !viewer) return;
    if (state.correctTarget) {
      const conversation = state.correctTarget;
      state.correctTarget = null;
      input.placeholder = "Describe what you see...";
      input.value = "";
      await post({ kind: "confirm_correct", conversation, text });
      return;
    }
    const draft: Draft = { id: `local-${++draftSeq}`, text, conversation: null };
    state.drafts.push(draft);
    input.value = "";
    render();
    await post({ kind: "nl_input", text });
  }

  send.addEventListener("click", () => void submit());
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void submit();
  });

  void (async () => {
    const params = new URLSearchParams(location.search);
    const user = params.get("user") ?? "Border Patrol";
    const role = params.get("role") ?? "patrol";
    const area = params.get("area") ?? "North Road";
    const session = await client.createSession(user, role, "browser", area);
    viewer = { session: session.id, user: session.user, agents: AGENTS };
    root.querySelector("#who")!.textContent = `${session.user} (${session.role})`;
    client.connect(session.id, ingest, (connected) => {
      state.error = connected ? null : "reconnecting...";
      render();
    });
    render();
  })();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  startApp(document.getElementById("app")!);
}
