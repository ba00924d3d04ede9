import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import {
  dedupe,
  laneFor,
  renderTranscript,
  scoreOf,
  unreconciled,
} from "../src/viewmodel";
import type { MessageJson, Viewer } from "../src/types";

const here = dirname(fileURLToPath(import.meta.url));
const fixture = JSON.parse(
  readFileSync(join(here, "fixtures", "use_case_stream.json"), "utf-8"),
) as {
  self: { session: string; user: string };
  analyst: { session: string; user: string };
  agents: string[];
  final_score: number;
  messages: MessageJson[];
  analyst_messages: MessageJson[];
};

const patrol: Viewer = {
  session: fixture.self.session,
  user: fixture.self.user,
  agents: fixture.agents,
};
const analyst: Viewer = {
  session: fixture.analyst.session,
  user: fixture.analyst.user,
  agents: fixture.agents,
};

describe("use-case replay", () => {
  it("renders the recorded stream into the expected lanes", () => {
    const view = renderTranscript(fixture.messages, patrol);
    const lanes = Object.fromEntries(view.bubbles.map((b) => [b.id, b.lane]));
    expect(lanes).toEqual({
      m1: "user", // the spot report
      m2: "agent", // confirm request
      m3: "user", // correction
      m4: "agent",
      m5: "user",
      m6: "agent",
      m7: "user", // accept
      m8: "third-party", // fusion tells the analyst
      m9: "third-party", // Sam tasks via Moira
      m10: "third-party", // analyst notification gist
      m11: "agent", // patrol lookout gist
      m12: "user", // expand request
      m13: "agent", // expand reply
    });
  });

  it("orders bubbles by timestamp", () => {
    const shuffled = [...fixture.messages].reverse();
    const view = renderTranscript(shuffled, patrol);
    const stamps = view.bubbles.map((b) =>
      fixture.messages.find((m) => m.id === b.id)!.timestamp,
    );
    expect(stamps).toEqual([...stamps].sort((a, b) => a - b));
  });

  it("accept moves the score header by the interpretation score", () => {
    const upToConfirm = fixture.messages.slice(0, 6); // through m6, not accepted
    expect(renderTranscript(upToConfirm, patrol).score).toBe(0);
    const accepted = fixture.messages.slice(0, 7); // m7 = confirm_accept
    const preview = fixture.messages[5].body["score"] as number;
    expect(renderTranscript(accepted, patrol).score).toBe(preview);
    expect(renderTranscript(fixture.messages, patrol).score).toBe(
      fixture.final_score,
    );
  });

  it("expand reveals CE identical to the Expand payload", () => {
    const view = renderTranscript(fixture.messages, patrol);
    const expand = view.bubbles.find((b) => b.kind === "expand")!;
    const payload = fixture.messages.find((m) => m.id === expand.id)!;
    expect(expand.ce).toBe(payload.body["ce"]);
    expect(expand.ce).toMatch(/^there is a task notification named/);
  });

  it("is a pure function of the stream: duplicates change nothing", () => {
    const once = renderTranscript(fixture.messages, patrol);
    const twice = renderTranscript(
      [...fixture.messages, ...fixture.messages],
      patrol,
    );
    expect(twice).toEqual(once);
  });

  it("the analyst sees their own lanes", () => {
    const view = renderTranscript(fixture.analyst_messages, analyst);
    const lanes = Object.fromEntries(view.bubbles.map((b) => [b.id, b.lane]));
    expect(lanes["m8"]).toBe("agent"); // fusion tell is addressed to them
    expect(lanes["m11"]).toBe("third-party"); // the patrol lookout is not
    const because = view.bubbles.find((b) => b.kind === "because")!;
    expect(because.rationale).toBe(true);
    expect(because.text).toMatch(/^because there is a person named p1/);
  });
});

describe("action affordances", () => {
  it("pending confirm offers accept and correct", () => {
    const pending = fixture.messages.slice(0, 2); // nl_input + confirm request
    const view = renderTranscript(pending, patrol);
    const confirm = view.bubbles.find((b) => b.kind === "ce_confirm_request")!;
    expect(confirm.actions).toEqual(["accept", "correct"]);
  });

  it("resolved confirms offer nothing", () => {
    const view = renderTranscript(fixture.messages, patrol);
    for (const bubble of view.bubbles) {
      if (bubble.kind === "ce_confirm_request") {
        expect(bubble.actions).toEqual([]);
      }
    }
  });

  it("gists offer expand, tells offer why while the interaction is open", () => {
    const view = renderTranscript(fixture.messages, patrol);
    const gist = view.bubbles.find((b) => b.id === "m11")!;
    expect(gist.actions).toContain("expand");
    const analystView = renderTranscript(fixture.analyst_messages, analyst);
    const tell = analystView.bubbles.find((b) => b.id === "m8")!;
    expect(tell.actions).toContain("why");
  });

  it("an authorization request offers authorize instead of accept", () => {
    const auth: MessageJson = {
      id: "m99",
      conversation: "c99",
      sender: "sam",
      audience: [patrol.session, "sam"],
      kind: "ce_confirm_request",
      body: { ce: "the task t1 is assigned the asset uav1.", asset: "uav1", score: 0 },
      in_reply_to: null,
      timestamp: 9_999_999,
    };
    const view = renderTranscript([...fixture.messages, auth], patrol);
    const bubble = view.bubbles.find((b) => b.id === "m99")!;
    expect(bubble.actions).toEqual(["authorize", "correct"]);
  });
});

describe("stream plumbing", () => {
  it("deduplicates and sorts", () => {
    const doubled = dedupe([...fixture.messages, ...fixture.messages]);
    expect(doubled.map((m) => m.id)).toEqual(fixture.messages.map((m) => m.id));
  });

  it("lane derivation uses only sender and audience", () => {
    const message = fixture.messages.find((m) => m.id === "m9")!;
    expect(laneFor(message, patrol)).toBe("third-party");
    expect(laneFor({ ...message, audience: [patrol.session, "moira"] }, patrol)).toBe(
      "agent",
    );
  });

  it("score is additive across conversations", () => {
    const base = fixture.messages;
    const extra: MessageJson[] = [
      {
        id: "x1",
        conversation: "cx",
        sender: "moira",
        audience: [patrol.session, "moira"],
        kind: "ce_confirm_request",
        body: { ce: "there is a colour named red.", score: 2 },
        in_reply_to: null,
        timestamp: 10_000_000,
      },
      {
        id: "x2",
        conversation: "cx",
        sender: patrol.user,
        audience: [patrol.session, "moira"],
        kind: "confirm_accept",
        body: {},
        in_reply_to: "x1",
        timestamp: 10_000_001,
      },
    ];
    expect(scoreOf([...base, ...extra])).toBe(fixture.final_score + 2);
  });

  it("local drafts reconcile against the server echo", () => {
    const drafts = [
      { id: "local-1", text: "red car", conversation: null },
      { id: "local-2", text: "unsent text", conversation: null },
    ];
    const echo: MessageJson = {
      id: "m50",
      conversation: "c50",
      sender: patrol.user,
      audience: [patrol.session, "moira"],
      kind: "nl_input",
      body: { text: "red car" },
      in_reply_to: null,
      timestamp: 10_000_002,
    };
    const left = unreconciled([echo], patrol, drafts);
    expect(left.map((d) => d.id)).toEqual(["local-2"]);
    const view = renderTranscript([echo], patrol, drafts);
    const pendingBubbles = view.bubbles.filter((b) => b.pending);
    expect(pendingBubbles.map((b) => b.text)).toEqual(["unsent text"]);
  });
});
