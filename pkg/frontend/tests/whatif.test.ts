/**
 * Acceptance: the interactive what-if loop, end to end against the real
 * backend. A seeded post verifies green; editing one character of the
 * plaintext re-verifies red; restoring it re-verifies green. Every verdict
 * shown must come from a POST /verify carrying the fields as edited.
 */

import { afterAll, beforeAll, expect, test } from "vitest";

import { ApiClient } from "../src/api.js";
import { bootstrap } from "../src/main.js";
import { loadDom, startService, ServiceHandle } from "./helpers.js";

const MESSAGE = "the quick brown fox";

let service: ServiceHandle;

beforeAll(async () => {
  service = await startService();

  // seed one account and one text post through the public API
  const account = await (
    await fetch(`${service.base}/accounts`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ user_id: "alice", custody: "ttp-held" }),
    })
  ).json();
  const created = await fetch(`${service.base}/posts`, {
    method: "POST",
    headers: {
      "Content-Type": "application/json",
      Authorization: `Bearer ${account.token}`,
    },
    body: JSON.stringify({ user_id: "alice", scheme: "text", message: MESSAGE }),
  });
  expect(created.status).toBe(201);
}, 60_000);

afterAll(() => {
  service?.stop();
});

test("what-if loop: green, edit one char red, restore green, traced", async () => {
  const verifyPayloads: Array<{ message: string }> = [];
  const tracingFetch = (input: string, init?: RequestInit) => {
    if (input.endsWith("/verify") && init?.method === "POST") {
      verifyPayloads.push(JSON.parse(String(init.body)));
    }
    return globalThis.fetch(input, init);
  };

  loadDom();
  const app = bootstrap(document, new ApiClient(service.base, tracingFetch));

  // find the seeded post and open its verification panel
  (document.querySelector("#search-form") as HTMLFormElement).dispatchEvent(
    new Event("submit", { cancelable: true }),
  );
  await app.searchView.pending;
  const verifyButton = document.querySelector(
    "#search-results tbody button",
  ) as HTMLButtonElement;
  expect(verifyButton).not.toBeNull();
  verifyButton.click();
  await app.searchView.pending;

  const section = document.querySelector("#verify-section") as HTMLElement;
  expect(section.hidden).toBe(false);
  const messageField = document.querySelector(
    "#verify-message",
  ) as HTMLTextAreaElement;
  expect(messageField.value).toBe(MESSAGE);

  const verdict = document.querySelector("#verify-verdict") as HTMLElement;
  const reverify = async () => {
    (document.querySelector("#verify-form") as HTMLFormElement).dispatchEvent(
      new Event("submit", { cancelable: true }),
    );
    await app.verifyPanel.pending;
  };

  // 1) untouched evidence: green
  await reverify();
  expect(verdict.textContent).toBe("VERIFIED");
  expect(verdict.className).toContain("green");

  // 2) edit one character: verdict clears, re-verify goes red
  const edited = "T" + MESSAGE.slice(1);
  messageField.value = edited;
  messageField.dispatchEvent(new Event("input"));
  expect(verdict.textContent).toBe("");
  await reverify();
  expect(verdict.textContent).toBe("FAILED");
  expect(verdict.className).toContain("red");
  const failedRows = document.querySelectorAll("#verify-checks tbody tr.red");
  expect(failedRows.length).toBeGreaterThan(0);

  // 3) restore the original text: green again
  messageField.value = MESSAGE;
  messageField.dispatchEvent(new Event("input"));
  await reverify();
  expect(verdict.textContent).toBe("VERIFIED");
  expect(verdict.className).toContain("green");

  // every verdict traces back to a /verify call with the edited payload
  expect(verifyPayloads.map((p) => p.message)).toEqual([MESSAGE, edited, MESSAGE]);
}, 60_000);
