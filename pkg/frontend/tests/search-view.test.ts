import { beforeEach, expect, test } from "vitest";

import { ApiClient } from "../src/api.js";
import { SearchView } from "../src/search-view.js";
import { VerifyPanel } from "../src/verify-panel.js";
import { jsonResponse, loadDom } from "./helpers.js";

const record = {
  post_id: "p1",
  user_id: "alice",
  scheme: "text",
  message: "hello there",
  timestamp: 1700000000,
  keycode: "a2M=",
  status: "published",
};

const bundle = {
  user_id: "alice",
  scheme: "text",
  hashing_mode: "hashed",
  message: "hello there",
  timestamp: null,
  keycode: "a2M=",
  public_key: "cGs=",
  images: [],
};

function makeView(
  fetchFn: (input: string, init?: RequestInit) => Promise<Response>,
): SearchView {
  loadDom();
  const api = new ApiClient("", fetchFn);
  const panel = new VerifyPanel(
    document.querySelector("#verify-section") as HTMLElement,
    api,
  );
  return new SearchView(
    document.querySelector("#search-section") as HTMLElement,
    api,
    panel,
  );
}

function submitSearch(view: SearchView): Promise<void> {
  (document.querySelector("#search-form") as HTMLFormElement).dispatchEvent(
    new Event("submit", { cancelable: true }),
  );
  return view.pending ?? Promise.resolve();
}

beforeEach(() => {
  document.body.innerHTML = "";
});

test("empty result shows the explicit no-posts state", async () => {
  const view = makeView(async () => jsonResponse({ results: [] }));
  await submitSearch(view);
  expect((document.querySelector("#search-empty") as HTMLElement).hidden).toBe(false);
  expect(document.querySelectorAll("#search-results tbody tr").length).toBe(0);
});

test("results render one row per record with a verify action", async () => {
  const view = makeView(async () => jsonResponse({ results: [record] }));
  await submitSearch(view);
  const rows = document.querySelectorAll("#search-results tbody tr");
  expect(rows.length).toBe(1);
  expect(rows[0].textContent).toContain("hello there");
  expect(rows[0].querySelector("button")!.textContent).toBe("Verify");
  expect((document.querySelector("#search-empty") as HTMLElement).hidden).toBe(true);
});

test("filters are forwarded as query parameters", async () => {
  const urls: string[] = [];
  const view = makeView(async (url) => {
    urls.push(url);
    return jsonResponse({ results: [] });
  });
  (document.querySelector("#search-user") as HTMLInputElement).value = "alice";
  (document.querySelector("#search-q") as HTMLInputElement).value = "hello";
  (document.querySelector("#search-from") as HTMLInputElement).value = "10";
  await submitSearch(view);
  expect(urls[0]).toContain("user=alice");
  expect(urls[0]).toContain("q=hello");
  expect(urls[0]).toContain("from=10");
});

test("the verify action fetches evidence and opens the panel pre-filled", async () => {
  const view = makeView(async (url) => {
    if (url.includes("/evidence")) return jsonResponse(bundle);
    return jsonResponse({ results: [record] });
  });
  await submitSearch(view);
  (document.querySelector("#search-results tbody button") as HTMLButtonElement).click();
  await view.pending;
  const section = document.querySelector("#verify-section") as HTMLElement;
  expect(section.hidden).toBe(false);
  expect((document.querySelector("#verify-message") as HTMLTextAreaElement).value).toBe(
    "hello there",
  );
});
