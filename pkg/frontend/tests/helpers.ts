import { spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

/** Load the real page markup (minus its script tag) into the jsdom document. */
export function loadDom(): void {
  const here = dirname(fileURLToPath(import.meta.url));
  const html = readFileSync(join(here, "..", "index.html"), "utf-8");
  const body = html.match(/<body>([\s\S]*)<\/body>/)![1];
  document.body.innerHTML = body.replace(/<script[\s\S]*?<\/script>/g, "");
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface ServiceHandle {
  base: string;
  stop: () => void;
}

/** Spawn the real backend service on a scratch store and wait until it answers. */
export async function startService(): Promise<ServiceHandle> {
  const port = 8600 + Math.floor(Math.random() * 2000);
  const storeDir = mkdtempSync(join(tmpdir(), "postseal-ui-"));
  const proc = spawn(
    "python3",
    ["-m", "postseal.cli", "serve", "--store", storeDir, "--port", String(port)],
    { stdio: "ignore" },
  );
  const base = `http://127.0.0.1:${port}`;
  for (let attempt = 0; attempt < 150; attempt++) {
    try {
      const resp = await fetch(`${base}/posts`);
      if (resp.ok) {
        return { base, stop: () => proc.kill() };
      }
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  proc.kill();
  throw new Error("backend service did not come up");
}
