import { ApiClient, EvidenceBundleDoc, VerificationResult } from "./api.js";

/**
 * Interactive verification panel. Evidence fields come pre-filled from a
 * bundle but stay editable; every verdict shown is the service's answer for
 * the *current* field contents. Editing any field clears the verdict until
 * the user re-verifies, and a newer request supersedes any in flight.
 */
export class VerifyPanel {
  /** Resolves when the most recent verify round-trip settles (test hook). */
  pending: Promise<void> | null = null;

  private bundle: EvidenceBundleDoc | null = null;
  private requestSeq = 0;

  private readonly message: HTMLTextAreaElement;
  private readonly timestamp: HTMLInputElement;
  private readonly keycode: HTMLTextAreaElement;
  private readonly publicKey: HTMLTextAreaElement;
  private readonly verdictEl: HTMLElement;
  private readonly checksBody: HTMLElement;

  constructor(private root: HTMLElement, private api: ApiClient) {
    this.message = root.querySelector("#verify-message") as HTMLTextAreaElement;
    this.timestamp = root.querySelector("#verify-timestamp") as HTMLInputElement;
    this.keycode = root.querySelector("#verify-keycode") as HTMLTextAreaElement;
    this.publicKey = root.querySelector("#verify-public-key") as HTMLTextAreaElement;
    this.verdictEl = root.querySelector("#verify-verdict") as HTMLElement;
    this.checksBody = root.querySelector("#verify-checks tbody") as HTMLElement;

    for (const field of [this.message, this.timestamp, this.keycode, this.publicKey]) {
      field.addEventListener("input", () => this.clearVerdict());
    }
    const form = root.querySelector("#verify-form") as HTMLFormElement;
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.pending = this.verify();
    });
  }

  open(bundle: EvidenceBundleDoc): void {
    this.bundle = bundle;
    this.message.value = bundle.message;
    this.timestamp.value = bundle.timestamp === null ? "" : String(bundle.timestamp);
    this.keycode.value = bundle.keycode;
    this.publicKey.value = bundle.public_key;
    this.clearVerdict();
    this.root.hidden = false;
  }

  /** The bundle as currently edited on screen. */
  currentBundle(): EvidenceBundleDoc {
    if (!this.bundle) throw new Error("no bundle opened");
    const ts = this.timestamp.value.trim();
    return {
      ...this.bundle,
      message: this.message.value,
      timestamp: ts === "" ? null : Number(ts),
      keycode: this.keycode.value.trim(),
      public_key: this.publicKey.value.trim(),
    };
  }

  async verify(): Promise<void> {
    const seq = ++this.requestSeq;
    this.verdictEl.textContent = "verifying…";
    this.verdictEl.className = "verdict pending";
    let result: VerificationResult;
    try {
      result = await this.api.verify(this.currentBundle());
    } catch (err) {
      if (seq !== this.requestSeq) return; // superseded
      this.verdictEl.textContent = `verification request failed: ${String(err)}`;
      this.verdictEl.className = "verdict error";
      return;
    }
    if (seq !== this.requestSeq) return; // superseded by a newer request
    this.render(result);
  }

  private clearVerdict(): void {
    this.requestSeq++; // anything in flight is now stale
    this.verdictEl.textContent = "";
    this.verdictEl.className = "verdict";
    this.checksBody.textContent = "";
  }

  private render(result: VerificationResult): void {
    this.verdictEl.textContent = result.verdict ? "VERIFIED" : "FAILED";
    this.verdictEl.className = `verdict ${result.verdict ? "green" : "red"}`;
    this.checksBody.textContent = "";
    for (const check of result.checks) {
      const row = document.createElement("tr");
      row.className = check.passed ? "green" : "red";
      for (const text of [check.name, check.passed ? "pass" : "fail", check.detail]) {
        const cell = document.createElement("td");
        cell.textContent = text;
        row.appendChild(cell);
      }
      this.checksBody.appendChild(row);
    }
  }
}
