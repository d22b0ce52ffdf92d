import { ApiClient, PostRecordDoc } from "./api.js";
import { VerifyPanel } from "./verify-panel.js";

/** Search and browse view; every result row links into the verify panel. */
export class SearchView {
  pending: Promise<void> | null = null;

  private readonly form: HTMLFormElement;
  private readonly emptyEl: HTMLElement;
  private readonly tableBody: HTMLElement;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private panel: VerifyPanel,
  ) {
    this.form = root.querySelector("#search-form") as HTMLFormElement;
    this.emptyEl = root.querySelector("#search-empty") as HTMLElement;
    this.tableBody = root.querySelector("#search-results tbody") as HTMLElement;
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.pending = this.run();
    });
  }

  private param(id: string): string {
    return (this.root.querySelector(id) as HTMLInputElement).value.trim();
  }

  async run(): Promise<void> {
    const fromRaw = this.param("#search-from");
    const toRaw = this.param("#search-to");
    const records = await this.api.search({
      user: this.param("#search-user") || undefined,
      q: this.param("#search-q") || undefined,
      from: fromRaw === "" ? undefined : Number(fromRaw),
      to: toRaw === "" ? undefined : Number(toRaw),
    });
    this.renderRows(records);
  }

  private renderRows(records: PostRecordDoc[]): void {
    this.tableBody.textContent = "";
    this.emptyEl.hidden = records.length > 0;
    for (const record of records) {
      const row = document.createElement("tr");
      row.dataset.postId = record.post_id;
      for (const text of [
        record.user_id,
        record.scheme,
        String(record.timestamp),
        record.status,
        record.message,
      ]) {
        const cell = document.createElement("td");
        cell.textContent = text;
        row.appendChild(cell);
      }
      const actions = document.createElement("td");
      const button = document.createElement("button");
      button.type = "button";
      button.textContent = "Verify";
      button.addEventListener("click", () => {
        this.pending = this.openEvidence(record.post_id);
      });
      actions.appendChild(button);
      row.appendChild(actions);
      this.tableBody.appendChild(row);
    }
  }

  private async openEvidence(postId: string): Promise<void> {
    this.panel.open(await this.api.evidence(postId));
  }
}
