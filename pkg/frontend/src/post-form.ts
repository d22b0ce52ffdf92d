import { ApiClient, ApiError } from "./api.js";

/**
 * Posting view: message, scheme selector, optional PNG attachments.
 * On success the returned key-code is rendered next to the plaintext.
 */
export class PostForm {
  pending: Promise<void> | null = null;

  private readonly form: HTMLFormElement;
  private readonly message: HTMLTextAreaElement;
  private readonly scheme: HTMLSelectElement;
  private readonly images: HTMLInputElement;
  private readonly errorEl: HTMLElement;
  private readonly resultEl: HTMLElement;

  constructor(
    root: HTMLElement,
    private api: ApiClient,
    private credentials: () => { userId: string; token: string } | null,
  ) {
    this.form = root.querySelector("#post-form") as HTMLFormElement;
    this.message = root.querySelector("#post-message") as HTMLTextAreaElement;
    this.scheme = root.querySelector("#post-scheme") as HTMLSelectElement;
    this.images = root.querySelector("#post-images") as HTMLInputElement;
    this.errorEl = root.querySelector("#post-error") as HTMLElement;
    this.resultEl = root.querySelector("#post-result") as HTMLElement;
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.pending = this.submit();
    });
  }

  private showError(text: string): void {
    this.errorEl.textContent = text;
    this.errorEl.hidden = false;
  }

  async submit(): Promise<void> {
    this.errorEl.hidden = true;
    this.resultEl.hidden = true;
    const message = this.message.value;
    if (message.trim() === "") {
      // never bother the service with an empty post
      this.showError("message must not be empty");
      return;
    }
    const creds = this.credentials();
    if (!creds) {
      this.showError("register an account first");
      return;
    }
    const files = Array.from(this.images.files ?? []);
    try {
      const response = await this.api.createPost(
        creds.token,
        { user_id: creds.userId, scheme: this.scheme.value, message },
        files,
      );
      const messageOut = this.resultEl.querySelector("#post-result-message")!;
      const keycodeOut = this.resultEl.querySelector("#post-result-keycode")!;
      messageOut.textContent = response.post.message;
      keycodeOut.textContent = response.keycode;
      this.resultEl.hidden = false;
    } catch (err) {
      if (err instanceof ApiError && err.imageIndex !== undefined) {
        this.showError(`image ${err.imageIndex + 1} is too small: ${err.message}`);
      } else {
        this.showError(err instanceof Error ? err.message : String(err));
      }
    }
  }
}
