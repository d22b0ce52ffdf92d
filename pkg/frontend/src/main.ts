import { ApiClient } from "./api.js";
import { PostForm } from "./post-form.js";
import { SearchView } from "./search-view.js";
import { VerifyPanel } from "./verify-panel.js";

export interface App {
  api: ApiClient;
  postForm: PostForm;
  searchView: SearchView;
  verifyPanel: VerifyPanel;
  registerPending: Promise<void> | null;
}

/** Wire the three views onto an already-loaded document. */
export function bootstrap(doc: Document, api: ApiClient): App {
  let credentials: { userId: string; token: string } | null = null;

  const panel = new VerifyPanel(
    doc.querySelector("#verify-section") as HTMLElement,
    api,
  );
  const postForm = new PostForm(
    doc.querySelector("#post-section") as HTMLElement,
    api,
    () => credentials,
  );
  const searchView = new SearchView(
    doc.querySelector("#search-section") as HTMLElement,
    api,
    panel,
  );

  const app: App = {
    api,
    postForm,
    searchView,
    verifyPanel: panel,
    registerPending: null,
  };

  const userInput = doc.querySelector("#account-user") as HTMLInputElement;
  const registerButton = doc.querySelector("#account-register") as HTMLButtonElement;
  const statusEl = doc.querySelector("#account-status") as HTMLElement;
  registerButton.addEventListener("click", () => {
    const userId = userInput.value.trim();
    if (!userId) {
      statusEl.textContent = "enter a user id";
      return;
    }
    app.registerPending = api
      .register(userId)
      .then((receipt) => {
        credentials = { userId: receipt.user_id, token: receipt.token };
        statusEl.textContent = `registered as ${receipt.user_id}`;
      })
      .catch((err) => {
        statusEl.textContent = err instanceof Error ? err.message : String(err);
      });
  });

  return app;
}

// Browser entry point; tests call bootstrap() themselves.
if (typeof window !== "undefined" && document.getElementById("post-section")) {
  const base = (window as { POSTSEAL_API?: string }).POSTSEAL_API ?? "";
  bootstrap(document, new ApiClient(base));
}
