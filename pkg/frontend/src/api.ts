/** Typed client for the postseal service's JSON endpoints. */

export interface CheckEntry {
  name: string;
  passed: boolean;
  detail: string;
}

export interface VerificationResult {
  verdict: boolean;
  checks: CheckEntry[];
}

export interface ImageEntry {
  name: string;
  sha256?: string;
  data: string; // base64url PNG bytes
}

export interface EvidenceBundleDoc {
  format?: string;
  user_id: string;
  scheme: string;
  hashing_mode: string;
  message: string;
  timestamp: number | null;
  keycode: string;
  public_key: string;
  images: ImageEntry[];
}

export interface PostRecordDoc {
  post_id: string;
  user_id: string;
  scheme: string;
  message: string;
  timestamp: number;
  keycode: string;
  status: string;
}

export interface PostResponse {
  post: PostRecordDoc;
  keycode: string;
  evidence_url: string;
  publish_ref: string | null;
  publish_error: string | null;
}

export interface RegisterResponse {
  user_id: string;
  public_key: string;
  custody: string;
  token: string;
  private_key?: string;
}

export interface SearchParams {
  user?: string;
  q?: string;
  from?: number;
  to?: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string, public imageIndex?: number) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base = "",
    private fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchFn(this.base + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail =
        typeof (body as { detail?: unknown }).detail === "string"
          ? (body as { detail: string }).detail
          : `request failed with status ${resp.status}`;
      throw new ApiError(resp.status, detail, (body as { image_index?: number }).image_index);
    }
    return body;
  }

  register(userId: string, custody = "ttp-held"): Promise<RegisterResponse> {
    return this.request("/accounts", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ user_id: userId, custody }),
    }) as Promise<RegisterResponse>;
  }

  createPost(
    token: string,
    fields: {
      user_id: string;
      scheme: string;
      message: string;
      timestamp?: number;
    },
    images: File[] = [],
  ): Promise<PostResponse> {
    const headers: Record<string, string> = { Authorization: `Bearer ${token}` };
    if (images.length === 0) {
      return this.request("/posts", {
        method: "POST",
        headers: { ...headers, "Content-Type": "application/json" },
        body: JSON.stringify(fields),
      }) as Promise<PostResponse>;
    }
    const form = new FormData();
    for (const [key, value] of Object.entries(fields)) {
      if (value !== undefined) form.append(key, String(value));
    }
    for (const file of images) {
      form.append("images", file, file.name);
    }
    return this.request("/posts", {
      method: "POST",
      headers,
      body: form,
    }) as Promise<PostResponse>;
  }

  search(params: SearchParams): Promise<PostRecordDoc[]> {
    const query = new URLSearchParams();
    if (params.user) query.set("user", params.user);
    if (params.q) query.set("q", params.q);
    if (params.from !== undefined) query.set("from", String(params.from));
    if (params.to !== undefined) query.set("to", String(params.to));
    const suffix = query.toString() ? `?${query}` : "";
    return (
      this.request(`/posts${suffix}`) as Promise<{ results: PostRecordDoc[] }>
    ).then((body) => body.results);
  }

  evidence(postId: string): Promise<EvidenceBundleDoc> {
    return this.request(`/posts/${postId}/evidence`) as Promise<EvidenceBundleDoc>;
  }

  /** Stateless: verifies exactly the submitted bundle, edited or not. */
  verify(bundle: EvidenceBundleDoc): Promise<VerificationResult> {
    return this.request("/verify", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(bundle),
    }) as Promise<VerificationResult>;
  }
}
