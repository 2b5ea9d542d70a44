import type {
  ContactPatch,
  ContactRecord,
  ContactSummary,
  ConversationView,
  DisplaySnapshot,
  JobView,
  MediaAccepted,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public detail: unknown) {
    super(`HTTP ${status}: ${typeof detail === "string" ? detail : JSON.stringify(detail)}`);
  }
}

export type DisplayPoll =
  | { changed: true; snapshot: DisplaySnapshot; etag: string }
  | { changed: false };

export interface ApiClientOptions {
  baseUrl?: string;
  token?: string;
  fetchImpl?: typeof fetch;
}

export class ApiClient {
  readonly baseUrl: string;
  private token?: string;
  private fetchImpl: typeof fetch;

  constructor(opts: ApiClientOptions = {}) {
    this.baseUrl = (opts.baseUrl ?? "").replace(/\/$/, "");
    this.token = opts.token;
    this.fetchImpl = opts.fetchImpl ?? fetch.bind(globalThis);
  }

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const base: Record<string, string> = { ...extra };
    if (this.token) base["authorization"] = `Bearer ${this.token}`;
    return base;
  }

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      ...init,
      headers: this.headers((init.headers as Record<string, string>) ?? {}),
    });
    if (!resp.ok && resp.status !== 304) {
      let detail: unknown;
      try {
        detail = (await resp.json()).detail;
      } catch {
        detail = resp.statusText;
      }
      throw new ApiError(resp.status, detail);
    }
    return resp;
  }

  /** Conditional poll: 304 means nothing changed since `etag`. */
  async pollDisplay(etag?: string): Promise<DisplayPoll> {
    const headers: Record<string, string> = {};
    if (etag !== undefined) headers["if-none-match"] = etag;
    const resp = await this.request("/v1/display", { headers });
    if (resp.status === 304) return { changed: false };
    const snapshot = (await resp.json()) as DisplaySnapshot;
    return { changed: true, snapshot, etag: resp.headers.get("etag") ?? String(snapshot.revision) };
  }

  async uploadMedia(filename: string, payload: Blob): Promise<MediaAccepted> {
    const form = new FormData();
    form.append("file", payload, filename);
    const resp = await this.request("/v1/media", { method: "POST", body: form });
    return (await resp.json()) as MediaAccepted;
  }

  async getJob(jobId: string): Promise<JobView> {
    const resp = await this.request(`/v1/jobs/${jobId}`);
    return (await resp.json()) as JobView;
  }

  async listContacts(q?: string): Promise<ContactSummary[]> {
    const query = q ? `?q=${encodeURIComponent(q)}` : "";
    const resp = await this.request(`/v1/contacts${query}`);
    return (await resp.json()) as ContactSummary[];
  }

  async getContact(personId: string): Promise<ContactRecord> {
    const resp = await this.request(`/v1/contacts/${personId}`);
    return (await resp.json()) as ContactRecord;
  }

  async patchContact(personId: string, patch: ContactPatch): Promise<ContactRecord> {
    const resp = await this.request(`/v1/contacts/${personId}`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(patch),
    });
    return (await resp.json()) as ContactRecord;
  }

  async listOrphans(): Promise<ConversationView[]> {
    const resp = await this.request("/v1/orphans");
    return (await resp.json()) as ConversationView[];
  }

  async attachOrphan(conversationId: string, personId: string): Promise<ContactRecord> {
    const resp = await this.request(`/v1/orphans/${conversationId}/attach`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ person_id: personId }),
    });
    return (await resp.json()) as ContactRecord;
  }
}
