// Typed client for the session service. Every method is one endpoint.

export interface EdgeView {
  variable: string;
  anchor: string;
  resolved: boolean;
}

export interface ContentView {
  ref: string;
  title: string;
  body: string;
}

export interface PageView {
  page_id: string;
  content: ContentView | null;
  edges: EdgeView[];
}

export interface SessionView {
  session_id: string;
  site: string;
  user: string | null;
  template: string | null;
  status: string;
  kind: string;
  page: PageView | null;
  applied: Record<string, boolean>;
  eliminated: string[];
  warnings: string[];
  no_match: boolean;
}

export interface TemplateView {
  name: string;
  scope: string;
  user: string | null;
  baked: Record<string, boolean>;
  baked_slots: Record<string, string>;
  free: string[];
}

export interface ChoicesView {
  session_id: string;
  attribute: string;
  values: string[];
}

export interface AnalysisView {
  site: string;
  validation: string[];
  frozen: { frozen: boolean; depth: number; single_level_edges: string[] };
  verdicts: { activity: string; kind: string; witness: Record<string, unknown>; detail: string }[];
  summary: Record<string, number>;
}

export interface ErrorBody {
  error: string;
  detail: string;
  chain?: string[];
  [key: string]: unknown;
}

export class ApiError extends Error {
  constructor(public status: number, public body: ErrorBody) {
    super(body.detail || body.error);
  }
}

export class ApiClient {
  requestCount = 0;

  constructor(private baseUrl: string = "") {}

  private async call<T>(method: string, path: string, payload?: unknown): Promise<T> {
    this.requestCount += 1;
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: payload === undefined ? {} : { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body as ErrorBody);
    }
    return body as T;
  }

  listSites(): Promise<{ sites: string[] }> {
    return this.call("GET", "/sites");
  }

  installSite(doc: unknown): Promise<{ site: string; leaves: number; report: string[] }> {
    return this.call("POST", "/sites", doc);
  }

  analysis(site: string): Promise<AnalysisView> {
    return this.call("GET", `/sites/${encodeURIComponent(site)}/analysis`);
  }

  templates(site: string): Promise<{ site: string; templates: TemplateView[] }> {
    return this.call("GET", `/sites/${encodeURIComponent(site)}/templates`);
  }

  deriveTemplates(
    site: string,
    payload: { theory: unknown; traces: unknown[]; top_k?: number },
  ): Promise<{ site: string; templates: TemplateView[] }> {
    return this.call("POST", `/sites/${encodeURIComponent(site)}/templates`, payload);
  }

  createSession(site: string, template?: string, user?: string): Promise<SessionView> {
    return this.call("POST", "/sessions", {
      site,
      template: template ?? null,
      user: user ?? null,
    });
  }

  page(sessionId: string): Promise<SessionView> {
    return this.call("GET", `/sessions/${sessionId}/page`);
  }

  click(sessionId: string, variable: string): Promise<SessionView> {
    return this.call("POST", `/sessions/${sessionId}/click`, { variable });
  }

  outOfTurn(sessionId: string, terms: string[]): Promise<SessionView> {
    return this.call("POST", `/sessions/${sessionId}/out-of-turn`, { terms });
  }

  choices(sessionId: string, attribute: string): Promise<ChoicesView> {
    return this.call(
      "GET",
      `/sessions/${sessionId}/choices?attribute=${encodeURIComponent(attribute)}`,
    );
  }

  save(sessionId: string): Promise<SessionView> {
    return this.call("POST", `/sessions/${sessionId}/save`);
  }

  resume(sessionId: string): Promise<SessionView> {
    return this.call("POST", `/sessions/${sessionId}/resume`);
  }
}
