// View-model for the browsing surface. Holds all UI state; every user
// action maps to exactly one API call, and any view is reproducible from
// the last service response (no client-side specialization).

import {
  ApiClient,
  ApiError,
  ChoicesView,
  SessionView,
  TemplateView,
} from "./api.js";

export interface Banner {
  message: string;
  chain: string[];
}

export interface AppState {
  view: "start" | "session";
  sites: string[];
  selectedSite: string;
  templates: TemplateView[];
  selectedTemplate: string;
  user: string;
  session: SessionView | null;
  warnings: string[];
  banner: Banner | null;
  notice: string;
  inspector: ChoicesView | null;
  error: string;
}

export function initialState(): AppState {
  return {
    view: "start",
    sites: [],
    selectedSite: "",
    templates: [],
    selectedTemplate: "",
    user: "",
    session: null,
    warnings: [],
    banner: null,
    notice: "",
    inspector: null,
    error: "",
  };
}

export class App {
  state: AppState = initialState();

  constructor(
    private api: ApiClient,
    private onChange: (state: AppState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  private fail(err: unknown): void {
    if (err instanceof ApiError) {
      this.state.error = `${err.body.error}: ${err.body.detail}`;
    } else {
      this.state.error = String(err);
    }
    this.emit();
  }

  async loadSites(): Promise<void> {
    try {
      const body = await this.api.listSites();
      this.state.sites = body.sites;
      if (!this.state.selectedSite && body.sites.length > 0) {
        this.state.selectedSite = body.sites[0];
      }
      this.state.error = "";
    } catch (err) {
      return this.fail(err);
    }
    this.emit();
  }

  async loadTemplates(site: string): Promise<void> {
    try {
      const body = await this.api.templates(site);
      this.state.selectedSite = site;
      this.state.templates = body.templates;
      this.state.selectedTemplate = "";
      this.state.error = "";
    } catch (err) {
      return this.fail(err);
    }
    this.emit();
  }

  async start(): Promise<void> {
    const { selectedSite, selectedTemplate, user } = this.state;
    try {
      const session = await this.api.createSession(
        selectedSite,
        selectedTemplate || undefined,
        user || undefined,
      );
      this.state.session = session;
      this.state.view = "session";
      this.state.warnings = [];
      this.state.banner = null;
      this.state.notice = "";
      this.state.inspector = null;
      this.state.error = "";
    } catch (err) {
      return this.fail(err);
    }
    this.emit();
  }

  private sessionId(): string {
    if (!this.state.session) {
      throw new Error("no active session");
    }
    return this.state.session.session_id;
  }

  private applySession(view: SessionView): void {
    this.state.session = view;
    this.state.warnings = view.warnings;
    this.state.notice = view.no_match
      ? "nothing matches that combination; showing the previous page"
      : "";
    this.state.banner = null;
    this.state.error = "";
  }

  async clickEdge(variable: string): Promise<void> {
    try {
      this.applySession(await this.api.click(this.sessionId(), variable));
    } catch (err) {
      return this.fail(err);
    }
    this.emit();
  }

  /** Toolbar submit: splits on commas; an empty input sends nothing. */
  async submitTerms(text: string): Promise<void> {
    const terms = text
      .split(",")
      .map((t) => t.trim())
      .filter((t) => t.length > 0);
    if (terms.length === 0) {
      return;
    }
    try {
      this.applySession(await this.api.outOfTurn(this.sessionId(), terms));
    } catch (err) {
      if (err instanceof ApiError && err.body.error === "contradiction") {
        this.state.banner = {
          message: err.body.detail,
          chain: err.body.chain ?? [],
        };
        this.emit();
        return;
      }
      return this.fail(err);
    }
    this.emit();
  }

  async inspect(attribute: string): Promise<void> {
    try {
      this.state.inspector = await this.api.choices(this.sessionId(), attribute);
      this.state.error = "";
    } catch (err) {
      return this.fail(err);
    }
    this.emit();
  }

  async save(): Promise<void> {
    try {
      this.applySession(await this.api.save(this.sessionId()));
    } catch (err) {
      return this.fail(err);
    }
    this.emit();
  }

  async resume(): Promise<void> {
    try {
      this.applySession(await this.api.resume(this.sessionId()));
    } catch (err) {
      return this.fail(err);
    }
    this.emit();
  }

  async refresh(): Promise<void> {
    try {
      this.applySession(await this.api.page(this.sessionId()));
    } catch (err) {
      return this.fail(err);
    }
    this.emit();
  }

  /** Back to the start view, keeping site/template selections. */
  restart(): void {
    this.state.view = "start";
    this.state.session = null;
    this.state.warnings = [];
    this.state.banner = null;
    this.state.notice = "";
    this.state.inspector = null;
    this.emit();
  }

  /** Anchor texts currently offered by the browse pane. */
  links(): string[] {
    const page = this.state.session?.page;
    return page ? page.edges.map((e) => e.anchor) : [];
  }

  /** Edge variables currently offered by the browse pane. */
  edgeVariables(): string[] {
    const page = this.state.session?.page;
    return page ? page.edges.map((e) => e.variable) : [];
  }
}
