import { ApiClient } from "./api.js";
import {
  ApiError,
  BiclusterInfo,
  ChainInfo,
  DocumentInfo,
  SchemaResponse,
  SessionInfo,
} from "./types.js";

/**
 * View-model for the exploration surface.
 *
 * Connection-oriented highlighting is derived purely from hover/selection
 * adjacency; surprisingness-oriented highlighting (red, with opacity) is
 * set exclusively from evaluation responses, so every red element is
 * traceable to an API payload. The store never computes a score.
 */

export interface SurpriseState {
  /** bicluster id -> opacity in [0, 1], exactly as received */
  biclusters: Map<string, number>;
  /** entity column id -> opacity */
  entities: Map<number, number>;
  /** the chain the highlight came from, when a full-path answer */
  chain: ChainInfo | null;
}

export interface ContextMenuState {
  target: string;
  x: number;
  y: number;
}

export interface DocumentViewState {
  bicluster: string;
  documents: DocumentInfo[];
}

export interface ViewState {
  session: SessionInfo | null;
  schema: SchemaResponse | null;
  biclusters: BiclusterInfo[];
  hovered: string | number | null;
  selection: Set<string | number>;
  hiddenEdges: Set<string>;
  surprise: SurpriseState;
  contextMenu: ContextMenuState | null;
  documentView: DocumentViewState | null;
  toast: string | null;
  pending: boolean;
}

export interface ConnectionHighlight {
  entities: Set<number>;
  biclusters: Set<string>;
  /** entities drawn with enlarged font: connected to a hovered prior selection */
  emphasized: Set<number>;
}

type Listener = (state: ViewState) => void;

const emptySurprise = (): SurpriseState => ({
  biclusters: new Map(),
  entities: new Map(),
  chain: null,
});

export class ExplorerStore {
  readonly state: ViewState = {
    session: null,
    schema: null,
    biclusters: [],
    hovered: null,
    selection: new Set(),
    hiddenEdges: new Set(),
    surprise: emptySurprise(),
    contextMenu: null,
    documentView: null,
    toast: null,
    pending: false,
  };

  private listeners: Listener[] = [];
  private byId = new Map<string, BiclusterInfo>();

  constructor(private readonly api: ApiClient) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  bicluster(id: string): BiclusterInfo | undefined {
    return this.byId.get(id);
  }

  async createSession(body: Record<string, unknown>): Promise<void> {
    this.state.session = await this.api.createSession(body);
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (!this.state.session) return;
    const id = this.state.session.id;
    this.state.schema = await this.api.schema(id);
    this.state.biclusters = await this.api.biclusters(id);
    this.byId = new Map(this.state.biclusters.map((b) => [b.id, b]));
    this.emit();
  }

  // -- connection-oriented highlighting (pure derivation) -----------------

  connectionHighlight(): ConnectionHighlight {
    const out: ConnectionHighlight = {
      entities: new Set(),
      biclusters: new Set(),
      emphasized: new Set(),
    };
    const anchors: (string | number)[] = [...this.state.selection];
    if (this.state.hovered !== null) anchors.push(this.state.hovered);
    for (const anchor of anchors) {
      if (typeof anchor === "string") {
        const b = this.byId.get(anchor);
        if (!b) continue;
        out.biclusters.add(b.id);
        for (const e of [...b.left, ...b.right]) out.entities.add(e);
      } else {
        out.entities.add(anchor);
        for (const b of this.state.biclusters) {
          if (b.left.includes(anchor) || b.right.includes(anchor)) {
            out.biclusters.add(b.id);
            for (const e of [...b.left, ...b.right]) out.entities.add(e);
          }
        }
      }
    }
    // hovering something already selected enlarges its related entities
    if (
      this.state.hovered !== null &&
      this.state.selection.has(this.state.hovered)
    ) {
      if (typeof this.state.hovered === "string") {
        const b = this.byId.get(this.state.hovered);
        if (b) for (const e of [...b.left, ...b.right]) out.emphasized.add(e);
      } else {
        out.emphasized.add(this.state.hovered);
      }
    }
    return out;
  }

  hover(target: string | number | null): void {
    this.state.hovered = target;
    this.emit();
  }

  toggleSelect(target: string | number): void {
    if (this.state.selection.has(target)) this.state.selection.delete(target);
    else this.state.selection.add(target);
    this.emit();
  }

  toggleEdges(biclusterId: string): void {
    // rendering-only: no API call, no session mutation
    if (this.state.hiddenEdges.has(biclusterId)) {
      this.state.hiddenEdges.delete(biclusterId);
    } else {
      this.state.hiddenEdges.add(biclusterId);
    }
    this.emit();
  }

  openContextMenu(target: string, x: number, y: number): void {
    this.state.contextMenu = { target, x, y };
    this.emit();
  }

  closeContextMenu(): void {
    this.state.contextMenu = null;
    this.emit();
  }

  // -- model evaluation requests ------------------------------------------

  /** Highlight exactly the rank-1 chain returned for the seed. */
  async requestFullPath(seed: string): Promise<void> {
    await this.guarded(async (id) => {
      const res = await this.api.fullPath(id, seed);
      const surprise = emptySurprise();
      const top = res.chains[0];
      if (top) {
        surprise.chain = top;
        for (const member of top.members) {
          surprise.biclusters.set(member, 1.0);
          const b = this.byId.get(member);
          if (b) {
            for (const e of [...b.left, ...b.right]) surprise.entities.set(e, 1.0);
          }
        }
      }
      this.state.surprise = surprise;
    });
  }

  /** Apply neighbor opacities exactly as the model reported them. */
  async requestStepwise(seed: string): Promise<void> {
    await this.guarded(async (id) => {
      const res = await this.api.stepwise(id, seed);
      const surprise = emptySurprise();
      for (const n of res.neighbors) {
        surprise.biclusters.set(n.bicluster, n.opacity);
      }
      this.state.surprise = surprise;
    });
  }

  /**
   * Tell the model these patterns are known. Stale surprise highlights are
   * cleared: the background model changed, so they no longer mean anything.
   */
  async markKnown(patterns: string[]): Promise<void> {
    await this.guarded(async (id) => {
      this.state.session = await this.api.markKnown(id, patterns);
      this.state.surprise = emptySurprise();
      this.state.toast = `marked ${patterns.length} pattern(s) as known`;
    });
  }

  async showDocuments(biclusterId: string): Promise<void> {
    await this.guarded(async (id) => {
      const res = await this.api.documents(id, biclusterId);
      this.state.documentView = {
        bicluster: biclusterId,
        documents: res.documents,
      };
    });
  }

  closeDocuments(): void {
    this.state.documentView = null;
    this.emit();
  }

  dismissToast(): void {
    this.state.toast = null;
    this.emit();
  }

  private async guarded(work: (sessionId: string) => Promise<void>): Promise<void> {
    if (!this.state.session || this.state.pending) return;
    this.state.pending = true;
    this.state.contextMenu = null;
    this.emit();
    try {
      await work(this.state.session.id);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.state.toast = "session is busy; try again in a moment";
      } else if (err instanceof ApiError && err.status === 404) {
        this.state.toast = `stale view: ${err.message}`;
        await this.refresh();
      } else {
        this.state.toast = `request failed: ${(err as Error).message}`;
      }
    } finally {
      this.state.pending = false;
      this.emit();
    }
  }
}
