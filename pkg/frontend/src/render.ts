import { Layout } from "./layout.js";
import { ExplorerStore, ViewState } from "./store.js";

/**
 * SVG renderer. Colors: orange marks connection-oriented highlighting,
 * red (with the opacity the model reported) marks surprisingness.
 */

const COLORS = {
  entityFill: "#e8e8e8",
  entityBar: "#9aa7b8",
  bundleLeft: "#cfe3cf",
  bundleRight: "#d7d7d7",
  edge: "#b9c2cc",
  connection: "#e8923a",
  surprise: "#d43d3d",
  stroke: "#666",
};

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

export class ViewRenderer {
  private menuEl: HTMLDivElement | null = null;

  constructor(
    private readonly svg: SVGSVGElement,
    private readonly overlay: HTMLElement,
    private readonly store: ExplorerStore,
    private readonly layout: () => Layout,
  ) {}

  render(state: ViewState): void {
    const layout = this.layout();
    this.svg.setAttribute("width", String(layout.width));
    this.svg.setAttribute("height", String(layout.height));
    this.svg.replaceChildren();
    const connection = this.store.connectionHighlight();

    for (const edge of layout.edges) {
      if (state.hiddenEdges.has(edge.bicluster)) continue;
      const connected =
        connection.biclusters.has(edge.bicluster) &&
        connection.entities.has(edge.entity);
      const surprised = state.surprise.biclusters.has(edge.bicluster);
      const path = el("path", {
        d: edge.path,
        fill: "none",
        stroke: surprised ? COLORS.surprise : connected ? COLORS.connection : COLORS.edge,
        "stroke-opacity": surprised
          ? Math.max(0.15, state.surprise.biclusters.get(edge.bicluster) ?? 0)
          : connected
            ? 0.9
            : 0.35,
        "stroke-width": connected || surprised ? 2 : 1,
      });
      this.svg.appendChild(path);
    }

    for (const box of layout.entities.values()) {
      const group = el("g", { transform: `translate(${box.x},${box.y})` });
      const surprise = state.surprise.entities.get(box.id);
      const isConnected = connection.entities.has(box.id);
      group.appendChild(
        el("rect", {
          width: box.width,
          height: box.height,
          rx: 2,
          fill:
            surprise !== undefined
              ? COLORS.surprise
              : isConnected
                ? COLORS.connection
                : COLORS.entityFill,
          "fill-opacity": surprise !== undefined ? Math.max(0.2, surprise) : 1,
          stroke: state.selection.has(box.id) ? COLORS.stroke : "none",
        }),
      );
      group.appendChild(
        el("rect", {
          x: 2,
          y: box.height - 4,
          width: box.frequencyBar,
          height: 3,
          fill: COLORS.entityBar,
        }),
      );
      const label = el("text", {
        x: 4,
        y: box.height - 6,
        "font-size": connection.emphasized.has(box.id) ? 14 : 11,
        "font-family": "sans-serif",
      });
      label.textContent = box.label;
      group.appendChild(label);
      group.addEventListener("mouseenter", () => this.store.hover(box.id));
      group.addEventListener("mouseleave", () => this.store.hover(null));
      group.addEventListener("click", () => this.store.toggleSelect(box.id));
      this.svg.appendChild(group);
    }

    for (const box of layout.biclusters.values()) {
      const group = el("g", { transform: `translate(${box.x},${box.y})` });
      const surprise = state.surprise.biclusters.get(box.id);
      const isConnected = connection.biclusters.has(box.id);
      const split = box.height * box.leftFraction;
      group.appendChild(
        el("rect", {
          width: box.width,
          height: split,
          fill: COLORS.bundleLeft,
        }),
      );
      group.appendChild(
        el("rect", {
          y: split,
          width: box.width,
          height: box.height - split,
          fill: COLORS.bundleRight,
        }),
      );
      if (surprise !== undefined || isConnected) {
        group.appendChild(
          el("rect", {
            width: box.width,
            height: box.height,
            fill: surprise !== undefined ? COLORS.surprise : COLORS.connection,
            "fill-opacity": surprise !== undefined ? Math.max(0.2, surprise) : 0.55,
          }),
        );
      }
      group.appendChild(
        el("rect", {
          width: box.width,
          height: box.height,
          fill: "transparent",
          stroke: state.selection.has(box.id) ? COLORS.stroke : "#bbb",
        }),
      );
      group.addEventListener("mouseenter", () => this.store.hover(box.id));
      group.addEventListener("mouseleave", () => this.store.hover(null));
      group.addEventListener("click", () => this.store.toggleSelect(box.id));
      group.addEventListener("contextmenu", (ev) => {
        ev.preventDefault();
        this.store.openContextMenu(box.id, ev.clientX, ev.clientY);
      });
      this.svg.appendChild(group);
    }

    this.renderMenu(state);
    this.renderDocuments(state);
    this.renderToast(state);
  }

  private renderMenu(state: ViewState): void {
    this.menuEl?.remove();
    this.menuEl = null;
    if (!state.contextMenu) return;
    const menu = document.createElement("div");
    menu.className = "context-menu";
    menu.style.left = `${state.contextMenu.x}px`;
    menu.style.top = `${state.contextMenu.y}px`;
    const target = state.contextMenu.target;
    const actions: [string, () => void][] = [
      ["Most surprising chain from here", () => void this.store.requestFullPath(target)],
      ["Evaluate neighbors", () => void this.store.requestStepwise(target)],
      ["Mark as known", () => void this.store.markKnown([target])],
      ["Show documents", () => void this.store.showDocuments(target)],
      ["Hide/show edges", () => this.store.toggleEdges(target)],
    ];
    for (const [label, action] of actions) {
      const item = document.createElement("button");
      item.textContent = label;
      item.disabled = state.pending;
      item.addEventListener("click", () => {
        action();
        this.store.closeContextMenu();
      });
      menu.appendChild(item);
    }
    this.overlay.appendChild(menu);
    this.menuEl = menu;
  }

  private renderDocuments(state: ViewState): void {
    const existing = this.overlay.querySelector(".document-view");
    existing?.remove();
    if (!state.documentView) return;
    const panel = document.createElement("div");
    panel.className = "document-view";
    const head = document.createElement("h3");
    head.textContent = `Documents for ${state.documentView.bicluster}`;
    panel.appendChild(head);
    const close = document.createElement("button");
    close.textContent = "close";
    close.addEventListener("click", () => this.store.closeDocuments());
    panel.appendChild(close);
    for (const doc of state.documentView.documents) {
      const item = document.createElement("article");
      const title = document.createElement("strong");
      title.textContent = doc.doc_id;
      const body = document.createElement("p");
      body.textContent = doc.content || "(no text available)";
      const ents = document.createElement("small");
      ents.textContent = doc.entities.join(", ");
      item.append(title, body, ents);
      panel.appendChild(item);
    }
    this.overlay.appendChild(panel);
  }

  private renderToast(state: ViewState): void {
    const existing = this.overlay.querySelector(".toast");
    existing?.remove();
    if (!state.toast) return;
    const toast = document.createElement("div");
    toast.className = "toast";
    toast.textContent = state.toast;
    toast.addEventListener("click", () => this.store.dismissToast());
    this.overlay.appendChild(toast);
  }
}
