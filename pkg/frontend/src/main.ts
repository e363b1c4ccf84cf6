import { HttpApiClient } from "./api.js";
import { DEFAULT_OPTIONS, layoutView } from "./layout.js";
import { ViewRenderer } from "./render.js";
import { ExplorerStore } from "./store.js";

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? "http://127.0.0.1:8765";
const dataset = params.get("dataset") ?? "reports.csv";

const store = new ExplorerStore(new HttpApiClient(apiBase));

const svg = document.querySelector<SVGSVGElement>("#view")!;
const overlay = document.querySelector<HTMLElement>("#overlay")!;
const status = document.querySelector<HTMLElement>("#status")!;

const renderer = new ViewRenderer(svg, overlay, store, () =>
  layoutView(store.state.schema!, store.state.biclusters, DEFAULT_OPTIONS),
);

store.subscribe((state) => {
  if (!state.schema) return;
  status.textContent = state.pending
    ? "evaluating..."
    : state.session
      ? `session ${state.session.id} | ${state.session.n_biclusters} biclusters | ` +
        `${state.session.known_patterns} known tiles`
      : "";
  renderer.render(state);
});

document.addEventListener("click", (ev) => {
  if (!(ev.target as HTMLElement).closest(".context-menu")) {
    if (store.state.contextMenu) store.closeContextMenu();
  }
});

store
  .createSession({
    dataset,
    mode: params.get("mode") ?? "binary",
    min_support: Number(params.get("min_support") ?? 3),
    jaccard: Number(params.get("jaccard") ?? 0.1),
    score_kind: params.get("score") ?? "local",
  })
  .catch((err) => {
    status.textContent = `failed to start session: ${err.message}`;
  });
