"""Session-scoped HTTP facade over the explorer for the browser frontend.

Sessions live in memory, one lock each: evaluations and model updates are
mutually exclusive per session and a busy session answers 409. Global-score
evaluations can take long (full re-inference), so they run as background
tasks polled through a status endpoint; local-score requests answer
synchronously.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .data import DataError, load_transactions, read_records
from .explorer import ModelUpdateError, Session

__all__ = ["create_app", "ApiError"]


class ApiError(Exception):
    def __init__(self, status_code: int, category: str, detail: str):
        self.status_code = status_code
        self.category = category
        self.detail = detail
        super().__init__(detail)


class SessionCreate(BaseModel):
    dataset: str
    mode: str = "binary"
    domain_order: list[str] | None = None
    min_support: int = 3
    jaccard: float = 0.1
    score_kind: str = "local"
    seed: int = 0


class SeedRequest(BaseModel):
    seed: str


class MarkRequest(BaseModel):
    patterns: list[str]


class DatasetUpload(BaseModel):
    name: str
    csv: str


class _Entry:
    """One live session: explorer state plus its serialization lock."""

    def __init__(self, session_id: str, dataset_name: str, session: Session):
        self.id = session_id
        self.dataset = dataset_name
        self.session = session
        self.lock = threading.Lock()
        self.status = "converged"
        self.created = time.time()
        self.tasks: dict[str, dict] = {}
        self.n_tasks = 0

    def summary(self) -> dict:
        return {
            "id": self.id,
            "dataset": self.dataset,
            "mode": self.session.mode,
            "score_kind": self.session.score_kind,
            "jaccard": self.session.jaccard_threshold,
            "min_support": self.session.min_support,
            "status": self.status,
            "created": self.created,
            "n_biclusters": len(self.session.biclusters),
            "known_patterns": len(self.session.known_tiles),
        }


def create_app(data_dir: str | Path = ".") -> FastAPI:
    data_dir = Path(data_dir)
    app = FastAPI(title="tilechains session API")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state = {"sessions": {}, "counter": 0, "lock": threading.Lock()}

    @app.exception_handler(ApiError)
    async def api_error(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": exc.detail, "category": exc.category, "detail": exc.detail},
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={
                "error": "malformed request body",
                "category": "bad-request",
                "detail": str(exc.errors()),
            },
        )

    def entry_of(session_id: str) -> _Entry:
        entry = state["sessions"].get(session_id)
        if entry is None:
            raise ApiError(404, "unknown-session", f"no session {session_id!r}")
        return entry

    def acquire(entry: _Entry):
        if entry.status == "inferring" or not entry.lock.acquire(blocking=False):
            raise ApiError(409, "session-busy", f"session {entry.id} is busy")

    @app.get("/datasets")
    def list_datasets():
        names = sorted(
            p.name
            for p in data_dir.iterdir()
            if p.suffix.lower() in (".csv", ".jsonl", ".ndjson")
        )
        return {"datasets": names}

    @app.post("/datasets", status_code=201)
    def upload_dataset(body: DatasetUpload):
        if "/" in body.name or not body.name:
            raise ApiError(400, "bad-request", "dataset name must be a bare file name")
        path = data_dir / body.name
        path.write_text(body.csv)
        return {"name": body.name, "bytes": len(body.csv)}

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionCreate):
        path = data_dir / body.dataset
        if not path.exists():
            raise ApiError(404, "unknown-dataset", f"no dataset file {body.dataset!r}")
        try:
            dataset = load_transactions(read_records(path))
            texts = path.with_suffix(".texts.json")
            if texts.exists():
                dataset.doc_texts.update(json.loads(texts.read_text()))
            session = Session(
                dataset,
                mode=body.mode,
                domain_order=body.domain_order,
                min_support=body.min_support,
                jaccard_threshold=body.jaccard,
                score_kind=body.score_kind,
                seed=body.seed,
            )
        except DataError as exc:
            raise ApiError(400, "invalid-input", str(exc))
        with state["lock"]:
            state["counter"] += 1
            sid = f"s{state['counter']}"
        entry = _Entry(sid, body.dataset, session)
        state["sessions"][sid] = entry
        return entry.summary()

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": [e.summary() for e in state["sessions"].values()]}

    @app.get("/sessions/{session_id}")
    def session_summary(session_id: str):
        return entry_of(session_id).summary()

    @app.get("/sessions/{session_id}/schema")
    def schema(session_id: str):
        session = entry_of(session_id).session
        dense_counts: dict[int, float] = {}
        for (_, j), v in session.matrix.values.items():
            dense_counts[j] = dense_counts.get(j, 0.0) + v
        labels = session.dataset.entity_labels
        return {
            "domains": [
                {
                    "id": d.id,
                    "name": d.name,
                    "entities": [
                        {
                            "id": e,
                            "label": labels[e],
                            "frequency": dense_counts.get(e, 0.0),
                        }
                        for e in d.entity_ids
                    ],
                }
                for d in session.schema.domains
            ],
            "relations": [
                {
                    "id": r.id,
                    "left_domain": r.left_domain,
                    "right_domain": r.right_domain,
                    "n_pairs": len(r.pairs),
                }
                for r in session.schema.relations
            ],
        }

    @app.get("/sessions/{session_id}/biclusters")
    def biclusters(session_id: str):
        session = entry_of(session_id).session
        labels = session.dataset.entity_labels
        out = []
        for bid in sorted(session.biclusters):
            b = session.biclusters[bid]
            out.append(
                {
                    "id": b.id,
                    "relation": b.relation,
                    "left": sorted(b.left),
                    "right": sorted(b.right),
                    "left_labels": [labels[e] for e in sorted(b.left)],
                    "right_labels": [labels[e] for e in sorted(b.right)],
                }
            )
        return {"biclusters": out}

    def seed_or_404(session: Session, seed: str):
        if seed not in session.biclusters:
            raise ApiError(404, "unknown-bicluster", f"no bicluster {seed!r}")

    def run_evaluation(entry: _Entry, kind: str, seed: str) -> dict:
        session = entry.session
        if kind == "full-path":
            result = session.full_path_evaluate(seed)
            return {
                "seed": seed,
                "chains": [
                    {**cs.chain.to_json(), "score": cs.score} for cs in result.ranked
                ],
                "warnings": result.warnings,
            }
        result = session.stepwise_evaluate(seed)
        return {
            "seed": seed,
            "neighbors": [
                {"bicluster": ns.bicluster_id, "score": ns.score, "opacity": ns.opacity}
                for ns in result.ranked
            ],
            "warnings": result.warnings,
        }

    def evaluate(session_id: str, kind: str, body: SeedRequest):
        entry = entry_of(session_id)
        seed_or_404(entry.session, body.seed)
        acquire(entry)
        if entry.session.score_kind == "local":
            try:
                return run_evaluation(entry, kind, body.seed)
            finally:
                entry.lock.release()
        entry.n_tasks += 1
        task_id = f"t{entry.n_tasks}"
        task = {"id": task_id, "status": "pending", "result": None, "error": None}
        entry.tasks[task_id] = task

        def work():
            try:
                task["result"] = run_evaluation(entry, kind, body.seed)
                task["status"] = "done"
            except Exception as exc:  # surfaced through polling
                task["error"] = str(exc)
                task["status"] = "failed"
            finally:
                entry.lock.release()

        threading.Thread(target=work, daemon=True).start()
        return JSONResponse(status_code=202, content={"task_id": task_id, "status": "pending"})

    @app.post("/sessions/{session_id}/evaluate/full-path")
    def evaluate_full_path(session_id: str, body: SeedRequest):
        return evaluate(session_id, "full-path", body)

    @app.post("/sessions/{session_id}/evaluate/stepwise")
    def evaluate_stepwise(session_id: str, body: SeedRequest):
        return evaluate(session_id, "stepwise", body)

    @app.get("/sessions/{session_id}/tasks/{task_id}")
    def task_status(session_id: str, task_id: str):
        entry = entry_of(session_id)
        task = entry.tasks.get(task_id)
        if task is None:
            raise ApiError(404, "unknown-task", f"no task {task_id!r}")
        return task

    @app.post("/sessions/{session_id}/mark-known")
    def mark_known(session_id: str, body: MarkRequest):
        entry = entry_of(session_id)
        for pid in body.patterns:
            for member in pid.split("|"):
                seed_or_404(entry.session, member)
        acquire(entry)
        entry.status = "inferring"
        try:
            entry.session.mark_known(body.patterns)
            entry.status = "converged"
        except ModelUpdateError as exc:
            entry.status = "failed"
            raise ApiError(500, "model-update-failed", str(exc))
        finally:
            entry.lock.release()
        return entry.summary()

    @app.get("/sessions/{session_id}/biclusters/{bicluster_id}/documents")
    def bicluster_documents(session_id: str, bicluster_id: str):
        session = entry_of(session_id).session
        seed_or_404(session, bicluster_id)
        docs = session.documents_for(bicluster_id)
        return {
            "bicluster": bicluster_id,
            "documents": [
                {"doc_id": d.doc_id, "content": d.content, "entities": list(d.entities)}
                for d in docs
            ],
        }

    @app.get("/documents/{doc_id}")
    def document(doc_id: str):
        for entry in state["sessions"].values():
            dataset = entry.session.dataset
            if doc_id in dataset.doc_ids:
                row = dataset.doc_ids.index(doc_id)
                cols = sorted(
                    j for (i, j) in entry.session.matrix.values if i == row
                )
                return {
                    "doc_id": doc_id,
                    "content": dataset.doc_texts.get(doc_id, ""),
                    "entities": [dataset.entity_labels[j] for j in cols],
                }
        raise ApiError(404, "unknown-document", f"no document {doc_id!r}")

    @app.post("/sessions/{session_id}/snapshot")
    def snapshot(session_id: str):
        entry = entry_of(session_id)
        path = data_dir / f"session-{entry.id}.json"
        payload = {
            "summary": entry.summary(),
            "model": entry.session.model.to_json(),
            "known_tiles": [t.to_json() for t in entry.session.known_tiles],
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return {"path": str(path)}

    return app
