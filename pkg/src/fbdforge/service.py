"""HTTP JSON service over an immutable model snapshot.

The service never trains: it loads artifacts (a corpus and/or a saved
federation) into a snapshot, answers recommendation and generation
requests from it, and reloads by swapping the whole snapshot atomically.
Accepted UI selections are appended to a JSONL request log for future
corpus growth; they are not trained on.
"""

import json
import threading
from dataclasses import dataclass
from fractions import Fraction

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import federation as fed_mod
from . import stats
from .core import Corpus, CorpusError, SymbolMultiset, UnknownSymbolError, load_corpus
from .models import ActionModelSpec

__all__ = ["ServiceConfig", "ModelSnapshot", "create_app"]


@dataclass(frozen=True)
class ServiceConfig:
    listen: str = "127.0.0.1:8000"
    corpus_path: str | None = None
    federation_path: str | None = None
    backend: str = "count"
    smoothing: str = "none"
    alpha: Fraction = Fraction(0)
    backoff: bool = True
    request_log: str | None = None


@dataclass(frozen=True)
class ModelSnapshot:
    """Everything a request needs, built once and never mutated."""

    table: stats.TransitionTable
    prior: stats.SymbolDistribution
    federation: fed_mod.Federation
    vocabulary_names: tuple[str, ...]


def build_snapshot(config: ServiceConfig) -> ModelSnapshot:
    federation = None
    corpus: Corpus | None = None
    if config.federation_path:
        federation = fed_mod.load_federation(config.federation_path)
    if config.corpus_path:
        with open(config.corpus_path, "rb") as handle:
            corpus = load_corpus(
                handle, federation.vocabulary if federation else None
            )
    if corpus is None and federation is None:
        raise CorpusError("service needs a corpus or a federation to load")
    if corpus is not None:
        smoothing = stats.Smoothing(config.smoothing, config.alpha)
        table = stats.build_table(corpus, smoothing, config.backoff)
        prior = stats.estimate_prior(corpus)
        if federation is None:
            spec = ActionModelSpec(backend=config.backend)
            n_steps = max(1, max(len(p) for p in corpus.programs) - 1)
            federation = fed_mod.train_federation(corpus, None, spec, n_steps)
    else:
        # Federation-only: reconstruct table-equivalent answers from the
        # per-step models is not possible, so recommendations use the
        # step-1 view of the federation prior.
        prior = federation.prior
        table = stats.TransitionTable(
            federation.vocabulary,
            {(): {name: 1 for name in federation.vocabulary.names}},
        )
    return ModelSnapshot(table, prior, federation, federation.vocabulary.names)


class RecommendRequest(BaseModel):
    prefix: list[str]
    k: int = 3


class GenerateRequest(BaseModel):
    prefix: list[str] = []
    budget: dict[str, int] | None = None
    mode: str = "argmax"
    seed: int = 0
    max_steps: int | None = None


class SelectionRequest(BaseModel):
    prefix: list[str]
    chosen: str
    accepted_top: bool


def create_app(config: ServiceConfig, snapshot: ModelSnapshot | None = None) -> FastAPI:
    app = FastAPI(title="fbdforge", version="0.1.0")
    app.state.config = config
    app.state.snapshot = snapshot if snapshot is not None else build_snapshot(config)
    app.state.log_lock = threading.Lock()

    class _NoModel(Exception):
        pass

    def current() -> ModelSnapshot:
        snap = app.state.snapshot
        if snap is None:
            raise _NoModel()
        return snap

    @app.exception_handler(_NoModel)
    async def _no_model(_request: Request, _exc: _NoModel):
        return JSONResponse({"detail": "no model loaded"}, status_code=409)

    @app.exception_handler(RequestValidationError)
    async def _bad_shape(_request: Request, exc: RequestValidationError):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    @app.exception_handler(UnknownSymbolError)
    async def _unknown_symbol(_request: Request, exc: UnknownSymbolError):
        return JSONResponse(
            {"detail": str(exc), "symbol": exc.name}, status_code=400
        )

    @app.exception_handler(ValueError)
    async def _bad_value(_request: Request, exc: ValueError):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    @app.get("/health")
    async def health():
        return {"status": "ok", "model_loaded": app.state.snapshot is not None}

    @app.get("/vocabulary")
    async def vocabulary():
        snap = current()
        federation = snap.federation
        return {
            "symbols": [
                {"name": s.name, "category": s.category, "notes": s.notes}
                for s in federation.vocabulary.symbols
            ]
        }

    @app.post("/recommend")
    async def handle_recommend(body: RecommendRequest):
        snap = current()
        ranked = stats.recommend(snap.table, snap.prior, body.prefix, body.k)
        return {
            "ranked": [
                {"symbol": symbol, "prob": float(prob)}
                for symbol, prob in ranked.entries
            ],
            "context_used": list(ranked.context_used),
        }

    @app.post("/generate")
    async def handle_generate(body: GenerateRequest):
        snap = current()
        budget = SymbolMultiset(body.budget) if body.budget else None
        max_steps = body.max_steps
        if max_steps is None:
            max_steps = len(body.prefix) + (
                budget.total() if budget else snap.federation.max_steps + 1
            )
        cfg = fed_mod.GenerationConfig(
            mode=body.mode, budget=budget, max_steps=max_steps, seed=body.seed
        )
        program = fed_mod.generate(snap.federation, cfg, start=body.prefix)
        return {"id": program.id, "program": list(program.symbols)}

    @app.post("/selection")
    async def handle_selection(body: SelectionRequest):
        snap = current()
        for name in body.prefix:
            snap.federation.vocabulary.require(name)
        snap.federation.vocabulary.require(body.chosen)
        log_path = app.state.config.request_log
        if log_path:
            record = json.dumps(
                {
                    "prefix": body.prefix,
                    "chosen": body.chosen,
                    "accepted_top": body.accepted_top,
                }
            )
            with app.state.log_lock:
                with open(log_path, "a", encoding="utf-8") as handle:
                    handle.write(record + "\n")
        return {"logged": bool(log_path)}

    @app.post("/reload")
    async def handle_reload():
        app.state.snapshot = build_snapshot(app.state.config)
        return {"reloaded": True}

    return app
