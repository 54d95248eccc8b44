"""Federated per-step action models and constrained program generation.

One model is trained per design time step; generation walks the chain,
asking model t for the symbol at step t+1 and auto-accepting the argmax
(or a seeded sample). An optional symbol budget masks exhausted symbols
before every selection, so generated programs never overdraw it.
"""

import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .core import Corpus, CorpusError, FbdProgram, SymbolMultiset, Vocabulary, DesignStep
from .models import (
    ActionModel,
    ActionModelSpec,
    ErrorSurface,
    TransitionDataset,
    dump_model,
    load_model,
    predict,
    prior_model,
    slice_transitions,
    train,
    vocabulary_hash,
)
from .stats import SymbolDistribution, estimate_prior

__all__ = [
    "Federation",
    "GenerationConfig",
    "StepMetrics",
    "train_federation",
    "generate",
    "evaluate_federation",
    "save_federation",
    "load_federation",
]


@dataclass(frozen=True)
class Federation:
    """Models indexed by step t = 1..N; the model at index t predicts the
    symbol at step t+1. The prior selects step 1."""

    models: tuple[ActionModel, ...]
    prior: SymbolDistribution
    vocabulary: Vocabulary
    surfaces: tuple[ErrorSurface, ...] = ()

    def __post_init__(self):
        if not self.models:
            raise ValueError("federation needs at least one model")
        for t, model in enumerate(self.models, start=1):
            if model.step.t != t:
                raise ValueError(f"model at index {t} has step {model.step.t}")
            if model.vocabulary.names != self.vocabulary.names:
                raise ValueError("models must share the federation vocabulary")

    @property
    def max_steps(self) -> int:
        return len(self.models)

    def model_for(self, t: int) -> ActionModel | None:
        if 1 <= t <= len(self.models):
            return self.models[t - 1]
        return None


@dataclass(frozen=True)
class GenerationConfig:
    mode: str = "argmax"  # "argmax" | "sample"
    budget: SymbolMultiset | None = None
    max_steps: int = 1
    seed: int = 0
    end_on_budget_exhaustion: bool = True

    def __post_init__(self):
        if self.mode not in ("argmax", "sample"):
            raise ValueError(f"unknown generation mode: {self.mode!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class StepMetrics:
    step: int
    n_items: int
    top1_accuracy: Fraction
    topk_accuracy: Fraction
    mean_nll: float


def train_federation(
    corpus: Corpus,
    context: list[TransitionDataset] | None,
    spec: ActionModelSpec,
    n_steps: int,
) -> Federation:
    """Train one action model per step 1..n_steps. Steps whose corpus
    slice is empty get a prior-only fallback so the federation stays
    total up to n_steps."""
    if not corpus.programs:
        raise CorpusError("empty corpus")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    context_by_step: dict[int, TransitionDataset] = {}
    for dataset in context or []:
        t = dataset.step.t
        if not 1 <= t <= n_steps:
            raise ValueError(f"context dataset step {t} outside 1..{n_steps}")
        if t in context_by_step:
            raise ValueError(f"duplicate context dataset for step {t}")
        context_by_step[t] = dataset

    prior = estimate_prior(corpus)
    models = []
    surfaces = []
    for t in range(1, n_steps + 1):
        task = slice_transitions(corpus, DesignStep(t))
        if not task.items:
            models.append(prior_model(prior, DesignStep(t), corpus.vocabulary, spec))
            continue
        model, surface, pretrain_surface = train(spec, task, context_by_step.get(t))
        models.append(model)
        if pretrain_surface is not None:
            surfaces.append(pretrain_surface)
        surfaces.append(surface)
    return Federation(tuple(models), prior, corpus.vocabulary, tuple(surfaces))


def _mask(dist: SymbolDistribution, remaining: dict[str, int] | None):
    """Zero out budget-exhausted symbols and renormalize. Masking never
    reorders the surviving symbols."""
    entries = [
        (name, prob)
        for name, prob in dist.probs.items()
        if prob > 0 and (remaining is None or remaining.get(name, 0) > 0)
    ]
    total = sum(prob for _, prob in entries)
    if not entries or total == 0:
        return None
    return {name: prob / total for name, prob in entries}


def _select(masked: dict, mode: str, rng: random.Random) -> str:
    ranked = sorted(masked.items(), key=lambda e: (-e[1], e[0]))
    if mode == "argmax":
        return ranked[0][0]
    u = rng.random()
    acc = 0.0
    for name, prob in ranked:
        acc += float(prob)
        if acc > u:
            return name
    return ranked[-1][0]


def generate(fed: Federation, cfg: GenerationConfig, start=()) -> FbdProgram:
    """Auto-accept one symbol per design step.

    Step 1 draws from the prior, later steps from the per-step models.
    `start` seeds the prefix (the service's autocomplete path); budget
    counts apply to newly generated symbols only. Stops at max_steps,
    budget exhaustion, the end of the model chain, or when masking
    removes every symbol.
    """
    remaining: dict[str, int] | None = None
    if cfg.budget is not None:
        cfg.budget.validate_against(fed.vocabulary)
        remaining = dict(cfg.budget.counts)
        if not remaining:
            raise ValueError("budget is empty at the start of generation")

    symbols = [fed.vocabulary.require(s) for s in start]
    rng = random.Random(cfg.seed)
    while len(symbols) < cfg.max_steps:
        if not symbols:
            dist = fed.prior
        else:
            model = fed.model_for(len(symbols))
            if model is None:
                break
            dist = predict(model, symbols)
        masked = _mask(dist, remaining)
        if masked is None:
            if not symbols:
                raise ValueError("every symbol is masked at step 1")
            break
        choice = _select(masked, cfg.mode, rng)
        symbols.append(choice)
        if remaining is not None:
            remaining[choice] -= 1
            if cfg.end_on_budget_exhaustion and all(
                count <= 0 for count in remaining.values()
            ):
                break
    return FbdProgram(f"gen-{cfg.seed}", tuple(symbols))


def evaluate_federation(
    fed: Federation, held_out: Corpus, k: int
) -> dict[int, StepMetrics]:
    """Per-step top-1/top-k accuracy and mean NLL of the realized
    continuations. Steps without held-out data are omitted."""
    if held_out.vocabulary.names != fed.vocabulary.names:
        raise ValueError("held-out corpus vocabulary differs from federation")
    metrics: dict[int, StepMetrics] = {}
    for t in range(1, fed.max_steps + 1):
        dataset = slice_transitions(held_out, DesignStep(t))
        if not dataset.items:
            continue
        model = fed.models[t - 1]
        top1 = 0
        topk = 0
        nll_total = 0.0
        for prefix, target in dataset.items:
            dist = predict(model, prefix)
            ranked = dist.ranked()
            if ranked and ranked[0][0] == target:
                top1 += 1
            if target in {name for name, _ in ranked[:k]}:
                topk += 1
            p = dist[target]
            nll_total += -math.log(p) if p > 0 else math.inf
        n = len(dataset.items)
        metrics[t] = StepMetrics(
            t, n, Fraction(top1, n), Fraction(topk, n), nll_total / n
        )
    return metrics


def save_federation(fed: Federation, directory) -> None:
    """Write a manifest plus one model file per step."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": "fbdforge-federation/1",
        "n_steps": fed.max_steps,
        "vocabulary": list(fed.vocabulary.names),
        "vocabulary_hash": vocabulary_hash(fed.vocabulary),
        "backends": [m.backend for m in fed.models],
        "prior": {s: str(p) for s, p in sorted(fed.prior.probs.items())},
        "models": [f"step-{t}.json" for t in range(1, fed.max_steps + 1)],
    }
    (directory / "manifest.json").write_bytes(
        (json.dumps(manifest, indent=2) + "\n").encode("utf-8")
    )
    for t, model in enumerate(fed.models, start=1):
        (directory / f"step-{t}.json").write_bytes(dump_model(model))


def load_federation(directory) -> Federation:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text("utf-8"))
    if manifest.get("version") != "fbdforge-federation/1":
        raise CorpusError(
            f"unsupported federation version: {manifest.get('version')!r}"
        )
    vocab = Vocabulary.of(*manifest["vocabulary"])
    if vocabulary_hash(vocab) != manifest["vocabulary_hash"]:
        raise CorpusError("federation vocabulary hash mismatch")
    prior = SymbolDistribution(
        {s: Fraction(p) for s, p in manifest["prior"].items()}
    )
    models = tuple(
        load_model((directory / name).read_bytes()) for name in manifest["models"]
    )
    return Federation(models, prior, vocab)
