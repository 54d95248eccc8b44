"""Command-line driver: ingestion, training, synthesis, recommendation,
generation, evaluation and the HTTP service."""

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import federation as fed_mod
from . import fiona, models, requirements, stats
from .core import (
    Corpus,
    CorpusError,
    DesignStep,
    Vocabulary,
    dump_corpus,
    dump_vocabulary,
    load_corpus,
    load_vocabulary,
)
from .models import ActionModelSpec, TransitionDataset
from .stats import Smoothing


def _read_corpus(path: str, vocabulary: Vocabulary | None = None) -> Corpus:
    with open(path, "rb") as handle:
        return load_corpus(handle, vocabulary)


def _spec_from_args(args, backend: str | None = None) -> ActionModelSpec:
    return ActionModelSpec(
        backend=backend or args.backend,
        hidden_size=args.hidden_size,
        embedding_dim=args.embedding_dim,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        init_seed=args.seed,
        context_weight=args.context_weight,
    )


def _add_spec_flags(parser, backend_default="count"):
    parser.add_argument("--backend", choices=["count", "rnn"], default=backend_default)
    parser.add_argument("--hidden-size", type=int, default=50)
    parser.add_argument("--embedding-dim", type=int, default=16)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--learning-rate", type=float, default=0.05)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--context-weight", type=float, default=0.5)


def _context_datasets(path: str, corpus: Corpus, n_steps: int):
    context_corpus = _read_corpus(path, corpus.vocabulary)
    datasets = []
    for t in range(1, n_steps + 1):
        sliced = models.slice_transitions(context_corpus, DesignStep(t))
        if sliced.items:
            datasets.append(
                TransitionDataset(
                    sliced.step,
                    sliced.items,
                    vocabulary=sliced.vocabulary,
                    source="fiona-context",
                )
            )
    return datasets


def _default_steps(corpus: Corpus) -> int:
    return max(1, max(len(p) for p in corpus.programs) - 1)


def _cmd_ingest(args) -> int:
    corpus = _read_corpus(args.corpus)
    Path(args.out).write_bytes(dump_corpus(corpus))
    if args.vocabulary_out:
        Path(args.vocabulary_out).write_bytes(dump_vocabulary(corpus.vocabulary))
    if args.table_out:
        Path(args.table_out).write_bytes(stats.dump_table(stats.build_table(corpus)))
    print(
        f"ingested {len(corpus.programs)} programs, "
        f"{len(corpus.vocabulary)} symbols"
    )
    return 0


def _cmd_train(args) -> int:
    corpus = _read_corpus(args.corpus)
    n_steps = args.steps or _default_steps(corpus)
    spec = _spec_from_args(args)
    context = _context_datasets(args.context, corpus, n_steps) if args.context else None
    federation = fed_mod.train_federation(corpus, context, spec, n_steps)
    fed_mod.save_federation(federation, args.out)
    if args.surfaces_out:
        out_dir = Path(args.surfaces_out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for surface in federation.surfaces:
            tag = "pre" if not surface.pretrained and args.context else "task"
            name = f"surface-step{surface.step}-{surface.backend}-{tag}.csv"
            (out_dir / name).write_bytes(models.export_error_surface(surface))
    print(f"trained federation with {n_steps} step models -> {args.out}")
    return 0


def _cmd_fiona_dataset(args) -> int:
    if args.corpus:
        corpus = _read_corpus(args.corpus)
        vocab = corpus.vocabulary
        prior = stats.estimate_prior(corpus)
    else:
        with open(args.vocabulary, "rb") as handle:
            vocab = load_vocabulary(handle)
        share = Fraction(1, len(vocab))
        prior = stats.SymbolDistribution({n: share for n in vocab.names})
    if args.schedule:
        doc = json.loads(Path(args.schedule).read_text("utf-8"))
        schedule = fiona.ExclusionSchedule(
            tuple(frozenset(e) for e in doc["exclusions"])
        )
    else:
        schedule = fiona.ExclusionSchedule((frozenset(),))
    programs, _ = fiona.build_context_dataset(
        vocab, schedule, prior, args.count, args.max_len, args.seed
    )
    corpus_out = Corpus(vocab, tuple(programs))
    Path(args.out).write_bytes(dump_corpus(corpus_out))
    print(f"synthesized {len(programs)} context programs -> {args.out}")
    return 0


def _cmd_recommend(args) -> int:
    corpus = _read_corpus(args.corpus)
    smoothing = Smoothing(args.smoothing, Fraction(args.alpha))
    table = stats.build_table(corpus, smoothing, backoff=not args.no_backoff)
    prior = stats.estimate_prior(corpus)
    ranked = stats.recommend(table, prior, args.prefix or [], args.k)
    for symbol, prob in ranked.entries:
        print(f"{symbol} {float(prob):.4f}")
    return 0


def _budget_from_args(args, vocab: Vocabulary):
    if not args.requirements:
        return None
    with open(args.requirements, "rb") as handle:
        doc = requirements.parse_requirements(handle)
    with open(args.rules, "rb") as handle:
        rules = requirements.parse_rule_table(handle, vocab)
    return requirements.derive_multiset(doc, rules)


def _cmd_generate(args) -> int:
    if args.federation:
        federation = fed_mod.load_federation(args.federation)
    else:
        corpus = _read_corpus(args.corpus)
        n_steps = args.steps or _default_steps(corpus)
        federation = fed_mod.train_federation(
            corpus, None, _spec_from_args(args), n_steps
        )
    budget = _budget_from_args(args, federation.vocabulary)
    for i in range(args.count):
        max_steps = args.max_steps
        if max_steps is None:
            max_steps = budget.total() if budget else federation.max_steps + 1
        cfg = fed_mod.GenerationConfig(
            mode=args.mode, budget=budget, max_steps=max_steps, seed=args.seed + i
        )
        program = fed_mod.generate(federation, cfg)
        print(" ".join(program.symbols))
    return 0


def _cmd_eval(args) -> int:
    federation = fed_mod.load_federation(args.federation)
    held_out = _read_corpus(args.corpus, federation.vocabulary)
    metrics = fed_mod.evaluate_federation(federation, held_out, args.k)
    for t in sorted(metrics):
        m = metrics[t]
        print(
            f"step {t}: n={m.n_items} top1={float(m.top1_accuracy):.4f} "
            f"top{args.k}={float(m.topk_accuracy):.4f} nll={m.mean_nll:.4f}"
        )
    return 0


def _cmd_gradcheck(args) -> int:
    if args.corpus:
        corpus = _read_corpus(args.corpus)
        sliced = models.slice_transitions(corpus, DesignStep(args.step))
        sample = TransitionDataset(
            sliced.step, sliced.items[:4], vocabulary=sliced.vocabulary
        )
    else:
        vocab = Vocabulary.of("A", "B", "C")
        sample = TransitionDataset(
            DesignStep(2),
            ((("A", "B"), "C"), (("B", "A"), "A")),
            vocabulary=vocab,
        )
    spec = ActionModelSpec(
        backend="rnn",
        hidden_size=args.hidden_size,
        embedding_dim=args.embedding_dim,
        init_seed=args.seed,
    )
    error = models.gradient_check(spec, sample, args.epsilon)
    print(f"max relative gradient error: {error:.3e}")
    return 0 if error < 1e-3 else 1


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    host, _, port = args.listen.rpartition(":")
    config = ServiceConfig(
        listen=args.listen,
        corpus_path=args.corpus,
        federation_path=args.federation,
        smoothing=args.smoothing,
        alpha=Fraction(args.alpha),
        backoff=not args.no_backoff,
        request_log=args.request_log,
    )
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbdforge",
        description="Learn, recommend and generate function-block design sequences.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocabulary-out")
    p.add_argument("--table-out")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("train", help="train a per-step model federation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--context", help="context corpus for pretraining")
    p.add_argument("--surfaces-out", help="directory for error-surface CSVs")
    _add_spec_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("fiona-dataset", help="synthesize a context corpus")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--corpus", help="corpus giving vocabulary and prior")
    group.add_argument("--vocabulary", help="vocabulary file (uniform prior)")
    p.add_argument("--schedule", help="exclusion schedule JSON")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--max-len", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fiona_dataset)

    p = sub.add_parser("recommend", help="rank next-symbol continuations")
    p.add_argument("--corpus", required=True)
    p.add_argument("--prefix", action="append", default=[])
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--smoothing", choices=["none", "laplace"], default="none")
    p.add_argument("--alpha", default="0")
    p.add_argument("--no-backoff", action="store_true")
    p.set_defaults(func=_cmd_recommend)

    p = sub.add_parser("generate", help="autogenerate programs")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--federation", help="trained federation directory")
    group.add_argument("--corpus", help="train a throwaway federation from this corpus")
    p.add_argument("--requirements", help="requirements JSON for the budget")
    p.add_argument("--rules", help="entity-to-symbol rule table JSON")
    p.add_argument("--mode", choices=["argmax", "sample"], default="argmax")
    p.add_argument("--max-steps", type=int)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--steps", type=int)
    _add_spec_flags(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("eval", help="score a federation on held-out programs")
    p.add_argument("--federation", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="verify recurrent-backend gradients")
    p.add_argument("--corpus")
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--hidden-size", type=int, default=5)
    p.add_argument("--embedding-dim", type=int, default=3)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("serve", help="run the HTTP recommendation service")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--federation")
    group.add_argument("--corpus")
    p.add_argument("--listen", default="127.0.0.1:8000")
    p.add_argument("--smoothing", choices=["none", "laplace"], default="none")
    p.add_argument("--alpha", default="0")
    p.add_argument("--no-backoff", action="store_true")
    p.add_argument("--request-log")
    p.set_defaults(func=_cmd_serve)

    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
