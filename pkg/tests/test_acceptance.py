"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line. Expected values come from the brute-force oracles in oracles.py,
never from the implementation under test."""

import itertools
import math
import random
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from fbdforge import (
    ActionModelSpec,
    Corpus,
    ExclusionSchedule,
    FbdProgram,
    GenerationConfig,
    SymbolDistribution,
    SymbolMultiset,
    TransitionDataset,
    Vocabulary,
    build_context_dataset,
    build_table,
    conditional_prob,
    derive_multiset,
    enumerate_pairs,
    estimate_prior,
    generate,
    gradient_check,
    parse_requirements,
    parse_rule_table,
    recommend,
    sample_pair,
    slice_transitions,
    train,
    train_federation,
    validate_program,
    weight_pairs,
)
from fbdforge.core import DesignStep
from fbdforge.stats import bayes_conditional

from . import oracles
from .conftest import C0_TEXT


@contextmanager
def criterion(number, label):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} ({label}): FAIL")
        raise
    else:
        elapsed = time.perf_counter() - started
        print(f"ACCEPTANCE {number} ({label}): PASS [{elapsed:.1f}s]")


def random_corpus(rng, max_vocab=5, max_programs=6, max_len=5):
    pool = ["ADD", "AND", "MOVE", "NOT", "OR"][: rng.randint(1, max_vocab)]
    programs = []
    for i in range(rng.randint(1, max_programs)):
        length = rng.randint(1, max_len)
        programs.append(
            FbdProgram(f"P{i}", tuple(rng.choice(pool) for _ in range(length)))
        )
    names = sorted({s for p in programs for s in p.symbols})
    return Corpus(Vocabulary.of(*names), tuple(programs))


def test_criterion_1_recommender_oracle_equivalence():
    with criterion(1, "recommender-oracle equivalence"):
        started = time.perf_counter()
        rng = random.Random(2024)
        checked = 0
        for _ in range(1000):
            corpus = random_corpus(rng)
            table = build_table(corpus)
            prior = estimate_prior(corpus)
            raw = [list(p.symbols) for p in corpus.programs]
            prefixes = {
                p.symbols[:t]
                for p in corpus.programs
                for t in range(1, len(p))
            }
            for prefix in prefixes:
                counts = oracles.prefix_continuations(raw, list(prefix))
                if not counts:
                    continue
                expected_symbol, expected_prob = oracles.ranked(counts, 1)[0]
                top = recommend(table, prior, prefix, 1).entries[0]
                assert top == (expected_symbol, expected_prob)
                checked += 1
        elapsed = time.perf_counter() - started
        assert checked > 1000
        assert elapsed < 10, f"took {elapsed:.1f}s"


def test_criterion_2_bayes_form_consistency():
    with criterion(2, "Bayes-form consistency"):
        started = time.perf_counter()
        comparisons = 0
        for vocab_names in (("A",), ("A", "B"), ("A", "B", "C")):
            vocab = Vocabulary.of(*vocab_names)
            seqs = []
            for length in (1, 2, 3):
                seqs.extend(itertools.product(vocab_names, repeat=length))
            for n_programs in (1, 2, 3):
                for combo in itertools.combinations_with_replacement(
                    seqs, n_programs
                ):
                    corpus = Corpus(
                        vocab,
                        tuple(
                            FbdProgram(f"P{i}", s)
                            for i, s in enumerate(combo, 1)
                        ),
                    )
                    table = build_table(corpus)
                    prefixes = {
                        p.symbols[:t]
                        for p in corpus.programs
                        for t in range(len(p))
                    }
                    for prefix in prefixes:
                        if prefix not in table.contexts:
                            continue  # prefix never continues
                        for cand in vocab_names:
                            direct = conditional_prob(table, prefix, cand)
                            bayes = bayes_conditional(table, corpus, prefix, cand)
                            assert bayes == direct
                            comparisons += 1
        elapsed = time.perf_counter() - started
        assert comparisons > 100_000
        assert elapsed < 60, f"took {elapsed:.1f}s"


def test_criterion_3_fiona_enumeration():
    with criterion(3, "FIONA pair enumeration"):
        started = time.perf_counter()
        for size in range(2, 7):
            names = [f"S{i}" for i in range(size)]
            vocab = Vocabulary.of(*names)
            for bits in range(2**size):
                exclusion = {names[i] for i in range(size) if bits >> i & 1}
                survivors = size - len(exclusion)
                if survivors < 2:
                    try:
                        enumerate_pairs(vocab, exclusion)
                        raise AssertionError("expected an error")
                    except ValueError:
                        continue
                pairs = enumerate_pairs(vocab, exclusion)
                assert pairs.pairs == tuple(
                    oracles.enumerate_pairs_brute(names, exclusion)
                )
                assert len(pairs) == survivors * (survivors - 1)
        elapsed = time.perf_counter() - started
        assert elapsed < 5, f"took {elapsed:.1f}s"


def test_criterion_4_sampler_fidelity():
    with criterion(4, "inverse-CDF sampler fidelity"):
        vocab = Vocabulary.of("A", "B", "C", "D")
        prior = SymbolDistribution(
            {
                "A": Fraction(1, 2),
                "B": Fraction(1, 4),
                "C": Fraction(1, 8),
                "D": Fraction(1, 8),
            }
        )
        weighted = weight_pairs(enumerate_pairs(vocab, set()), prior)
        assert len(weighted.entries) == 12

        rng = random.Random(31)
        n_draws = 100_000
        counts = {pair: 0 for pair, _ in weighted.entries}
        for _ in range(n_draws):
            counts[sample_pair(weighted, rng.random())] += 1
        worst = max(
            abs(counts[pair] / n_draws - float(weight))
            for pair, weight in weighted.entries
        )
        assert worst < 0.01, f"seeded draws off by {worst:.4f}"

        # Grid sweep: vectorized inverse CDF over 10^6 evenly spaced points,
        # cross-checked against sample_pair on a deterministic subsample.
        cdf = np.array([float(c) for c in weighted.cdf])
        grid = (np.arange(1_000_000) + 0.5) / 1_000_000
        picks = np.searchsorted(cdf, grid, side="right")
        grid_counts = np.bincount(picks, minlength=len(weighted.entries))
        worst_grid = max(
            abs(grid_counts[i] / 1_000_000 - float(weight))
            for i, (_, weight) in enumerate(weighted.entries)
        )
        assert worst_grid < 2e-3, f"grid sweep off by {worst_grid:.5f}"
        for j in range(0, 1_000_000, 50_001):
            assert weighted.entries[picks[j]][0] == sample_pair(weighted, grid[j])


def test_criterion_5_gradient_check():
    with criterion(5, "gradient check"):
        vocab = Vocabulary.of("A", "B", "C", "D")
        rng = random.Random(5)
        for seed in range(10):
            t = rng.randint(1, 3)
            names = vocab.names
            items = tuple(
                (
                    tuple(rng.choice(names) for _ in range(t)),
                    rng.choice(names),
                )
                for _ in range(rng.randint(2, 4))
            )
            sample = TransitionDataset(DesignStep(t), items, vocabulary=vocab)
            spec = ActionModelSpec(
                backend="rnn", hidden_size=5, embedding_dim=3, init_seed=seed
            )
            error = gradient_check(spec, sample, 1e-4)
            assert error < 1e-3, f"seed {seed}: {error:.2e}"


TASK_SYMBOLS = ("ADD", "AND", "MOVE", "NOT", "OR", "TOF", "TON", "XOR")
TASK_WEIGHTS = (2, 8, 3, 5, 6, 1.5, 4, 1)


def _pretraining_task_corpus(seed, n_programs=100):
    """Programs from a skewed next-symbol process over eight symbols."""
    rng = random.Random(seed)
    programs = []
    for i in range(n_programs):
        length = rng.randint(4, 6)
        symbols = rng.choices(TASK_SYMBOLS, weights=TASK_WEIGHTS)
        while len(symbols) < length:
            current = symbols[-1]
            candidates = [
                (name, w)
                for name, w in zip(TASK_SYMBOLS, TASK_WEIGHTS)
                if name != current
            ]
            symbols.append(
                rng.choices(
                    [n for n, _ in candidates], weights=[w for _, w in candidates]
                )[0]
            )
        programs.append(FbdProgram(f"T{i}", tuple(symbols)))
    return Corpus(Vocabulary.of(*TASK_SYMBOLS), tuple(programs))


def test_criterion_6_pretraining_benefit():
    with criterion(6, "context pretraining benefit"):
        started = time.perf_counter()
        corpus = _pretraining_task_corpus(77)
        prior = estimate_prior(corpus)
        schedule = ExclusionSchedule((frozenset(),))
        _, context_slices = build_context_dataset(
            corpus.vocabulary, schedule, prior, 200, 5, seed=41
        )
        context_by_step = {d.step.t: d for d in context_slices}
        for t in (1, 2, 3):
            task = slice_transitions(corpus, DesignStep(t))
            assert len(task.items) == 100
            wins = 0
            for i in range(10):
                spec = ActionModelSpec(backend="rnn", init_seed=1000 + i)
                _, cold, _ = train(spec, task)
                _, warm, pre = train(spec, task, context_by_step[t])
                assert pre is not None
                if warm.final_epoch_mean() <= cold.final_epoch_mean():
                    wins += 1
            assert wins >= 8, f"transition {t}->{t + 1}: only {wins}/10 wins"
        elapsed = time.perf_counter() - started
        assert elapsed < 300, f"took {elapsed:.1f}s"


def test_criterion_7_constrained_generation():
    with criterion(7, "constrained generation"):
        # End-to-end on the canonical corpus: requirements -> budget ->
        # federated argmax generation.
        from fbdforge import load_corpus

        c0 = load_corpus(C0_TEXT)
        doc = parse_requirements('{"entries":[{"entity_type":"valve","count":1}]}')
        rules = parse_rule_table(
            '{"rules":{"valve":[{"symbol":"AND","multiplier":1},'
            '{"symbol":"OR","multiplier":1},{"symbol":"TON","multiplier":1}]}}',
            c0.vocabulary,
        )
        budget = derive_multiset(doc, rules)
        assert budget.counts == {"AND": 1, "OR": 1, "TON": 1}
        fed = train_federation(c0, None, ActionModelSpec(backend="count"), 2)
        cfg = GenerationConfig(
            mode="argmax", budget=budget, max_steps=budget.total(), seed=0
        )
        assert generate(fed, cfg).symbols == ("AND", "OR", "TON")

        rng = random.Random(404)
        for run in range(100):
            corpus = random_corpus(rng)
            fed = train_federation(
                corpus, None, ActionModelSpec(backend="count"), 3
            )
            names = list(corpus.vocabulary.names)
            budget_counts = {
                name: rng.randint(1, 3)
                for name in rng.sample(names, rng.randint(1, len(names)))
            }
            mode = "argmax" if run % 2 == 0 else "sample"
            cfg = GenerationConfig(
                mode=mode,
                budget=SymbolMultiset(budget_counts),
                max_steps=rng.randint(1, 6),
                seed=run,
            )
            try:
                program = generate(fed, cfg)
            except ValueError:
                # every budgeted symbol can be masked at step 1; that is a
                # declared error, not a generation result
                continue
            assert generate(fed, cfg).symbols == program.symbols
            assert validate_program(program, corpus.vocabulary).ok
            used = {}
            for name in program.symbols:
                used[name] = used.get(name, 0) + 1
            for name, count in used.items():
                assert count <= budget_counts.get(name, 0)


def test_criterion_8_training_sanity():
    with criterion(8, "training sanity"):
        vocab = Vocabulary.of("A", "B", "C")
        items = tuple(((("A",), "B"),) * 8)
        dataset = TransitionDataset(DesignStep(1), items, vocabulary=vocab)
        _, surface, _ = train(ActionModelSpec(backend="rnn", init_seed=3), dataset)
        means = surface.epoch_means()
        final = means[max(means)]
        assert final < 0.1, f"final loss {final:.4f}"
        assert final < means[1]

        from fbdforge import load_corpus

        c0 = load_corpus(C0_TEXT)
        sliced = slice_transitions(c0, DesignStep(1))
        _, count_surface, _ = train(ActionModelSpec(backend="count"), sliced)
        closed_form = -(2 / 3 * math.log(2 / 3) + 1 / 3 * math.log(1 / 3))
        for _, _, loss in count_surface.grid:
            assert abs(loss - closed_form) < 1e-9
