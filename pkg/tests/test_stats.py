from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbdforge import (
    Corpus,
    FbdProgram,
    Smoothing,
    SymbolDistribution,
    Vocabulary,
    build_table,
    conditional_prob,
    estimate_prior,
    recommend,
)
from fbdforge.core import UnknownSymbolError
from fbdforge.stats import (
    UnseenPrefixError,
    bayes_conditional,
    dump_table,
    load_table,
)

from . import oracles


def corpus_of(*programs):
    vocab = sorted({s for symbols in programs for s in symbols})
    return Corpus(
        Vocabulary.of(*vocab),
        tuple(FbdProgram(f"P{i}", tuple(p)) for i, p in enumerate(programs, 1)),
    )


class TestEstimatePrior:
    def test_c0_prior(self, c0):
        prior = estimate_prior(c0)
        assert prior.probs == {
            "AND": Fraction(3, 9),
            "OR": Fraction(3, 9),
            "NOT": Fraction(1, 9),
            "TON": Fraction(1, 9),
            "MOVE": Fraction(1, 9),
        }

    def test_single_program(self):
        prior = estimate_prior(corpus_of(["AND"]))
        assert prior.probs == {"AND": Fraction(1)}

    def test_two_copies_symmetric(self):
        prior = estimate_prior(corpus_of(["AND", "OR"], ["AND", "OR"]))
        assert prior["AND"] == Fraction(1, 2)
        assert prior["OR"] == Fraction(1, 2)


class TestBuildTable:
    def test_c0_contexts(self, c0):
        table = build_table(c0)
        assert table.contexts[("AND",)] == {"OR": 2, "NOT": 1}
        assert table.contexts[("AND", "OR")] == {"TON": 1, "MOVE": 1}
        assert table.contexts[()] == {"AND": 3}

    def test_two_symbol_program(self):
        table = build_table(corpus_of(["A", "B"]))
        assert table.contexts == {(): {"A": 1}, ("A",): {"B": 1}}

    def test_single_symbol_programs_only_fill_empty_context(self):
        table = build_table(corpus_of(["A"], ["B"]))
        assert table.contexts == {(): {"A": 1, "B": 1}}


class TestConditionalProb:
    def test_seen_prefix(self, c0):
        table = build_table(c0)
        assert conditional_prob(table, ["AND"], "OR") == Fraction(2, 3)

    def test_zero_for_unseen_continuation(self, c0):
        table = build_table(c0)
        assert conditional_prob(table, ["AND"], "TON") == 0

    def test_backoff_to_suffix_window(self, c0):
        # [OR] never starts a program, but OR windows continue in P1/P2;
        # P3's OR is terminal and contributes nothing.
        table = build_table(c0)
        assert conditional_prob(table, ["OR"], "TON") == Fraction(1, 2)
        assert conditional_prob(table, ["OR"], "MOVE") == Fraction(1, 2)

    def test_backoff_reaches_empty_prefix(self, c0):
        table = build_table(c0)
        # TON ends every program it appears in: no window continues it.
        assert conditional_prob(table, ["TON"], "AND") == Fraction(1)

    def test_unknown_candidate_rejected(self, c0):
        table = build_table(c0)
        with pytest.raises(UnknownSymbolError):
            conditional_prob(table, ["AND"], "XYZ")

    def test_unseen_prefix_without_backoff(self, c0):
        table = build_table(c0, backoff=False)
        with pytest.raises(UnseenPrefixError):
            conditional_prob(table, ["OR"], "TON")

    def test_laplace_smoothing(self, c0):
        table = build_table(c0, Smoothing("laplace", Fraction(1)))
        # context [AND]: counts OR=2, NOT=1, total 3, |V|=5.
        assert conditional_prob(table, ["AND"], "OR") == Fraction(3, 8)
        assert conditional_prob(table, ["AND"], "TON") == Fraction(1, 8)

    def test_laplace_limit_matches_unsmoothed(self, c0):
        plain = build_table(c0)
        for alpha in (Fraction(1, 10), Fraction(1, 100), Fraction(1, 10_000)):
            smoothed = build_table(c0, Smoothing("laplace", alpha))
            gap = abs(
                conditional_prob(smoothed, ["AND"], "OR")
                - conditional_prob(plain, ["AND"], "OR")
            )
            assert gap < alpha * 10


class TestRecommend:
    def test_c0_after_and(self, c0):
        table = build_table(c0)
        prior = estimate_prior(c0)
        rec = recommend(table, prior, ["AND"], 2)
        assert rec.entries == (("OR", Fraction(2, 3)), ("NOT", Fraction(1, 3)))
        assert rec.context_used == ("AND",)

    def test_tie_breaks_lexicographically(self, c0):
        table = build_table(c0)
        prior = estimate_prior(c0)
        rec = recommend(table, prior, ["AND", "OR"], 1)
        assert rec.entries == (("MOVE", Fraction(1, 2)),)

    def test_empty_prefix_uses_prior(self, c0):
        table = build_table(c0)
        prior = estimate_prior(c0)
        rec = recommend(table, prior, [], 1)
        assert rec.entries == (("AND", Fraction(1, 3)),)
        assert rec.context_used == ()

    def test_fewer_entries_than_k(self, c0):
        table = build_table(c0)
        prior = estimate_prior(c0)
        rec = recommend(table, prior, ["AND"], 10)
        assert len(rec.entries) == 2  # only OR and NOT have positive mass

    def test_k_must_be_positive(self, c0):
        table = build_table(c0)
        with pytest.raises(ValueError):
            recommend(table, estimate_prior(c0), ["AND"], 0)

    def test_normalization_over_matched_context(self, c0):
        table = build_table(c0)
        prior = estimate_prior(c0)
        for prefix in ((), ("AND",), ("AND", "OR"), ("OR",)):
            rec = recommend(table, prior, prefix, 10)
            assert sum(p for _, p in rec.entries) == 1


class TestBayesConsistency:
    def test_c0_all_prefixes(self, c0):
        table = build_table(c0)
        for program in c0.programs:
            for t in range(len(program)):
                prefix = program.symbols[:t]
                for candidate in c0.vocabulary.names:
                    direct = conditional_prob(table, prefix, candidate)
                    assert bayes_conditional(table, c0, prefix, candidate) == direct

    def test_mixed_lengths(self):
        # One program stops where another continues: the continuing
        # population is what keeps the decomposition exact.
        corpus = corpus_of(["A", "B"], ["A"], ["C", "D"])
        table = build_table(corpus)
        assert bayes_conditional(table, corpus, ("A",), "B") == Fraction(1)
        assert bayes_conditional(table, corpus, ("A",), "B") == conditional_prob(
            table, ("A",), "B"
        )


@st.composite
def small_corpora(draw):
    vocab = ["A", "B", "C"]
    n_programs = draw(st.integers(1, 4))
    programs = [
        draw(st.lists(st.sampled_from(vocab), min_size=1, max_size=4))
        for _ in range(n_programs)
    ]
    return corpus_of(*programs)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(small_corpora())
    def test_recommend_top1_matches_brute_force(self, corpus):
        table = build_table(corpus)
        prior = estimate_prior(corpus)
        raw = [list(p.symbols) for p in corpus.programs]
        for program in corpus.programs:
            for t in range(1, len(program)):
                prefix = program.symbols[:t]
                counts = oracles.prefix_continuations(raw, list(prefix))
                if not counts:
                    continue
                expected = oracles.ranked(counts, 1)[0]
                rec = recommend(table, prior, prefix, 1)
                assert rec.entries[0] == expected

    @settings(max_examples=60, deadline=None)
    @given(small_corpora())
    def test_stored_contexts_normalize(self, corpus):
        table = build_table(corpus)
        for counts in table.contexts.values():
            total = sum(counts.values())
            assert sum(Fraction(c, total) for c in counts.values()) == 1

    @settings(max_examples=40, deadline=None)
    @given(small_corpora(), st.integers(2, 7))
    def test_argmax_invariant_under_count_scaling(self, corpus, factor):
        table = build_table(corpus)
        prior = estimate_prior(corpus)
        scaled = type(table)(
            table.vocabulary,
            {
                prefix: {s: c * factor for s, c in conts.items()}
                for prefix, conts in table.contexts.items()
            },
            table.smoothing,
            table.backoff,
        )
        for program in corpus.programs:
            for t in range(len(program)):
                prefix = program.symbols[:t]
                if not prefix:
                    continue
                before = [s for s, _ in recommend(table, prior, prefix, 5).entries]
                after = [s for s, _ in recommend(scaled, prior, prefix, 5).entries]
                assert before == after


class TestPersistence:
    def test_table_round_trip(self, c0):
        table = build_table(c0, Smoothing("laplace", Fraction(1, 2)), backoff=False)
        again = load_table(dump_table(table))
        assert again.contexts == table.contexts
        assert again.smoothing == table.smoothing
        assert again.backoff == table.backoff
        assert again.vocabulary.names == table.vocabulary.names

    def test_version_checked(self):
        with pytest.raises(Exception, match="version"):
            load_table(b'{"version": "bogus/9"}')


class TestSymbolDistribution:
    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            SymbolDistribution({"A": Fraction(1, 2)})

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            SymbolDistribution({"A": Fraction(3, 2), "B": Fraction(-1, 2)})

    def test_float_tolerance(self):
        SymbolDistribution({"A": 0.5, "B": 0.5 + 1e-12})

    def test_ranked_tie_break(self):
        dist = SymbolDistribution({"B": Fraction(1, 2), "A": Fraction(1, 2)})
        assert dist.ranked() == [("A", Fraction(1, 2)), ("B", Fraction(1, 2))]
