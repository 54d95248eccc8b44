"""Empirical symbol statistics and the ranked next-block recommender.

Counts and probabilities in this module are exact rationals so that the
recommender can be checked against brute-force counting with equality,
not tolerance. Floating point only enters in the neural backends.

Conditioning is on the full design prefix. Unseen prefixes back off to
the longest suffix window that occurs anywhere in the corpus, and
ultimately to the empty prefix (first-symbol counts).
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .core import Corpus, CorpusError, UnknownSymbolError, Vocabulary

__all__ = [
    "SymbolDistribution",
    "Smoothing",
    "TransitionTable",
    "RankedRecommendation",
    "UnseenPrefixError",
    "estimate_prior",
    "build_table",
    "conditional_prob",
    "recommend",
    "prefix_frequency",
    "bayes_conditional",
    "dump_table",
    "load_table",
]

PREFIX_SEP = ""

Prob = Fraction | float


class UnseenPrefixError(KeyError):
    """Raised for an unseen prefix when backoff is disabled."""

    def __init__(self, prefix):
        super().__init__(f"unseen prefix: {list(prefix)!r}")
        self.prefix = tuple(prefix)


@dataclass(frozen=True)
class SymbolDistribution:
    """Probability over symbol names; sums to 1 (exactly for rationals)."""

    probs: dict[str, Prob]

    def __post_init__(self):
        object.__setattr__(self, "probs", dict(self.probs))
        total = sum(self.probs.values())
        if any(p < 0 for p in self.probs.values()):
            raise ValueError("negative probability")
        exact = all(isinstance(p, Fraction) for p in self.probs.values())
        if exact:
            if total != 1:
                raise ValueError(f"probabilities sum to {total}, expected 1")
        elif abs(total - 1) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, expected 1")

    def __getitem__(self, name: str) -> Prob:
        return self.probs.get(name, Fraction(0))

    def ranked(self) -> list[tuple[str, Prob]]:
        """Entries with positive mass, by probability desc then name."""
        entries = [(s, p) for s, p in self.probs.items() if p > 0]
        entries.sort(key=lambda e: (-e[1], e[0]))
        return entries

    def argmax(self) -> str:
        return self.ranked()[0][0]


@dataclass(frozen=True)
class Smoothing:
    mode: str = "none"  # "none" | "laplace"
    alpha: Fraction = Fraction(0)

    def __post_init__(self):
        if self.mode not in ("none", "laplace"):
            raise ValueError(f"unknown smoothing mode: {self.mode!r}")
        alpha = Fraction(self.alpha)
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class TransitionTable:
    """Prefix -> next-symbol counts.

    `contexts` keys are full program prefixes (the empty tuple holds
    first-symbol counts). `windows`, derived at construction, aggregates
    the same transitions by context suffix and serves backoff lookups.
    """

    vocabulary: Vocabulary
    contexts: dict[tuple[str, ...], dict[str, int]]
    smoothing: Smoothing = field(default_factory=Smoothing)
    backoff: bool = True

    def __post_init__(self):
        contexts = {tuple(k): dict(v) for k, v in self.contexts.items()}
        for prefix, conts in contexts.items():
            for name in prefix:
                self.vocabulary.require(name)
            for name, count in conts.items():
                self.vocabulary.require(name)
                if count < 1:
                    raise ValueError("stored counts must be >= 1")
        object.__setattr__(self, "contexts", contexts)
        windows: dict[tuple[str, ...], dict[str, int]] = {}
        for prefix, conts in contexts.items():
            for k in range(1, len(prefix) + 1):
                agg = windows.setdefault(prefix[-k:], {})
                for name, count in conts.items():
                    agg[name] = agg.get(name, 0) + count
        object.__setattr__(self, "windows", windows)

    def match(self, prefix) -> tuple[tuple[str, ...], dict[str, int]]:
        """Resolve a prefix to (matched context, counts).

        Exact full-prefix contexts win; otherwise successively shorter
        suffix windows are tried, ending at the empty prefix.
        """
        prefix = tuple(prefix)
        for name in prefix:
            self.vocabulary.require(name)
        if prefix in self.contexts:
            return prefix, self.contexts[prefix]
        if not self.backoff:
            raise UnseenPrefixError(prefix)
        for k in range(len(prefix), 0, -1):
            suffix = prefix[-k:]
            if suffix in self.windows:
                return suffix, self.windows[suffix]
        return (), self.contexts.get((), {})


@dataclass(frozen=True)
class RankedRecommendation:
    entries: tuple[tuple[str, Prob], ...]
    context_used: tuple[str, ...]


def estimate_prior(corpus: Corpus) -> SymbolDistribution:
    """Relative frequency of each vocabulary symbol over all positions."""
    if not corpus.programs:
        raise CorpusError("empty corpus")
    counts = {name: 0 for name in corpus.vocabulary.names}
    total = 0
    for program in corpus.programs:
        for name in program.symbols:
            counts[name] += 1
            total += 1
    return SymbolDistribution({s: Fraction(c, total) for s, c in counts.items()})


def build_table(
    corpus: Corpus,
    smoothing: Smoothing | None = None,
    backoff: bool = True,
) -> TransitionTable:
    """Count (full prefix -> next symbol) transitions for every program
    position; the empty prefix records first symbols."""
    if not corpus.programs:
        raise CorpusError("empty corpus")
    contexts: dict[tuple[str, ...], dict[str, int]] = {}
    for program in corpus.programs:
        for t, name in enumerate(program.symbols):
            prefix = tuple(program.symbols[:t])
            conts = contexts.setdefault(prefix, {})
            conts[name] = conts.get(name, 0) + 1
    return TransitionTable(
        corpus.vocabulary, contexts, smoothing or Smoothing(), backoff
    )


def _smoothed(table: TransitionTable, counts: dict[str, int], candidate: str) -> Fraction:
    total = sum(counts.values())
    if table.smoothing.mode == "laplace" and table.smoothing.alpha > 0:
        alpha = table.smoothing.alpha
        denom = total + alpha * len(table.vocabulary)
        return (counts.get(candidate, 0) + alpha) / denom
    if total == 0:
        return Fraction(0)
    return Fraction(counts.get(candidate, 0), total)


def conditional_prob(table: TransitionTable, prefix, candidate: str) -> Fraction:
    """Probability of `candidate` continuing `prefix` under the matched
    context (exact match, else longest stored suffix window)."""
    table.vocabulary.require(candidate)
    _, counts = table.match(prefix)
    return _smoothed(table, counts, candidate)


def recommend(
    table: TransitionTable,
    prior: SymbolDistribution,
    prefix,
    k: int,
) -> RankedRecommendation:
    """Top-k continuations ranked by conditional probability (by the
    symbol prior when the prefix is empty). Ties break lexicographically;
    only continuations with positive probability are returned."""
    if k < 1:
        raise ValueError("k must be >= 1")
    prefix = tuple(prefix)
    if not prefix:
        return RankedRecommendation(tuple(prior.ranked()[:k]), ())
    context, counts = table.match(prefix)
    probs = {
        name: _smoothed(table, counts, name) for name in table.vocabulary.names
    }
    entries = [(s, p) for s, p in probs.items() if p > 0]
    entries.sort(key=lambda e: (-e[1], e[0]))
    return RankedRecommendation(tuple(entries[:k]), context)


def prefix_frequency(corpus: Corpus, prefix, min_len: int | None = None) -> Fraction:
    """Empirical frequency of `prefix` among programs of length >= min_len
    (the prefix's own length by default)."""
    prefix = tuple(prefix)
    if min_len is None:
        min_len = len(prefix)
    population = [p for p in corpus.programs if len(p) >= min_len]
    if not population:
        raise ZeroDivisionError("empty population")
    hits = sum(1 for p in population if p.symbols[: len(prefix)] == prefix)
    return Fraction(hits, len(population))


def bayes_conditional(table: TransitionTable, corpus: Corpus, prefix, candidate: str) -> Fraction:
    """The same conditional assembled from its Bayes factors.

    Both prefix frequencies are measured over the programs that reach
    step i = len(prefix)+1, i.e. the population in which a next selection
    exists; on that population the decomposition agrees exactly with
    direct relative-frequency counting.
    """
    table.vocabulary.require(candidate)
    prefix = tuple(prefix)
    i = len(prefix) + 1
    extended = prefix + (candidate,)
    psi_prev = prefix_frequency(corpus, prefix, min_len=i)
    if psi_prev == 0:
        raise ZeroDivisionError(f"prefix never continues: {list(prefix)!r}")
    psi_i = prefix_frequency(corpus, extended, min_len=i)
    likelihood = Fraction(1) if psi_i > 0 else Fraction(0)
    return likelihood * psi_i / psi_prev


def dump_table(table: TransitionTable) -> bytes:
    doc = {
        "version": "fbdforge-table/1",
        "smoothing": {
            "mode": table.smoothing.mode,
            "alpha": str(table.smoothing.alpha),
        },
        "backoff": table.backoff,
        "vocabulary": list(table.vocabulary.names),
        "contexts": {
            PREFIX_SEP.join(prefix): dict(sorted(conts.items()))
            for prefix, conts in sorted(table.contexts.items())
        },
    }
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def load_table(source) -> TransitionTable:
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    doc = json.loads(text)
    if doc.get("version") != "fbdforge-table/1":
        raise CorpusError(f"unsupported table version: {doc.get('version')!r}")
    vocab = Vocabulary.of(*doc["vocabulary"])
    contexts = {
        tuple(key.split(PREFIX_SEP)) if key else (): {
            str(s): int(c) for s, c in conts.items()
        }
        for key, conts in doc["contexts"].items()
    }
    smoothing = Smoothing(
        doc["smoothing"]["mode"], Fraction(doc["smoothing"]["alpha"])
    )
    return TransitionTable(vocab, contexts, smoothing, bool(doc["backoff"]))
