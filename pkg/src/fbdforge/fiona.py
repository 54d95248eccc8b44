"""Exclusion-filtered pair enumeration and chained sequence synthesis.

Synthetic context sequences are grown pair by pair: at each iteration an
exclusion set prunes the ordered-pair space, surviving pairs are weighted
by the product of their symbols' prior probabilities, one pair is drawn
by inverting the cumulative distribution, and the draft is extended by
overlap-chaining. Excluded pairs carry no probability mass at all.
"""

import random
from dataclasses import dataclass
from fractions import Fraction

from .core import DesignStep, FbdProgram, Vocabulary
from .models import TransitionDataset
from .stats import SymbolDistribution

__all__ = [
    "ChainingError",
    "ExclusionSchedule",
    "CandidatePairSet",
    "WeightedPairSet",
    "SequenceDraft",
    "enumerate_pairs",
    "weight_pairs",
    "sample_pair",
    "tau_extend",
    "build_context_dataset",
]

# Fresh drafts always make progress, so hitting this many restarts means
# no pair can ever chain across consecutive exclusion sets.
MAX_RESTARTS = 1000


class ChainingError(ValueError):
    """A pair that cannot legally extend the current draft."""


@dataclass(frozen=True)
class ExclusionSchedule:
    """Per-iteration symbol exclusions, cycled when the build runs longer."""

    exclusions: tuple[frozenset[str], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "exclusions", tuple(frozenset(e) for e in self.exclusions)
        )
        if not self.exclusions:
            raise ValueError("schedule needs at least one exclusion set")

    def validate_against(self, vocab: Vocabulary) -> None:
        for i, excl in enumerate(self.exclusions, start=1):
            for name in excl:
                vocab.require(name)
            if len(vocab) - len(excl & set(vocab.names)) < 2:
                raise ValueError(
                    f"exclusion set {i} leaves fewer than 2 symbols"
                )

    def at(self, iteration: int) -> frozenset[str]:
        """Exclusion set for a 1-based iteration index."""
        return self.exclusions[(iteration - 1) % len(self.exclusions)]


@dataclass(frozen=True)
class CandidatePairSet:
    pairs: tuple[tuple[str, str], ...]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class WeightedPairSet:
    entries: tuple[tuple[tuple[str, str], Fraction], ...]
    cdf: tuple[Fraction, ...]


@dataclass
class SequenceDraft:
    symbols: list[str]
    mode: str = "chained"  # "chained" | "free"

    def __post_init__(self):
        if self.mode not in ("chained", "free"):
            raise ValueError(f"unknown draft mode: {self.mode!r}")


def enumerate_pairs(vocab: Vocabulary, exclusion) -> CandidatePairSet:
    """All ordered pairs of distinct symbols disjoint from the exclusion
    set, in lexicographic order."""
    exclusion = set(exclusion)
    for name in exclusion:
        vocab.require(name)
    survivors = [n for n in vocab.names if n not in exclusion]
    if len(survivors) < 2:
        raise ValueError("exclusion leaves fewer than 2 symbols")
    pairs = tuple(
        (a, b) for a in survivors for b in survivors if a != b
    )
    return CandidatePairSet(tuple(sorted(pairs)))


def weight_pairs(pairs: CandidatePairSet, prior: SymbolDistribution) -> WeightedPairSet:
    """Weight each surviving pair by prior(a)*prior(b), renormalized.

    The cumulative sums follow the pairs' lexicographic order, giving a
    deterministic inverse-CDF sampler.
    """
    if not pairs.pairs:
        raise ValueError("no pairs to weight")
    raw = [Fraction(prior[a]) * Fraction(prior[b]) for a, b in pairs.pairs]
    total = sum(raw)
    if total == 0:
        raise ValueError("prior assigns zero mass to every surviving pair")
    weights = [w / total for w in raw]
    cdf = []
    acc = Fraction(0)
    for w in weights:
        acc += w
        cdf.append(acc)
    entries = tuple(zip(pairs.pairs, weights))
    return WeightedPairSet(entries, tuple(cdf))


def sample_pair(weighted: WeightedPairSet, u) -> tuple[str, str]:
    """Inverse-CDF draw: the first pair whose cumulative sum exceeds u."""
    if not 0 <= u < 1:
        raise ValueError("u must lie in [0, 1)")
    for (pair, _), cum in zip(weighted.entries, weighted.cdf):
        if cum > u:
            return pair
    return weighted.entries[-1][0]  # guard against accumulated rounding


def tau_extend(draft: SequenceDraft, pair: tuple[str, str]) -> SequenceDraft:
    """Extend a draft with an ordered pair.

    Chained mode requires the pair to start at the draft's tail and adds
    one symbol; free mode appends both, deduplicating at the seam. An
    empty draft becomes the pair itself.
    """
    a, b = pair
    if not draft.symbols:
        return SequenceDraft([a, b], draft.mode)
    if draft.mode == "chained":
        if a != draft.symbols[-1]:
            raise ChainingError(
                f"pair {pair!r} does not chain onto {draft.symbols[-1]!r}"
            )
        return SequenceDraft(draft.symbols + [b], draft.mode)
    new = list(draft.symbols)
    if a != new[-1]:
        new.append(a)
    new.append(b)
    return SequenceDraft(new, draft.mode)


def _slice_programs(programs, vocab, max_len, weight):
    datasets = []
    for t in range(1, max_len):
        items = [
            (p.symbols[:t], p.symbols[t]) for p in programs if len(p) > t
        ]
        if items:
            datasets.append(
                TransitionDataset(
                    DesignStep(t),
                    tuple(items),
                    vocabulary=vocab,
                    source="fiona-context",
                    weight=weight,
                )
            )
    return datasets


def build_context_dataset(
    vocab: Vocabulary,
    schedule: ExclusionSchedule,
    prior: SymbolDistribution,
    n_sequences: int,
    max_len: int,
    seed: int,
    weight: float = 1.0,
) -> tuple[list[FbdProgram], list[TransitionDataset]]:
    """Grow chained synthetic sequences and slice them into per-step
    transition datasets. Pure function of its inputs and the seed."""
    if n_sequences < 0:
        raise ValueError("n_sequences must be >= 0")
    if max_len < 2:
        raise ValueError("max_len must be >= 2")
    schedule.validate_against(vocab)

    # Pair sets only depend on the exclusion set, so precompute per entry.
    weighted_by_entry = {}
    for excl in set(schedule.exclusions):
        pairs = enumerate_pairs(vocab, excl)
        weighted_by_entry[excl] = weight_pairs(pairs, prior)

    rng = random.Random(seed)
    programs = []
    for n in range(n_sequences):
        draft = SequenceDraft([], "chained")
        iteration = 1
        restarts = 0
        while len(draft.symbols) < max_len:
            weighted = weighted_by_entry[schedule.at(iteration)]
            extended = None
            for _ in range(len(weighted.entries) + 1):
                pair = sample_pair(weighted, rng.random())
                try:
                    extended = tau_extend(draft, pair)
                    break
                except ChainingError:
                    continue
            if extended is None:
                restarts += 1
                if restarts > MAX_RESTARTS:
                    raise ValueError(
                        f"sequence {n}: no pair chains at iteration {iteration}; "
                        "schedule cannot produce sequences of the requested length"
                    )
                draft = SequenceDraft([], "chained")
                iteration = 1
                continue
            draft = extended
            iteration += 1
        programs.append(
            FbdProgram(f"fiona-{seed}-{n}", tuple(draft.symbols[:max_len]))
        )
    return programs, _slice_programs(programs, vocab, max_len, weight)
