"""Domain types for symbols, programs and corpora, plus corpus I/O.

A function-block design is modelled as a flat, design-step-ordered
sequence of symbol names. Connectors are ordinary symbols; there is no
graph structure. All types are immutable after construction and safe to
share between threads.
"""

import io
import json
from dataclasses import dataclass, field

__all__ = [
    "CorpusError",
    "UnknownSymbolError",
    "SymbolDef",
    "Vocabulary",
    "SymbolMultiset",
    "FbdProgram",
    "Corpus",
    "DesignStep",
    "Violation",
    "ValidationReport",
    "validate_program",
    "multiset_of",
    "load_corpus",
    "loads_corpus",
    "dump_corpus",
    "load_vocabulary",
    "dump_vocabulary",
]


class CorpusError(ValueError):
    """Malformed corpus, vocabulary or program data."""


class UnknownSymbolError(CorpusError):
    """A symbol name that is not part of the governing vocabulary."""

    def __init__(self, name: str):
        super().__init__(f"unknown symbol: {name!r}")
        self.name = name


@dataclass(frozen=True)
class SymbolDef:
    """One design element: a function block or connector."""

    name: str
    category: str | None = None
    notes: str | None = None

    def __post_init__(self):
        if not self.name:
            raise CorpusError("symbol name must be nonempty")


@dataclass(frozen=True)
class Vocabulary:
    """The universe of symbols, kept sorted by name for deterministic
    tie-breaks and CDF construction downstream."""

    symbols: tuple[SymbolDef, ...]

    def __post_init__(self):
        if not self.symbols:
            raise CorpusError("vocabulary must be nonempty")
        ordered = tuple(sorted(self.symbols, key=lambda s: s.name))
        names = [s.name for s in ordered]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise CorpusError(f"duplicate symbol names: {', '.join(dupes)}")
        object.__setattr__(self, "symbols", ordered)
        object.__setattr__(self, "_names", tuple(names))
        object.__setattr__(self, "_name_set", frozenset(names))

    @classmethod
    def of(cls, *names: str) -> "Vocabulary":
        return cls(tuple(SymbolDef(n) for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def __contains__(self, name: str) -> bool:
        return name in self._name_set

    def __len__(self) -> int:
        return len(self.symbols)

    def require(self, name: str) -> str:
        if name not in self:
            raise UnknownSymbolError(name)
        return name


@dataclass(frozen=True)
class SymbolMultiset:
    """Symbol budget with repetitions: name -> positive count."""

    counts: dict[str, int]

    def __post_init__(self):
        for name, count in self.counts.items():
            if count < 1:
                raise CorpusError(f"multiset count for {name!r} must be >= 1")
        object.__setattr__(self, "counts", dict(self.counts))

    def total(self) -> int:
        return sum(self.counts.values())

    def validate_against(self, vocab: Vocabulary) -> None:
        for name in self.counts:
            vocab.require(name)


@dataclass(frozen=True)
class FbdProgram:
    """A realized design: symbol position == design step (1-based)."""

    id: str
    symbols: tuple[str, ...]
    task: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class Corpus:
    vocabulary: Vocabulary
    programs: tuple[FbdProgram, ...]

    def __post_init__(self):
        object.__setattr__(self, "programs", tuple(self.programs))
        ids = [p.id for p in self.programs]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise CorpusError(f"duplicate program id: {', '.join(dupes)}")
        for program in self.programs:
            report = validate_program(program, self.vocabulary)
            if not report.ok:
                raise CorpusError(
                    f"program {program.id!r} invalid: {report.violations[0].message}"
                )


@dataclass(frozen=True)
class DesignStep:
    """Discrete design time; advances only when a symbol is selected."""

    t: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("design step must be >= 1")


@dataclass(frozen=True)
class Violation:
    position: int | None  # 1-based symbol position, None for program-level
    symbol: str | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    program_id: str
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_program(program: FbdProgram, vocab: Vocabulary) -> ValidationReport:
    """Check a program against its vocabulary. Violations are data, not
    exceptions; identical inputs always yield identical reports."""
    violations = []
    if not program.id:
        violations.append(Violation(None, None, "program id is empty"))
    if len(program.symbols) < 1:
        violations.append(Violation(None, None, "empty program"))
    for pos, name in enumerate(program.symbols, start=1):
        if name not in vocab:
            violations.append(
                Violation(pos, name, f"unknown symbol {name!r} at position {pos}")
            )
    return ValidationReport(program.id, tuple(violations))


def multiset_of(program: FbdProgram) -> SymbolMultiset:
    """Occurrence counts of a program's symbols."""
    counts: dict[str, int] = {}
    for name in program.symbols:
        counts[name] = counts.get(name, 0) + 1
    return SymbolMultiset(counts)


def _decode_program(record, line_no: int) -> FbdProgram:
    if not isinstance(record, dict):
        raise CorpusError(f"line {line_no}: expected a JSON object")
    pid = record.get("id")
    symbols = record.get("symbols")
    if not isinstance(pid, str) or not pid:
        raise CorpusError(f"line {line_no}: missing or empty 'id'")
    if not isinstance(symbols, list) or not symbols:
        raise CorpusError(f"line {line_no}: 'symbols' must be a nonempty list")
    if not all(isinstance(s, str) and s for s in symbols):
        raise CorpusError(f"line {line_no}: symbols must be nonempty strings")
    task = record.get("task")
    if task is not None and not isinstance(task, str):
        raise CorpusError(f"line {line_no}: 'task' must be a string")
    return FbdProgram(pid, tuple(symbols), task)


def load_corpus(source, vocabulary: Vocabulary | None = None) -> Corpus:
    """Parse a JSON-Lines corpus (one program object per line).

    When no vocabulary is supplied, one is inferred from the symbols seen,
    normalized lexicographically. With an explicit vocabulary, unknown
    symbols are an error.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    programs: list[FbdProgram] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
        program = _decode_program(record, line_no)
        if program.id in seen_ids:
            raise CorpusError(f"line {line_no}: duplicate program id: {program.id!r}")
        seen_ids.add(program.id)
        if vocabulary is not None:
            for name in program.symbols:
                vocabulary.require(name)
        programs.append(program)

    if not programs:
        raise CorpusError("empty corpus")
    if vocabulary is None:
        names = sorted({s for p in programs for s in p.symbols})
        vocabulary = Vocabulary.of(*names)
    return Corpus(vocabulary, tuple(programs))


def loads_corpus(text: str, vocabulary: Vocabulary | None = None) -> Corpus:
    return load_corpus(text, vocabulary)


def dump_corpus(corpus: Corpus) -> bytes:
    """Serialize to the JSON-Lines corpus format (UTF-8, LF endings)."""
    out = io.StringIO()
    for program in corpus.programs:
        record: dict = {"id": program.id, "symbols": list(program.symbols)}
        if program.task is not None:
            record["task"] = program.task
        out.write(json.dumps(record, ensure_ascii=False))
        out.write("\n")
    return out.getvalue().encode("utf-8")


def load_vocabulary(source) -> Vocabulary:
    """Parse a vocabulary file: a JSON array of symbol definitions."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed vocabulary JSON: {exc.msg}") from exc
    if not isinstance(records, list):
        raise CorpusError("vocabulary file must be a JSON array")
    symbols = []
    for idx, record in enumerate(records):
        if not isinstance(record, dict) or not isinstance(record.get("name"), str):
            raise CorpusError(f"vocabulary entry {idx}: missing 'name'")
        symbols.append(
            SymbolDef(record["name"], record.get("category"), record.get("notes"))
        )
    return Vocabulary(tuple(symbols))


def dump_vocabulary(vocab: Vocabulary) -> bytes:
    records = []
    for sym in vocab.symbols:
        record: dict = {"name": sym.name}
        if sym.category is not None:
            record["category"] = sym.category
        if sym.notes is not None:
            record["notes"] = sym.notes
        records.append(record)
    return (json.dumps(records, ensure_ascii=False, indent=2) + "\n").encode("utf-8")
