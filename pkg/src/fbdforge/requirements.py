"""Mapping structured requirement documents to symbol budgets.

Requirement entries count domain entities (valves, motors, ...); a
declarative rule table translates each entity type into weighted symbol
contributions, and the sum becomes the multiset that constrains program
generation. No free-text extraction happens here.
"""

import json
import logging
from dataclasses import dataclass

from .core import CorpusError, SymbolMultiset, Vocabulary

__all__ = [
    "RequirementEntry",
    "RequirementDoc",
    "MappingRuleTable",
    "UnmappedEntityError",
    "parse_requirements",
    "parse_rule_table",
    "derive_multiset",
]

log = logging.getLogger(__name__)


class UnmappedEntityError(KeyError):
    def __init__(self, entity_type: str):
        super().__init__(f"no mapping rule for entity type {entity_type!r}")
        self.entity_type = entity_type


@dataclass(frozen=True)
class RequirementEntry:
    entity_type: str
    count: int
    attributes: dict[str, str] | None = None

    def __post_init__(self):
        if not self.entity_type:
            raise CorpusError("entity type must be nonempty")
        if self.count < 1:
            raise CorpusError(
                f"count for {self.entity_type!r} must be >= 1, got {self.count}"
            )


@dataclass(frozen=True)
class RequirementDoc:
    entries: tuple[RequirementEntry, ...]


@dataclass(frozen=True)
class MappingRuleTable:
    """entity type -> [(symbol, multiplier)] contributions."""

    rules: dict[str, tuple[tuple[str, int], ...]]

    def __post_init__(self):
        rules = {
            entity: tuple((s, int(m)) for s, m in contributions)
            for entity, contributions in self.rules.items()
        }
        for entity, contributions in rules.items():
            for symbol, multiplier in contributions:
                if multiplier < 1:
                    raise CorpusError(
                        f"multiplier for {entity!r}->{symbol!r} must be >= 1"
                    )
        object.__setattr__(self, "rules", rules)

    def validate_against(self, vocab: Vocabulary) -> None:
        for contributions in self.rules.values():
            for symbol, _ in contributions:
                vocab.require(symbol)


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def parse_requirements(source) -> RequirementDoc:
    """Parse `{"entries": [{"entity_type", "count", "attributes"?}, ...]}`."""
    try:
        doc = json.loads(_read_text(source))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed requirements JSON: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise CorpusError("requirements file must contain an 'entries' list")
    entries = []
    for idx, record in enumerate(doc["entries"]):
        if not isinstance(record, dict):
            raise CorpusError(f"entry {idx}: expected an object")
        entity_type = record.get("entity_type")
        count = record.get("count")
        if not isinstance(entity_type, str) or not entity_type:
            raise CorpusError(f"entry {idx}: missing 'entity_type'")
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise CorpusError(f"entry {idx}: 'count' must be a positive integer")
        attributes = record.get("attributes")
        if attributes is not None and not isinstance(attributes, dict):
            raise CorpusError(f"entry {idx}: 'attributes' must be an object")
        entries.append(RequirementEntry(entity_type, count, attributes))
    return RequirementDoc(tuple(entries))


def parse_rule_table(source, vocab: Vocabulary | None = None) -> MappingRuleTable:
    """Parse `{"rules": {"valve": [{"symbol": ..., "multiplier": ...}]}}`."""
    try:
        doc = json.loads(_read_text(source))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"malformed rule table JSON: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("rules"), dict):
        raise CorpusError("rule table file must contain a 'rules' object")
    rules = {}
    for entity, contributions in doc["rules"].items():
        if not isinstance(contributions, list):
            raise CorpusError(f"rule for {entity!r} must be a list")
        parsed = []
        for item in contributions:
            symbol = item.get("symbol") if isinstance(item, dict) else None
            multiplier = item.get("multiplier", 1) if isinstance(item, dict) else None
            if not isinstance(symbol, str) or not symbol:
                raise CorpusError(f"rule for {entity!r}: missing 'symbol'")
            if not isinstance(multiplier, int) or multiplier < 1:
                raise CorpusError(
                    f"rule for {entity!r}: 'multiplier' must be a positive integer"
                )
            parsed.append((symbol, multiplier))
        rules[entity] = tuple(parsed)
    table = MappingRuleTable(rules)
    if vocab is not None:
        table.validate_against(vocab)
    return table


def derive_multiset(
    doc: RequirementDoc, rules: MappingRuleTable, strict: bool = True
) -> SymbolMultiset:
    """Accumulate count * multiplier per mapped symbol across all entries.

    Linear in the entry counts and independent of entry order. Unmapped
    entity types are an error in strict mode and are skipped with a
    warning otherwise.
    """
    totals: dict[str, int] = {}
    for entry in doc.entries:
        contributions = rules.rules.get(entry.entity_type)
        if contributions is None:
            if strict:
                raise UnmappedEntityError(entry.entity_type)
            log.warning("skipping unmapped entity type %r", entry.entity_type)
            continue
        for symbol, multiplier in contributions:
            totals[symbol] = totals.get(symbol, 0) + entry.count * multiplier
    return SymbolMultiset(totals)
