"""Predicate dictionaries and relation-phrase linking.

A dictionary maps predicate identifiers to a label plus surface aliases.
Linking finds token runs in a sentence that match a label or alias
case-insensitively, then maps predicates onward to task-specific relation
categories for decoding.

Dictionary file format (UTF-8, ``#`` comments ignored)::

    predicate_id<TAB>label<TAB>alias1|alias2|...

Task maps live in companion files ``taskmap.<task>.tsv`` with lines
``predicate_id<TAB>relation_label``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from triplex.bundle import TokenSpan


class DictionaryError(ValueError):
    """Raised for malformed dictionary or task-map files."""

    def __init__(self, message: str, path: str | Path | None = None,
                 line: int | None = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(location + message)


# Sentinel task map: predicates themselves are the task category.
IDENTITY_TASK_MAP = "identity"


@dataclass(frozen=True)
class PredicateEntry:
    predicate_id: str
    label: str
    aliases: tuple[str, ...]

    def phrases(self) -> tuple[str, ...]:
        return (self.label,) + self.aliases


@dataclass
class PredicateDictionary:
    """Predicate entries plus task-relation maps and the alias ambiguity set."""

    entries: dict[str, PredicateEntry] = field(default_factory=dict)
    task_maps: dict[str, dict[str, str] | str] = field(default_factory=dict)
    ambiguous_aliases: dict[str, frozenset[str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def phrase_index(self) -> dict[tuple[str, ...], list[tuple[str, str]]]:
        """Lowercased token-sequence -> sorted [(predicate_id, matched phrase)]."""
        index: dict[tuple[str, ...], list[tuple[str, str]]] = {}
        for pid in sorted(self.entries):
            for phrase in self.entries[pid].phrases():
                key = tuple(phrase.lower().split())
                if not key:
                    continue
                bucket = index.setdefault(key, [])
                if not any(existing_pid == pid for existing_pid, _ in bucket):
                    bucket.append((pid, phrase))
        return index

    def register_task_map(self, task: str, mapping: dict[str, str] | str) -> None:
        self.task_maps[task] = mapping


@dataclass(frozen=True)
class RelationLink:
    """A token run linked to a predicate through one of its aliases."""

    span: TokenSpan
    predicate_id: str
    matched_alias: str


def load_dictionary(path: str | Path) -> PredicateDictionary:
    """Load a predicate dictionary file.

    Duplicate aliases across predicates are allowed but recorded in the
    ambiguity set; duplicate predicate ids and empty aliases are rejected
    with their line number.
    """
    path = Path(path)
    entries: dict[str, PredicateEntry] = {}
    alias_owners: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise DictionaryError("expected predicate_id<TAB>label[<TAB>aliases]",
                                      path=path, line=lineno)
            pid = parts[0].strip()
            label = parts[1].strip()
            if not pid or not label:
                raise DictionaryError("empty predicate_id or label",
                                      path=path, line=lineno)
            if pid in entries:
                raise DictionaryError(f"duplicate predicate_id {pid!r}",
                                      path=path, line=lineno)
            aliases: list[str] = []
            if len(parts) > 2 and parts[2].strip():
                for alias in parts[2].split("|"):
                    alias = alias.strip()
                    if not alias:
                        raise DictionaryError("empty alias", path=path, line=lineno)
                    aliases.append(alias)
            entries[pid] = PredicateEntry(predicate_id=pid, label=label,
                                          aliases=tuple(aliases))
            for phrase in entries[pid].phrases():
                alias_owners.setdefault(phrase.lower(), set()).add(pid)
    ambiguous = {
        alias: frozenset(owners)
        for alias, owners in alias_owners.items() if len(owners) > 1
    }
    return PredicateDictionary(entries=entries, ambiguous_aliases=ambiguous)


def load_task_map(path: str | Path) -> dict[str, str]:
    """Load a ``predicate_id<TAB>relation_label`` task map file."""
    path = Path(path)
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise DictionaryError("expected predicate_id<TAB>relation_label",
                                      path=path, line=lineno)
            mapping[parts[0].strip()] = parts[1].strip()
    return mapping


def attach_task_map(dictionary: PredicateDictionary, task: str,
                    source: str | Path) -> None:
    """Register a task map from a file path, or the identity mapping."""
    if source == IDENTITY_TASK_MAP:
        dictionary.register_task_map(task, IDENTITY_TASK_MAP)
    else:
        dictionary.register_task_map(task, load_task_map(source))


def link_relation_phrases(tokens: list[str],
                          dictionary: PredicateDictionary) -> list[RelationLink]:
    """Link relation phrases in a token sequence to predicates.

    Matching is case-insensitive over contiguous, whitespace-joined token
    runs. Overlapping matches resolve longest-first with leftmost start as
    the tie-break; an alias shared by several predicates yields one link
    per predicate on the same span, leaving disambiguation to the ranking
    stage. Output is sorted by span start. Deterministic regardless of
    dictionary insertion order.
    """
    if not tokens:
        raise ValueError("tokens must be non-empty")
    index = dictionary.phrase_index()
    if not index:
        return []
    max_len = max(len(key) for key in index)
    lowered = [t.lower() for t in tokens]

    matches: list[tuple[int, int]] = []  # (start, end) with at least one phrase hit
    for start in range(len(tokens)):
        for length in range(1, min(max_len, len(tokens) - start) + 1):
            if tuple(lowered[start:start + length]) in index:
                matches.append((start, start + length))

    # Longest-match-wins, leftmost tie-break; accepted spans never overlap.
    matches.sort(key=lambda m: (-(m[1] - m[0]), m[0]))
    accepted: list[tuple[int, int]] = []
    for start, end in matches:
        if all(end <= a_start or a_end <= start for a_start, a_end in accepted):
            accepted.append((start, end))

    links: list[RelationLink] = []
    for start, end in sorted(accepted):
        key = tuple(lowered[start:end])
        for pid, phrase in index[key]:
            links.append(RelationLink(span=TokenSpan(start, end),
                                      predicate_id=pid, matched_alias=phrase))
    return links


def predicate_to_task_relation(predicate_id: str, task: str,
                               dictionary: PredicateDictionary) -> Optional[str]:
    """Map a predicate into a task's relation category, or None when outside it."""
    if task not in dictionary.task_maps:
        raise DictionaryError(f"unknown task {task!r}; registered: "
                              f"{sorted(dictionary.task_maps)}")
    mapping = dictionary.task_maps[task]
    if mapping == IDENTITY_TASK_MAP:
        return predicate_id if predicate_id in dictionary.entries else None
    return mapping.get(predicate_id)
