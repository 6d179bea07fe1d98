"""Shared data containers: vocabularies, triples, examples and QA pairs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

Triple = tuple[int, int, int]


class Vocab:
    """Append-only string<->id map; ids follow first-appearance order."""

    def __init__(self, strings: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._strings: list[str] = []
        for s in strings:
            self.add(s)

    def add(self, s: str) -> int:
        i = self._ids.get(s)
        if i is None:
            i = len(self._strings)
            self._ids[s] = i
            self._strings.append(s)
        return i

    def id(self, s: str) -> int:
        return self._ids[s]

    def get(self, s: str, default=None):
        return self._ids.get(s, default)

    def string(self, i: int) -> str:
        return self._strings[i]

    @property
    def strings(self) -> list[str]:
        return self._strings

    def __len__(self) -> int:
        return len(self._strings)

    def __contains__(self, s: str) -> bool:
        return s in self._ids

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._strings == other._strings


class Example(NamedTuple):
    """One training instance: input token ids and a class label."""

    input_tokens: tuple[int, ...]
    label: int


@dataclass
class TripleStore:
    """Subject-relation-object triples with shared entity/relation vocabularies.

    ``known_index`` holds every triple the store was built from and is what
    filtered ranking uses to discard competing true completions.
    """

    triples: list[Triple]
    entity_vocab: Vocab
    relation_vocab: Vocab
    known_index: set[Triple] = field(default_factory=set)
    _pair_objects: dict[tuple[int, int], tuple[int, ...]] | None = field(
        default=None, repr=False, compare=False
    )
    _subject_relations: dict[int, frozenset[int]] | None = field(
        default=None, repr=False, compare=False
    )

    @property
    def num_entities(self) -> int:
        return len(self.entity_vocab)

    @property
    def num_relations(self) -> int:
        return len(self.relation_vocab)

    def __len__(self) -> int:
        return len(self.triples)

    def _build_adjacency(self) -> None:
        pair_objects: dict[tuple[int, int], list[int]] = {}
        subject_relations: dict[int, set[int]] = {}
        for s, r, o in self.triples:
            pair_objects.setdefault((s, r), []).append(o)
            subject_relations.setdefault(s, set()).add(r)
        self._pair_objects = {k: tuple(v) for k, v in pair_objects.items()}
        self._subject_relations = {
            k: frozenset(v) for k, v in subject_relations.items()
        }

    def objects_for(self, subject: int, relation: int) -> tuple[int, ...]:
        """All objects o with (subject, relation, o) in the store."""
        if self._pair_objects is None:
            self._build_adjacency()
        return self._pair_objects.get((subject, relation), ())

    def relations_of(self, subject: int) -> frozenset[int]:
        """Relations the entity participates in as a subject."""
        if self._subject_relations is None:
            self._build_adjacency()
        return self._subject_relations.get(subject, frozenset())


@dataclass(frozen=True)
class QAPair:
    """A question with its gold answers, kept as raw surface strings.

    ``subject``/``relation`` carry the supporting triple when the dataset
    provides one (SimpleQuestions does, WikiMovies does not).
    """

    question: str
    answers: tuple[str, ...] = ()
    subject: str | None = None
    relation: str | None = None
