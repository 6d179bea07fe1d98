"""Question answering over a KB by relation prediction.

Questions are linked to KB entities with exact string matching over an alias
table, candidates are sorted rarest-training-frequency first (longer matched
alias breaks ties, then entity id), and a bag-of-words relation classifier
picks the edge to follow.  Answering walks relations in descending predicted
probability and returns the objects of the first (candidate entity, relation)
pair present in the KB, falling back to the next relation when none matches.
"""

from __future__ import annotations

import logging
import re
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from kgebow.data import Example, QAPair, TripleStore, Vocab
from kgebow.model import EmbeddingModel, average_input, score_all
from kgebow.report import EvalReport

log = logging.getLogger(__name__)

MAX_SPAN_TOKENS = 10
DEFAULT_BIGRAM_BUCKETS = 2_000_000

_NORMALIZE_RE = re.compile(r"[\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, punctuation to spaces, collapsed whitespace."""
    return _NORMALIZE_RE.sub(" ", text.lower()).split()


def normalize(text: str) -> str:
    return " ".join(tokenize(text))


@dataclass
class AliasTable:
    """Normalized surface string -> entity ids, plus linking statistics.

    ``frequency`` counts how often an entity appeared as the linked subject
    of a training pair; rarer entities are preferred by the linker.
    """

    aliases: dict[str, tuple[int, ...]] = field(default_factory=dict)
    frequency: dict[int, int] = field(default_factory=dict)
    skipped: int = 0
    max_alias_tokens: int = 0

    def lookup(self, surface: str) -> tuple[int, ...]:
        return self.aliases.get(normalize(surface), ())

    def resolve_answers(self, answers: Iterable[str]) -> frozenset[int]:
        ids: set[int] = set()
        for a in answers:
            ids.update(self.lookup(a))
        return frozenset(ids)


def build_alias_table(
    names_path: str | Path,
    store: TripleStore,
    training_pairs: Sequence[QAPair] = (),
) -> AliasTable:
    """Load `entity<TAB>surface` lines and count training subject links.

    Entities missing from the store's vocabulary are skipped (they cannot
    take part in any stored triple); malformed lines are skipped and counted.
    """
    raw: dict[str, set[int]] = {}
    skipped = 0
    max_tokens = 0
    with open(names_path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0] or not cols[1].strip():
                skipped += 1
                continue
            entity_id = store.entity_vocab.get(cols[0])
            if entity_id is None:
                skipped += 1
                continue
            alias = normalize(cols[1])
            if not alias:
                skipped += 1
                continue
            raw.setdefault(alias, set()).add(entity_id)
            max_tokens = max(max_tokens, len(alias.split()))
    if skipped:
        log.warning("alias table: skipped %d unusable lines", skipped)
    if not raw:
        log.warning("alias table is empty: no entities loaded")

    frequency: dict[int, int] = {}
    for pair in training_pairs:
        if pair.subject is None:
            continue
        entity_id = store.entity_vocab.get(pair.subject)
        if entity_id is not None:
            frequency[entity_id] = frequency.get(entity_id, 0) + 1

    return AliasTable(
        aliases={k: tuple(sorted(v)) for k, v in raw.items()},
        frequency=frequency,
        skipped=skipped,
        max_alias_tokens=min(max_tokens, MAX_SPAN_TOKENS),
    )


def link_entities(question: str, table: AliasTable) -> list[int]:
    """Candidate entities for all matching token spans, rarest first.

    Sort key: ascending training frequency, then descending matched-alias
    character length, then ascending entity id.  An entity matched through
    several aliases keeps its longest match.
    """
    tokens = tokenize(question)
    best_len: dict[int, int] = {}
    span_cap = min(MAX_SPAN_TOKENS, table.max_alias_tokens)
    for i in range(len(tokens)):
        for j in range(i + 1, min(i + span_cap, len(tokens)) + 1):
            span = " ".join(tokens[i:j])
            for entity_id in table.aliases.get(span, ()):
                if len(span) > best_len.get(entity_id, -1):
                    best_len[entity_id] = len(span)
    return sorted(
        best_len,
        key=lambda e: (table.frequency.get(e, 0), -best_len[e], e),
    )


class QuestionFeatures(NamedTuple):
    token_ids: tuple[int, ...]


def bigram_bucket(first: str, second: str, bucket_count: int) -> int:
    """Deterministic hash bucket for a consecutive token pair."""
    return zlib.crc32(f"{first} {second}".encode()) % bucket_count


def featurize_question(
    question: str, words: Vocab, bucket_count: int = 0
) -> QuestionFeatures:
    """Unigram word ids plus hashed bigram ids above the word vocabulary.

    Out-of-vocabulary words contribute no unigram but still take part in
    bigrams (the hash is over the strings).  Empty output is allowed.
    """
    tokens = tokenize(question)
    ids = [words.get(t) for t in tokens]
    features = [i for i in ids if i is not None]
    if bucket_count > 0:
        base = len(words)
        for a, b in zip(tokens, tokens[1:]):
            features.append(base + bigram_bucket(a, b, bucket_count))
    return QuestionFeatures(tuple(features))


def build_question_vocab(pairs: Iterable[QAPair]) -> Vocab:
    """Word vocabulary over training questions, first-appearance order."""
    vocab = Vocab()
    for pair in pairs:
        for token in tokenize(pair.question):
            vocab.add(token)
    return vocab


def make_relation_training_set(
    pairs: Sequence[QAPair],
    words: Vocab,
    relation_vocab: Vocab,
    bucket_count: int = 0,
) -> tuple[list[Example], int]:
    """One example per pair: question features, gold relation label.

    Pairs without a gold relation, with a relation unknown to the KB, or
    with no extractable features are skipped; the count comes back too.
    """
    examples = []
    skipped = 0
    for pair in pairs:
        label = (
            relation_vocab.get(pair.relation) if pair.relation is not None else None
        )
        features = featurize_question(pair.question, words, bucket_count)
        if label is None or not features.token_ids:
            skipped += 1
            continue
        examples.append(Example(features.token_ids, label))
    if skipped:
        log.warning("relation training set: skipped %d of %d pairs", skipped, len(pairs))
    return examples, skipped


def attach_gold_relations(
    pairs: Sequence[QAPair], kb: TripleStore, table: AliasTable
) -> tuple[list[QAPair], int]:
    """Derive supporting (subject, relation) labels by matching the KB.

    For datasets that ship only (question, answers): the first linked
    question entity connected to any answer entity supplies the subject,
    and every relation joining them yields one labelled pair.  Pairs with
    no KB match are dropped (count returned).
    """
    out = []
    unmatched = 0
    for pair in pairs:
        answer_ids = table.resolve_answers(pair.answers)
        labelled = False
        if answer_ids:
            for entity in link_entities(pair.question, table):
                rels = [
                    r
                    for r in sorted(kb.relations_of(entity))
                    if any(o in answer_ids for o in kb.objects_for(entity, r))
                ]
                if rels:
                    subject = kb.entity_vocab.string(entity)
                    for r in rels:
                        out.append(
                            QAPair(
                                question=pair.question,
                                answers=pair.answers,
                                subject=subject,
                                relation=kb.relation_vocab.string(r),
                            )
                        )
                    labelled = True
                    break
        if not labelled:
            unmatched += 1
    if unmatched:
        log.warning(
            "gold-relation matching: %d of %d pairs had no KB support",
            unmatched,
            len(pairs),
        )
    return out, unmatched


class QAAnswer(NamedTuple):
    relation: int
    subject: int
    answers: frozenset[int]


def answer_question(
    question: str,
    model: EmbeddingModel,
    kb: TripleStore,
    table: AliasTable,
    words: Vocab,
    bucket_count: int = 0,
    relation_ids: Sequence[int] | None = None,
) -> QAAnswer | None:
    """Most likely relation with a valid KB pair, or None.

    Relations are tried in descending predicted probability; for each one
    the linked candidates are scanned in linker order and the first entity
    with a stored (entity, relation, *) triple determines the answer set.
    ``relation_ids`` maps classifier classes to KB relation ids when the
    model was trained against a different vocabulary snapshot.
    """
    candidates = link_entities(question, table)
    if not candidates:
        return None
    features = featurize_question(question, words, bucket_count)
    if features.token_ids:
        scores = score_all(average_input(features.token_ids, model), model)
    else:
        scores = np.zeros(model.output_class_count)  # uniform fallback
    for cls in np.argsort(-scores, kind="stable"):
        relation = relation_ids[cls] if relation_ids is not None else int(cls)
        if relation < 0 or relation >= kb.num_relations:
            continue
        for entity in candidates:
            if relation in kb.relations_of(entity):
                return QAAnswer(
                    relation,
                    entity,
                    frozenset(kb.objects_for(entity, relation)),
                )
    return None


ACCURACY = "accuracy"  # gold subject and relation both reproduced
HITS_AT_1 = "hits@1"  # some predicted answer entity is a gold answer


def evaluate_qa(
    pairs: Sequence[QAPair],
    model: EmbeddingModel,
    kb: TripleStore,
    table: AliasTable,
    words: Vocab,
    bucket_count: int = 0,
    metric: str = ACCURACY,
    relation_ids: Sequence[int] | None = None,
    dump_path: str | Path | None = None,
) -> EvalReport:
    """Accuracy (subject+relation) or hits@1 (answer overlap) over pairs."""
    if len(pairs) == 0:
        raise ValueError("empty test set")
    if metric not in (ACCURACY, HITS_AT_1):
        raise ValueError(f"unknown metric: {metric!r}")
    t_start = time.perf_counter()
    correct = 0
    unresolved_gold = 0
    dump_lines: list[str] | None = [] if dump_path is not None else None
    for pair in pairs:
        answer = answer_question(
            pair.question, model, kb, table, words, bucket_count, relation_ids
        )
        if metric == ACCURACY:
            gold_subject = (
                kb.entity_vocab.get(pair.subject) if pair.subject else None
            )
            gold_relation = (
                kb.relation_vocab.get(pair.relation) if pair.relation else None
            )
            ok = (
                answer is not None
                and gold_subject is not None
                and gold_relation is not None
                and answer.subject == gold_subject
                and answer.relation == gold_relation
            )
        else:
            gold_ids = table.resolve_answers(pair.answers)
            if not gold_ids:
                unresolved_gold += 1
            ok = answer is not None and bool(answer.answers & gold_ids)
        correct += ok
        if dump_lines is not None:
            if answer is None:
                dump_lines.append(f"{pair.question}\tNO_ANSWER\t\t")
            else:
                names = ",".join(
                    kb.entity_vocab.string(a) for a in sorted(answer.answers)
                )
                dump_lines.append(
                    f"{pair.question}\t{kb.relation_vocab.string(answer.relation)}"
                    f"\t{kb.entity_vocab.string(answer.subject)}\t{names}"
                )
    if unresolved_gold:
        log.warning(
            "%d gold answer sets resolved to no KB entity", unresolved_gold
        )
    if dump_lines is not None:
        Path(dump_path).write_text("\n".join(dump_lines) + "\n", encoding="utf-8")
    return EvalReport(
        metric=metric,
        mode="-",
        value=100.0 * correct / len(pairs),
        num_queries=len(pairs),
        seconds=time.perf_counter() - t_start,
    )


def relation_top1_accuracy(
    pairs: Sequence[QAPair],
    model: EmbeddingModel,
    relation_vocab: Vocab,
    words: Vocab,
    bucket_count: int = 0,
) -> float:
    """Percent of pairs whose gold relation is the classifier's argmax."""
    scored = 0
    correct = 0
    for pair in pairs:
        if pair.relation is None:
            continue
        gold = relation_vocab.get(pair.relation)
        if gold is None:
            continue
        scored += 1
        features = featurize_question(pair.question, words, bucket_count)
        if not features.token_ids:
            continue
        scores = score_all(average_input(features.token_ids, model), model)
        if int(np.argmax(scores)) == gold:
            correct += 1
    return 100.0 * correct / scored if scored else 0.0
