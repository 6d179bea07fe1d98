"""Knowledge-base completion: directional encodings, ranking and Hit@K.

Entity prediction gives every relation two input tokens (one per prediction
direction) so the same relation can point at either end of a triple; relation
prediction gives every entity two tokens (subject or object slot).  A triple
(e, r, p) then becomes two-token classification examples whose hidden vector
is the mean of the two input rows, making the model score exactly

    s(e, r, p) = 0.5 * <v_e + v_r, w_p>

Ranks count strictly higher-scoring candidates, so the target wins ties.
Filtered mode additionally discards candidates that complete another known
true triple.
"""

from __future__ import annotations

import time
from typing import Iterable, Sequence

import numpy as np

from kgebow.data import Example, Triple, TripleStore
from kgebow.model import EmbeddingModel, average_input, score_all
from kgebow.report import EvalReport

ENTITY_TASK = "entity"
RELATION_TASK = "relation"

_OBJ = "@o"  # saved-token suffix: predicts the object end / entity-as-object
_SUBJ = "@s"

_EVAL_CHUNK = 512


class DirectionalVocab:
    """Token/class id layout for one prediction task.

    entity task:   inputs = [entities..., r@o per relation, r@s per relation],
                   outputs = entities.
    relation task: inputs = [e@s per entity, e@o per entity],
                   outputs = relations.
    """

    def __init__(self, task: str, entities: Sequence[str], relations: Sequence[str]):
        if task not in (ENTITY_TASK, RELATION_TASK):
            raise ValueError(f"unknown task: {task!r}")
        self.task = task
        self.entities = tuple(entities)
        self.relations = tuple(relations)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def input_vocab_size(self) -> int:
        if self.task == ENTITY_TASK:
            return self.num_entities + 2 * self.num_relations
        return 2 * self.num_entities

    @property
    def output_class_count(self) -> int:
        if self.task == ENTITY_TASK:
            return self.num_entities
        return self.num_relations

    # --- token id helpers (entity task) ---
    def predict_object_token(self, relation: int) -> int:
        return self.num_entities + relation

    def predict_subject_token(self, relation: int) -> int:
        return self.num_entities + self.num_relations + relation

    # --- token id helpers (relation task) ---
    def subject_token(self, entity: int) -> int:
        return entity

    def object_token(self, entity: int) -> int:
        return self.num_entities + entity

    def input_token_strings(self) -> list[str]:
        if self.task == ENTITY_TASK:
            return (
                list(self.entities)
                + [r + _OBJ for r in self.relations]
                + [r + _SUBJ for r in self.relations]
            )
        return [e + _SUBJ for e in self.entities] + [
            e + _OBJ for e in self.entities
        ]

    def output_strings(self) -> list[str]:
        if self.task == ENTITY_TASK:
            return list(self.entities)
        return list(self.relations)

    @classmethod
    def from_token_strings(
        cls, task: str, input_strings: Sequence[str], output_strings: Sequence[str]
    ) -> "DirectionalVocab":
        """Rebuild the layout from persisted vocabulary lists."""
        if task == ENTITY_TASK:
            n_e = len(output_strings)
            n_r = (len(input_strings) - n_e) // 2
            relations = [s[: -len(_OBJ)] for s in input_strings[n_e : n_e + n_r]]
            return cls(task, list(output_strings), relations)
        n_e = len(input_strings) // 2
        entities = [s[: -len(_SUBJ)] for s in input_strings[:n_e]]
        return cls(task, entities, list(output_strings))

    def decode_example(self, example: Example) -> tuple[Triple, str]:
        """Recover the originating triple and prediction direction."""
        a, b = sorted(example.input_tokens)
        if self.task == ENTITY_TASK:
            if b < self.num_entities + self.num_relations:
                return (a, b - self.num_entities, example.label), "object"
            rel = b - self.num_entities - self.num_relations
            return (example.label, rel, a), "subject"
        return (a, example.label, b - self.num_entities), "relation"


def build_vocab(store: TripleStore, task: str) -> DirectionalVocab:
    """Directional vocabulary over the store's entities and relations."""
    if len(store) == 0:
        raise ValueError("cannot build a vocabulary from an empty store")
    return DirectionalVocab(
        task, tuple(store.entity_vocab.strings), tuple(store.relation_vocab.strings)
    )


def encode_entity_prediction(
    store: TripleStore, vocab: DirectionalVocab
) -> list[Example]:
    """Two examples per triple: predict the object, then the subject."""
    if vocab.task != ENTITY_TASK:
        raise ValueError("vocabulary was not built for entity prediction")
    examples = []
    for s, r, o in store.triples:
        examples.append(Example((s, vocab.predict_object_token(r)), o))
        examples.append(Example((o, vocab.predict_subject_token(r)), s))
    return examples


def encode_relation_prediction(
    store: TripleStore, vocab: DirectionalVocab
) -> list[Example]:
    """One example per triple: subject and object tokens, relation label."""
    if vocab.task != RELATION_TASK:
        raise ValueError("vocabulary was not built for relation prediction")
    return [
        Example((vocab.subject_token(s), vocab.object_token(o)), r)
        for s, r, o in store.triples
    ]


def rank_target(
    model: EmbeddingModel,
    input_tokens: Sequence[int],
    target: int,
    mode: str = "raw",
    filter_ids: Iterable[int] = (),
) -> int:
    """1-based rank of the target among all candidate classes.

    Only strictly higher scores push the target down.  In filtered mode
    ``filter_ids`` are known true completions for this query; they are
    discarded as competitors (the target itself is never discarded).
    """
    if mode not in ("raw", "filtered"):
        raise ValueError(f"unknown mode: {mode!r}")
    scores = score_all(average_input(input_tokens, model), model)
    target_score = scores[target]
    rank = 1 + int(np.count_nonzero(scores > target_score))
    if mode == "filtered":
        for c in filter_ids:
            if c != target and scores[c] > target_score:
                rank -= 1
    return rank


def _completion_lists(
    known: Iterable[Triple], num_candidates: int
) -> tuple[dict, dict]:
    """known (s,r,o) -> {(s,r): objects}, {(r,o): subjects} as id arrays."""
    objects: dict[tuple[int, int], list[int]] = {}
    subjects: dict[tuple[int, int], list[int]] = {}
    for s, r, o in known:
        if o < num_candidates:
            objects.setdefault((s, r), []).append(o)
        if s < num_candidates:
            subjects.setdefault((r, o), []).append(s)
    return (
        {k: np.asarray(v, dtype=np.int64) for k, v in objects.items()},
        {k: np.asarray(v, dtype=np.int64) for k, v in subjects.items()},
    )


def _ranks_for_queries(
    model: EmbeddingModel,
    token_a: np.ndarray,
    token_b: np.ndarray,
    targets: np.ndarray,
    filter_lists: list[np.ndarray | None],
) -> tuple[np.ndarray, np.ndarray]:
    """(raw ranks, filtered ranks) for two-token queries, batched."""
    V = model.input_matrix
    W = model.output_matrix
    nq = targets.size
    raw = np.empty(nq, dtype=np.int64)
    filtered = np.empty(nq, dtype=np.int64)
    for c0 in range(0, nq, _EVAL_CHUNK):
        c1 = min(c0 + _EVAL_CHUNK, nq)
        hidden = (V[token_a[c0:c1]] + V[token_b[c0:c1]]) * 0.5
        scores = hidden @ W.T
        tgt = scores[np.arange(c1 - c0), targets[c0:c1]]
        greater = np.count_nonzero(scores > tgt[:, None], axis=1)
        raw[c0:c1] = 1 + greater
        for i in range(c0, c1):
            flt = filter_lists[i]
            if flt is None:
                filtered[i] = raw[i]
            else:
                # the target sits in its own filter list but never beats
                # its own score, so no special-casing is needed
                drop = np.count_nonzero(scores[i - c0, flt] > tgt[i - c0])
                filtered[i] = raw[i] - drop
    return raw, filtered


def evaluate_hits(
    model: EmbeddingModel,
    vocab: DirectionalVocab,
    test_triples: Sequence[Triple],
    k: int,
    mode: str = "raw",
    known: Iterable[Triple] | None = None,
) -> EvalReport:
    """Hit@k over both prediction directions of every test triple."""
    if vocab.task != ENTITY_TASK:
        raise ValueError("Hit@K entity ranking needs an entity-task vocabulary")
    if len(test_triples) == 0:
        raise ValueError("empty test set")
    if mode not in ("raw", "filtered"):
        raise ValueError(f"unknown mode: {mode!r}")
    if mode == "filtered" and known is None:
        raise ValueError("filtered mode needs the known-triple index")
    t_start = time.perf_counter()

    n_e = vocab.num_entities
    if mode == "filtered":
        objects, subjects = _completion_lists(known, n_e)
    token_a = []
    token_b = []
    targets = []
    filter_lists: list[np.ndarray | None] = []
    for s, r, o in test_triples:
        token_a.append(s)
        token_b.append(vocab.predict_object_token(r))
        targets.append(o)
        filter_lists.append(objects.get((s, r)) if mode == "filtered" else None)
        token_a.append(o)
        token_b.append(vocab.predict_subject_token(r))
        targets.append(s)
        filter_lists.append(subjects.get((r, o)) if mode == "filtered" else None)

    raw, filtered = _ranks_for_queries(
        model,
        np.asarray(token_a, dtype=np.int64),
        np.asarray(token_b, dtype=np.int64),
        np.asarray(targets, dtype=np.int64),
        filter_lists,
    )
    ranks = filtered if mode == "filtered" else raw
    value = 100.0 * float(np.count_nonzero(ranks <= k)) / ranks.size
    return EvalReport(
        metric=f"hit@{k}",
        mode=mode,
        value=value,
        num_queries=int(ranks.size),
        seconds=time.perf_counter() - t_start,
    )


def evaluate_hit_at_percent(
    model: EmbeddingModel,
    vocab: DirectionalVocab,
    test_triples: Sequence[Triple],
    percent: float,
) -> EvalReport:
    """Hit@K with K = floor(percent% of the class count), one query/triple."""
    if vocab.task != RELATION_TASK:
        raise ValueError("Hit@p%% ranking needs a relation-task vocabulary")
    if not 0.0 < percent <= 100.0:
        raise ValueError("percent must be in (0, 100]")
    if len(test_triples) == 0:
        raise ValueError("empty test set")
    t_start = time.perf_counter()
    k = int(percent * vocab.output_class_count / 100.0)

    token_a = np.asarray([s for s, _, _ in test_triples], dtype=np.int64)
    token_b = np.asarray(
        [vocab.object_token(o) for _, _, o in test_triples], dtype=np.int64
    )
    targets = np.asarray([r for _, r, _ in test_triples], dtype=np.int64)
    raw, _ = _ranks_for_queries(
        model, token_a, token_b, targets, [None] * targets.size
    )
    value = 100.0 * float(np.count_nonzero(raw <= k)) / raw.size
    return EvalReport(
        metric=f"hit@{percent:g}%",
        mode="raw",
        value=value,
        num_queries=int(raw.size),
        seconds=time.perf_counter() - t_start,
    )


def map_store_triples(
    store: TripleStore, vocab: DirectionalVocab
) -> tuple[list[Triple], int]:
    """Re-map a store's triples into the vocabulary's id space by string.

    Triples naming entities or relations the vocabulary has never seen are
    dropped; the skip count comes back with the mapped list.
    """
    ent_ids = {s: i for i, s in enumerate(vocab.entities)}
    rel_ids = {s: i for i, s in enumerate(vocab.relations)}
    mapped = []
    skipped = 0
    for s, r, o in store.triples:
        ms = ent_ids.get(store.entity_vocab.string(s))
        mr = rel_ids.get(store.relation_vocab.string(r))
        mo = ent_ids.get(store.entity_vocab.string(o))
        if ms is None or mr is None or mo is None:
            skipped += 1
        else:
            mapped.append((ms, mr, mo))
    return mapped, skipped
