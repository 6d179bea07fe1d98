"""Benchmark file parsers and binary model persistence.

All text formats are UTF-8 and tab-separated; ids are assigned in
first-appearance order so reparsing an identical file reproduces the same
vocabulary.  The binary model format stores both vocabularies and both
matrices (little-endian float32, row-major) and round-trips bitwise.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from kgebow.data import QAPair, TripleStore, Vocab
from kgebow.model import EmbeddingModel

log = logging.getLogger(__name__)

MAGIC = b"KGBW"
FORMAT_VERSION = 1
TASKS = ("entity-prediction", "relation-prediction", "qa-relation")


class ParseError(ValueError):
    """A malformed line in an input file, with its location."""


class ModelFileError(Exception):
    """Base for unreadable model files."""


class ModelMagicError(ModelFileError):
    pass


class ModelVersionError(ModelFileError):
    pass


class ModelTruncatedError(ModelFileError):
    pass


def parse_triples(
    paths: str | Path | Sequence[str | Path],
    vocab_from: TripleStore | None = None,
) -> TripleStore:
    """Read `subject<TAB>relation<TAB>object` lines into a TripleStore.

    A list of paths is concatenated into one store over a single vocabulary
    pass (the train+valid regime).  ``vocab_from`` shares and extends an
    existing store's vocabularies so id spaces stay aligned across splits.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    if vocab_from is not None:
        entity_vocab = vocab_from.entity_vocab
        relation_vocab = vocab_from.relation_vocab
    else:
        entity_vocab = Vocab()
        relation_vocab = Vocab()
    triples = []
    for path in paths:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cols = line.split("\t")
                if len(cols) != 3:
                    raise ParseError(
                        f"{path}:{lineno}: expected 3 tab-separated columns, "
                        f"got {len(cols)}"
                    )
                triples.append(
                    (
                        entity_vocab.add(cols[0]),
                        relation_vocab.add(cols[1]),
                        entity_vocab.add(cols[2]),
                    )
                )
    if not triples:
        raise ValueError(f"no triples found in {', '.join(map(str, paths))}")
    return TripleStore(
        triples=triples,
        entity_vocab=entity_vocab,
        relation_vocab=relation_vocab,
        known_index=set(triples),
    )


def parse_simplequestions(path: str | Path) -> list[QAPair]:
    """`subject<TAB>relation<TAB>object<TAB>question` lines to QA pairs."""
    pairs = []
    skipped = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 4 or not all(cols):
                skipped += 1
                continue
            pairs.append(
                QAPair(
                    question=cols[3],
                    answers=(cols[2],),
                    subject=cols[0],
                    relation=cols[1],
                )
            )
    if skipped:
        log.warning("%s: skipped %d malformed lines", path, skipped)
    if not pairs:
        log.warning("%s: no question-answer pairs parsed", path)
    return pairs


def parse_wikimovies(path: str | Path) -> list[QAPair]:
    """Numbered `<n> question<TAB>a,b,c` lines to QA pairs.

    Answers stay as raw strings; they are resolved against the alias table
    at evaluation time.
    """
    pairs = []
    skipped = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            head, sep, answer_col = line.partition("\t")
            number, _, question = head.partition(" ")
            answers = tuple(
                a.strip() for a in answer_col.split(",") if a.strip()
            )
            if not sep or not number.isdigit() or not question.strip() or not answers:
                skipped += 1
                continue
            pairs.append(QAPair(question=question, answers=answers))
    if skipped:
        log.warning("%s: skipped %d malformed lines", path, skipped)
    if not pairs:
        log.warning("%s: no question-answer pairs parsed", path)
    return pairs


@dataclass
class ModelFile:
    """A persisted model: task tag, vocabularies in id order, matrices.

    ``input_strings`` may be shorter than the input matrix when trailing
    rows are hashed n-gram buckets (they have no string form).
    """

    task: str
    model: EmbeddingModel
    input_strings: tuple[str, ...]
    output_strings: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def bucket_count(self) -> int:
        return self.model.input_vocab_size - len(self.input_strings)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task tag: {self.task!r}")
        if len(self.output_strings) != self.model.output_class_count:
            raise ValueError("output vocabulary size != output matrix rows")
        if len(self.input_strings) > self.model.input_vocab_size:
            raise ValueError("input vocabulary larger than input matrix")


def _write_string(f, s: str) -> None:
    data = s.encode("utf-8")
    f.write(struct.pack("<I", len(data)))
    f.write(data)


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ModelTruncatedError(
            f"unexpected end of file (wanted {n} bytes, got {len(data)})"
        )
    return data


def _read_string(f) -> str:
    (n,) = struct.unpack("<I", _read_exact(f, 4))
    return _read_exact(f, n).decode("utf-8")


def save_model(model_file: ModelFile, path: str | Path) -> None:
    """Write the binary model format; matrices must be float32."""
    m = model_file.model
    if m.input_matrix.dtype != np.float32 or m.output_matrix.dtype != np.float32:
        raise ValueError("model files store float32 matrices")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(
            struct.pack(
                "<IBIQQq",
                FORMAT_VERSION,
                TASKS.index(model_file.task),
                m.dim,
                m.input_vocab_size,
                m.output_class_count,
                m.seed,
            )
        )
        meta = json.dumps(model_file.metadata).encode("utf-8")
        f.write(struct.pack("<I", len(meta)))
        f.write(meta)
        f.write(struct.pack("<Q", len(model_file.input_strings)))
        for s in model_file.input_strings:
            _write_string(f, s)
        f.write(struct.pack("<Q", len(model_file.output_strings)))
        for s in model_file.output_strings:
            _write_string(f, s)
        f.write(np.ascontiguousarray(m.input_matrix, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(m.output_matrix, dtype="<f4").tobytes())


def load_model(path: str | Path) -> ModelFile:
    """Read a model file back; validates magic, version and sizes."""
    with open(path, "rb") as f:
        if _read_exact(f, 4) != MAGIC:
            raise ModelMagicError(f"{path} is not a model file")
        (version,) = struct.unpack("<I", _read_exact(f, 4))
        if version != FORMAT_VERSION:
            raise ModelVersionError(
                f"{path}: format version {version}, expected {FORMAT_VERSION}"
            )
        task_idx, dim, in_rows, out_rows, seed = struct.unpack(
            "<BIQQq", _read_exact(f, 1 + 4 + 8 + 8 + 8)
        )
        if task_idx >= len(TASKS):
            raise ModelFileError(f"{path}: unknown task tag {task_idx}")
        (meta_len,) = struct.unpack("<I", _read_exact(f, 4))
        metadata = json.loads(_read_exact(f, meta_len).decode("utf-8"))
        (n_in,) = struct.unpack("<Q", _read_exact(f, 8))
        input_strings = tuple(_read_string(f) for _ in range(n_in))
        (n_out,) = struct.unpack("<Q", _read_exact(f, 8))
        output_strings = tuple(_read_string(f) for _ in range(n_out))
        if n_in > in_rows or n_out != out_rows:
            raise ModelFileError(f"{path}: vocabulary/matrix size mismatch")
        input_matrix = np.frombuffer(
            _read_exact(f, in_rows * dim * 4), dtype="<f4"
        ).reshape(in_rows, dim).copy()
        output_matrix = np.frombuffer(
            _read_exact(f, out_rows * dim * 4), dtype="<f4"
        ).reshape(out_rows, dim).copy()
    return ModelFile(
        task=TASKS[task_idx],
        model=EmbeddingModel(input_matrix, output_matrix, seed),
        input_strings=input_strings,
        output_strings=output_strings,
        metadata=metadata,
    )
