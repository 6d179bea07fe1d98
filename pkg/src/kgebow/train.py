"""Multi-worker asynchronous SGD with a linearly decaying learning rate.

Workers are OS threads sharing the model matrices without locks; the compiled
chunk kernels release the GIL so updates race benignly (token overlap is
sparse).  The only synchronized state is the example-progress counter, bumped
in batches of 64 examples, which drives the learning-rate schedule:

    lr(progress) = lr0 * (1 - examples_done / (epochs * N))

Each worker owns a contiguous shard of the dataset and reshuffles it every
epoch with its own seeded generator; workers meet at a barrier between epochs
so per-epoch loss averages are well defined.  With one thread and a fixed
seed training is bitwise reproducible.
"""

from __future__ import annotations

import sys
import threading
import time
from dataclasses import dataclass, field
from itertools import chain
from typing import Sequence

import numpy as np

from kgebow import _kernels
from kgebow.data import Example
from kgebow.model import (
    NEGATIVE_SAMPLING,
    SOFTMAX,
    EmbeddingModel,
    LossConfig,
    init_model,
)

PROGRESS_BATCH = 64


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 100
    epochs: int = 5
    lr0: float = 0.2
    loss: LossConfig = field(default_factory=LossConfig)
    threads: int = 1
    seed: int = 1

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr0 <= 0:
            raise ValueError("initial learning rate must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


@dataclass
class TrainStats:
    examples_processed: int
    final_avg_loss: float
    wall_time_seconds: float
    epoch_losses: list[float] = field(default_factory=list)


def learning_rate_at(progress: float, lr0: float) -> float:
    """Linearly decayed rate: lr0 at progress 0, exactly 0 at progress 1."""
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress {progress} outside [0, 1]")
    return lr0 * (1.0 - progress)


def pack_examples(
    dataset: Sequence[Example],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten examples into (token_ids, offsets, labels) kernel arrays."""
    n = len(dataset)
    lengths = np.fromiter(
        (len(ex.input_tokens) for ex in dataset), dtype=np.int64, count=n
    )
    if n and lengths.min() == 0:
        raise ValueError("examples must have non-empty input tokens")
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    tokens = np.fromiter(
        chain.from_iterable(ex.input_tokens for ex in dataset),
        dtype=np.int32,
        count=int(offsets[-1]),
    )
    labels = np.fromiter((ex.label for ex in dataset), dtype=np.int32, count=n)
    return tokens, offsets, labels


def _mix64(*parts: int) -> int:
    # splitmix64-style hash of the parts; never returns 0
    mask = (1 << 64) - 1
    z = 0x9E3779B97F4A7C15
    for p in parts:
        z = (z ^ (p & mask)) * 0xBF58476D1CE4E5B9 & mask
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB & mask
        z ^= z >> 31
    return z or 1


def _warm_kernels(kind: str, k: int) -> None:
    # trigger numba compilation before worker threads start
    V = np.zeros((1, 2), dtype=np.float32)
    W = np.zeros((2 if kind == SOFTMAX else k + 2, 2), dtype=np.float32)
    tokens = np.zeros(1, dtype=np.int32)
    offsets = np.array([0, 1], dtype=np.int64)
    labels = np.zeros(1, dtype=np.int32)
    order = np.zeros(1, dtype=np.int64)
    hid = np.zeros(2, dtype=np.float32)
    ghid = np.zeros(2, dtype=np.float32)
    if kind == SOFTMAX:
        scores = np.zeros(W.shape[0], dtype=np.float32)
        _kernels.softmax_chunk(
            V, W, tokens, offsets, labels, order, 0, 1, 0.0, hid, ghid, scores
        )
    else:
        state = np.array([1], dtype=np.uint64)
        classes = np.zeros(k + 1, dtype=np.int64)
        coefs = np.zeros(k + 1, dtype=np.float32)
        _kernels.negative_chunk(
            V, W, tokens, offsets, labels, order, 0, 1, 0.0, k,
            state, classes, coefs, hid, ghid,
        )


def train(
    dataset: Sequence[Example],
    config: TrainConfig,
    input_vocab_size: int,
    output_class_count: int,
    verbose: bool = True,
) -> tuple[EmbeddingModel, TrainStats]:
    """Train a fresh model over the dataset; returns (model, stats)."""
    model = init_model(
        input_vocab_size, output_class_count, config.dim, config.seed
    )
    if config.epochs == 0:
        return model, TrainStats(0, float("nan"), 0.0)
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    kind = config.loss.kind
    k = config.loss.negatives
    if kind == NEGATIVE_SAMPLING and k >= output_class_count:
        raise ValueError("need fewer negatives than output classes")

    tokens, offsets, labels = pack_examples(dataset)
    if tokens.min() < 0 or tokens.max() >= input_vocab_size:
        raise IndexError("input token id out of range")
    if labels.min() < 0 or labels.max() >= output_class_count:
        raise IndexError("label out of range")

    n = len(dataset)
    threads = min(config.threads, n)
    total = config.epochs * n
    V = model.input_matrix
    W = model.output_matrix
    bounds = [i * n // threads for i in range(threads + 1)]

    _warm_kernels(kind, k)

    progress = [0]
    progress_lock = threading.Lock()
    loss_sums = np.zeros(threads, dtype=np.float64)
    loss_counts = np.zeros(threads, dtype=np.int64)
    epoch_losses: list[float] = []
    epoch_state = {"index": 0, "t0": time.perf_counter()}
    failures: list[BaseException] = []

    def end_of_epoch():
        now = time.perf_counter()
        avg = float(loss_sums.sum() / max(loss_counts.sum(), 1))
        epoch_losses.append(avg)
        if verbose:
            lr_now = config.lr0 * (1.0 - progress[0] / total)
            rate = loss_counts.sum() / max(now - epoch_state["t0"], 1e-9)
            print(
                f"epoch {epoch_state['index'] + 1} loss {avg:.6f} "
                f"lr {lr_now:.6f} examples/sec {rate:.0f}",
                file=sys.stderr,
                flush=True,
            )
        loss_sums[:] = 0.0
        loss_counts[:] = 0
        epoch_state["index"] += 1
        epoch_state["t0"] = now

    barrier = threading.Barrier(threads, action=end_of_epoch)

    def worker(w: int) -> None:
        lo, hi = bounds[w], bounds[w + 1]
        shard = np.arange(lo, hi, dtype=np.int64)
        shuffler = np.random.default_rng((config.seed, w))
        rng_state = np.array([_mix64(config.seed, w)], dtype=np.uint64)
        hid = np.empty(config.dim, dtype=np.float32)
        ghid = np.empty(config.dim, dtype=np.float32)
        scores = np.empty(output_class_count, dtype=np.float32)
        classes = np.empty(k + 1, dtype=np.int64)
        coefs = np.empty(k + 1, dtype=np.float32)
        try:
            for _ in range(config.epochs):
                shuffler.shuffle(shard)
                pos = 0
                size = hi - lo
                while pos < size:
                    stop = min(pos + PROGRESS_BATCH, size)
                    batch = stop - pos
                    with progress_lock:
                        done = progress[0]
                        progress[0] = done + batch
                    lr = config.lr0 * (1.0 - done / total)
                    if kind == SOFTMAX:
                        ls = _kernels.softmax_chunk(
                            V, W, tokens, offsets, labels, shard,
                            pos, stop, lr, hid, ghid, scores,
                        )
                    else:
                        ls = _kernels.negative_chunk(
                            V, W, tokens, offsets, labels, shard,
                            pos, stop, lr, k, rng_state, classes, coefs,
                            hid, ghid,
                        )
                    loss_sums[w] += ls
                    loss_counts[w] += batch
                    pos = stop
                barrier.wait()
        except threading.BrokenBarrierError:
            return
        except BaseException as exc:  # surface worker failures to the caller
            failures.append(exc)
            barrier.abort()

    t_start = time.perf_counter()
    pool = [
        threading.Thread(target=worker, args=(w,), daemon=True)
        for w in range(threads)
    ]
    for t in pool:
        t.start()
    for t in pool:
        t.join()
    if failures:
        raise failures[0]
    wall = time.perf_counter() - t_start

    stats = TrainStats(
        examples_processed=progress[0],
        final_avg_loss=epoch_losses[-1],
        wall_time_seconds=wall,
        epoch_losses=epoch_losses,
    )
    return model, stats
