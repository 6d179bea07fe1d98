"""Compiled inner loops for asynchronous SGD.

Both chunk kernels process a slice of the per-worker example order in place
on the shared float32 matrices and release the GIL, so Python threads calling
them run genuinely in parallel (Hogwild-style: no locks around parameter
reads or writes).  Scratch buffers are owned by the calling worker.

Gradient semantics match the reference ops in ``kgebow.model``: all touched
scores are computed before any row is written, then rows are updated with
the exact gradients at the pre-step parameters.
"""

import math

import numpy as np
from numba import njit

F32_1 = np.float32(1.0)


@njit(nogil=True, cache=True, inline="always")
def _rng_next(state):
    # xorshift64*; state must be nonzero
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(0x2545F4914F6CDD1D)


@njit(nogil=True, cache=True, inline="always")
def _sigmoid(x):
    if x >= 0.0:
        z = math.exp(-x)
        return 1.0 / (1.0 + z)
    z = math.exp(x)
    return z / (1.0 + z)


@njit(nogil=True, cache=True, inline="always")
def _softplus(x):
    # log(1 + e^x) without overflow
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(nogil=True, cache=True, inline="always")
def _load_hidden(V, tokens, t0, t1, hidden):
    h = V.shape[1]
    inv = F32_1 / np.float32(t1 - t0)
    for d in range(h):
        hidden[d] = 0.0
    for j in range(t0, t1):
        row = tokens[j]
        for d in range(h):
            hidden[d] += V[row, d]
    for d in range(h):
        hidden[d] *= inv
    return inv


@njit(nogil=True, cache=True, fastmath=True)
def softmax_chunk(V, W, tokens, offsets, labels, order, start, stop, lr, hidden, ghid, scores):
    """Run softmax SGD steps for order[start:stop]; returns summed loss."""
    K = W.shape[0]
    h = W.shape[1]
    lrf = np.float32(lr)
    total = 0.0
    for ii in range(start, stop):
        n = order[ii]
        inv = _load_hidden(V, tokens, offsets[n], offsets[n + 1], hidden)
        mx = np.float32(-3.0e38)
        for c in range(K):
            s = np.float32(0.0)
            for d in range(h):
                s += W[c, d] * hidden[d]
            scores[c] = s
            if s > mx:
                mx = s
        z = np.float32(0.0)
        for c in range(K):
            e = np.exp(scores[c] - mx)
            scores[c] = e
            z += e
        label = labels[n]
        total += -math.log(scores[label] / z)
        invz = F32_1 / z
        for d in range(h):
            ghid[d] = 0.0
        for c in range(K):
            coef = scores[c] * invz
            if c == label:
                coef -= F32_1
            for d in range(h):
                ghid[d] += coef * W[c, d]
            a = lrf * coef
            for d in range(h):
                W[c, d] -= a * hidden[d]
        g = lrf * inv
        t0 = offsets[n]
        t1 = offsets[n + 1]
        for j in range(t0, t1):
            row = tokens[j]
            for d in range(h):
                V[row, d] -= g * ghid[d]
    return total


@njit(nogil=True, cache=True, fastmath=True)
def negative_chunk(V, W, tokens, offsets, labels, order, start, stop, lr, k, state, classes, coefs, hidden, ghid):
    """Run one-vs-all SGD steps with k uniform negatives per example."""
    K = W.shape[0]
    h = W.shape[1]
    lrf = np.float32(lr)
    span = np.uint64(K - 1)
    total = 0.0
    for ii in range(start, stop):
        n = order[ii]
        inv = _load_hidden(V, tokens, offsets[n], offsets[n + 1], hidden)
        label = labels[n]
        classes[0] = label
        for i in range(1, k + 1):
            r = np.int64(_rng_next(state) % span)
            if r >= label:
                r += 1
            classes[i] = r
        loss = 0.0
        for i in range(k + 1):
            c = classes[i]
            s = np.float32(0.0)
            for d in range(h):
                s += W[c, d] * hidden[d]
            sf = float(s)
            if i == 0:
                loss += _softplus(-sf)
                coefs[i] = np.float32(_sigmoid(sf) - 1.0)
            else:
                loss += _softplus(sf)
                coefs[i] = np.float32(_sigmoid(sf))
        # accumulate the hidden gradient from all rows before any write,
        # so a class drawn twice still contributes pre-step values
        for d in range(h):
            ghid[d] = 0.0
        for i in range(k + 1):
            c = classes[i]
            coef = coefs[i]
            for d in range(h):
                ghid[d] += coef * W[c, d]
        for i in range(k + 1):
            c = classes[i]
            a = lrf * coefs[i]
            for d in range(h):
                W[c, d] -= a * hidden[d]
        g = lrf * inv
        t0 = offsets[n]
        t1 = offsets[n + 1]
        for j in range(t0, t1):
            row = tokens[j]
            for d in range(h):
                V[row, d] -= g * ghid[d]
        total += loss
    return total
