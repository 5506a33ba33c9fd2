"""Outer rate-1/2, K=7 convolutional code with soft-decision Viterbi decoding.

Generators are 133 and 171 (octal).  The MSB of each generator taps the current
input bit; encoder output alternates ``A0 B0 A1 B1 ...``.  Every block is
flushed with six zero bits so the trellis ends in state zero.

LLR sign convention: positive favors bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthOdd, NonpositiveVariance, ShapeMismatch

CONSTRAINT_LENGTH = 7
GENERATORS = (0o133, 0o171)
MEMORY = CONSTRAINT_LENGTH - 1
N_STATES = 1 << MEMORY


@dataclass(frozen=True)
class ConvCode:
    constraint_length: int = CONSTRAINT_LENGTH
    generators: tuple[int, int] = GENERATORS
    rate: float = 0.5
    tail_bits: int = MEMORY


def _parity(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    p = np.zeros_like(x)
    while np.any(x):
        p ^= x & 1
        x = x >> 1
    return p


# State holds the previous six inputs, most recent in bit 5.
_STATE = np.arange(N_STATES)
_REG = {u: (u << MEMORY) | _STATE for u in (0, 1)}
_NEXT = {u: _REG[u] >> 1 for u in (0, 1)}
_OUT = {u: np.stack([_parity(_REG[u] & g) for g in GENERATORS], axis=-1) for u in (0, 1)}

# Predecessors of every next state s': u = s' >> 5, previous s = ((s' & 31) << 1) | b.
_PREV = np.stack([((_STATE & 31) << 1) | b for b in (0, 1)], axis=-1)  # (64, 2)
_INPUT = _STATE >> (MEMORY - 1)
_BRANCH_OUT = np.stack(
    [_OUT[1][_PREV[:, b]] * _INPUT[:, None] + _OUT[0][_PREV[:, b]] * (1 - _INPUT[:, None]) for b in (0, 1)],
    axis=1,
)  # (64, 2 predecessors, 2 output bits)
_SIGNS = 1 - 2 * _BRANCH_OUT.astype(float)


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Encode with zero-tail flush; output length ``2 (len + 6)``.

    Leading axes are treated as independent blocks.
    """
    bits = np.asarray(bits, dtype=np.int64)
    padded = np.concatenate([bits, np.zeros(bits.shape[:-1] + (MEMORY,), np.int64)], axis=-1)
    L = padded.shape[-1]
    # register value at time t: sum_{i=0..6} u[t-i] << (6 - i)
    reg = np.zeros(padded.shape, np.int64)
    for i in range(CONSTRAINT_LENGTH):
        shifted = np.zeros_like(padded)
        shifted[..., i:] = padded[..., : L - i]
        reg |= shifted << (MEMORY - i)
    out = np.stack([_parity(reg & g) for g in GENERATORS], axis=-1)
    return out.reshape(*bits.shape[:-1], 2 * L).astype(np.int8)


def viterbi_decode(llr: np.ndarray) -> np.ndarray:
    """Maximum-likelihood information bits for zero-tail terminated blocks.

    ``llr`` has the coded bits on its last axis (even length ``2 (k + 6)``);
    returns ``k`` bits per block.
    """
    llr = np.asarray(llr, dtype=float)
    if llr.shape[-1] % 2:
        raise LengthOdd(f"LLR sequence length {llr.shape[-1]} is odd")
    lead = llr.shape[:-1]
    steps = llr.shape[-1] // 2
    if steps < MEMORY:
        raise LengthOdd(f"block of {llr.shape[-1]} coded bits is shorter than the tail")
    L = llr.reshape(-1, steps, 2)
    B = L.shape[0]
    metric = np.full((B, N_STATES), -np.inf)
    metric[:, 0] = 0.0
    decisions = np.empty((steps, B, N_STATES), dtype=np.int8)
    for t in range(steps):
        # correlation metric of every (next state, predecessor) branch
        bm = 0.5 * np.einsum("spk,bk->bsp", _SIGNS, L[:, t, :])
        cand = metric[:, _PREV] + bm  # (B, 64, 2)
        choice = np.argmax(cand, axis=-1).astype(np.int8)
        decisions[t] = choice
        metric = np.take_along_axis(cand, choice[..., None].astype(np.intp), axis=-1)[..., 0]
    state = np.zeros(B, dtype=np.int64)
    bits = np.empty((B, steps), dtype=np.int8)
    rows = np.arange(B)
    for t in range(steps - 1, -1, -1):
        bits[:, t] = state >> (MEMORY - 1)
        state = _PREV[state, decisions[t, rows, state]]
    return bits[:, : steps - MEMORY].reshape(*lead, steps - MEMORY)


# --------------------------------------------------------------------------
# interleaving


def interleaver_permutation(n_bits: int, columns: int = 16) -> np.ndarray:
    """Row-column block interleaver: write row-wise, read column-wise.

    ``out = bits[perm]``.
    """
    if columns <= 0 or n_bits % columns:
        raise ShapeMismatch(f"{n_bits} bits do not fill a block with {columns} columns")
    rows = n_bits // columns
    return np.arange(n_bits).reshape(rows, columns).T.ravel()


def interleave(bits: np.ndarray, columns: int = 16) -> np.ndarray:
    bits = np.asarray(bits)
    return bits[..., interleaver_permutation(bits.shape[-1], columns)]


def deinterleave(bits: np.ndarray, columns: int = 16) -> np.ndarray:
    bits = np.asarray(bits)
    perm = interleaver_permutation(bits.shape[-1], columns)
    out = np.empty_like(bits)
    out[..., perm] = bits
    return out


# --------------------------------------------------------------------------
# soft demapping


@dataclass(frozen=True, eq=False)
class SoftMetrics:
    llr: np.ndarray
    variance_per_bit: np.ndarray


def soft_demap_qpsk(d_hat: np.ndarray, variances: np.ndarray, sigma_d_sq: float = 1.0) -> SoftMetrics:
    """Per-bit LLRs for Gray QPSK given the error variance of every estimate.

    For a symbol component ``x`` with nominal amplitude ``a = sqrt(sigma_d^2/2)``
    and complex error variance ``var``, ``llr = 4 a x / var``.  ``variances``
    broadcasts against ``d_hat``.
    """
    d_hat = np.asarray(d_hat)
    var = np.broadcast_to(np.asarray(variances, float), d_hat.shape)
    if np.any(~(var > 0)):
        raise NonpositiveVariance("error variances must be strictly positive")
    a = np.sqrt(sigma_d_sq / 2)
    llr = np.empty(d_hat.shape + (2,))
    llr[..., 0] = 4 * a * d_hat.real / var
    llr[..., 1] = 4 * a * d_hat.imag / var
    var_bits = np.repeat(var[..., None], 2, axis=-1)
    return SoftMetrics(llr.reshape(*d_hat.shape[:-1], -1), var_bits.reshape(*d_hat.shape[:-1], -1))


def free_distance(max_input_len: int = 12) -> int:
    """Minimum output weight over nonzero inputs up to ``max_input_len`` bits."""
    best = None
    for n in range(1, max_input_len + 1):
        # inputs of length n starting and ending with 1
        if n == 1:
            inputs = np.ones((1, 1), np.int64)
        else:
            mids = (np.arange(1 << (n - 2))[:, None] >> np.arange(n - 2)[::-1]) & 1
            inputs = np.hstack([np.ones((mids.shape[0], 1), np.int64), mids, np.ones((mids.shape[0], 1), np.int64)])
        w = int(conv_encode(inputs).sum(axis=-1).min())
        best = w if best is None else min(best, w)
    return best
