"""Rate-1/2 convolutional code, random bit interleaver, Gray QAM mapping.

The decoder works on per-coded-bit metric pairs (gamma(bit=0), gamma(bit=1))
supplied by the detector, so any soft metric that is additive over coded
bits can drive it.  Frames are closed with tail zeros, the survivor path is
traced back from the all-zero state.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import heapq

import numpy as np


@dataclass(frozen=True)
class ConvCode:
    """Feedforward rate-1/2 code; generators are octal tap masks."""

    constraint_length: int = 7
    generators: tuple[int, int] = (0o133, 0o171)

    @property
    def n_states(self) -> int:
        return 1 << (self.constraint_length - 1)

    def taps(self, which: int) -> np.ndarray:
        k = self.constraint_length
        gen = self.generators[which]
        return np.array([(gen >> (k - 1 - i)) & 1 for i in range(k)], dtype=np.uint8)


DEFAULT_CODE = ConvCode()


@lru_cache(maxsize=None)
def _tables(code: ConvCode):
    """next_state[s, b], out0[s, b], out1[s, b] plus predecessor gathers."""
    k = code.constraint_length
    n = code.n_states
    states = np.arange(n, dtype=np.int64)
    nxt = np.zeros((n, 2), dtype=np.int64)
    out0 = np.zeros((n, 2), dtype=np.int64)
    out1 = np.zeros((n, 2), dtype=np.int64)
    for b in (0, 1):
        reg = (b << (k - 1)) | states          # current input in the MSB
        nxt[:, b] = reg >> 1
        for which, out in ((0, out0), (1, out1)):
            acc = reg & code.generators[which]
            # popcount parity
            par = np.zeros(n, dtype=np.int64)
            for i in range(k):
                par ^= (acc >> i) & 1
            out[:, b] = par
    # predecessors: state t is reached from 2*(t % (n/2)) and that + 1,
    # consuming input bit t >> (k - 2)
    t = states
    pred0 = 2 * (t & (n // 2 - 1))
    pred1 = pred0 + 1
    bsel = t >> (k - 2)
    return nxt, out0, out1, pred0, pred1, bsel


def conv_encode(bits: np.ndarray, code: ConvCode = DEFAULT_CODE) -> np.ndarray:
    """Encode from the all-zero state; returns 2*len(bits) coded bits.

    Tail bits that flush the register are the caller's responsibility.
    """
    b = np.asarray(bits)
    if b.ndim != 1:
        raise ValueError("bits must be a 1-d array")
    if b.size and not np.isin(b, (0, 1)).all():
        raise ValueError("bits must be 0/1")
    b = b.astype(np.uint8)
    out = np.empty(2 * b.size, dtype=np.uint8)
    for which in (0, 1):
        stream = np.convolve(b, code.taps(which))[: b.size] % 2
        out[which::2] = stream
    return out


def free_distance(code: ConvCode = DEFAULT_CODE) -> int:
    """Minimum Hamming weight over nonzero paths leaving and rejoining state 0."""
    nxt, out0, out1, *_ = _tables(code)
    # forced divergence: input 1 from state 0
    start = nxt[0, 1]
    heap = [(int(out0[0, 1] + out1[0, 1]), int(start))]
    best_merge = np.inf
    seen = {}
    while heap:
        d, s = heapq.heappop(heap)
        if s in seen and seen[s] <= d:
            continue
        seen[s] = d
        for b in (0, 1):
            w = d + int(out0[s, b] + out1[s, b])
            t = int(nxt[s, b])
            if t == 0:
                best_merge = min(best_merge, w)
            elif t not in seen or seen[t] > w:
                heapq.heappush(heap, (w, t))
    return int(best_merge)


def viterbi_decode_batch(metrics: np.ndarray, code: ConvCode = DEFAULT_CODE,
                         n_tail: int = 6) -> np.ndarray:
    """Decode a batch of frames of per-coded-bit metric pairs.

    metrics: (n_frames, 2*T, 2) with metrics[f, k, v] the cost of coded bit
    k taking value v.  Paths start and end in state 0; ties prefer the
    lower predecessor state.  Returns (n_frames, T - n_tail) info bits.
    """
    m = np.asarray(metrics, dtype=float)
    if m.ndim != 3 or m.shape[2] != 2 or m.shape[1] % 2:
        raise ValueError("metrics must be shaped (n_frames, 2*T, 2)")
    n_frames, twot, _ = m.shape
    steps = twot // 2
    if steps <= n_tail:
        raise ValueError("frame shorter than the tail")
    _, out0, out1, pred0, pred1, bsel = _tables(code)
    n = code.n_states

    pm = np.full((n_frames, n), np.inf)
    pm[:, 0] = 0.0
    choice = np.zeros((steps, n_frames, n), dtype=bool)
    for t in range(steps):
        m0 = m[:, 2 * t, :]
        m1 = m[:, 2 * t + 1, :]
        bm = m0[:, out0] + m1[:, out1]               # (n_frames, n, 2)
        cand0 = pm[:, pred0] + bm[:, pred0, bsel]
        cand1 = pm[:, pred1] + bm[:, pred1, bsel]
        better1 = cand1 < cand0
        choice[t] = better1
        pm = np.where(better1, cand1, cand0)

    bits = np.zeros((n_frames, steps), dtype=np.uint8)
    state = np.zeros(n_frames, dtype=np.int64)
    rows = np.arange(n_frames)
    for t in range(steps - 1, -1, -1):
        bits[:, t] = (state >> (code.constraint_length - 2)).astype(np.uint8)
        took1 = choice[t, rows, state]
        state = np.where(took1, pred1[state], pred0[state])
    return bits[:, : steps - n_tail]


def viterbi_decode(metrics: np.ndarray, code: ConvCode = DEFAULT_CODE,
                   n_tail: int = 6) -> np.ndarray:
    """Single-frame wrapper around viterbi_decode_batch."""
    return viterbi_decode_batch(np.asarray(metrics)[None], code, n_tail)[0]


class Interleaver:
    """Seeded random permutation applied to coded bits (or metric rows)."""

    def __init__(self, n_bits: int, seed: int):
        if n_bits < 1:
            raise ValueError("n_bits must be positive")
        self.n_bits = n_bits
        self.seed = seed
        self.permutation = np.random.default_rng(seed).permutation(n_bits)
        self._inverse = np.argsort(self.permutation)

    def interleave(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[0] != self.n_bits:
            raise ValueError(f"expected leading dimension {self.n_bits}, got {x.shape[0]}")
        return x[self.permutation]

    def deinterleave(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[0] != self.n_bits:
            raise ValueError(f"expected leading dimension {self.n_bits}, got {x.shape[0]}")
        return x[self._inverse]


def interleave(x: np.ndarray, ivl: Interleaver) -> np.ndarray:
    return ivl.interleave(x)


def deinterleave(x: np.ndarray, ivl: Interleaver) -> np.ndarray:
    return ivl.deinterleave(x)


def _gray_to_binary(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


class QamConstellation:
    """Square Gray-labeled QAM with unit average energy.

    Labels are integers read MSB-first; the first half of the bits selects
    the in-phase level, the second half the quadrature level.  Per axis the
    Gray sequence 00, 01, 11, 10 maps to levels -3, -1, +1, +3 (16-QAM).
    """

    def __init__(self, order: int = 16):
        if order not in (4, 16):
            raise ValueError("supported orders: 4, 16")
        self.order = order
        self.bits_per_symbol = int(np.log2(order))
        side = self.bits_per_symbol // 2
        n_axis = 1 << side
        amps = 2 * np.arange(n_axis) - (n_axis - 1)      # -3,-1,1,3 or -1,1
        pts = np.zeros(order, dtype=complex)
        for label in range(order):
            gi = label >> side
            gq = label & (n_axis - 1)
            pts[label] = amps[_gray_to_binary(gi)] + 1j * amps[_gray_to_binary(gq)]
        self.scale = float(np.sqrt(np.mean(np.abs(pts) ** 2)))
        self.points = pts / self.scale
        self.points.setflags(write=False)
        # subset_indices[j, b] = labels whose j-th bit (MSB-first) equals b
        self.subset_indices = np.zeros((self.bits_per_symbol, 2, order // 2), dtype=np.int64)
        labels = np.arange(order)
        for j in range(self.bits_per_symbol):
            bitval = (labels >> (self.bits_per_symbol - 1 - j)) & 1
            for b in (0, 1):
                self.subset_indices[j, b] = labels[bitval == b]
        self.subset_indices.setflags(write=False)

    def qam_map(self, bit_group: np.ndarray) -> complex:
        bits = np.asarray(bit_group).ravel()
        if bits.size != self.bits_per_symbol:
            raise ValueError(f"need {self.bits_per_symbol} bits per symbol")
        label = 0
        for b in bits:
            label = (label << 1) | int(b)
        return complex(self.points[label])

    def qam_bit_label(self, symbol_index: int, j: int) -> int:
        if not 0 <= symbol_index < self.order:
            raise ValueError("symbol index out of range")
        if not 0 <= j < self.bits_per_symbol:
            raise ValueError("bit position out of range")
        return (symbol_index >> (self.bits_per_symbol - 1 - j)) & 1

    def map_bits(self, bits: np.ndarray) -> np.ndarray:
        """Vectorized mapping of a bit stream to symbols (labels MSB-first)."""
        b = np.asarray(bits)
        if b.size % self.bits_per_symbol:
            raise ValueError("bit count must be a multiple of bits per symbol")
        groups = b.reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        labels = groups @ weights
        return self.points[labels]

    def labels_of(self, bits: np.ndarray) -> np.ndarray:
        b = np.asarray(bits).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return b @ weights
