"""Encoder and belief-propagation decoder for lifted protograph codes.

LLRs follow ``L = ln P(0)/P(1)`` everywhere.  The encoder brings ``H`` to
reduced row-echelon form over GF(2) once per code (bit-packed, numba), with
punctured columns tried first as pivots so that the information bits land
on transmitted positions.  The decoder is a flooding sum-product decoder
with the tanh rule, messages clipped to ``+-LLR_CLIP``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .protograph import LiftedCode

LLR_CLIP = 30.0
_TANH_LIMIT = 1.0 - 1e-15


@dataclass(frozen=True)
class Codeword:
    """A codeword and the part of it that goes on the channel."""

    bits: np.ndarray
    transmitted_bits: np.ndarray


@dataclass(frozen=True)
class DecoderResult:
    hard_bits: np.ndarray
    aposteriori_llrs: np.ndarray
    iterations_used: int
    syndrome_ok: bool


# ---------------------------------------------------------------- encoding

@numba.njit(cache=True)
def _rref_packed(rows, order):
    """In-place GF(2) RREF of bit-packed ``rows`` visiting columns in ``order``.

    Returns the pivot column of each leading row (length = rank).
    """
    m = rows.shape[0]
    pivots = np.empty(m, dtype=np.int64)
    rank = 0
    for col in order:
        if rank == m:
            break
        w = col >> 6
        bit = np.uint64(1) << np.uint64(col & 63)
        piv = -1
        for r in range(rank, m):
            if rows[r, w] & bit:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            tmp = rows[piv].copy()
            rows[piv] = rows[rank]
            rows[rank] = tmp
        for r in range(m):
            if r != rank and rows[r, w] & bit:
                rows[r] ^= rows[rank]
        pivots[rank] = col
        rank += 1
    return pivots[:rank]


def _pack_rows(H: sp.csr_matrix) -> np.ndarray:
    m, n = H.shape
    words = (n + 63) // 64
    out = np.zeros((m, words), dtype=np.uint64)
    coo = H.tocoo()
    np.bitwise_or.at(out, (coo.row, coo.col >> 6),
                     np.left_shift(np.uint64(1), (coo.col & 63).astype(np.uint64)))
    return out


def _unpack_rows(rows: np.ndarray, n: int) -> np.ndarray:
    as_bytes = rows.view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :n]


class Encoder:
    """Systematic-where-possible encoder derived from the RREF of ``H``.

    Attributes
    ----------
    info_positions : ndarray
        Codeword positions carrying the ``k`` information bits.
    rank : int
        GF(2) rank of ``H``.  When ``H`` is rank deficient the surplus free
        positions are frozen to zero.
    """

    def __init__(self, code: LiftedCode):
        H = sp.csr_matrix(code.H)
        n, k = code.n, code.k
        punctured = set(code.punctured_bits.tolist())
        order = np.array(sorted(range(n), key=lambda c: (c not in punctured, c)), dtype=np.int64)
        rows = _pack_rows(H)
        pivots = _rref_packed(rows, order)
        self.rank = len(pivots)
        if n - self.rank < k:
            raise ValueError(f"H has rank {self.rank}; cannot carry {k} information bits")
        is_pivot = np.zeros(n, dtype=bool)
        is_pivot[pivots] = True
        free = np.flatnonzero(~is_pivot)
        # prefer transmitted free columns for the information bits
        free = free[np.argsort(np.isin(free, code.punctured_bits), kind="stable")]
        self.info_positions = np.sort(free[:k])
        self.frozen_positions = np.sort(free[k:])
        self.parity_positions = pivots
        dense = _unpack_rows(rows[: self.rank], n)
        self._P = dense[:, self.info_positions].astype(np.float32)
        self.n, self.k = n, k
        self._transmitted = code.transmitted_bits

    def encode_bits(self, info: np.ndarray) -> np.ndarray:
        """Codeword(s) for info of shape ``(k,)`` or ``(F, k)``."""
        info = np.asarray(info, dtype=np.uint8)
        if info.shape[-1] != self.k:
            raise ValueError(f"expected {self.k} information bits, got {info.shape[-1]}")
        batch = np.atleast_2d(info)
        out = np.zeros((batch.shape[0], self.n), dtype=np.uint8)
        out[:, self.info_positions] = batch
        parity = (batch.astype(np.float32) @ self._P.T).astype(np.int64) & 1
        out[:, self.parity_positions] = parity
        return out[0] if info.ndim == 1 else out

    def encode(self, info: np.ndarray) -> Codeword:
        bits = self.encode_bits(info)
        return Codeword(bits=bits, transmitted_bits=bits[..., self._transmitted])


_ENCODERS: dict[int, tuple] = {}


def get_encoder(code: LiftedCode) -> Encoder:
    """Encoder for ``code``, built once and cached for the code's lifetime."""
    key = id(code)
    hit = _ENCODERS.get(key)
    if hit is not None and hit[0]() is code:
        return hit[1]
    enc = Encoder(code)
    _ENCODERS[key] = (weakref.ref(code), enc)
    weakref.finalize(code, _ENCODERS.pop, key, None)
    return enc


def encode(code: LiftedCode, info) -> Codeword:
    return get_encoder(code).encode(info)


def syndrome(code_or_H, bits) -> np.ndarray:
    H = code_or_H.H if isinstance(code_or_H, LiftedCode) else code_or_H
    return (sp.csr_matrix(H, dtype=np.int64) @ np.asarray(bits, dtype=np.int64)) & 1


# ---------------------------------------------------------------- decoding

@numba.njit(cache=True)
def _syndrome_ok(hard, row_ptr, row_cols):
    for r in range(row_ptr.size - 1):
        s = 0
        for p in range(row_ptr[r], row_ptr[r + 1]):
            s ^= hard[row_cols[p]]
        if s:
            return False
    return True


@numba.njit(cache=True)
def _bp(llr, max_iter, row_ptr, row_cols, row_edge, col_ptr, clip, tlim):
    n = llr.size
    E = row_cols.size
    app = llr.copy()
    hard = np.zeros(n, dtype=np.uint8)
    for v in range(n):
        hard[v] = 1 if app[v] < 0 else 0
    if _syndrome_ok(hard, row_ptr, row_cols):
        return app, hard, 0, True

    # messages are stored in column-major edge order
    v2c = np.empty(E)
    c2v = np.zeros(E)
    for v in range(n):
        for e in range(col_ptr[v], col_ptr[v + 1]):
            v2c[e] = llr[v]
    tmax = 0
    for r in range(row_ptr.size - 1):
        d = row_ptr[r + 1] - row_ptr[r]
        if d > tmax:
            tmax = d
    t = np.empty(tmax)
    suffix = np.empty(tmax + 1)

    it = 0
    ok = False
    while it < max_iter:
        it += 1
        for r in range(row_ptr.size - 1):
            a, b = row_ptr[r], row_ptr[r + 1]
            d = b - a
            for i in range(d):
                t[i] = np.tanh(0.5 * v2c[row_edge[a + i]])
            suffix[d] = 1.0
            for i in range(d - 1, -1, -1):
                suffix[i] = suffix[i + 1] * t[i]
            prefix = 1.0
            for i in range(d):
                p = prefix * suffix[i + 1]
                if p > tlim:
                    p = tlim
                elif p < -tlim:
                    p = -tlim
                m = 2.0 * np.arctanh(p)
                if m > clip:
                    m = clip
                elif m < -clip:
                    m = -clip
                c2v[row_edge[a + i]] = m
                prefix *= t[i]
        for v in range(n):
            tot = llr[v]
            for e in range(col_ptr[v], col_ptr[v + 1]):
                tot += c2v[e]
            app[v] = tot
            hard[v] = 1 if tot < 0 else 0
            for e in range(col_ptr[v], col_ptr[v + 1]):
                m = tot - c2v[e]
                if m > clip:
                    m = clip
                elif m < -clip:
                    m = -clip
                v2c[e] = m
        if _syndrome_ok(hard, row_ptr, row_cols):
            ok = True
            break
    return app, hard, it, ok


class Decoder:
    """Flooding sum-product decoder bound to one code (reusable, stateless)."""

    def __init__(self, code_or_H, clip: float = LLR_CLIP):
        H = code_or_H.H if isinstance(code_or_H, LiftedCode) else code_or_H
        csc = sp.csc_matrix(H)
        csc.sort_indices()
        self.n = csc.shape[1]
        self.clip = float(clip)
        self.col_ptr = csc.indptr.astype(np.int64)
        edge_row = csc.indices.astype(np.int64)
        edge_col = np.repeat(np.arange(self.n), np.diff(self.col_ptr))
        by_row = np.lexsort((edge_col, edge_row))
        self.row_edge = by_row.astype(np.int64)
        self.row_cols = edge_col[by_row].astype(np.int64)
        self.row_ptr = np.concatenate([[0], np.cumsum(np.bincount(edge_row, minlength=csc.shape[0]))]).astype(np.int64)

    def decode(self, channel_llrs, max_iter: int = 20) -> DecoderResult:
        llr = np.asarray(channel_llrs, dtype=np.float64)
        if llr.shape != (self.n,):
            raise ValueError(f"expected {self.n} LLRs, got shape {llr.shape}")
        llr = np.clip(np.nan_to_num(llr, nan=0.0, posinf=self.clip, neginf=-self.clip),
                      -self.clip, self.clip)
        app, hard, it, ok = _bp(llr, int(max_iter), self.row_ptr, self.row_cols,
                                self.row_edge, self.col_ptr, self.clip, _TANH_LIMIT)
        return DecoderResult(hard_bits=hard, aposteriori_llrs=app,
                             iterations_used=int(it), syndrome_ok=bool(ok))


def decode(code: LiftedCode, channel_llrs, max_iter: int = 20) -> DecoderResult:
    return Decoder(code).decode(channel_llrs, max_iter)
