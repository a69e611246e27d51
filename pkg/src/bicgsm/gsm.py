"""Generalized spatial modulation (GSM) constellations for MIMO-VLC.

Two constructions are provided:

* ``"congsm"``  -- every activation pattern shares the same M-UPAM level set.
* ``"ssergsm"`` -- the level space (0, 2 I_a] is split into one subspace per
  activation pattern, M levels are placed in each subspace, and the sorted
  expanded set is dealt out so that every pattern owns M levels spaced
  beta positions apart.

Intensities are kept as exact :class:`fractions.Fraction` multiples of the
average LED intensity ``I_a``; floating point only appears in
:meth:`GsmConstellation.vectors`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb, floor, log2

import numpy as np

KINDS = ("congsm", "ssergsm")


@dataclass(frozen=True)
class GsmConfig:
    """Transmitter parameters of a GSM scheme.

    Parameters
    ----------
    N_t : int
        Number of transmit LEDs.
    N_a : int
        Number of LEDs switched on per channel use (at least 2).
    M : int
        UPAM order, a power of two.
    I_a : float
        Average intensity level per LED.
    """

    N_t: int = 4
    N_a: int = 2
    M: int = 2
    I_a: float = 1.0

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise ValueError("; ".join(errors))

    def problems(self) -> list[str]:
        errs = []
        if self.N_a < 2:
            errs.append(f"N_a={self.N_a} must be >= 2")
        if self.N_a > self.N_t:
            errs.append(f"N_a={self.N_a} exceeds N_t={self.N_t}")
        if self.M < 2 or self.M & (self.M - 1):
            errs.append(f"M={self.M} must be a power of two >= 2")
        if not self.I_a > 0:
            errs.append(f"I_a={self.I_a} must be positive")
        if self.N_a <= self.N_t and self.N_a >= 2 and comb(self.N_t, self.N_a) < 2:
            errs.append(f"only {comb(self.N_t, self.N_a)} activation pattern(s)")
        return errs

    @property
    def delta(self) -> int:
        """Number of possible activation patterns, C(N_t, N_a)."""
        return comb(self.N_t, self.N_a)

    @property
    def rho_d(self) -> int:
        return floor(log2(self.delta))

    @property
    def bits_per_level(self) -> int:
        return int(log2(self.M))

    @property
    def rho_s(self) -> int:
        return self.N_a * self.bits_per_level

    @property
    def rho(self) -> int:
        return self.rho_d + self.rho_s


def upam_levels(M: int, I_a=1) -> list:
    """M-UPAM levels ``2 I_a t / (M + 1)`` for t = 1..M.

    With an integer or Fraction ``I_a`` the levels are exact Fractions.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    scale = Fraction(I_a) if isinstance(I_a, (int, Fraction)) else I_a
    return [2 * scale * t / (M + 1) for t in range(1, M + 1)]


def select_patterns(N_t: int, N_a: int) -> list[tuple[int, ...]]:
    """First ``2**rho_d`` activation patterns in lexicographic order.

    LED indices are 1-based, as in the mapping tables.
    """
    delta = comb(N_t, N_a)
    if delta < 2:
        raise ValueError(f"C({N_t},{N_a}) = {delta} < 2 activation patterns")
    count = 2 ** floor(log2(delta))
    return list(combinations(range(1, N_t + 1), N_a))[:count]


def sser_symbol_set(M: int, beta: int, I_a=1) -> list:
    """Expanded level set with M levels inside each of ``beta`` subspaces.

    Level ``n' + M tau`` equals ``2 I_a n' / (beta (M+1)) + 2 I_a tau / beta``.
    The list is returned in index order, which is also ascending order.
    """
    if M < 2 or beta < 1:
        raise ValueError("need M >= 2 and beta >= 1")
    scale = Fraction(I_a) if isinstance(I_a, (int, Fraction)) else I_a
    return [
        2 * scale * n / (beta * (M + 1)) + 2 * scale * tau / beta
        for tau in range(beta)
        for n in range(1, M + 1)
    ]


def sser_allocate(levels, beta: int) -> list[list]:
    """Deal the sorted expanded levels out to ``beta`` activation patterns.

    Pattern ``p`` receives sorted indices ``p, p + beta, ..., p + (M-1) beta``.
    """
    if len(levels) % beta:
        raise ValueError(f"{len(levels)} levels cannot be split over {beta} patterns")
    ordered = sorted(levels)
    return [ordered[p::beta] for p in range(beta)]


def gray_code(nbits: int) -> np.ndarray:
    """Binary-reflected Gray sequence; entry t is the label of the t-th level."""
    t = np.arange(2**nbits)
    return t ^ (t >> 1)


def int_to_bits(values, nbits: int) -> np.ndarray:
    """MSB-first bit expansion of integer labels, shape ``(..., nbits)``."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(nbits - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_int(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits @ weights


@dataclass(frozen=True)
class GsmConstellation:
    """Mapping table of a GSM constellation.

    ``table[label]`` is the transmit vector (tuple of Fractions, in units of
    ``I_a``) for integer ``label``; the label's first ``rho_d`` bits (MSB
    first) pick the activation pattern and each following group of
    ``log2 M`` bits picks the level of one active LED.
    """

    config: GsmConfig
    kind: str
    patterns: tuple
    symbol_sets: tuple
    table: tuple = field(repr=False)

    @property
    def rho(self) -> int:
        return self.config.rho

    @property
    def rho_d(self) -> int:
        return self.config.rho_d

    @property
    def rho_s(self) -> int:
        return self.config.rho_s

    @property
    def size(self) -> int:
        return len(self.table)

    def vectors(self, I_a: float | None = None) -> np.ndarray:
        """Float transmit vectors, shape ``(2**rho, N_t)``."""
        scale = self.config.I_a if I_a is None else I_a
        return np.array([[float(v) for v in row] for row in self.table]) * scale

    def labels(self) -> np.ndarray:
        """Bit labels of the table rows, shape ``(2**rho, rho)``."""
        return int_to_bits(np.arange(self.size), self.rho)

    def pattern_of(self, label: int) -> tuple:
        return self.patterns[label >> self.rho_s]

    def to_csv(self) -> str:
        return constellation_csv(self)


def build_constellation(config: GsmConfig, kind: str = "ssergsm") -> GsmConstellation:
    """Build the full ``2**rho`` mapping table for ``config``."""
    kind = kind.lower()
    if kind not in KINDS:
        raise ValueError(f"unknown constellation kind {kind!r}; expected one of {KINDS}")
    patterns = select_patterns(config.N_t, config.N_a)
    beta = len(patterns)
    if kind == "congsm":
        sets = [upam_levels(config.M)] * beta
    else:
        sets = sser_allocate(sser_symbol_set(config.M, beta), beta)

    m = config.bits_per_level
    # level index reached by each m-bit SiD label
    level_of_label = np.argsort(gray_code(m))
    table = []
    for label in range(2**config.rho):
        p = label >> config.rho_s
        sid = label & ((1 << config.rho_s) - 1)
        x = [Fraction(0)] * config.N_t
        for a, led in enumerate(patterns[p]):
            chunk = (sid >> (m * (config.N_a - 1 - a))) & ((1 << m) - 1)
            x[led - 1] = sets[p][level_of_label[chunk]]
        table.append(tuple(x))
    return GsmConstellation(
        config=config,
        kind=kind,
        patterns=tuple(patterns),
        symbol_sets=tuple(tuple(s) for s in sets),
        table=tuple(table),
    )


def map_bits(constellation: GsmConstellation, bits) -> np.ndarray:
    """Map coded bits to transmit vectors.

    ``bits`` may hold one block of ``rho`` bits or any multiple of it; the
    result has shape ``(len(bits) // rho, N_t)`` (or ``(N_t,)`` for one block).
    """
    bits = np.asarray(bits)
    rho = constellation.rho
    if bits.size % rho:
        raise ValueError(f"bit count {bits.size} is not a multiple of rho={rho}")
    idx = bits_to_int(bits.reshape(-1, rho))
    x = constellation.vectors()[idx]
    return x[0] if bits.ndim == 1 and bits.size == rho else x


def _fmt(value: Fraction) -> str:
    return str(value) if value else "0"


def constellation_csv(constellation: GsmConstellation) -> str:
    """CSV dump of the mapping table with intensities as multiples of I_a."""
    cfg = constellation.config
    buf = io.StringIO()
    buf.write(
        f"# kind={constellation.kind} N_t={cfg.N_t} N_a={cfg.N_a} M={cfg.M} "
        f"rho={cfg.rho} unit=I_a\n"
    )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "pattern"] + [f"x{j + 1}" for j in range(cfg.N_t)])
    for label, row in enumerate(constellation.table):
        bits = "".join(str(b) for b in int_to_bits(label, cfg.rho))
        pattern = "(" + ",".join(str(i) for i in constellation.pattern_of(label)) + ")"
        writer.writerow([bits, pattern] + [_fmt(v) for v in row])
    return buf.getvalue()
