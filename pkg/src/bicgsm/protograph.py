"""Protograph base matrices and their lifting to parity-check matrices.

Columns are variable nodes, rows are check nodes, entries are edge
multiplicities.  Column indices are 0-based throughout the code; the
families below puncture the second column (index 1) unless stated.

Lifting is done in two stages.  A small pre-lift of factor ``P`` (4 by
default) turns every multiplicity ``b`` into a ``P x P`` block made of ``b``
disjoint cyclic permutations, which removes all parallel edges.  The
resulting binary matrix is then lifted again by circulants of size
``Z / P`` whose offsets are picked greedily, edge by edge, to avoid 4- and
6-cycles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

PRELIFT = 4


@dataclass(frozen=True)
class BaseMatrix:
    """Protograph described by its base matrix and puncture set."""

    entries: tuple
    punctured: frozenset = frozenset()
    extension: int = 0
    name: str = ""

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=int)
        if arr.ndim != 2:
            raise ValueError("base matrix must be two-dimensional")
        if np.any(arr < 0):
            raise ValueError("edge multiplicities must be nonnegative")
        object.__setattr__(self, "entries", tuple(tuple(int(v) for v in row) for row in arr))
        object.__setattr__(self, "punctured", frozenset(int(c) for c in self.punctured))
        if any(not 0 <= c < arr.shape[1] for c in self.punctured):
            raise ValueError(f"punctured columns {sorted(self.punctured)} out of range")

    @classmethod
    def from_array(cls, arr, punctured=(), extension=0, name=""):
        return cls(tuple(map(tuple, np.asarray(arr, dtype=int))), frozenset(punctured), extension, name)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.entries, dtype=int)

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    @property
    def col_degrees(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def row_degrees(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def rate_fraction(self) -> Fraction:
        return Fraction(self.cols - self.rows, self.cols - len(self.punctured))

    @property
    def rate(self) -> float:
        return float(self.rate_fraction)

    def is_valid(self) -> bool:
        """Every row and column connected and a rate strictly inside (0, 1)."""
        arr = self.matrix
        if not (arr.sum(axis=0) > 0).all() or not (arr.sum(axis=1) > 0).all():
            return False
        return self.cols > len(self.punctured) and 0 < self.rate_fraction < 1

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "rows": self.rows,
                "cols": self.cols,
                "entries": [list(r) for r in self.entries],
                "punctured": sorted(self.punctured),
                "e": self.extension,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "BaseMatrix":
        d = json.loads(text)
        return cls.from_array(d["entries"], d.get("punctured", ()), d.get("e", 0), d.get("name", ""))


def _extend(mother, pair, e):
    cols = [list(c) for c in np.asarray(mother).T]
    for _ in range(e):
        cols.extend([list(pair[0]), list(pair[1])])
    return np.array(cols).T


def make_ar4ja(e: int = 0) -> BaseMatrix:
    """AR4JA protograph of rate (e+1)/(e+2); the degree-6 column is punctured."""
    if e < 0:
        raise ValueError("extension count must be >= 0")
    mother = [[1, 2, 0, 0, 0], [0, 3, 1, 1, 1], [0, 1, 2, 2, 1]]
    return BaseMatrix.from_array(_extend(mother, ([0, 1, 3], [0, 3, 1]), e), {1}, e, "AR4JA")


def make_ar4a(e: int = 0) -> BaseMatrix:
    """AR4A protograph: AR4JA mother with non-jagged ``[0, 2, 2]`` extensions."""
    if e < 0:
        raise ValueError("extension count must be >= 0")
    mother = [[1, 2, 0, 0, 0], [0, 3, 1, 1, 1], [0, 1, 2, 2, 1]]
    return BaseMatrix.from_array(_extend(mother, ([0, 2, 2], [0, 2, 2]), e), {1}, e, "AR4A")


def make_eara(e: int = 0) -> BaseMatrix:
    """EARA protograph of rate (e+1)/(e+2); the degree-1 column is punctured."""
    if e < 0:
        raise ValueError("extension count must be >= 0")
    mother = [[1, 1, 1, 0, 0], [3, 0, 2, 1, 1], [1, 0, 1, 2, 1]]
    return BaseMatrix.from_array(_extend(mother, ([0, 2, 1], [0, 1, 2]), e), {1}, e, "EARA")


def make_regular(dv: int, dc: int, cols: int) -> BaseMatrix:
    """Unpunctured (dv, dc)-regular protograph with ``cols * dv / dc`` rows.

    When the row count divides ``dv`` every entry is ``dv / rows`` (for
    ``cols == dc`` and ``rows == dv`` this is the all-ones matrix);
    otherwise single edges are placed in array-code fashion.
    """
    if dv < 1 or dc <= dv or cols < 1 or (cols * dv) % dc:
        raise ValueError(f"inconsistent regular parameters dv={dv}, dc={dc}, cols={cols}")
    rows = cols * dv // dc
    if dv % rows == 0:
        B = np.full((rows, cols), dv // rows, dtype=int)
    else:
        B = np.zeros((rows, cols), dtype=int)
        for j in range(cols):
            for t in range(dv):
                B[(j + t * (rows // dv + 1)) % rows, j] += 1
    if not (B.sum(axis=0) == dv).all() or not (B.sum(axis=1) == dc).all():
        raise ValueError(f"no ({dv},{dc})-regular protograph with {cols} columns")
    return BaseMatrix.from_array(B, (), 0, f"regular-({dv},{dc})")


def make_improved_variant(base: BaseMatrix) -> BaseMatrix:
    """Same edges, but puncture the lowest-degree column (lowest index on ties)."""
    col = int(np.argmin(base.col_degrees))
    return BaseMatrix(base.entries, frozenset({col}), base.extension, "I" + base.name if base.name else "")


CODE_FAMILIES = {
    "eara": make_eara,
    "ar4ja": make_ar4ja,
    "ar4a": make_ar4a,
    "iar4ja": lambda e=0: make_improved_variant(make_ar4ja(e)),
    "iar4a": lambda e=0: make_improved_variant(make_ar4a(e)),
}
FAMILY_NAMES = tuple(CODE_FAMILIES) + ("regular",)


def make_code(family: str, e: int = 0) -> BaseMatrix:
    """Base matrix by family name; ``"regular"`` gives the (3, 3(e+2))-regular code."""
    family = family.lower()
    if family == "regular":
        dc = 3 * (e + 2)
        return make_regular(3, dc, dc)
    try:
        return CODE_FAMILIES[family](e)
    except KeyError:
        raise ValueError(f"unknown code family {family!r}") from None


@dataclass(frozen=True)
class ConstraintReport:
    punctured_degree_one: bool
    single_degree_two: bool
    max_parallel_edges: bool
    first_column_dominant: bool

    @property
    def all_pass(self) -> bool:
        return all((self.punctured_degree_one, self.single_degree_two,
                    self.max_parallel_edges, self.first_column_dominant))

    def failures(self) -> list[str]:
        return [k for k, v in self.__dict__.items() if not v]


def check_design_constraints(base: BaseMatrix) -> ConstraintReport:
    """Check the mother-matrix design rules.

    (a) the punctured column has degree 1; (b) exactly one degree-2 column;
    (c) no entry above 3; (d) column 0 has a larger degree than columns 2
    and 3.
    """
    arr = base.matrix
    deg = arr.sum(axis=0)
    nonzero = arr.any()
    a = nonzero and len(base.punctured) > 0 and all(deg[c] == 1 for c in base.punctured)
    b = nonzero and int((deg == 2).sum()) == 1
    c = nonzero and int(arr.max()) <= 3
    d = nonzero and arr.shape[1] >= 4 and deg[0] > deg[2] and deg[0] > deg[3]
    return ConstraintReport(bool(a), bool(b), bool(c), bool(d))


@dataclass(frozen=True)
class LiftedCode:
    """Parity-check matrix obtained by lifting a protograph.

    Attributes
    ----------
    H : scipy.sparse.csr_matrix
        Binary parity-check matrix, ``(Z n_c) x (Z n_v)``.
    Z : int
        Lift factor; lifted column ``c`` belongs to proto column ``c // Z``.
    base : BaseMatrix
    offsets : dict
        Circulant offsets of the second lifting stage, keyed by the
        (row, col) of the pre-lifted matrix.
    """

    H: sp.csr_matrix = field(repr=False)
    Z: int
    base: BaseMatrix
    offsets: dict = field(repr=False, default_factory=dict)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def k(self) -> int:
        return self.Z * (self.base.cols - self.base.rows)

    @property
    def proto_col_of(self) -> np.ndarray:
        return np.arange(self.n) // self.Z

    @property
    def punctured_bits(self) -> np.ndarray:
        return np.flatnonzero(np.isin(self.proto_col_of, sorted(self.base.punctured)))

    @property
    def transmitted_bits(self) -> np.ndarray:
        return np.flatnonzero(~np.isin(self.proto_col_of, sorted(self.base.punctured)))

    @property
    def transmitted_len(self) -> int:
        return self.n - len(self.punctured_bits)

    @property
    def rate(self) -> float:
        return self.k / self.transmitted_len

    def block_counts(self) -> np.ndarray:
        """Edges per Z x Z block divided by Z; reproduces the base matrix."""
        coo = self.H.tocoo()
        out = np.zeros((self.base.rows, self.base.cols), dtype=int)
        np.add.at(out, (coo.row // self.Z, coo.col // self.Z), 1)
        return out // self.Z

    def has_four_cycles(self) -> bool:
        return has_four_cycles(self.H)

    def to_alist(self) -> str:
        return to_alist(self.H)


def has_four_cycles(H) -> bool:
    """True if two rows share more than one column (off-diagonal of H H^T > 1)."""
    H = sp.csr_matrix(H, dtype=np.int32)
    G = (H @ H.T).tocoo()
    off = G.row != G.col
    return bool(np.any(G.data[off] > 1))


def _prelift(B: np.ndarray, P: int, rng: np.random.Generator) -> np.ndarray:
    """Replace multiplicity b by b disjoint cyclic shifts of a P x P identity."""
    n_c, n_v = B.shape
    out = np.zeros((n_c * P, n_v * P), dtype=np.uint8)
    eye = np.arange(P)
    for i in range(n_c):
        for j in range(n_v):
            b = int(B[i, j])
            if b > P:
                raise ValueError(f"multiplicity {b} exceeds pre-lift factor {P}")
            for s in rng.choice(P, size=b, replace=False):
                out[i * P + eye, j * P + (eye + s) % P] = 1
    return out


def _choose_offsets(A: np.ndarray, L: int, order, strict: bool = True) -> dict:
    """Greedy circulant offsets for binary base ``A`` avoiding short cycles.

    Edges are placed in ``order``.  Each gets the smallest offset that closes
    neither a 4- nor a 6-cycle with the edges already placed, else the
    smallest offset avoiding 4-cycles.  If every offset closes a 4-cycle the
    construction fails, unless ``strict`` is off, in which case offset 0 is
    used.
    """
    rows_of = [[] for _ in range(A.shape[1])]
    cols_of = [[] for _ in range(A.shape[0])]
    s = {}
    edges = list(zip(*np.nonzero(A)))
    for idx in order:
        r, c = (int(v) for v in edges[idx])
        bad4, bad6 = set(), set()
        for d in cols_of[r]:
            s_rd = s[r, d]
            for b in rows_of[d]:
                if b == r:
                    continue
                if (b, c) in s:
                    bad4.add((s_rd - s[b, d] + s[b, c]) % L)
                partial = s_rd - s[b, d]
                for e in cols_of[b]:
                    if e in (d, c):
                        continue
                    for f in rows_of[e]:
                        if f in (b, r) or (f, c) not in s:
                            continue
                        bad6.add((partial + s[b, e] - s[f, e] + s[f, c]) % L)
        choice = next((o for o in range(L) if o not in bad4 and o not in bad6), None)
        if choice is None:
            choice = next((o for o in range(L) if o not in bad4), None)
        if choice is None:
            if strict:
                raise ValueError(f"circulant size {L} too small to avoid 4-cycles")
            choice = 0
        s[r, c] = choice
        rows_of[c].append(r)
        cols_of[r].append(c)
    return s


def lift(base: BaseMatrix, Z: int, seed: int = 0, prelift: int = PRELIFT,
         retries: int = 8, strict: bool = True) -> LiftedCode:
    """Lift ``base`` by factor ``Z`` into a sparse parity-check matrix.

    With ``strict`` (default) the lifted graph is guaranteed free of
    4-cycles, or a ``ValueError`` is raised after ``retries`` seeds.
    """
    B = base.matrix
    maxb = int(B.max(initial=0))
    if Z < 1:
        raise ValueError("lift factor must be >= 1")
    if maxb > Z:
        raise ValueError(f"multiplicity {maxb} needs a lift factor of at least {maxb}")
    if Z % prelift == 0 and prelift >= maxb:
        P = prelift
    elif maxb <= 1:
        P = 1
    else:
        P = next(p for p in range(maxb, Z + 1) if Z % p == 0)
    L = Z // P
    last = None
    for attempt in range(retries):
        rng = np.random.default_rng([seed, attempt])
        try:
            A = _prelift(B, P, rng) if P > 1 else B.astype(np.uint8)
            order = rng.permutation(int(A.sum()))
            offsets = _choose_offsets(A, L, order, strict)
        except ValueError as exc:
            last = exc
            continue
        H = _expand(offsets, L, P, B.shape)
        if strict and has_four_cycles(H):
            last = ValueError("lifted graph contains 4-cycles")
            continue
        return LiftedCode(H=H, Z=Z, base=base, offsets=offsets)
    raise ValueError(f"lifting by Z={Z} failed after {retries} attempts: {last}")


def _expand(offsets, L, P, base_shape):
    n_c, n_v = base_shape
    rows, cols = [], []
    t = np.arange(L)
    for (r, c), off in offsets.items():
        # pre-lifted node (r, c) -> proto block (r // P, c // P), sub-index r % P
        rr = (r // P) * P * L + (r % P) * L + t
        cc = (c // P) * P * L + (c % P) * L + (t + off) % L
        rows.append(rr)
        cols.append(cc)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.ones(rows.size, dtype=np.uint8)
    return sp.csr_matrix((data, (rows, cols)), shape=(n_c * P * L, n_v * P * L))


def to_alist(H) -> str:
    """MacKay alist text (1-based indices, zero-padded lists)."""
    H = sp.csc_matrix(H)
    m, n = H.shape
    Hr = sp.csr_matrix(H)
    col_deg = np.diff(H.indptr)
    row_deg = np.diff(Hr.indptr)
    lines = [f"{n} {m}", f"{col_deg.max()} {row_deg.max()}",
             " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    for j in range(n):
        idx = list(np.sort(H.indices[H.indptr[j]:H.indptr[j + 1]]) + 1)
        lines.append(" ".join(map(str, idx + [0] * (col_deg.max() - len(idx)))))
    for i in range(m):
        idx = list(np.sort(Hr.indices[Hr.indptr[i]:Hr.indptr[i + 1]]) + 1)
        lines.append(" ".join(map(str, idx + [0] * (row_deg.max() - len(idx)))))
    return "\n".join(lines) + "\n"


def from_alist(text: str) -> sp.csr_matrix:
    tokens = text.split()
    n, m = int(tokens[0]), int(tokens[1])
    cmax = int(tokens[2])
    pos = 4 + n + m
    rows, cols = [], []
    for j in range(n):
        for v in tokens[pos:pos + cmax]:
            if int(v):
                rows.append(int(v) - 1)
                cols.append(j)
        pos += cmax
    data = np.ones(len(rows), dtype=np.uint8)
    return sp.csr_matrix((data, (rows, cols)), shape=(m, n))
