"""Exact sparse linear algebra over the rationals.

Everything here works with :class:`fractions.Fraction` entries.  Row
reduction is fraction-free: each row is scaled to a primitive integer
vector and combined with integer multipliers, so intermediate growth stays
under control and results are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

__all__ = [
    "CompositionNotZero",
    "LabeledBasis",
    "SparseMatrix",
    "RowReducer",
    "CohomologyGroup",
    "CohomologyTable",
    "rank_kernel",
    "rank",
    "solve",
    "cohomology_at",
    "complex_cohomology",
    "format_rational",
    "parse_rational",
]


class CompositionNotZero(ValueError):
    """Raised when two consecutive differentials do not compose to zero."""


def parse_rational(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot read {value!r} as a rational")


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return f"{value.numerator}/1"
    return f"{value.numerator}/{value.denominator}"


class LabeledBasis:
    """An ordered tuple of distinct, hashable basis labels."""

    __slots__ = ("labels", "_index")

    def __init__(self, labels: Iterable):
        self.labels = tuple(labels)
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise ValueError("basis labels must be pairwise distinct")

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __getitem__(self, i):
        return self.labels[i]

    def __contains__(self, label):
        return label in self._index

    def index(self, label) -> int:
        return self._index[label]

    def get(self, label, default=None):
        return self._index.get(label, default)

    def __eq__(self, other):
        return isinstance(other, LabeledBasis) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        return f"LabeledBasis({list(self.labels)!r})"


class SparseMatrix:
    """Immutable sparse rational matrix stored column by column."""

    __slots__ = ("nrows", "ncols", "_cols")

    def __init__(self, nrows: int, ncols: int, entries=None):
        if nrows < 0 or ncols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        self.nrows = nrows
        self.ncols = ncols
        cols: Dict[int, Dict[int, Fraction]] = {}
        if entries:
            items = entries.items() if isinstance(entries, dict) else (
                ((r, c), v) for r, c, v in entries)
            for (r, c), v in items:
                if not (0 <= r < nrows and 0 <= c < ncols):
                    raise IndexError(f"entry ({r}, {c}) outside {nrows}x{ncols}")
                v = parse_rational(v)
                col = cols.setdefault(c, {})
                v = col.get(r, 0) + v
                if v:
                    col[r] = v
                else:
                    col.pop(r, None)
            cols = {c: col for c, col in cols.items() if col}
        self._cols = cols

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, nrows: int, ncols: int) -> "SparseMatrix":
        return cls(nrows, ncols)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(n, n, {(i, i): 1 for i in range(n)})

    @classmethod
    def from_dense(cls, rows: Sequence[Sequence], ncols: Optional[int] = None) -> "SparseMatrix":
        nrows = len(rows)
        if ncols is None:
            ncols = len(rows[0]) if rows else 0
        entries = {}
        for r, row in enumerate(rows):
            if len(row) != ncols:
                raise ValueError("ragged dense matrix")
            for c, v in enumerate(row):
                if v:
                    entries[(r, c)] = v
        return cls(nrows, ncols, entries)

    @classmethod
    def from_columns(cls, nrows: int, columns: Sequence) -> "SparseMatrix":
        """Columns may be dense sequences or ``{row: value}`` dicts."""
        entries = {}
        for c, col in enumerate(columns):
            items = col.items() if isinstance(col, dict) else enumerate(col)
            for r, v in items:
                if v:
                    entries[(r, c)] = v
        return cls(nrows, len(columns), entries)

    @classmethod
    def _raw(cls, nrows, ncols, cols) -> "SparseMatrix":
        m = cls.__new__(cls)
        m.nrows, m.ncols, m._cols = nrows, ncols, cols
        return m

    # access -----------------------------------------------------------------
    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def entries(self) -> List[Tuple[int, int, Fraction]]:
        out = []
        for c in sorted(self._cols):
            for r in sorted(self._cols[c]):
                out.append((r, c, self._cols[c][r]))
        return out

    def column(self, c: int) -> Dict[int, Fraction]:
        return dict(self._cols.get(c, {}))

    def __getitem__(self, rc):
        r, c = rc
        return self._cols.get(c, {}).get(r, Fraction(0))

    def nnz(self) -> int:
        return sum(len(col) for col in self._cols.values())

    def is_zero(self) -> bool:
        return not self._cols

    def rows(self) -> List[Dict[int, Fraction]]:
        out: List[Dict[int, Fraction]] = [dict() for _ in range(self.nrows)]
        for c, col in self._cols.items():
            for r, v in col.items():
                out[r][c] = v
        return out

    def to_dense(self) -> List[List[Fraction]]:
        out = [[Fraction(0)] * self.ncols for _ in range(self.nrows)]
        for c, col in self._cols.items():
            for r, v in col.items():
                out[r][c] = v
        return out

    # algebra ----------------------------------------------------------------
    def transpose(self) -> "SparseMatrix":
        cols: Dict[int, Dict[int, Fraction]] = {}
        for c, col in self._cols.items():
            for r, v in col.items():
                cols.setdefault(r, {})[c] = v
        return SparseMatrix._raw(self.ncols, self.nrows, cols)

    def apply(self, vec) -> List[Fraction]:
        """Matrix-vector product; ``vec`` dense of length ``ncols``."""
        if len(vec) != self.ncols:
            raise ValueError("vector length does not match column count")
        out = [Fraction(0)] * self.nrows
        for c, col in self._cols.items():
            x = vec[c]
            if x:
                for r, v in col.items():
                    out[r] += v * x
        return out

    def __matmul__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        cols = {}
        for c, ocol in other._cols.items():
            acc: Dict[int, Fraction] = {}
            for k, w in ocol.items():
                for r, v in self._cols.get(k, {}).items():
                    acc[r] = acc.get(r, 0) + v * w
            acc = {r: v for r, v in acc.items() if v}
            if acc:
                cols[c] = acc
        return SparseMatrix._raw(self.nrows, other.ncols, cols)

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch in addition")
        ents = {(r, c): v for r, c, v in self.entries}
        for r, c, v in other.entries:
            ents[(r, c)] = ents.get((r, c), 0) + v
        return SparseMatrix(self.nrows, self.ncols, ents)

    def __neg__(self) -> "SparseMatrix":
        return self.scale(-1)

    def __sub__(self, other: "SparseMatrix") -> "SparseMatrix":
        return self + (-other)

    def scale(self, s) -> "SparseMatrix":
        s = parse_rational(s)
        if not s:
            return SparseMatrix(self.nrows, self.ncols)
        cols = {c: {r: v * s for r, v in col.items()} for c, col in self._cols.items()}
        return SparseMatrix._raw(self.nrows, self.ncols, cols)

    def select_columns(self, indices: Sequence[int]) -> "SparseMatrix":
        cols = {}
        for new, old in enumerate(indices):
            if old in self._cols:
                cols[new] = dict(self._cols[old])
        return SparseMatrix._raw(self.nrows, len(indices), cols)

    def __eq__(self, other):
        return (isinstance(other, SparseMatrix) and self.shape == other.shape
                and self._cols == other._cols)

    def __hash__(self):
        return hash((self.shape, tuple(self.entries)))

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz()})"

    def to_json(self) -> dict:
        return {
            "rows": self.nrows,
            "cols": self.ncols,
            "entries": [[r, c, format_rational(v)] for r, c, v in self.entries],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SparseMatrix":
        return cls(data["rows"], data["cols"],
                   {(r, c): parse_rational(v) for r, c, v in data["entries"]})


# -- fraction-free row reduction ---------------------------------------------

def _primitive(row: Dict[int, Fraction]) -> Dict[int, int]:
    """Scale a rational row to a primitive integer row with positive lead."""
    den = 1
    for v in row.values():
        d = v.denominator
        den = den * d // gcd(den, d)
    ints = {c: int(v * den) for c, v in row.items()}
    return _normalize(ints)


def _normalize(row: Dict[int, int]) -> Dict[int, int]:
    g = 0
    for v in row.values():
        g = gcd(g, v)
        if g == 1:
            break
    lead = row[min(row)]
    if lead < 0:
        g = -g
    if g != 1:
        row = {c: v // g for c, v in row.items()}
    return row


class RowReducer:
    """Incremental reduced row echelon form over the integers.

    Rows are absorbed in the order given; a new pivot is the leftmost column
    that survives reduction against the existing pivots.  Pivot rows are
    kept mutually reduced (RREF up to positive row scaling).
    """

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.pivots: Dict[int, Dict[int, int]] = {}

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def _reduce(self, row: Dict[int, int]) -> Dict[int, int]:
        pivots = self.pivots
        while row:
            hit = [c for c in row if c in pivots]
            if not hit:
                return row
            c = min(hit)
            prow = pivots[c]
            a = prow[c]
            b = row[c]
            g = gcd(a, b)
            a, b = a // g, b // g
            new = {k: a * v for k, v in row.items()}
            for k, v in prow.items():
                nv = new.get(k, 0) - b * v
                if nv:
                    new[k] = nv
                else:
                    new.pop(k, None)
            row = _normalize(new) if new else new
        return row

    def reduce(self, vec) -> Dict[int, int]:
        row = _as_row(vec)
        if not row:
            return {}
        return self._reduce(_primitive(row))

    def add(self, vec) -> bool:
        """Absorb ``vec``; return True iff it was independent."""
        row = self.reduce(vec)
        if not row:
            return False
        c = min(row)
        a = row[c]
        for pc, prow in list(self.pivots.items()):
            b = prow.get(c)
            if b:
                g = gcd(a, b)
                aa, bb = a // g, b // g
                new = {k: aa * v for k, v in prow.items()}
                for k, v in row.items():
                    nv = new.get(k, 0) - bb * v
                    if nv:
                        new[k] = nv
                    else:
                        new.pop(k, None)
                self.pivots[pc] = _normalize(new)
        self.pivots[c] = row
        return True

    def kernel(self) -> List[List[Fraction]]:
        """Basis of the null space of the absorbed rows, one per free column."""
        out = []
        pivot_items = sorted(self.pivots.items())
        for f in range(self.ncols):
            if f in self.pivots:
                continue
            vec = [Fraction(0)] * self.ncols
            vec[f] = Fraction(1)
            for c, prow in pivot_items:
                v = prow.get(f)
                if v:
                    vec[c] = Fraction(-v, prow[c])
            out.append(vec)
        return out


def _as_row(vec) -> Dict[int, Fraction]:
    if isinstance(vec, dict):
        return {c: parse_rational(v) for c, v in vec.items() if v}
    return {c: parse_rational(v) for c, v in enumerate(vec) if v}


def rank_kernel(m: SparseMatrix) -> Tuple[int, List[List[Fraction]]]:
    red = RowReducer(m.ncols)
    for row in m.rows():
        if row:
            red.add(row)
    return red.rank, red.kernel()


def rank(m: SparseMatrix) -> int:
    red = RowReducer(m.ncols)
    for row in m.rows():
        if row:
            red.add(row)
    return red.rank


def solve(m: SparseMatrix, b) -> Optional[List[Fraction]]:
    """Some ``x`` with ``m x = b`` exactly, or ``None`` if ``b`` is not in the image."""
    if len(b) != m.nrows:
        raise ValueError("right-hand side length must equal the row count")
    n = m.ncols
    red = RowReducer(n + 1)
    rows = m.rows()
    for r, row in enumerate(rows):
        aug = dict(row)
        if b[r]:
            aug[n] = parse_rational(b[r])
        if aug:
            red.add(aug)
    if n in red.pivots:
        return None
    x = [Fraction(0)] * n
    for c, prow in red.pivots.items():
        v = prow.get(n)
        if v:
            x[c] = Fraction(v, prow[c])
    return x


# -- cohomology ---------------------------------------------------------------

@dataclass
class CohomologyGroup:
    dimension: int
    representatives: List[List[Fraction]]
    d_in: SparseMatrix = field(repr=False)

    def is_exact(self, z) -> bool:
        return solve(self.d_in, list(z)) is not None


def cohomology_at(d_in: SparseMatrix, d_out: SparseMatrix) -> CohomologyGroup:
    """Cohomology of ``C^{p-1} --d_in--> C^p --d_out--> C^{p+1}`` at ``C^p``."""
    if d_out.ncols != d_in.nrows:
        raise ValueError(
            f"d_out has {d_out.ncols} columns but d_in has {d_in.nrows} rows")
    if not (d_out @ d_in).is_zero():
        raise CompositionNotZero("d_out o d_in is not zero")
    n = d_in.nrows
    image = RowReducer(n)
    for c in range(d_in.ncols):
        col = d_in.column(c)
        if col:
            image.add(col)
    _, kernel = rank_kernel(d_out)
    reps = []
    for z in kernel:
        if image.add(z):
            reps.append(z)
    dim = len(kernel) - (image.rank - len(reps))
    assert dim == len(reps)
    return CohomologyGroup(dim, reps, d_in)


@dataclass
class CohomologyTable:
    """Dimensions and representative cocycles indexed by degree."""

    dims: Dict[int, int] = field(default_factory=dict)
    representatives: Dict[int, list] = field(default_factory=dict)

    def dim_list(self, degrees: Optional[Iterable[int]] = None) -> List[int]:
        if degrees is None:
            degrees = sorted(self.dims)
        return [self.dims[k] for k in degrees]

    def to_json(self, render: Optional[Callable] = None) -> dict:
        out = {}
        for k in sorted(self.dims):
            reps = self.representatives.get(k, [])
            if render is not None:
                reps = [render(k, r) for r in reps]
            else:
                reps = [[format_rational(v) for v in r] for r in reps]
            out[str(k)] = {"dim": self.dims[k], "representatives": reps}
        return out


def complex_cohomology(differentials: Dict[int, SparseMatrix],
                       dims: Dict[int, int],
                       degrees: Iterable[int]) -> CohomologyTable:
    """Cohomology of a finite complex given ``d_p: C^p -> C^{p+1}`` and ``dim C^p``.

    Missing differentials are zero maps of the right shape.
    """
    table = CohomologyTable()
    for p in degrees:
        d_in = differentials.get(p - 1) or SparseMatrix(dims.get(p, 0), dims.get(p - 1, 0))
        d_out = differentials.get(p) or SparseMatrix(dims.get(p + 1, 0), dims.get(p, 0))
        grp = cohomology_at(d_in, d_out)
        table.dims[p] = grp.dimension
        table.representatives[p] = grp.representatives
    return table
