"""Cohomology of formal vector fields and of the truncated Weil algebra WO_q.

The Lie algebra of formal vector fields on q-space is spanned by
``x^alpha d/dx_i``; such a generator has weight ``|alpha| - 1`` and brackets
add weights.  A cochain slice of weight w is spanned by wedges of dual
generators whose generator weights sum to -w, so that the Euler field acts
on it by w.  The Chevalley-Eilenberg complex splits into finite slices of
fixed (degree, weight), each computed exactly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

from . import _series
from .formal import PolyVectorField, TruncPoly
from .linalg import (
    CohomologyTable, LabeledBasis, RowReducer, SparseMatrix, cohomology_at,
    format_rational,
)

__all__ = [
    "Generator",
    "WeightMismatch",
    "generators",
    "bracket_generators",
    "GFSlice",
    "gf_complex_slice",
    "gf_cohomology",
    "contraction_matrix",
    "lie_derivative_matrix",
    "euler_homotopy_check",
    "relative_projector",
    "wo_generators",
    "odd_bound",
    "WOMonomial",
    "wo_basis",
    "wo_d",
    "wo_multiply",
    "wo_cohomology",
]


class WeightMismatch(ValueError):
    """A bracket left the slice it was supposed to stay in."""


Generator = Tuple[Tuple[int, ...], int]   # (alpha, i) for x^alpha d/dx_i, i 0-based


def gen_weight(g: Generator) -> int:
    return sum(g[0]) - 1


def gen_key(g: Generator):
    return (sum(g[0]), g[0], g[1])


@lru_cache(maxsize=None)
def generators(q: int, max_weight: int) -> Tuple[Generator, ...]:
    """All generators of weight <= max_weight, ordered by (|alpha|, alpha, i)."""
    out = []
    for d in range(max_weight + 2):
        for alpha in sorted(_series.monomials(q, d)):
            for i in range(q):
                out.append((alpha, i))
    return tuple(sorted(out, key=gen_key))


def generator_field(g: Generator, q: int) -> PolyVectorField:
    alpha, i = g
    comps = [TruncPoly.zero(q) for _ in range(q)]
    comps[i] = TruncPoly.monomial(alpha)
    return PolyVectorField(comps)


@lru_cache(maxsize=None)
def bracket_generators(a: Generator, b: Generator) -> Tuple[Tuple[Generator, int], ...]:
    """[x^al d_i, x^be d_j] = be_i x^(al+be-e_i) d_j - al_j x^(al+be-e_j) d_i."""
    (al, i), (be, j) = a, b
    out: Dict[Generator, int] = {}
    if be[i]:
        e = tuple(x + y - (k == i) for k, (x, y) in enumerate(zip(al, be)))
        out[(e, j)] = out.get((e, j), 0) + be[i]
    if al[j]:
        e = tuple(x + y - (k == j) for k, (x, y) in enumerate(zip(al, be)))
        out[(e, i)] = out.get((e, i), 0) - al[j]
    return tuple(sorted(((g, c) for g, c in out.items() if c), key=lambda t: gen_key(t[0])))


def _wedges(gens: Sequence[Generator], p: int, w: int) -> List[Tuple[Generator, ...]]:
    """Strictly increasing p-tuples of generators with total weight w."""
    weights = [gen_weight(g) for g in gens]
    out: List[Tuple[Generator, ...]] = []

    def rec(start, left, target, acc):
        if left == 0:
            if target == 0:
                out.append(tuple(acc))
            return
        for k in range(start, len(gens)):
            wk = weights[k]
            # generators are sorted by weight, the rest weigh at least wk each
            if wk * left > target:
                break
            if target - wk > (left - 1) * (weights[-1] if gens else 0):
                continue
            acc.append(gens[k])
            rec(k + 1, left - 1, target - wk, acc)
            acc.pop()

    rec(0, p, w, [])
    return out


@lru_cache(maxsize=None)
def slice_basis(q: int, p: int, w: int) -> LabeledBasis:
    """Wedges of degree p spanning the cochains of weight w."""
    if p == 0:
        return LabeledBasis([()] if w == 0 else [])
    total = -w
    top = total + p - 1   # the other p-1 factors weigh at least -1 each
    if top < -1:
        return LabeledBasis([])
    return LabeledBasis(_wedges(generators(q, top), p, total))


def _place(g: Generator, rest: Tuple[Generator, ...]):
    """Sign and sorted wedge for xi_g ^ xi_rest, or (0, None) when g repeats."""
    key = gen_key(g)
    pos = 0
    for r in rest:
        if r == g:
            return 0, None
        if gen_key(r) < key:
            pos += 1
        else:
            break
    return (-1) ** pos, rest[:pos] + (g,) + rest[pos:]


@dataclass
class GFSlice:
    q: int
    p: int
    w: int
    basis: LabeledBasis
    target: LabeledBasis
    differential: SparseMatrix


@lru_cache(maxsize=None)
def _differential(q: int, p: int, w: int) -> SparseMatrix:
    src = slice_basis(q, p, w)
    tgt = slice_basis(q, p + 1, w)
    entries: Dict[Tuple[int, int], int] = {}
    for row, t in enumerate(tgt):
        for i in range(len(t)):
            for j in range(i + 1, len(t)):
                rest = t[:i] + t[i + 1:j] + t[j + 1:]
                outer = -1 if (i + j) % 2 else 1
                for g, c in bracket_generators(t[i], t[j]):
                    sign, s = _place(g, rest)
                    if not sign:
                        continue
                    col = src.get(s)
                    if col is None:
                        raise WeightMismatch(f"bracket of {t[i]}, {t[j]} leaves weight {w}")
                    key = (row, col)
                    entries[key] = entries.get(key, 0) + outer * sign * c
    return SparseMatrix(len(tgt), len(src), {k: v for k, v in entries.items() if v})


def gf_complex_slice(q: int, p: int, w: int) -> GFSlice:
    """Basis of the (p, w) slice and the differential into (p+1, w)."""
    if q < 1 or p < 0:
        raise ValueError("need q >= 1 and p >= 0")
    return GFSlice(q, p, w, slice_basis(q, p, w), slice_basis(q, p + 1, w), _differential(q, p, w))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CARTAN_COH_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def render_wedge(label: Tuple[Generator, ...]) -> str:
    if not label:
        return "1"
    return "^".join(_gen_name(g) for g in label)


def _gen_name(g: Generator) -> str:
    alpha, i = g
    if len(alpha) == 1:
        return f"xi{alpha[0]}"
    return "xi[" + ",".join(map(str, alpha)) + f";{i + 1}]"


def gf_cohomology(q: int, w: int, p_max: int, relative: bool = False) -> CohomologyTable:
    """Dimensions and representatives of the weight-w cohomology in degrees 0..p_max."""
    if p_max < 0:
        raise ValueError("p_max must be non-negative")
    degrees = range(p_max + 1)
    if relative:
        return _relative_cohomology(q, w, p_max)

    def one(p):
        d_in = _differential(q, p - 1, w) if p > 0 else SparseMatrix(len(slice_basis(q, 0, w)), 0)
        return cohomology_at(d_in, _differential(q, p, w))

    table = CohomologyTable()
    for p, grp in zip(degrees, _parallel_map(one, degrees)):
        basis = slice_basis(q, p, w)
        table.dims[p] = grp.dimension
        table.representatives[p] = [_sparse_rep(basis, v) for v in grp.representatives]
    return table


def _sparse_rep(basis: LabeledBasis, vec) -> Dict[str, str]:
    return {render_wedge(basis[k]): format_rational(v) for k, v in enumerate(vec) if v}


# -- contractions and Lie derivatives -------------------------------------------

def _as_combo(field) -> Tuple[Tuple[Generator, Fraction], ...]:
    if isinstance(field, PolyVectorField):
        out = []
        for i, comp in enumerate(field.components):
            for e, v in comp.terms.items():
                out.append(((e, i), v))
        return tuple(out)
    return tuple(field)


def contraction_matrix(q: int, p: int, w: int, field) -> SparseMatrix:
    """Matrix of c -> c(field, ...) from slice (p, w) to (p-1, w - weight(field)).

    ``field`` must be homogeneous; we only use weight-0 fields, so the target
    weight is w.
    """
    combo = _as_combo(field)
    src = slice_basis(q, p, w)
    tgt = slice_basis(q, p - 1, w) if p > 0 else LabeledBasis([])
    entries: Dict[Tuple[int, int], Fraction] = {}
    for row, r in enumerate(tgt):
        for g, c in combo:
            sign, s = _place(g, r)
            if not sign:
                continue
            col = src.get(s)
            if col is None:
                raise WeightMismatch("contraction field is not of weight 0")
            entries[(row, col)] = entries.get((row, col), 0) + sign * c
    return SparseMatrix(len(tgt), len(src), entries)


def lie_derivative_matrix(q: int, p: int, w: int, field) -> SparseMatrix:
    """(L_X c)(a_1..a_p) = -sum_k c(a_1, .., [X, a_k], .., a_p) on the (p, w) slice."""
    combo = _as_combo(field)
    basis = slice_basis(q, p, w)
    entries: Dict[Tuple[int, int], Fraction] = {}
    for row, t in enumerate(basis):
        for k in range(len(t)):
            rest = t[:k] + t[k + 1:]
            for g, c in combo:
                for h, b in bracket_generators(g, t[k]):
                    sign, s = _place(h, rest)
                    if not sign:
                        continue
                    # moving the k-th slot to the front costs (-1)^k
                    col = basis.get(s)
                    if col is None:
                        raise WeightMismatch("Lie derivative field is not of weight 0")
                    val = -c * b * sign * (-1) ** k
                    entries[(row, col)] = entries.get((row, col), 0) + val
    return SparseMatrix(len(basis), len(basis), entries)


def euler_field(q: int) -> Tuple[Tuple[Generator, Fraction], ...]:
    return tuple(((tuple(int(k == i) for k in range(q)), i), Fraction(1)) for i in range(q))


@dataclass
class EulerReport:
    q: int
    p: int
    w: int
    dimension: int
    lie_is_scalar: bool
    scalar: int
    homotopy_holds: bool
    cohomology_dim: int

    @property
    def ok(self) -> bool:
        return self.lie_is_scalar and self.homotopy_holds and self.cohomology_dim == 0

    def to_json(self) -> dict:
        return {"q": self.q, "p": self.p, "weight": self.w, "slice_dim": self.dimension,
                "lie_scalar": self.scalar, "lie_is_scalar": self.lie_is_scalar,
                "homotopy_holds": self.homotopy_holds, "cohomology_dim": self.cohomology_dim,
                "pass": self.ok}


def euler_homotopy_check(q: int, p: int, w: int, with_rank: bool = True) -> EulerReport:
    """Check d i_E + i_E d = L_E = w id on the (p, w) slice, E = sum x_i d_i.

    Because the scalar w is invertible,
    the homotopy forces the slice cohomology to vanish; ``with_rank`` also
    confirms this with an exact rank computation.
    """
    if w == 0:
        raise ValueError("the Euler homotopy needs a nonzero weight")
    e = euler_field(q)
    n = len(slice_basis(q, p, w))
    lie = lie_derivative_matrix(q, p, w, e)
    scalar = w
    lie_scalar = lie == SparseMatrix.identity(n).scale(scalar)
    d_p = _differential(q, p, w)
    homotopy = contraction_matrix(q, p + 1, w, e) @ d_p
    if p > 0:
        homotopy = homotopy + _differential(q, p - 1, w) @ contraction_matrix(q, p, w, e)
    homotopy_ok = homotopy == lie
    if with_rank:
        d_in = _differential(q, p - 1, w) if p > 0 else SparseMatrix(n, 0)
        dim = cohomology_at(d_in, d_p).dimension
    else:
        dim = 0 if (homotopy_ok and lie_scalar) else -1
    return EulerReport(q, p, w, n, lie_scalar, scalar, homotopy_ok, dim)


# -- relative cochains ----------------------------------------------------------------

def orthogonal_fields(q: int) -> List[Tuple[Tuple[Generator, Fraction], ...]]:
    """Basis x_j d_i - x_i d_j (i < j) of the orthogonal Lie algebra."""
    out = []
    for i in range(q):
        for j in range(i + 1, q):
            ej = tuple(int(k == j) for k in range(q))
            ei = tuple(int(k == i) for k in range(q))
            out.append((((ej, i), Fraction(1)), ((ei, j), Fraction(-1))))
    return out


def reflection_sign(label: Tuple[Generator, ...]) -> int:
    """Sign of a wedge under x_1 -> -x_1 (e_{alpha,i} picks up (-1)^(alpha_1 + [i=1]))."""
    s = 0
    for alpha, i in label:
        s += alpha[0] + (i == 0)
    return -1 if s % 2 else 1


@dataclass
class RelativeSubspace:
    q: int
    p: int
    w: int
    vectors: List[List[Fraction]]
    free_columns: List[int]

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    def coordinates(self, vec) -> Optional[List[Fraction]]:
        """Coordinates of ``vec`` in this basis, or None when it lies outside."""
        coords = [vec[c] for c in self.free_columns]
        recon = [Fraction(0)] * len(vec)
        for a, v in zip(coords, self.vectors):
            if a:
                for k, x in enumerate(v):
                    if x:
                        recon[k] += a * x
        if any(r != Fraction(x) for r, x in zip(recon, vec)):
            return None
        return coords


@lru_cache(maxsize=None)
def relative_projector(q: int, p: int, w: int = 0) -> RelativeSubspace:
    """Cochains that are horizontal and invariant for the orthogonal group.

    Conditions: i_X c = 0 and L_X c = 0 for each skew field X, and
    invariance under the reflection x_1 -> -x_1.
    """
    basis = slice_basis(q, p, w)
    n = len(basis)
    red = RowReducer(n)
    for k, lab in enumerate(basis):
        if reflection_sign(lab) < 0:
            red.add({k: 1})
    for x in orthogonal_fields(q):
        if p > 0:
            for row in contraction_matrix(q, p, w, x).rows():
                if row:
                    red.add(row)
        for row in lie_derivative_matrix(q, p, w, x).rows():
            if row:
                red.add(row)
    vectors = red.kernel()
    free = [c for c in range(n) if c not in red.pivots]
    return RelativeSubspace(q, p, w, vectors, free)


@lru_cache(maxsize=None)
def relative_differential(q: int, p: int, w: int = 0) -> SparseMatrix:
    src = relative_projector(q, p, w)
    tgt = relative_projector(q, p + 1, w)
    d = _differential(q, p, w)
    cols = []
    for v in src.vectors:
        image = d.apply(v)
        coords = tgt.coordinates(image)
        if coords is None:
            raise WeightMismatch("the differential does not preserve relative cochains")
        cols.append({k: c for k, c in enumerate(coords) if c})
    return SparseMatrix.from_columns(tgt.dimension, cols)


def _relative_cohomology(q: int, w: int, p_max: int) -> CohomologyTable:
    table = CohomologyTable()
    for p in range(p_max + 1):
        sub = relative_projector(q, p, w)
        d_in = relative_differential(q, p - 1, w) if p > 0 else SparseMatrix(sub.dimension, 0)
        grp = cohomology_at(d_in, relative_differential(q, p, w))
        basis = slice_basis(q, p, w)
        table.dims[p] = grp.dimension
        reps = []
        for coords in grp.representatives:
            full = [Fraction(0)] * len(basis)
            for a, v in zip(coords, sub.vectors):
                if a:
                    for k, x in enumerate(v):
                        full[k] += a * x
            reps.append(_sparse_rep(basis, full))
        table.representatives[p] = reps
    return table


# -- the truncated Weil algebra ------------------------------------------------------------

def odd_bound(q: int) -> int:
    """Largest odd i with 2i - 1 <= q (0 when there is none)."""
    best = 0
    i = 1
    while 2 * i - 1 <= q:
        best = i
        i += 2
    return best


def wo_generators(q: int) -> Tuple[List[int], List[int]]:
    """Indices of the odd generators h_i and of the Chern generators c_i."""
    return list(range(1, odd_bound(q) + 1, 2)), list(range(1, q + 1))


@dataclass(frozen=True, order=True)
class WOMonomial:
    """h_S c^beta with S a sorted tuple of odd indices and beta exponents of c_1..c_q."""

    hs: Tuple[int, ...]
    beta: Tuple[int, ...]

    @property
    def degree(self) -> int:
        return sum(2 * i - 1 for i in self.hs) + self.poly_degree

    @property
    def poly_degree(self) -> int:
        return sum(2 * (k + 1) * b for k, b in enumerate(self.beta))

    def __str__(self):
        parts = [f"h{i}" for i in self.hs]
        for k, b in enumerate(self.beta):
            if b == 1:
                parts.append(f"c{k + 1}")
            elif b > 1:
                parts.append(f"c{k + 1}^{b}")
        return "*".join(parts) if parts else "1"


def _poly_exponents(q: int, max_deg: int):
    def rec(k, left):
        if k == q:
            yield ()
            return
        step = 2 * (k + 1)
        for b in range(left // step + 1):
            for rest in rec(k + 1, left - b * step):
                yield (b,) + rest
    return list(rec(0, max_deg))


@lru_cache(maxsize=None)
def wo_basis(q: int, degree: int) -> LabeledBasis:
    hs_all, _ = wo_generators(q)
    out = []
    subsets = [()]
    for h in hs_all:
        subsets += [s + (h,) for s in subsets]
    for s in sorted(subsets, key=lambda t: (len(t), t)):
        hdeg = sum(2 * i - 1 for i in s)
        left = degree - hdeg
        if left < 0 or left % 2:
            continue
        if left > 2 * q:
            continue
        for beta in _poly_exponents(q, left):
            m = WOMonomial(s, beta)
            if m.poly_degree == left:
                out.append(m)
    return LabeledBasis(sorted(out, key=lambda m: (m.hs, tuple(-b for b in m.beta))))


WOElement = Dict[WOMonomial, Fraction]


def wo_multiply(a: WOElement, b: WOElement, q: int) -> WOElement:
    """Product in WO_q: exterior in h, truncated polynomial in c."""
    out: WOElement = {}
    for m1, v1 in a.items():
        for m2, v2 in b.items():
            if set(m1.hs) & set(m2.hs):
                continue
            inv = sum(1 for x in m1.hs for y in m2.hs if x > y)
            beta = tuple(x + y for x, y in zip(m1.beta, m2.beta))
            m = WOMonomial(tuple(sorted(m1.hs + m2.hs)), beta)
            if m.poly_degree > 2 * q:
                continue
            out[m] = out.get(m, 0) + (-1) ** inv * v1 * v2
    return {m: v for m, v in out.items() if v}


def wo_d(a: WOElement, q: int) -> WOElement:
    """d c_i = 0, d h_i = c_i, extended as a graded derivation."""
    out: WOElement = {}
    for m, v in a.items():
        for k, i in enumerate(m.hs):
            beta = list(m.beta)
            beta[i - 1] += 1
            t = WOMonomial(m.hs[:k] + m.hs[k + 1:], tuple(beta))
            if t.poly_degree > 2 * q:
                continue
            out[t] = out.get(t, 0) + (-1) ** k * v
    return {m: v for m, v in out.items() if v}


def _wo_matrix(q: int, degree: int) -> SparseMatrix:
    src = wo_basis(q, degree)
    tgt = wo_basis(q, degree + 1)
    entries = {}
    for col, m in enumerate(src):
        for t, v in wo_d({m: Fraction(1)}, q).items():
            entries[(tgt.index(t), col)] = v
    return SparseMatrix(len(tgt), len(src), entries)


def wo_cohomology(q: int, deg_max: int) -> CohomologyTable:
    if deg_max < 0:
        raise ValueError("deg_max must be non-negative")
    table = CohomologyTable()
    for k in range(deg_max + 1):
        basis = wo_basis(q, k)
        d_in = _wo_matrix(q, k - 1) if k > 0 else SparseMatrix(len(basis), 0)
        grp = cohomology_at(d_in, _wo_matrix(q, k))
        table.dims[k] = grp.dimension
        table.representatives[k] = [
            {str(basis[j]): format_rational(v) for j, v in enumerate(r) if v}
            for r in grp.representatives]
    return table
