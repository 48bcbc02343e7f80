"""Lie algebroids with connections over a polynomial base.

An algebroid of rank r over n-space is given in a global frame e_1..e_r by
its anchor ``rho(e_a) = sum_i anchor[a][i] d/dx_i`` and structure functions
``[e_a, e_b] = sum_c c[a][b][c] e_c``; brackets of arbitrary sections follow
from the Leibniz rule.  A connection on A is given by Christoffel symbols
``nabla_{d_i} e_a = sum_b gamma[i][a][b] e_b``.  Sections are tuples of
:class:`TruncPoly` components in the frame; vector fields are tuples of
components in the coordinate frame.

Everything is exact: identities are checked as polynomial identities and no
truncation happens unless the caller asks for it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Dict, List, Optional, Sequence, Tuple

from . import _series
from .formal import PolyVectorField, TruncPoly
from .linalg import (
    CohomologyTable, LabeledBasis, SparseMatrix, cohomology_at, parse_rational,
    solve,
)
from .verdict import Verdict

__all__ = [
    "NotFlatCartan",
    "NotWeightGraded",
    "DataError",
    "AlgebroidData",
    "AlgebroidConnection",
    "CartanPackage",
    "jacobi_check",
    "basic_curvature",
    "induced_connections",
    "pointwise_bracket",
    "extended_isotropy",
    "isotropy_transport_check",
    "double",
    "isotropy_embedding_check",
    "matched_pair_check",
    "tangent_matched_pair",
    "MixedCochain",
    "HaefligerBicomplex",
    "inf_haefliger",
    "double_equivalence_check",
    "mc_defect",
    "euler_package",
    "sl2_algebroid",
    "tangent_package",
    "action_package",
    "random_flat_package",
    "perturbable",
    "perturb_package",
    "homogeneous_packages",
]

Section = Tuple[TruncPoly, ...]
Field = Tuple[TruncPoly, ...]


class NotFlatCartan(ValueError):
    """The connection is not flat or not infinitesimally multiplicative."""


class NotWeightGraded(ValueError):
    """Cohomology was requested for data that is not weight-homogeneous."""


class DataError(ValueError):
    """Malformed algebroid, connection or package data."""


# -- small helpers on sections and fields ------------------------------------------------

def _zero(n: int) -> TruncPoly:
    return TruncPoly.zero(n)


def _const(n: int, c) -> TruncPoly:
    return TruncPoly.const(n, c)


def _apply(x: Field, f: TruncPoly) -> TruncPoly:
    """Derivative of f along the vector field with components x."""
    out = _zero(f.nvars)
    for i, xi in enumerate(x):
        if xi:
            df = f.diff(i)
            if df:
                out = out + xi * df
    return out


def _field_bracket(x: Field, y: Field) -> Field:
    return tuple(_apply(x, y[i]) - _apply(y, x[i]) for i in range(len(x)))


def _add(s: Sequence[TruncPoly], t: Sequence[TruncPoly]) -> Tuple[TruncPoly, ...]:
    return tuple(a + b for a, b in zip(s, t))


def _sub(s: Sequence[TruncPoly], t: Sequence[TruncPoly]) -> Tuple[TruncPoly, ...]:
    return tuple(a - b for a, b in zip(s, t))


def _mul(f, s: Sequence[TruncPoly]) -> Tuple[TruncPoly, ...]:
    return tuple(f * a for a in s)


def _is_zero(s: Sequence[TruncPoly]) -> bool:
    return not any(s)


def _unit(n: int, size: int, k: int) -> Tuple[TruncPoly, ...]:
    return tuple(_const(n, int(j == k)) for j in range(size))


def _as_poly(n: int, v) -> TruncPoly:
    if isinstance(v, TruncPoly):
        return v
    if isinstance(v, list):
        return TruncPoly.from_json(v, n)
    return _const(n, v)


def _sort_sign(t: Sequence[int]):
    """(sign, sorted tuple) of a permutation of distinct indices, or (0, None)."""
    lst = list(t)
    if len(set(lst)) != len(lst):
        return 0, None
    sign = 1
    for i in range(len(lst)):
        for j in range(i + 1, len(lst)):
            if lst[i] > lst[j]:
                sign = -sign
    return sign, tuple(sorted(lst))


def _render(s: Sequence[TruncPoly]) -> List[str]:
    return [repr(c) for c in s]


# -- algebroids ----------------------------------------------------------------------------

class AlgebroidData:
    """Anchor and structure functions of a Lie algebroid in a global frame."""

    def __init__(self, rank: int, basedim: int, anchor, structure, weights=None,
                 check_antisymmetry: bool = True):
        self.rank, self.basedim = rank, basedim
        n = basedim
        if len(anchor) != rank or any(len(row) != n for row in anchor):
            raise DataError(f"anchor must be a {rank} x {n} array")
        self.anchor: Tuple[Field, ...] = tuple(tuple(_as_poly(n, v) for v in row) for row in anchor)
        if (len(structure) != rank or any(len(row) != rank for row in structure)
                or any(len(cell) != rank for row in structure for cell in row)):
            raise DataError(f"structure functions must be a {rank}^3 array")
        self.structure = tuple(tuple(tuple(_as_poly(n, v) for v in cell) for cell in row)
                               for row in structure)
        if check_antisymmetry:
            for a in range(rank):
                for b in range(a, rank):
                    for c in range(rank):
                        if self.structure[a][b][c] + self.structure[b][a][c]:
                            raise DataError(f"structure functions not antisymmetric at "
                                            f"({a}, {b}; {c})")
        self.weights = tuple(weights) if weights is not None else None
        if self.weights is not None and len(self.weights) != rank:
            raise DataError("one weight per frame element is required")

    # sections -----------------------------------------------------------------
    def zero_section(self) -> Section:
        return tuple(_zero(self.basedim) for _ in range(self.rank))

    def frame(self, a: int) -> Section:
        return _unit(self.basedim, self.rank, a)

    def section(self, s) -> Section:
        """Accept a frame index or a sequence of component polynomials."""
        if isinstance(s, int):
            return self.frame(s)
        s = tuple(_as_poly(self.basedim, v) for v in s)
        if len(s) != self.rank:
            raise DataError(f"section needs {self.rank} components")
        return s

    def anchor_of(self, s: Section) -> Field:
        out = [_zero(self.basedim) for _ in range(self.basedim)]
        for a, f in enumerate(s):
            if f:
                for i, v in enumerate(self.anchor[a]):
                    if v:
                        out[i] = out[i] + f * v
        return tuple(out)

    def bracket(self, s: Section, t: Section) -> Section:
        r = self.rank
        out = list(_sub(tuple(_apply(self.anchor_of(s), tb) for tb in t),
                        tuple(_apply(self.anchor_of(t), sa) for sa in s)))
        for a in range(r):
            if not s[a]:
                continue
            for b in range(r):
                if not t[b] or a == b:
                    continue
                coef = s[a] * t[b]
                for c in range(r):
                    v = self.structure[a][b][c]
                    if v:
                        out[c] = out[c] + coef * v
        return tuple(out)

    # constructors -------------------------------------------------------------
    @classmethod
    def tangent(cls, n: int) -> "AlgebroidData":
        """The tangent algebroid with the coordinate frame."""
        anchor = [[int(i == a) for i in range(n)] for a in range(n)]
        zero = [[[0] * n for _ in range(n)] for _ in range(n)]
        return cls(n, n, anchor, zero, weights=[-1] * n)

    @classmethod
    def action(cls, fields: Sequence[Field], weights=None) -> "AlgebroidData":
        """Action algebroid of a finite-dimensional Lie algebra of vector fields.

        The structure constants are solved for exactly; a non-closed family
        raises :class:`DataError`.
        """
        fields = [tuple(f.components) if isinstance(f, PolyVectorField) else tuple(f)
                  for f in fields]
        r = len(fields)
        n = len(fields[0]) if fields else 0
        # unknowns: constants k_c with [V_a, V_b] = sum_c k_c V_c
        monos = sorted({e for f in fields for comp in f for e in comp.terms})
        rows = [(i, e) for i in range(n) for e in monos]
        cols = [[f[i].coeff(e) for (i, e) in rows] for f in fields]
        mat = SparseMatrix.from_columns(len(rows), cols) if r else None
        structure = [[[0] * r for _ in range(r)] for _ in range(r)]
        for a in range(r):
            for b in range(a + 1, r):
                br = _field_bracket(fields[a], fields[b])
                extra = {e for comp in br for e in comp.terms} - set(monos)
                if extra:
                    raise DataError(f"fields {a}, {b} do not close under the bracket")
                rhs = [br[i].coeff(e) for (i, e) in rows]
                sol = solve(mat, rhs)
                if sol is None:
                    raise DataError(f"fields {a}, {b} do not close under the bracket")
                for c in range(r):
                    structure[a][b][c] = sol[c]
                    structure[b][a][c] = -sol[c]
        return cls(r, n, fields, structure, weights)

    # serialization ------------------------------------------------------------
    def to_json(self) -> dict:
        out = {
            "rank": self.rank,
            "basedim": self.basedim,
            "anchor": [[v.to_json() for v in row] for row in self.anchor],
            "c": [[[v.to_json() for v in cell] for cell in row] for row in self.structure],
        }
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "AlgebroidData":
        try:
            return cls(int(data["rank"]), int(data["basedim"]), data["anchor"], data["c"],
                       data.get("weights"))
        except KeyError as exc:
            raise DataError(f"missing field {exc.args[0]!r}") from None


class AlgebroidConnection:
    """A connection on a trivial bundle of rank m along the algebroid ``alg``.

    ``coeffs[a][u][v]`` is the component on f_v of nabla_{e_a} f_u.
    """

    def __init__(self, alg: AlgebroidData, fiber_rank: int, coeffs):
        n = alg.basedim
        self.alg, self.fiber_rank = alg, fiber_rank
        if (len(coeffs) != alg.rank or any(len(row) != fiber_rank for row in coeffs)
                or any(len(cell) != fiber_rank for row in coeffs for cell in row)):
            raise DataError(f"connection coefficients must be {alg.rank} x {fiber_rank} x "
                            f"{fiber_rank}")
        self.coeffs = tuple(tuple(tuple(_as_poly(n, v) for v in cell) for cell in row)
                            for row in coeffs)

    def apply(self, s: Section, sigma: Section) -> Section:
        """nabla_s sigma."""
        out = list(_apply(self.alg.anchor_of(s), sv) for sv in sigma)
        for a, sa in enumerate(s):
            if not sa:
                continue
            for u, su in enumerate(sigma):
                if not su:
                    continue
                coef = sa * su
                for v, g in enumerate(self.coeffs[a][u]):
                    if g:
                        out[v] = out[v] + coef * g
        return tuple(out)

    def curvature(self, s: Section, t: Section, sigma: Section) -> Section:
        """k(s, t)sigma = nabla_{[s,t]} sigma - [nabla_s, nabla_t] sigma.

        This ordering makes k_{nabla^TX} = rho o k^bas hold without a sign.
        """
        commutator = _sub(self.apply(s, self.apply(t, sigma)), self.apply(t, self.apply(s, sigma)))
        return _sub(self.apply(self.alg.bracket(s, t), sigma), commutator)

    def flatness(self, name: str = "flatness", multipliers: bool = False) -> Verdict:
        v = Verdict(name)
        alg, m = self.alg, self.fiber_rank
        n = alg.basedim
        for a, b in combinations(range(alg.rank), 2):
            for u in range(m):
                k = self.curvature(alg.frame(a), alg.frame(b), _unit(n, m, u))
                v.record(_is_zero(k), pair=[a, b], fiber=u, value=_render(k))
        return v


def _sections_for(alg_rank: int, n: int, multipliers: bool):
    """Frame sections, optionally also multiplied by each coordinate."""
    mults = [_const(n, 1)] + ([TruncPoly.var(n, i) for i in range(n)] if multipliers else [])
    for a in range(alg_rank):
        for k, f in enumerate(mults):
            yield (a, k), _mul(f, _unit(n, alg_rank, a))


# -- Cartan packages -----------------------------------------------------------------------

class CartanPackage:
    """An algebroid together with a connection on it.

    The induced A-connections on TX and on A and the two flags (connection
    flat, basic curvature zero) are recomputed from the primary data.
    """

    def __init__(self, alg: AlgebroidData, gamma, parallel_frame=None):
        n, r = alg.basedim, alg.rank
        if len(gamma) != n or any(len(row) != r for row in gamma) \
                or any(len(cell) != r for row in gamma for cell in row):
            raise DataError(f"Christoffel symbols must be a {n} x {r} x {r} array")
        self.alg = alg
        self.gamma = tuple(tuple(tuple(_as_poly(n, v) for v in cell) for cell in row)
                           for row in gamma)
        self.tangent = AlgebroidData.tangent(n)
        self.connection = AlgebroidConnection(self.tangent, r, self.gamma)
        # parallel_frame[k] is a section with nabla = 0 (optional bookkeeping)
        self.parallel_frame = (tuple(alg.section(s) for s in parallel_frame)
                               if parallel_frame is not None else None)
        self._flags = None

    @property
    def rank(self) -> int:
        return self.alg.rank

    @property
    def basedim(self) -> int:
        return self.alg.basedim

    @property
    def weights(self):
        return self.alg.weights

    # the connection and its relatives -----------------------------------------
    def nabla(self, x: Field, s: Section) -> Section:
        """nabla_X s for a vector field X."""
        return self.connection.apply(tuple(x), s)

    def nabla_tx(self, s: Section, x: Field) -> Field:
        """nabla^{TX}_s X = [rho s, X] + rho(nabla_X s)."""
        return _add(_field_bracket(self.alg.anchor_of(s), x), self.alg.anchor_of(self.nabla(x, s)))

    def nabla_a(self, s: Section, t: Section) -> Section:
        """nabla^A_s t = nabla_{rho t} s + [s, t]."""
        return _add(self.nabla(self.alg.anchor_of(t), s), self.alg.bracket(s, t))

    def tx_connection(self) -> AlgebroidConnection:
        n, r = self.basedim, self.rank
        coeffs = [[list(self.nabla_tx(self.alg.frame(a), _unit(n, n, i))) for i in range(n)]
                  for a in range(r)]
        return AlgebroidConnection(self.alg, n, coeffs)

    def a_connection(self) -> AlgebroidConnection:
        r = self.rank
        coeffs = [[list(self.nabla_a(self.alg.frame(a), self.alg.frame(b))) for b in range(r)]
                  for a in range(r)]
        return AlgebroidConnection(self.alg, r, coeffs)

    def connection_curvature(self, i: int, j: int, s: Section) -> Section:
        n = self.basedim
        di, dj = _unit(n, n, i), _unit(n, n, j)
        return _sub(self.nabla(di, self.nabla(dj, s)), self.nabla(dj, self.nabla(di, s)))

    def basic_curvature(self, s: Section, t: Section, x: Field) -> Section:
        alg = self.alg
        out = self.nabla(x, alg.bracket(s, t))
        out = _sub(out, alg.bracket(self.nabla(x, s), t))
        out = _sub(out, alg.bracket(s, self.nabla(x, t)))
        out = _sub(out, self.nabla(self.nabla_tx(t, x), s))
        return _add(out, self.nabla(self.nabla_tx(s, x), t))

    # flags --------------------------------------------------------------------
    def flatness_verdict(self) -> Verdict:
        v = Verdict("connection_flat")
        for i, j in combinations(range(self.basedim), 2):
            for a in range(self.rank):
                k = self.connection_curvature(i, j, self.alg.frame(a))
                v.record(_is_zero(k), directions=[i, j], frame=a, value=_render(k))
        return v

    def multiplicativity_verdict(self) -> Verdict:
        v = Verdict("basic_curvature_zero")
        n = self.basedim
        for a, b in combinations(range(self.rank), 2):
            for i in range(n):
                k = self.basic_curvature(self.alg.frame(a), self.alg.frame(b), _unit(n, n, i))
                v.record(_is_zero(k), pair=[a, b], direction=i, value=_render(k))
        return v

    @property
    def flags(self) -> Dict[str, bool]:
        if self._flags is None:
            self._flags = {"flat": self.flatness_verdict().ok,
                           "infinitesimally_multiplicative": self.multiplicativity_verdict().ok}
        return dict(self._flags)

    @property
    def is_flat_cartan(self) -> bool:
        f = self.flags
        return f["flat"] and f["infinitesimally_multiplicative"]

    def require_flat_cartan(self):
        if not self.is_flat_cartan:
            raise NotFlatCartan(f"package flags: {self.flags}")

    # transformations -----------------------------------------------------------
    def change_frame(self, matrix, inverse) -> "CartanPackage":
        """Re-express the package in the frame e'_a = sum_b matrix[b][a] e_b.

        ``inverse`` must be the polynomial inverse matrix.
        """
        alg, n, r = self.alg, self.basedim, self.rank
        m = [[_as_poly(n, v) for v in row] for row in matrix]
        minv = [[_as_poly(n, v) for v in row] for row in inverse]
        for a in range(r):
            for b in range(r):
                prod = _zero(n)
                for k in range(r):
                    prod = prod + m[a][k] * minv[k][b]
                if prod != _const(n, int(a == b)):
                    raise DataError("frame change matrix and inverse do not match")
        cols = [tuple(m[b][a] for b in range(r)) for a in range(r)]

        def to_new(s):
            return tuple(sum((minv[c][b] * s[b] for b in range(r)), _zero(n)) for c in range(r))

        anchor = [alg.anchor_of(cols[a]) for a in range(r)]
        structure = [[list(to_new(alg.bracket(cols[a], cols[b]))) for b in range(r)]
                     for a in range(r)]
        gamma = [[list(to_new(self.nabla(_unit(n, n, i), cols[a]))) for a in range(r)]
                 for i in range(n)]
        parallel = ([to_new(s) for s in self.parallel_frame]
                    if self.parallel_frame is not None else None)
        return CartanPackage(AlgebroidData(r, n, anchor, structure, alg.weights), gamma, parallel)

    def push_forward(self, phi: Sequence[TruncPoly], phi_inv: Sequence[TruncPoly]) -> "CartanPackage":
        """Transport the package along a polynomial diffeomorphism with polynomial inverse."""
        alg, n, r = self.alg, self.basedim, self.rank
        phi = [_as_poly(n, p) for p in phi]
        phi_inv = [_as_poly(n, p) for p in phi_inv]
        ident = [TruncPoly.var(n, i) for i in range(n)]
        if [p.substitute(phi_inv) for p in phi] != ident:
            raise DataError("phi_inv is not the inverse of phi")

        def pull(f):   # f o phi^{-1}
            return f.substitute(phi_inv)

        jac = [[pull(phi[i].diff(j)) for j in range(n)] for i in range(n)]
        anchor = []
        for a in range(r):
            comps = [pull(v) for v in alg.anchor[a]]
            anchor.append([sum((jac[i][j] * comps[j] for j in range(n)), _zero(n))
                           for i in range(n)])
        structure = [[[pull(v) for v in cell] for cell in row] for row in alg.structure]
        dinv = [[phi_inv[i].diff(j) for j in range(n)] for i in range(n)]
        gamma = [[[sum((pull(self.gamma[i][a][b]) * dinv[i][j] for i in range(n)), _zero(n))
                   for b in range(r)] for a in range(r)] for j in range(n)]
        parallel = ([[pull(v) for v in s] for s in self.parallel_frame]
                    if self.parallel_frame is not None else None)
        weights = alg.weights if all(p.is_homogeneous() == 1 for p in phi) else None
        return CartanPackage(AlgebroidData(r, n, anchor, structure, weights), gamma, parallel)

    # serialization --------------------------------------------------------------
    def to_json(self) -> dict:
        out = self.alg.to_json()
        out["gamma"] = [[[v.to_json() for v in cell] for cell in row] for row in self.gamma]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CartanPackage":
        alg = AlgebroidData.from_json(data)
        gamma = data.get("gamma")
        if gamma is None:
            gamma = [[[0] * alg.rank for _ in range(alg.rank)] for _ in range(alg.basedim)]
        return cls(alg, gamma)


# -- verification routines -------------------------------------------------------------------

def jacobi_check(alg: AlgebroidData) -> Verdict:
    """Anchor preserves brackets and Jacobi holds, on all frame pairs and triples."""
    v = Verdict("algebroid")
    r = alg.rank
    for a, b in combinations(range(r), 2):
        lhs = alg.anchor_of(alg.bracket(alg.frame(a), alg.frame(b)))
        rhs = _field_bracket(alg.anchor[a], alg.anchor[b])
        v.record(lhs == rhs, axiom="anchor", pair=[a, b], defect=_render(_sub(lhs, rhs)))
    for a, b, c in combinations(range(r), 3):
        ea, eb, ec = alg.frame(a), alg.frame(b), alg.frame(c)
        total = _add(_add(alg.bracket(ea, alg.bracket(eb, ec)), alg.bracket(eb, alg.bracket(ec, ea))),
                     alg.bracket(ec, alg.bracket(ea, eb)))
        v.record(_is_zero(total), axiom="jacobi", triple=[a, b, c], defect=_render(total))
    return v


def basic_curvature(pkg: CartanPackage, s, t, x) -> Section:
    """k^bas(s, t)X for frame indices or explicit sections and a vector field."""
    if isinstance(x, PolyVectorField):
        x = x.components
    return pkg.basic_curvature(pkg.alg.section(s), pkg.alg.section(t),
                               tuple(_as_poly(pkg.basedim, c) for c in x))


@dataclass
class InducedConnections:
    tx: AlgebroidConnection
    a: AlgebroidConnection
    report: Verdict


def induced_connections(pkg: CartanPackage) -> InducedConnections:
    """nabla^{TX}, nabla^A and a check of their curvature relations to k^bas."""
    tx, ac = pkg.tx_connection(), pkg.a_connection()
    alg, n, r = pkg.alg, pkg.basedim, pkg.rank
    v = Verdict("curvature_relations")
    for a, b in combinations(range(r), 2):
        ea, eb = alg.frame(a), alg.frame(b)
        for i in range(n):
            di = _unit(n, n, i)
            lhs = tx.curvature(ea, eb, di)
            rhs = alg.anchor_of(pkg.basic_curvature(ea, eb, di))
            v.record(lhs == rhs, relation="tangent", pair=[a, b], direction=i)
        for c in range(r):
            lhs = ac.curvature(ea, eb, alg.frame(c))
            rhs = pkg.basic_curvature(ea, eb, alg.anchor[c])
            v.record(lhs == rhs, relation="algebroid", pair=[a, b], frame=c)
    return InducedConnections(tx, ac, v)


def pointwise_bracket(pkg: CartanPackage, s, t) -> Section:
    """{s, t} = [s, t] - nabla_{rho s} t + nabla_{rho t} s."""
    alg = pkg.alg
    s, t = alg.section(s), alg.section(t)
    out = _sub(alg.bracket(s, t), pkg.nabla(alg.anchor_of(s), t))
    return _add(out, pkg.nabla(alg.anchor_of(t), s))


@dataclass
class IsotropyAlgebra:
    point: Tuple[Fraction, ...]
    constants: List[List[List[Fraction]]]   # [a][b][c]: coefficient of e_c in {e_a, e_b}
    jacobi: bool

    def to_json(self) -> dict:
        from .linalg import format_rational
        return {"point": [format_rational(x) for x in self.point],
                "structure_constants": [[[format_rational(v) for v in cell] for cell in row]
                                        for row in self.constants],
                "jacobi": self.jacobi}


def _constants_jacobi(k) -> bool:
    r = len(k)
    for a, b, c in combinations(range(r), 3):
        for e in range(r):
            tot = 0
            for (x, y, z) in ((a, b, c), (b, c, a), (c, a, b)):
                tot += sum(k[y][z][d] * k[x][d][e] for d in range(r))
            if tot:
                return False
    return True


def extended_isotropy(pkg: CartanPackage, point: Sequence, require_lie: bool = True) -> IsotropyAlgebra:
    """Structure constants of the pointwise bracket on the fibre at ``point``."""
    if require_lie:
        pkg.require_flat_cartan()
    point = tuple(parse_rational(x) for x in point)
    r = pkg.rank
    k = [[[Fraction(0)] * r for _ in range(r)] for _ in range(r)]
    for a in range(r):
        for b in range(r):
            br = pointwise_bracket(pkg, a, b)
            k[a][b] = [Fraction(c.evaluate(point)) for c in br]
    return IsotropyAlgebra(point, k, _constants_jacobi(k))


def isotropy_transport_check(pkg: CartanPackage, points: Sequence[Sequence]) -> Verdict:
    """Parallel frames identify the extended isotropy algebras at different points.

    Uses the package's recorded parallel frame: verifies it is parallel and
    that the pointwise brackets of its members have the same structure
    constants, in that frame, at every sample point.
    """
    v = Verdict("isotropy_transport")
    frame = pkg.parallel_frame
    if frame is None:
        v.fail(reason="package has no recorded parallel frame")
        return v
    n, r = pkg.basedim, pkg.rank
    for k, s in enumerate(frame):
        for i in range(n):
            v.record(_is_zero(pkg.nabla(_unit(n, n, i), s)), parallel=k, direction=i)
    reference = None
    for pt in points:
        pt = tuple(parse_rational(x) for x in pt)
        mat = SparseMatrix.from_columns(r, [[Fraction(c.evaluate(pt)) for c in s] for s in frame])
        consts = []
        for a in range(r):
            for b in range(r):
                br = pointwise_bracket(pkg, frame[a], frame[b])
                sol = solve(mat, [Fraction(c.evaluate(pt)) for c in br])
                consts.append(tuple(sol) if sol is not None else None)
        if reference is None:
            reference = consts
        v.record(consts == reference and None not in consts, point=list(pt))
    return v


def double(pkg: CartanPackage, require_flat: bool = True) -> AlgebroidData:
    """The double A + TX as an algebroid of rank r + n in the frame (e_a, d_i)."""
    if require_flat:
        pkg.require_flat_cartan()
    alg, n, r = pkg.alg, pkg.basedim, pkg.rank
    size = r + n
    anchor = [list(alg.anchor[a]) for a in range(r)] + [list(_unit(n, n, i)) for i in range(n)]
    zero = _zero(n)
    structure = [[[zero] * size for _ in range(size)] for _ in range(size)]
    tx = pkg.tx_connection()
    for a in range(r):
        for b in range(r):
            structure[a][b] = list(alg.structure[a][b]) + [zero] * n
        for i in range(n):
            # [(e_a, 0), (0, d_i)] = (-nabla_{d_i} e_a, nabla^{TX}_{e_a} d_i)
            first = [-g for g in pkg.gamma[i][a]]
            second = list(tx.coeffs[a][i])
            structure[a][r + i] = first + second
            structure[r + i][a] = [-v for v in first + second]
    weights = None
    if alg.weights is not None:
        weights = list(alg.weights) + [-1] * n
    return AlgebroidData(size, n, anchor, structure, weights)


def split_section(pkg: CartanPackage, s: Section, x: Field) -> Section:
    return tuple(s) + tuple(x)


def isotropy_embedding_check(pkg: CartanPackage) -> Verdict:
    """s -> (s, -rho s) lands in ker rho_D and carries {,} to the double bracket."""
    dbl = double(pkg)
    alg = pkg.alg
    v = Verdict("isotropy_embedding")

    def embed(s):
        return tuple(s) + tuple(-c for c in alg.anchor_of(s))

    for a in range(pkg.rank):
        v.record(_is_zero(dbl.anchor_of(embed(alg.frame(a)))), kernel=a)
    for a, b in combinations(range(pkg.rank), 2):
        lhs = dbl.bracket(embed(alg.frame(a)), embed(alg.frame(b)))
        rhs = embed(pointwise_bracket(pkg, a, b))
        v.record(lhs == rhs, pair=[a, b])
    return v


# -- matched pairs --------------------------------------------------------------------------

MATCHED_PAIR_AXIOMS = ("flatness", "i", "ii", "iii")


def matched_pair_check(a1: AlgebroidData, nabla1: AlgebroidConnection, a2: AlgebroidData,
                       nabla2: AlgebroidConnection, multipliers: bool = True) -> Verdict:
    """Check that (a1, a2) with mutual actions nabla1 (a1 on a2), nabla2 (a2 on a1)
    form a matched pair.

    Flatness of both actions is checked first, then the three compatibility
    conditions, on frame sections and (with ``multipliers``) on their
    coordinate multiples.  ``details['violated']`` lists the failing axioms in
    order and ``details['first_violated']`` names the first.
    """
    if nabla1.alg is not a1 and nabla1.alg.to_json() != a1.to_json():
        raise DataError("first connection is not along the first algebroid")
    if nabla2.alg is not a2 and nabla2.alg.to_json() != a2.to_json():
        raise DataError("second connection is not along the second algebroid")
    if nabla1.fiber_rank != a2.rank or nabla2.fiber_rank != a1.rank:
        raise DataError("connection fibre ranks do not match the algebroids")
    if a1.basedim != a2.basedim:
        raise DataError("algebroids over different bases")
    n = a1.basedim
    sub: Dict[str, Verdict] = {k: Verdict(k) for k in MATCHED_PAIR_AXIOMS}
    sub["flatness"].merge(nabla1.flatness(), "first_action")
    sub["flatness"].merge(nabla2.flatness(), "second_action")
    secs1 = list(_sections_for(a1.rank, n, multipliers))
    secs2 = list(_sections_for(a2.rank, n, multipliers))
    n1, n2 = nabla1.apply, nabla2.apply
    for (ka, al), (kb, be) in product(secs1, secs2):
        lhs = _field_bracket(a1.anchor_of(al), a2.anchor_of(be))
        rhs = _add(tuple(-c for c in a1.anchor_of(n2(be, al))), a2.anchor_of(n1(al, be)))
        sub["i"].record(lhs == rhs, first=ka, second=kb)
    for (ka, al) in secs1:
        for (kb, b1), (kc, b2) in combinations(secs2, 2):
            lhs = n1(al, a2.bracket(b1, b2))
            rhs = _add(a2.bracket(n1(al, b1), b2), a2.bracket(b1, n1(al, b2)))
            rhs = _sub(_add(rhs, n1(n2(b2, al), b1)), n1(n2(b1, al), b2))
            sub["ii"].record(lhs == rhs, first=ka, second=[kb, kc])
    for (kb, be) in secs2:
        for (ka, x1), (kc, x2) in combinations(secs1, 2):
            lhs = n2(be, a1.bracket(x1, x2))
            rhs = _add(a1.bracket(n2(be, x1), x2), a1.bracket(x1, n2(be, x2)))
            rhs = _sub(_add(rhs, n2(n1(x2, be), x1)), n2(n1(x1, be), x2))
            sub["iii"].record(lhs == rhs, second=kb, first=[ka, kc])
    v = Verdict("matched_pair")
    violated = []
    for k in MATCHED_PAIR_AXIOMS:
        v.merge(sub[k], k)
        if not sub[k].ok:
            violated.append(k)
    v.details["violated"] = violated
    v.details["first_violated"] = violated[0] if violated else None
    return v


def tangent_matched_pair(pkg: CartanPackage):
    """The matched pair (A, TX) with actions nabla^{TX} and nabla."""
    return pkg.alg, pkg.tx_connection(), pkg.tangent, pkg.connection


# -- the infinitesimal Haefliger bicomplex -----------------------------------------------------

Key = Tuple[Tuple[int, ...], Tuple[int, ...]]


@dataclass
class MixedCochain:
    """Element of C^p(A, Lambda^q T*X): coefficients of e^A (x) dx^I, A and I increasing."""

    p: int
    q: int
    coeffs: Dict[Key, TruncPoly] = field(default_factory=dict)

    def __post_init__(self):
        for (a_idx, i_idx) in self.coeffs:
            if len(a_idx) != self.p or len(i_idx) != self.q:
                raise DataError(f"index ({a_idx}, {i_idx}) does not have bidegree "
                                f"({self.p}, {self.q})")
            if list(a_idx) != sorted(set(a_idx)) or list(i_idx) != sorted(set(i_idx)):
                raise DataError("wedge indices must be strictly increasing")
        self.coeffs = {k: v for k, v in self.coeffs.items() if v}

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        return (isinstance(other, MixedCochain) and (self.p, self.q) == (other.p, other.q)
                and self.coeffs == other.coeffs)

    def __add__(self, other: "MixedCochain") -> "MixedCochain":
        if (self.p, self.q) != (other.p, other.q):
            raise DataError("bidegrees differ")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return MixedCochain(self.p, self.q, out)

    def scale(self, c) -> "MixedCochain":
        return MixedCochain(self.p, self.q, {k: v * c for k, v in self.coeffs.items()})

    def value(self, a_idx: Sequence[int], i_idx: Sequence[int], n: int) -> TruncPoly:
        sa, a_sorted = _sort_sign(a_idx)
        si, i_sorted = _sort_sign(i_idx)
        if not sa or not si:
            return _zero(n)
        v = self.coeffs.get((a_sorted, i_sorted))
        if v is None:
            return _zero(n)
        return v if sa * si == 1 else -v

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q,
                "coefficients": [{"algebroid": list(a), "form": list(i), "poly": v.to_json()}
                                 for (a, i), v in sorted(self.coeffs.items())]}


class HaefligerBicomplex:
    """The differentials d_A (via nabla^{TX}) and d (via nabla) on mixed cochains."""

    def __init__(self, pkg: CartanPackage):
        self.pkg = pkg
        self.r, self.n = pkg.rank, pkg.basedim
        self.tx = pkg.tx_connection()

    def d_algebroid(self, w: MixedCochain) -> MixedCochain:
        pkg, r, n = self.pkg, self.r, self.n
        alg, tx = pkg.alg, self.tx.coeffs
        p, q = w.p, w.q
        out: Dict[Key, TruncPoly] = {}
        if not w.coeffs:
            return MixedCochain(p + 1, q)
        for a2 in combinations(range(r), p + 1):
            for j in combinations(range(n), q):
                val = _zero(n)
                for k, a in enumerate(a2):
                    rest = a2[:k] + a2[k + 1:]
                    term = _apply(alg.anchor[a], w.value(rest, j, n))
                    for m, jm in enumerate(j):
                        for t, coef in enumerate(tx[a][jm]):
                            if coef:
                                jj = j[:m] + (t,) + j[m + 1:]
                                term = term - coef * w.value(rest, jj, n)
                    val = val + term if k % 2 == 0 else val - term
                for k, l in combinations(range(p + 1), 2):
                    rest = a2[:k] + a2[k + 1:l] + a2[l + 1:]
                    sgn = 1 if (k + l) % 2 == 0 else -1
                    for c, coef in enumerate(alg.structure[a2[k]][a2[l]]):
                        if coef:
                            val = val + coef * w.value((c,) + rest, j, n) * sgn
                if val:
                    out[(a2, j)] = val
        return MixedCochain(p + 1, q, out)

    def d_form(self, w: MixedCochain) -> MixedCochain:
        pkg, r, n = self.pkg, self.r, self.n
        gamma = pkg.gamma
        p, q = w.p, w.q
        out: Dict[Key, TruncPoly] = {}
        if not w.coeffs:
            return MixedCochain(p, q + 1)
        for a_idx in combinations(range(r), p):
            for j2 in combinations(range(n), q + 1):
                val = _zero(n)
                for k, i in enumerate(j2):
                    rest = j2[:k] + j2[k + 1:]
                    term = w.value(a_idx, rest, n).diff(i)
                    for m, am in enumerate(a_idx):
                        for b, coef in enumerate(gamma[i][am]):
                            if coef:
                                aa = a_idx[:m] + (b,) + a_idx[m + 1:]
                                term = term - coef * w.value(aa, rest, n)
                    val = val + term if k % 2 == 0 else val - term
                if val:
                    out[(a_idx, j2)] = val
        return MixedCochain(p, q + 1, out)

    def total(self, w: MixedCochain) -> Dict[Tuple[int, int], MixedCochain]:
        """D = d_A + (-1)^p d, returned by bidegree."""
        dd = self.d_form(w)
        if w.p % 2:
            dd = dd.scale(-1)
        return {(w.p + 1, w.q): self.d_algebroid(w), (w.p, w.q + 1): dd}

    # bases ------------------------------------------------------------------------
    def basis(self, p: int, q: int, degree_bound: int):
        """Monomial basis cochains of bidegree (p, q), coefficient degree <= bound."""
        n = self.n
        for a_idx in combinations(range(self.r), p):
            for i_idx in combinations(range(n), q):
                for e in _series.monomials_upto(n, degree_bound):
                    yield MixedCochain(p, q, {(a_idx, i_idx): TruncPoly(n, {e: 1})})

    def cochain_weight(self, a_idx, i_idx, exp) -> int:
        weights = self.pkg.weights
        return sum(exp) + len(i_idx) - sum(weights[a] for a in a_idx)

    def slice_basis(self, p: int, q: int, weight: int) -> LabeledBasis:
        labels = []
        weights = self.pkg.weights
        n = self.n
        for a_idx in combinations(range(self.r), p):
            deg = weight + sum(weights[a] for a in a_idx) - q
            if deg < 0:
                continue
            for i_idx in combinations(range(n), q):
                for e in _series.monomials(n, deg):
                    labels.append((a_idx, i_idx, e))
        return LabeledBasis(labels)


def _require_weights(pkg: CartanPackage):
    """Raise NotWeightGraded unless every structure function is homogeneous of
    the degree its weights demand."""
    w = pkg.weights
    if w is None:
        raise NotWeightGraded("package carries no frame weights")
    alg = pkg.alg

    def check(poly, deg, what):
        if poly and (deg < 0 or poly.is_homogeneous() != deg):
            raise NotWeightGraded(f"{what} is not homogeneous of degree {deg}")

    for a in range(pkg.rank):
        for i in range(pkg.basedim):
            check(alg.anchor[a][i], w[a] + 1, f"anchor[{a}][{i}]")
        for b in range(pkg.rank):
            for c in range(pkg.rank):
                check(alg.structure[a][b][c], w[a] + w[b] - w[c], f"c[{a}][{b}][{c}]")
    for i in range(pkg.basedim):
        for a in range(pkg.rank):
            for b in range(pkg.rank):
                check(pkg.gamma[i][a][b], w[a] - w[b] - 1, f"gamma[{i}][{a}][{b}]")


def _total_slice(bic: HaefligerBicomplex, k: int, weight: int):
    """Basis of total degree k at a weight, as (p, q, label) triples."""
    out = []
    for p in range(0, min(k, bic.r) + 1):
        q = k - p
        if q > bic.n:
            continue
        for lab in bic.slice_basis(p, q, weight):
            out.append((p, q, lab))
    return LabeledBasis(out)


def _total_matrix(bic: HaefligerBicomplex, k: int, weight: int) -> SparseMatrix:
    src, tgt = _total_slice(bic, k, weight), _total_slice(bic, k + 1, weight)
    n = bic.n
    cols = []
    for (p, q, (a_idx, i_idx, e)) in src:
        w = MixedCochain(p, q, {(a_idx, i_idx): TruncPoly(n, {e: 1})})
        col: Dict[int, Fraction] = {}
        for (pp, qq), img in bic.total(w).items():
            for (aa, ii), poly in img.coeffs.items():
                for ee, c in poly.terms.items():
                    row = tgt.get((pp, qq, (aa, ii, ee)))
                    if row is None:
                        raise NotWeightGraded("differential leaves the weight slice")
                    col[row] = col.get(row, 0) + c
        cols.append(col)
    return SparseMatrix.from_columns(len(tgt), cols)


def haefliger_cohomology(pkg: CartanPackage, weight: int) -> CohomologyTable:
    """Total cohomology of the weight slice, all total degrees 0..r+n."""
    _require_weights(pkg)
    bic = HaefligerBicomplex(pkg)
    top = pkg.rank + pkg.basedim
    mats = [_total_matrix(bic, k, weight) for k in range(top + 1)]
    dims, reps = {}, {}
    for k in range(top + 1):
        d_in = mats[k - 1] if k > 0 else SparseMatrix(mats[k].ncols, 0)
        grp = cohomology_at(d_in, mats[k])
        dims[k] = grp.dimension
        reps[k] = []
    return CohomologyTable(dims, reps)


@dataclass
class HaefligerReport:
    squares: Dict[str, Verdict]
    cohomology: Optional[CohomologyTable] = None
    weight: Optional[int] = None

    @property
    def commutes(self) -> bool:
        return self.squares["dA_d_commute"].ok

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.squares.values())

    def failing_squares(self) -> List[str]:
        return [k for k, v in self.squares.items() if not v.ok]

    def to_json(self) -> dict:
        out = {"pass": self.ok, "squares": {k: v.to_json() for k, v in self.squares.items()}}
        if self.cohomology is not None:
            out["weight"] = self.weight
            out["cohomology"] = self.cohomology.dim_list()
        return out


def inf_haefliger(pkg: CartanPackage, p_max: int, q_max: int, degree_bound: int = 4,
                  weight: Optional[int] = None) -> HaefligerReport:
    """Check the bicomplex identities on all basis cochains within the bounds.

    Basis cochains have p <= p_max, q <= q_max and coefficient monomials of
    degree <= degree_bound.  With ``weight`` the total cohomology of that
    weight slice is computed as well (requires weight-homogeneous data).
    """
    bic = HaefligerBicomplex(pkg)
    names = ("dA_d_commute", "dA_squared", "d_squared")
    squares = {k: Verdict(k) for k in names}
    for p in range(min(p_max, pkg.rank) + 1):
        for q in range(min(q_max, pkg.basedim) + 1):
            for w in bic.basis(p, q, degree_bound):
                label = {"bidegree": [p, q], "basis": [list(k[0]) + ["|"] + list(k[1])
                                                     for k in w.coeffs][0],
                         "monomial": list(next(iter(w.coeffs.values())).terms)[0]}
                da = bic.d_algebroid(w)
                dd = bic.d_form(w)
                squares["dA_d_commute"].record(bic.d_form(da) == bic.d_algebroid(dd), **label)
                squares["dA_squared"].record(bic.d_algebroid(da).is_zero(), **label)
                squares["d_squared"].record(bic.d_form(dd).is_zero(), **label)
    report = HaefligerReport(squares)
    if weight is not None:
        report.cohomology = haefliger_cohomology(pkg, weight)
        report.weight = weight
    return report


# -- the double as a CE complex ---------------------------------------------------------------

def ce_differential(alg: AlgebroidData, cochain: Dict[Tuple[int, ...], TruncPoly], p: int
                    ) -> Dict[Tuple[int, ...], TruncPoly]:
    """Chevalley-Eilenberg differential of an algebroid on functions-valued p-cochains."""
    n, r = alg.basedim, alg.rank

    def value(idx):
        sign, srt = _sort_sign(idx)
        if not sign or srt not in cochain:
            return _zero(n)
        v = cochain[srt]
        return v if sign == 1 else -v

    out = {}
    for k_idx in combinations(range(r), p + 1):
        val = _zero(n)
        for k, a in enumerate(k_idx):
            term = _apply(alg.anchor[a], value(k_idx[:k] + k_idx[k + 1:]))
            val = val + term if k % 2 == 0 else val - term
        for k, l in combinations(range(p + 1), 2):
            rest = k_idx[:k] + k_idx[k + 1:l] + k_idx[l + 1:]
            sgn = 1 if (k + l) % 2 == 0 else -1
            for c, coef in enumerate(alg.structure[k_idx[k]][k_idx[l]]):
                if coef:
                    val = val + coef * value((c,) + rest) * sgn
        if val:
            out[k_idx] = val
    return out


def _to_double(r: int, w: MixedCochain) -> Dict[Tuple[int, ...], TruncPoly]:
    return {tuple(a) + tuple(r + i for i in idx): v for (a, idx), v in w.coeffs.items()}


def _ce_cohomology(alg: AlgebroidData, weight: int) -> CohomologyTable:
    n, r = alg.basedim, alg.rank
    weights = alg.weights

    def basis(k):
        labels = []
        for idx in combinations(range(r), k):
            deg = weight + sum(weights[a] for a in idx)
            if deg >= 0:
                labels.extend((idx, e) for e in _series.monomials(n, deg))
        return LabeledBasis(labels)

    bases = [basis(k) for k in range(r + 2)]
    mats = []
    for k in range(r + 1):
        cols = []
        for (idx, e) in bases[k]:
            img = ce_differential(alg, {idx: TruncPoly(n, {e: 1})}, k)
            col = {}
            for kk, poly in img.items():
                for ee, c in poly.terms.items():
                    row = bases[k + 1].get((kk, ee))
                    if row is None:
                        raise NotWeightGraded("CE differential leaves the weight slice")
                    col[row] = col.get(row, 0) + c
            cols.append(col)
        mats.append(SparseMatrix.from_columns(len(bases[k + 1]), cols))
    dims = {}
    for k in range(r + 1):
        d_in = mats[k - 1] if k > 0 else SparseMatrix(len(bases[0]), 0)
        dims[k] = cohomology_at(d_in, mats[k]).dimension
    return CohomologyTable(dims, {k: [] for k in dims})


def double_equivalence_check(pkg: CartanPackage, degree_bound: int = 3, weight: int = 0,
                             coefficient_bound: int = 3) -> Verdict:
    """Transported CE differential of the double equals the total Haefliger differential.

    Every basis mixed cochain of total degree <= degree_bound with coefficient
    degree <= coefficient_bound is compared; then the weight slice
    cohomologies of both complexes are computed independently.
    """
    pkg.require_flat_cartan()
    dbl = double(pkg)
    bic = HaefligerBicomplex(pkg)
    r = pkg.rank
    v = Verdict("double_equivalence")
    for k in range(degree_bound + 1):
        for p in range(min(k, r) + 1):
            q = k - p
            if q > pkg.basedim:
                continue
            for w in bic.basis(p, q, coefficient_bound):
                lhs = ce_differential(dbl, _to_double(r, w), k)
                rhs: Dict[Tuple[int, ...], TruncPoly] = {}
                for img in bic.total(w).values():
                    rhs.update(_to_double(r, img))
                v.record(lhs == rhs, total_degree=k, bidegree=[p, q],
                         basis=[list(x) for x in next(iter(w.coeffs))])
    haef = haefliger_cohomology(pkg, weight)
    ce = _ce_cohomology(dbl, weight)
    v.details["weight"] = weight
    v.details["haefliger"] = haef.dim_list()
    v.details["double_ce"] = ce.dim_list()
    v.record(haef.dim_list() == ce.dim_list(), check="cohomology_dims",
             haefliger=haef.dim_list(), double_ce=ce.dim_list())
    return v


# -- Maurer-Cartan ------------------------------------------------------------------------------

@dataclass
class MCReport:
    defect: Dict[Tuple[int, int], Section]
    morphism: Verdict

    @property
    def vanishes(self) -> bool:
        return all(_is_zero(s) for s in self.defect.values())

    @property
    def consistent(self) -> bool:
        return self.vanishes == self.morphism.ok

    def to_json(self) -> dict:
        return {"defect": {f"{i},{j}": _render(s) for (i, j), s in sorted(self.defect.items())},
                "defect_vanishes": self.vanishes, "morphism": self.morphism.to_json(),
                "consistent": self.consistent}


def mc_defect(pkg: CartanPackage, theta: Sequence) -> MCReport:
    """d_nabla theta + 1/2 {theta, theta} for an A-valued 1-form theta = sum theta_i dx^i.

    Also checks whether (id - rho theta, theta) preserves brackets of
    coordinate fields as a map TX -> double.
    """
    pkg.require_flat_cartan()
    alg, n = pkg.alg, pkg.basedim
    theta = [alg.section(s) for s in theta]
    if len(theta) != n:
        raise DataError(f"theta needs one section per coordinate ({n})")
    defect = {}
    for i, j in combinations(range(n), 2):
        di, dj = _unit(n, n, i), _unit(n, n, j)
        val = _sub(pkg.nabla(di, theta[j]), pkg.nabla(dj, theta[i]))
        defect[(i, j)] = _add(val, pointwise_bracket(pkg, theta[i], theta[j]))
    dbl = double(pkg)
    lifts = [tuple(theta[i]) + _sub(_unit(n, n, i), alg.anchor_of(theta[i])) for i in range(n)]
    morph = Verdict("theta_morphism")
    for i, j in combinations(range(n), 2):
        br = dbl.bracket(lifts[i], lifts[j])
        morph.record(_is_zero(br), directions=[i, j], bracket=_render(br))
    return MCReport(defect, morph)


# -- instance library and generators -----------------------------------------------------------

def _vf(n: int, *comps) -> Field:
    return tuple(_as_poly(n, c) if not isinstance(c, dict) else TruncPoly(n, c) for c in comps)


def sl2_algebroid() -> AlgebroidData:
    """sl2 acting on the line: e = d/dx, h = 2x d/dx, f = -x^2 d/dx."""
    n = 1
    return AlgebroidData(3, 1, [[1], [TruncPoly(n, {(1,): 2})], [TruncPoly(n, {(2,): -1})]],
                         [[[0, 0, 0], [2, 0, 0], [0, -1, 0]],
                          [[-2, 0, 0], [0, 0, 0], [0, 0, 2]],
                          [[0, 1, 0], [0, 0, -2], [0, 0, 0]]], weights=[-1, 0, 1])


_ACTIONS = {
    # name: (basedim, fields as {exp: coef} per component, weights)
    "euler": (1, [[{(1,): 1}]], [0]),
    "translation": (1, [[{(0,): 1}]], [-1]),
    "affine": (1, [[{(0,): 1}], [{(1,): 1}]], [-1, 0]),
    "sl2": (1, [[{(0,): 1}], [{(1,): 2}], [{(2,): -1}]], [-1, 0, 1]),
    "plane": (2, [[{(0, 0): 1}, {}], [{}, {(0, 0): 1}]], [-1, -1]),
    "plane_euler": (2, [[{(0, 0): 1}, {}], [{}, {(0, 0): 1}], [{(1, 0): 1}, {(0, 1): 1}]],
                    [-1, -1, 0]),
    "heisenberg": (2, [[{(0, 0): 1}, {}], [{}, {(0, 0): 1}], [{}, {(1, 0): 1}]], [-1, -1, 0]),
    "diagonal": (2, [[{(1, 0): 1}, {}], [{}, {(0, 1): 1}]], [0, 0]),
    "rotation_scaling": (2, [[{(0, 1): 1}, {(1, 0): -1}], [{(1, 0): 1}, {(0, 1): 1}]], [0, 0]),
    "line_affine_in_plane": (2, [[{(0, 0): 1}, {}], [{(1, 0): 1}, {}]], [-1, 0]),
}


def action_package(name: str) -> CartanPackage:
    """Action algebroid of a named Lie algebra of vector fields, canonical flat connection."""
    n, fields, weights = _ACTIONS[name]
    alg = AlgebroidData.action([tuple(TruncPoly(n, c) for c in f) for f in fields], weights)
    r = alg.rank
    gamma = [[[0] * r for _ in range(r)] for _ in range(n)]
    return CartanPackage(alg, gamma, parallel_frame=[alg.frame(a) for a in range(r)])


def euler_package() -> CartanPackage:
    """The 1-dimensional Lie algebra acting by x d/dx on the line."""
    return action_package("euler")


def tangent_package(n: int) -> CartanPackage:
    """TX with the coordinate connection."""
    alg = AlgebroidData.tangent(n)
    gamma = [[[0] * n for _ in range(n)] for _ in range(n)]
    return CartanPackage(alg, gamma, parallel_frame=[alg.frame(a) for a in range(n)])


def _rand_poly(rng: random.Random, n: int, max_deg: int, terms: int = 2) -> TruncPoly:
    out = {}
    for _ in range(terms):
        d = rng.randint(0, max_deg)
        monos = list(_series.monomials(n, d))
        out[rng.choice(monos)] = rng.choice([-2, -1, 1, 2, Fraction(1, 2)])
    return TruncPoly(n, out)


def _unipotent(rng: random.Random, n: int, r: int):
    """Random upper unitriangular polynomial matrix and its exact inverse."""
    m = [[_const(n, int(i == j)) for j in range(r)] for i in range(r)]
    for i in range(r):
        for j in range(i + 1, r):
            if rng.random() < 0.7:
                m[i][j] = _rand_poly(rng, n, 1)
    # inverse of I + N is sum_k (-N)^k
    nil = [[m[i][j] if i != j else _zero(n) for j in range(r)] for i in range(r)]

    def matmul(x, y):
        return [[sum((x[i][k] * y[k][j] for k in range(r)), _zero(n)) for j in range(r)]
                for i in range(r)]

    inv = [[_const(n, int(i == j)) for j in range(r)] for i in range(r)]
    power = [[_const(n, int(i == j)) for j in range(r)] for i in range(r)]
    for k in range(1, r):
        power = matmul(power, nil)
        sign = -1 if k % 2 else 1
        inv = [[inv[i][j] + power[i][j] * sign for j in range(r)] for i in range(r)]
    return m, inv


def _triangular_diffeo(rng: random.Random, n: int):
    """phi(x) = (x_1 + P(x_2), x_2) style shear composed with a translation, with inverse."""
    xs = [TruncPoly.var(n, i) for i in range(n)]
    shift = [Fraction(rng.randint(-2, 2)) for _ in range(n)]
    phi = [xs[i] + shift[i] for i in range(n)]
    inv = [xs[i] - shift[i] for i in range(n)]
    if n >= 2:
        shear = TruncPoly(n, {(0, 2) + (0,) * (n - 2): rng.choice([-1, 1, 2])})
        # phi2(y) = (y_1 + shear(y), y_2, ...), then the translation
        phi2 = [xs[0] + shear] + xs[1:]
        phi2_inv = [xs[0] - shear] + xs[1:]
        phi = [p.substitute(phi2) for p in phi]
        inv = [p.substitute(inv) for p in phi2_inv]
    return phi, inv


def random_flat_package(rng: random.Random, name: Optional[str] = None) -> CartanPackage:
    """Gauge-transform a canonical action package by a base diffeomorphism and a frame change."""
    if name is None:
        name = rng.choice(sorted(_ACTIONS))
    pkg = action_package(name)
    phi, phi_inv = _triangular_diffeo(rng, pkg.basedim)
    pkg = pkg.push_forward(phi, phi_inv)
    m, minv = _unipotent(rng, pkg.basedim, pkg.rank)
    return pkg.change_frame(m, minv)


def perturbable(pkg: CartanPackage) -> bool:
    """Whether some Christoffel perturbation can break a flag (rank or base >= 2)."""
    return pkg.rank >= 2 or pkg.basedim >= 2


def perturb_package(pkg: CartanPackage, rng: random.Random, attempts: int = 50) -> CartanPackage:
    """Add one monomial to one Christoffel symbol so that a flag breaks.

    On a one-dimensional base every connection is flat, so the perturbation
    there breaks infinitesimal multiplicativity (requires rank >= 2).
    """
    n, r = pkg.basedim, pkg.rank
    if not perturbable(pkg):
        raise DataError("rank-1 packages over a line have no connection-breaking perturbation")
    for _ in range(attempts):
        i, a, b = rng.randrange(n), rng.randrange(r), rng.randrange(r)
        e = [0] * n
        e[rng.randrange(n)] = rng.randint(0, 1)
        gamma = [[list(cell) for cell in row] for row in pkg.gamma]
        gamma[i][a][b] = gamma[i][a][b] + TruncPoly(n, {tuple(e): rng.choice([1, -1, 2])})
        out = CartanPackage(pkg.alg, gamma)
        if not out.is_flat_cartan:
            return out
    raise DataError("could not break the package with a Christoffel perturbation")


def homogeneous_packages() -> Dict[str, CartanPackage]:
    """Weight-homogeneous flat packages, including a homogeneous frame change."""
    heis = action_package("heisenberg")
    n = 2
    x1 = TruncPoly.var(n, 0)
    one, zero = _const(n, 1), _zero(n)
    # e'_3 = e_3 + x1 e_2 keeps weight 0
    m = [[one, zero, zero], [zero, one, x1], [zero, zero, one]]
    minv = [[one, zero, zero], [zero, one, -x1], [zero, zero, one]]
    return {
        "euler": euler_package(),
        "sl2": action_package("sl2"),
        "plane": tangent_package(2),
        "plane_euler": action_package("plane_euler"),
        "heisenberg_gauged": heis.change_frame(m, minv),
    }
