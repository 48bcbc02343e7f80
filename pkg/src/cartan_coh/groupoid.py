"""Bar complexes of finite groupoids.

A p-string is a tuple ``(g_1, ..., g_p)`` of arrows with
``s(g_i) = t(g_{i+1})``; a p-cochain assigns to each string a vector in the
representation space at ``t(g_1)``.  Level-0 strings are objects, wrapped in
:class:`Obj` so they never collide with arrow names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations, product
from typing import Callable, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

from .formal import PolyForm, TruncPoly
from . import _series
from .linalg import (
    CohomologyTable, LabeledBasis, SparseMatrix, cohomology_at, format_rational, parse_rational,
)

__all__ = [
    "GroupoidError",
    "NotAGroupoid",
    "NotAFunctor",
    "NotAGroup",
    "CapTooSmall",
    "DimMismatch",
    "PairingMismatch",
    "NonComposableString",
    "InconsistentNerve",
    "Obj",
    "FiniteGroupoid",
    "Representation",
    "BarCochain",
    "GroupoidMorphism",
    "bar_delta",
    "delta_matrix",
    "cup_w",
    "group_cohomology",
    "groupoid_cohomology",
    "CoverNerve",
    "mv_cech",
    "mayer_vietoris_groupoid",
    "cocycle_morphism",
    "morphism_pullback",
    "ActionBicomplex",
    "action_bicomplex",
]


class GroupoidError(ValueError):
    pass


class NotAGroupoid(GroupoidError):
    pass


class NotAFunctor(GroupoidError):
    pass


class NotAGroup(GroupoidError):
    pass


class CapTooSmall(GroupoidError):
    pass


class DimMismatch(GroupoidError):
    pass


class PairingMismatch(GroupoidError):
    pass


class NonComposableString(GroupoidError):
    pass


class InconsistentNerve(GroupoidError):
    pass


@dataclass(frozen=True, order=True)
class Obj:
    """A level-0 string: the object itself."""

    name: Hashable

    def __repr__(self):
        return f"Obj({self.name!r})"


class FiniteGroupoid:
    """Finite groupoid given by source, target, composition and units.

    ``compose[(g, h)]`` is the composite ``g h`` ("g after h"), defined
    exactly when ``s(g) == t(h)``.  All axioms are verified on construction.
    """

    def __init__(self, objects: Sequence, arrows: Dict, compose: Dict, units: Dict):
        self.objects = tuple(objects)
        self.arrows = tuple(arrows)
        self.source = {g: st[0] for g, st in arrows.items()}
        self.target = {g: st[1] for g, st in arrows.items()}
        self.compose_table = dict(compose)
        self.units = dict(units)
        self._check()
        self.inverse = self._inverses()

    def s(self, g):
        return self.source[g]

    def t(self, g):
        return self.target[g]

    def mul(self, g, h):
        try:
            return self.compose_table[(g, h)]
        except KeyError:
            raise NonComposableString(f"{g!r} and {h!r} are not composable") from None

    def _check(self):
        objs = set(self.objects)
        if len(objs) != len(self.objects) or len(set(self.arrows)) != len(self.arrows):
            raise NotAGroupoid("duplicate objects or arrows")
        for g in self.arrows:
            if self.source[g] not in objs or self.target[g] not in objs:
                raise NotAGroupoid(f"arrow {g!r} has an unknown endpoint")
        for x in self.objects:
            u = self.units.get(x)
            if u is None or self.source.get(u) != x or self.target.get(u) != x:
                raise NotAGroupoid(f"bad unit at {x!r}")
        for g in self.arrows:
            for h in self.arrows:
                key = (g, h)
                if self.source[g] == self.target[h]:
                    if key not in self.compose_table:
                        raise NotAGroupoid(f"missing composite {key!r}")
                    gh = self.compose_table[key]
                    if gh not in self.source:
                        raise NotAGroupoid(f"composite {key!r} is not an arrow")
                    if self.source[gh] != self.source[h] or self.target[gh] != self.target[g]:
                        raise NotAGroupoid(f"composite {key!r} has wrong endpoints")
                elif key in self.compose_table:
                    raise NotAGroupoid(f"composite defined on non-composable pair {key!r}")
        for g in self.arrows:
            if self.compose_table[(self.units[self.target[g]], g)] != g or \
                    self.compose_table[(g, self.units[self.source[g]])] != g:
                raise NotAGroupoid(f"unit law fails at {g!r}")
        for g in self.arrows:
            for h in self.arrows:
                if self.source[g] != self.target[h]:
                    continue
                gh = self.compose_table[(g, h)]
                for k in self.arrows:
                    if self.source[h] != self.target[k]:
                        continue
                    if self.compose_table[(gh, k)] != self.compose_table[(g, self.compose_table[(h, k)])]:
                        raise NotAGroupoid(f"associativity fails at {(g, h, k)!r}")

    def _inverses(self):
        inv = {}
        for g in self.arrows:
            for h in self.arrows:
                if self.source[g] == self.target[h] and self.source[h] == self.target[g] \
                        and self.compose_table[(g, h)] == self.units[self.target[g]] \
                        and self.compose_table[(h, g)] == self.units[self.source[g]]:
                    inv[g] = h
                    break
            else:
                raise NotAGroupoid(f"arrow {g!r} has no inverse")
        return inv

    def is_unit(self, g) -> bool:
        return self.units[self.source[g]] == g

    def is_group(self) -> bool:
        return len(self.objects) == 1

    def strings(self, p: int, normalized: bool = False) -> List[tuple]:
        """All composable p-strings in a fixed order (objects for p = 0)."""
        if p == 0:
            return [Obj(x) for x in self.objects]
        arrows = [g for g in self.arrows if not (normalized and self.is_unit(g))]
        out = [(g,) for g in arrows]
        for _ in range(p - 1):
            out = [s + (h,) for s in out for h in arrows if self.source[s[-1]] == self.target[h]]
        return out

    def string_target(self, string) -> Hashable:
        if isinstance(string, Obj):
            return string.name
        return self.target[string[0]]

    def string_source(self, string) -> Hashable:
        if isinstance(string, Obj):
            return string.name
        return self.source[string[-1]]

    def product_of(self, string):
        """g_1 g_2 ... g_p, the unit for a level-0 string."""
        if isinstance(string, Obj) or not string:
            raise ValueError("empty product needs an object")
        out = string[0]
        for g in string[1:]:
            out = self.mul(out, g)
        return out

    # constructors -------------------------------------------------------
    @classmethod
    def from_group(cls, elements: Sequence, mult: Callable, identity, name="*") -> "FiniteGroupoid":
        elements = list(elements)
        arrows = {g: (name, name) for g in elements}
        compose = {(g, h): mult(g, h) for g in elements for h in elements}
        return cls([name], arrows, compose, {name: identity})

    @classmethod
    def cyclic(cls, n: int) -> "FiniteGroupoid":
        return cls.from_group(range(n), lambda a, b: (a + b) % n, 0)

    @classmethod
    def symmetric(cls, n: int) -> "FiniteGroupoid":
        elems = list(permutations(range(n)))
        return cls.from_group(elems, lambda a, b: tuple(a[b[i]] for i in range(n)),
                              tuple(range(n)))

    @classmethod
    def trivial(cls) -> "FiniteGroupoid":
        return cls.from_group([0], lambda a, b: 0, 0)

    @classmethod
    def units_only(cls, objects: Sequence) -> "FiniteGroupoid":
        arrows = {("1", x): (x, x) for x in objects}
        compose = {(("1", x), ("1", x)): ("1", x) for x in objects}
        return cls(objects, arrows, compose, {x: ("1", x) for x in objects})

    @classmethod
    def pair(cls, objects: Sequence) -> "FiniteGroupoid":
        """One arrow (y, x): x -> y for every ordered pair."""
        arrows = {(y, x): (x, y) for x in objects for y in objects}
        compose = {((z, y), (y, x)): (z, x) for x in objects for y in objects for z in objects}
        return cls(objects, arrows, compose, {x: (x, x) for x in objects})

    @classmethod
    def from_json(cls, data: dict) -> "FiniteGroupoid":
        """Either {"group": {"elements", "table", "identity"}} or an explicit groupoid."""
        if "elements" in data:
            elems = [str(e) for e in data["elements"]]
            table = data["table"]
            if len(table) != len(elems) or any(len(r) != len(elems) for r in table):
                raise NotAGroupoid("multiplication table must be square")
            idx = {e: i for i, e in enumerate(elems)}
            for row in table:
                for v in row:
                    if str(v) not in idx:
                        raise NotAGroupoid(f"table entry {v!r} is not an element")
            return cls.from_group(elems, lambda a, b: str(table[idx[a]][idx[b]]),
                                  str(data.get("identity", elems[0])))
        objects = [str(o) for o in data["objects"]]
        arrows = {str(a["name"]): (str(a["source"]), str(a["target"])) for a in data["arrows"]}
        compose = {(str(c[0]), str(c[1])): str(c[2]) for c in data["compose"]}
        units = {str(k): str(v) for k, v in data["units"].items()}
        return cls(objects, arrows, compose, units)


def _mat(rows) -> Tuple[Tuple[Fraction, ...], ...]:
    return tuple(tuple(parse_rational(v) for v in r) for r in rows)


def _matmul(a, b):
    if not b:
        return tuple(() for _ in a)
    return tuple(tuple(sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0))
                       for j in range(len(b[0]))) for i in range(len(a)))


def _matvec(a, v):
    return tuple(sum((a[i][k] * v[k] for k in range(len(v))), Fraction(0)) for i in range(len(a)))


def _identity(n):
    return tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))


class Representation:
    """A matrix ``rho(g): V_s(g) -> V_t(g)`` per arrow, checked to be a functor."""

    def __init__(self, groupoid: FiniteGroupoid, dims: Dict, matrices: Dict):
        self.groupoid = groupoid
        self.dims = dict(dims)
        self.matrices = {g: _mat(m) for g, m in matrices.items()}
        G = groupoid
        for x in G.objects:
            if x not in self.dims:
                raise DimMismatch(f"no dimension at {x!r}")
        for g in G.arrows:
            m = self.matrices.get(g)
            if m is None:
                raise DimMismatch(f"no matrix for {g!r}")
            if len(m) != self.dims[G.t(g)] or any(len(r) != self.dims[G.s(g)] for r in m):
                raise DimMismatch(f"matrix for {g!r} has the wrong shape")
        for x in G.objects:
            if self.matrices[G.units[x]] != _identity(self.dims[x]):
                raise NotAFunctor(f"unit at {x!r} does not act by the identity")
        for (g, h), gh in G.compose_table.items():
            if _matmul(self.matrices[g], self.matrices[h]) != self.matrices[gh]:
                raise NotAFunctor(f"rho({g!r}) rho({h!r}) != rho({gh!r})")

    @classmethod
    def trivial(cls, groupoid: FiniteGroupoid, dim: int = 1) -> "Representation":
        return cls(groupoid, {x: dim for x in groupoid.objects},
                   {g: _identity(dim) for g in groupoid.arrows})

    @classmethod
    def one_dim(cls, groupoid: FiniteGroupoid, character: Callable) -> "Representation":
        return cls(groupoid, {x: 1 for x in groupoid.objects},
                   {g: ((character(g),),) for g in groupoid.arrows})

    def act(self, g, v):
        return _matvec(self.matrices[g], v)

    def invariants(self) -> List[Dict]:
        """Basis of invariant sections: families v_x with rho(g) v_s(g) = v_t(g)."""
        from .linalg import rank_kernel
        G = self.groupoid
        offsets, n = {}, 0
        for x in G.objects:
            offsets[x] = n
            n += self.dims[x]
        rows = []
        for g in G.arrows:
            m = self.matrices[g]
            for r in range(self.dims[G.t(g)]):
                row = [Fraction(0)] * n
                for k in range(self.dims[G.s(g)]):
                    row[offsets[G.s(g)] + k] += m[r][k]
                row[offsets[G.t(g)] + r] -= 1
                rows.append(row)
        _, ker = rank_kernel(SparseMatrix.from_dense(rows, n)) if rows else (0, [
            [Fraction(int(i == j)) for j in range(n)] for i in range(n)])
        return [{x: tuple(v[offsets[x]:offsets[x] + self.dims[x]]) for x in G.objects} for v in ker]


def _string_label_basis(G: FiniteGroupoid, rho: Representation, p: int, normalized: bool):
    labels = []
    for s in G.strings(p, normalized):
        for k in range(rho.dims[G.string_target(s)]):
            labels.append((s, k))
    return LabeledBasis(labels)


class BarCochain:
    """Level-p cochain: a vector in V_{t(g_1)} for each p-string."""

    def __init__(self, groupoid: FiniteGroupoid, rho: Representation, p: int, values: Dict):
        self.groupoid = groupoid
        self.rho = rho
        self.p = p
        vals = {}
        for s, v in values.items():
            if p == 0 and not isinstance(s, Obj):
                s = Obj(s)
            if p > 0 and len(s) != p:
                raise DimMismatch(f"string {s!r} is not of length {p}")
            v = tuple(parse_rational(x) for x in v)
            if len(v) != rho.dims[groupoid.string_target(s)]:
                raise DimMismatch(f"value at {s!r} has the wrong dimension")
            if any(v):
                vals[s] = v
        self.values = vals

    def __call__(self, string):
        if self.p == 0 and not isinstance(string, Obj):
            string = Obj(string)
        v = self.values.get(string)
        if v is None:
            return tuple(Fraction(0) for _ in range(self.rho.dims[self.groupoid.string_target(string)]))
        return v

    def __add__(self, other):
        vals = dict(self.values)
        for s, v in other.values.items():
            vals[s] = tuple(a + b for a, b in zip(self(s), v))
        return BarCochain(self.groupoid, self.rho, self.p, vals)

    def scale(self, c):
        return BarCochain(self.groupoid, self.rho, self.p,
                          {s: tuple(c * x for x in v) for s, v in self.values.items()})

    def is_zero(self):
        return not self.values

    def __eq__(self, other):
        return isinstance(other, BarCochain) and self.p == other.p and self.values == other.values

    def to_vector(self, basis: LabeledBasis) -> List[Fraction]:
        return [self(s)[k] for s, k in basis]

    @classmethod
    def from_vector(cls, G, rho, p, basis, vec) -> "BarCochain":
        vals: Dict = {}
        for (s, k), x in zip(basis, vec):
            if x:
                v = list(vals.get(s, [Fraction(0)] * rho.dims[G.string_target(s)]))
                v[k] = parse_rational(x)
                vals[s] = v
        return cls(G, rho, p, vals)

    @classmethod
    def unit(cls, G, rho) -> "BarCochain":
        return cls(G, rho, 0, {Obj(x): (1,) * rho.dims[x] for x in G.objects})


def _face_value(c: BarCochain, strings_obj, tail):
    """Value of c on ``tail`` (a tuple of arrows), or on the object when empty."""
    if not tail:
        return c(Obj(strings_obj))
    return c(tuple(tail))


def bar_delta(c: BarCochain, rho: Optional[Representation] = None) -> BarCochain:
    """(dc)(g_1..g_{p+1}) = g_1.c(g_2..) + sum (-1)^i c(..g_i g_{i+1}..) + (-1)^{p+1} c(g_1..g_p)."""
    rho = rho or c.rho
    if rho is not c.rho and rho.dims != c.rho.dims:
        raise DimMismatch("cochain and representation disagree")
    G, p = c.groupoid, c.p
    out = {}
    for t in G.strings(p + 1):
        first = _face_value(c, G.s(t[0]), t[1:])
        acc = list(rho.act(t[0], first))
        for i in range(1, p + 1):
            face = t[:i - 1] + (G.mul(t[i - 1], t[i]),) + t[i + 1:]
            v = c(face)
            sgn = -1 if i % 2 else 1
            acc = [a + sgn * b for a, b in zip(acc, v)]
        last = _face_value(c, G.t(t[0]), t[:p])
        sgn = -1 if (p + 1) % 2 else 1
        acc = [a + sgn * b for a, b in zip(acc, last)]
        out[t] = acc
    return BarCochain(G, rho, p + 1, out)


def delta_matrix(G: FiniteGroupoid, rho: Representation, p: int,
                 normalized: bool = False) -> SparseMatrix:
    """Matrix of the bar differential from level p to level p+1."""
    src = _string_label_basis(G, rho, p, normalized)
    tgt = _string_label_basis(G, rho, p + 1, normalized)
    entries: Dict[Tuple[int, int], Fraction] = {}

    def add(row, label, val):
        col = src.get(label)
        if col is None:
            if normalized:
                return   # the face is degenerate, normalized cochains vanish there
            raise NonComposableString(f"face {label!r} is missing from the level-{p} basis")
        entries[(row, col)] = entries.get((row, col), 0) + val

    for row, (t, r) in enumerate(tgt):
        first = t[1:] if t[1:] else Obj(G.s(t[0]))
        m = rho.matrices[t[0]]
        for k in range(rho.dims[G.string_target(first)]):
            if m[r][k]:
                add(row, (first, k), m[r][k])
        for i in range(1, p + 1):
            face = t[:i - 1] + (G.mul(t[i - 1], t[i]),) + t[i + 1:]
            add(row, (face, r), -1 if i % 2 else 1)
        last = t[:p] if p else Obj(G.t(t[0]))
        add(row, (last, r), -1 if (p + 1) % 2 else 1)
    return SparseMatrix(len(tgt), len(src), {k: v for k, v in entries.items() if v})


def groupoid_cohomology(G: FiniteGroupoid, rho: Representation, p_max: int,
                        normalized: bool = True) -> CohomologyTable:
    table = CohomologyTable()
    mats = {p: delta_matrix(G, rho, p, normalized) for p in range(p_max + 1)}
    for p in range(p_max + 1):
        n = len(_string_label_basis(G, rho, p, normalized))
        d_in = mats[p - 1] if p > 0 else SparseMatrix(n, 0)
        grp = cohomology_at(d_in, mats[p])
        basis = _string_label_basis(G, rho, p, normalized)
        table.dims[p] = grp.dimension
        table.representatives[p] = [
            {_render_label(basis[i]): format_rational(x) for i, x in enumerate(v) if x}
            for v in grp.representatives]
    return table


def _render_label(label) -> str:
    s, k = label
    if isinstance(s, Obj):
        body = f"[{s.name}]"
    else:
        body = "(" + ",".join(map(str, s)) + ")"
    return f"{body}#{k}"


def group_cohomology(G: FiniteGroupoid, rho: Optional[Representation] = None, p_max: int = 2,
                     normalized: bool = True) -> CohomologyTable:
    """Cohomology of a one-object groupoid, by default on normalized cochains."""
    if not G.is_group():
        raise NotAGroup("group cohomology needs a one-object groupoid")
    rho = rho or Representation.trivial(G)
    return groupoid_cohomology(G, rho, p_max, normalized)


Pairing = Callable[[Hashable, Sequence, Sequence], Sequence]


def product_pairing(x, u, v):
    """Multiplication of one-dimensional coefficients."""
    if len(u) != 1 or len(v) != 1:
        raise PairingMismatch("product pairing needs one-dimensional coefficients")
    return (u[0] * v[0],)


def cup_w(c1: BarCochain, c2: BarCochain, w: Pairing = product_pairing,
          rho_out: Optional[Representation] = None) -> BarCochain:
    """(c1 u c2)(g_1..g_{p+p'}) = w(c1(g_1..g_p), (g_1...g_p).c2(g_{p+1}..))."""
    G = c1.groupoid
    if c2.groupoid is not G:
        raise PairingMismatch("cochains live on different groupoids")
    rho_out = rho_out or c1.rho
    p, p2 = c1.p, c2.p
    out = {}
    for t in G.strings(p + p2):
        if isinstance(t, Obj):
            a = c1(t)
            b = c2(t)
            x = t.name
        else:
            a = c1(t[:p]) if p else c1(Obj(G.t(t[0])))
            tail = t[p:]
            b = c2(tail) if tail else c2(Obj(G.s(t[-1])))
            if p:
                b = c2.rho.act(G.product_of(t[:p]), b)
            x = G.t(t[0])
        val = tuple(parse_rational(v) for v in w(x, a, b))
        if len(val) != rho_out.dims[x]:
            raise PairingMismatch("pairing output has the wrong dimension")
        out[t] = val
    return BarCochain(G, rho_out, p + p2, out)


# -- morphisms ------------------------------------------------------------------------

class GroupoidMorphism:
    def __init__(self, source: FiniteGroupoid, target: FiniteGroupoid,
                 on_objects: Dict, on_arrows: Dict):
        self.source_groupoid = source
        self.target_groupoid = target
        self.on_objects = dict(on_objects)
        self.on_arrows = dict(on_arrows)
        H, G = source, target
        for y in H.objects:
            if self.on_objects.get(y) not in G.units:
                raise NotAFunctor(f"object {y!r} has no image")
            if self.on_arrows.get(H.units[y]) != G.units[self.on_objects[y]]:
                raise NotAFunctor(f"unit at {y!r} is not sent to a unit")
        for h in H.arrows:
            g = self.on_arrows.get(h)
            if g not in G.source:
                raise NotAFunctor(f"arrow {h!r} has no image")
            if G.s(g) != self.on_objects[H.s(h)] or G.t(g) != self.on_objects[H.t(h)]:
                raise NotAFunctor(f"image of {h!r} has the wrong endpoints")
        for (h1, h2), h12 in H.compose_table.items():
            if G.mul(self.on_arrows[h1], self.on_arrows[h2]) != self.on_arrows[h12]:
                raise NotAFunctor(f"phi({h1!r} {h2!r}) != phi({h1!r}) phi({h2!r})")

    def __call__(self, h):
        return self.on_arrows[h]

    def pull_representation(self, rho: Representation) -> Representation:
        H = self.source_groupoid
        return Representation(H, {y: rho.dims[self.on_objects[y]] for y in H.objects},
                              {h: rho.matrices[self.on_arrows[h]] for h in H.arrows})


def morphism_pullback(phi: GroupoidMorphism, c: BarCochain,
                      sigma: Optional[Representation] = None,
                      transport: Optional[Dict] = None) -> BarCochain:
    """(phi^* c)(h_1..h_p) = T_{t(h_1)} c(phi h_1, .., phi h_p).

    ``transport[y]`` maps V_{phi(y)} to W_y; it defaults to the identity onto
    the pulled-back representation.  Compatibility
    ``sigma(h) T_s(h) = T_t(h) rho(phi h)`` is checked.
    """
    H = phi.source_groupoid
    rho = c.rho
    if sigma is None:
        sigma = phi.pull_representation(rho)
    if transport is None:
        transport = {y: _identity(rho.dims[phi.on_objects[y]]) for y in H.objects}
    transport = {y: _mat(m) for y, m in transport.items()}
    for h in H.arrows:
        lhs = _matmul(sigma.matrices[h], transport[H.s(h)])
        rhs = _matmul(transport[H.t(h)], rho.matrices[phi(h)])
        if lhs != rhs:
            raise NotAFunctor(f"coefficient transport is not equivariant at {h!r}")
    out = {}
    for t in H.strings(c.p):
        if isinstance(t, Obj):
            v = c(Obj(phi.on_objects[t.name]))
        else:
            v = c(tuple(phi(h) for h in t))
        out[t] = _matvec(transport[H.string_target(t)], v)
    return BarCochain(H, sigma, c.p, out)


# -- Mayer-Vietoris groupoids and Cech cohomology -----------------------------------------

def mayer_vietoris_groupoid(points: Sequence, cover: Sequence[Iterable]) -> FiniteGroupoid:
    """Objects (i, x) for x in U_i; one arrow (i, j, x): (j, x) -> (i, x) per x in U_i n U_j."""
    cover = [set(u) for u in cover]
    pts = set(points)
    for u in cover:
        if not u <= pts:
            raise InconsistentNerve("an open contains unknown points")
    if set().union(*cover) != pts if cover else pts:
        raise InconsistentNerve("the opens do not cover the space")
    objects = [(i, x) for i, u in enumerate(cover) for x in sorted(u)]
    arrows, compose = {}, {}
    for i, ui in enumerate(cover):
        for j, uj in enumerate(cover):
            for x in sorted(ui & uj):
                arrows[(i, j, x)] = ((j, x), (i, x))
    for (i, j, x) in arrows:
        for (j2, k, y) in arrows:
            if j2 == j and y == x:
                compose[((i, j, x), (j, k, x))] = (i, k, x)
    units = {(i, x): (i, i, x) for (i, x) in objects}
    return FiniteGroupoid(objects, arrows, compose, units)


def cocycle_morphism(mv: FiniteGroupoid, group: FiniteGroupoid, transition: Callable) -> GroupoidMorphism:
    """A cocycle g_ij(x) with g_ij g_jk = g_ik is the same thing as a morphism to ``group``.

    Raises :class:`NotAFunctor` when the cocycle identity fails.
    """
    (star,) = group.objects
    on_objects = {y: star for y in mv.objects}
    on_arrows = {a: transition(*a) for a in mv.arrows}
    return GroupoidMorphism(mv, group, on_objects, on_arrows)


class CoverNerve:
    """Combinatorial nerve: components of each finite intersection and face restrictions.

    ``components[S]`` lists component labels of the intersection over the
    sorted index tuple ``S``; ``restrict[(S, comp, T)]`` names the component
    of ``U_T`` containing ``comp`` for ``T`` a face of ``S``.  Restrictions to
    a face with a single component may be omitted.
    """

    def __init__(self, opens: int, components: Dict, restrict: Optional[Dict] = None):
        self.opens = opens
        self.components = {tuple(sorted(k)): list(v) for k, v in components.items() if v}
        self.restrict = {}
        given = {(tuple(S), c, tuple(T)): d for (S, c, T), d in (restrict or {}).items()}
        for S, comps in self.components.items():
            if any(not (0 <= i < opens) for i in S) or len(set(S)) != len(S):
                raise InconsistentNerve(f"bad index set {S!r}")
            if len(set(comps)) != len(comps):
                raise InconsistentNerve(f"repeated component labels over {S!r}")
            if len(S) < 2:
                continue
            for k in range(len(S)):
                T = S[:k] + S[k + 1:]
                tc = self.components.get(T)
                if not tc:
                    raise InconsistentNerve(f"{S!r} is nonempty but its face {T!r} is empty")
                for c in comps:
                    d = given.get((S, c, T))
                    if d is None:
                        if len(tc) != 1:
                            raise InconsistentNerve(f"restriction of {c!r} from {S!r} to {T!r} is ambiguous")
                        d = tc[0]
                    if d not in tc:
                        raise InconsistentNerve(f"{d!r} is not a component over {T!r}")
                    self.restrict[(S, c, T)] = d
        for key in given:
            if key not in self.restrict:
                raise InconsistentNerve(f"restriction {key!r} does not match the nerve")
        self._check_consistency()

    def _check_consistency(self):
        for S, comps in self.components.items():
            if len(S) < 3:
                continue
            for c in comps:
                for a, b in combinations(range(len(S)), 2):
                    # drop index a then b, or b then a: both land in S minus {a, b}
                    Ta = S[:a] + S[a + 1:]
                    Tb = S[:b] + S[b + 1:]
                    R = tuple(i for k, i in enumerate(S) if k not in (a, b))
                    via_a = self.restrict[(Ta, self.restrict[(S, c, Ta)], R)]
                    via_b = self.restrict[(Tb, self.restrict[(S, c, Tb)], R)]
                    if via_a != via_b:
                        raise InconsistentNerve(f"restrictions of {c!r} over {S!r} disagree")

    def restrict_to(self, S: tuple, c, T: tuple):
        """Component of U_T containing component ``c`` of U_S (T a subset of S)."""
        while S != T:
            drop = next(i for i in S if i not in T)
            k = S.index(drop)
            face = S[:k] + S[k + 1:]
            c = self.restrict[(S, c, face)]
            S = face
        return c

    def simplices(self, p: int) -> List[Tuple[tuple, Hashable]]:
        """Ordered (p+1)-tuples of indices (repeats allowed) with a component of their intersection."""
        out = []
        for idx in product(range(self.opens), repeat=p + 1):
            S = tuple(sorted(set(idx)))
            for c in self.components.get(S, []):
                out.append((idx, c))
        return out

    @classmethod
    def from_json(cls, data: dict) -> "CoverNerve":
        comps = {tuple(e["indices"]): [str(c) for c in e["components"]]
                 for e in data["intersections"]}
        restrict = {}
        for r in data.get("restrictions", []):
            restrict[(tuple(sorted(r["from"])), str(r["component"]), tuple(sorted(r["to"])))] = str(r["target"])
        return cls(int(data["opens"]), comps, restrict)


def mv_cech(cover: CoverNerve, p_max: int) -> CohomologyTable:
    """Cech cohomology with locally constant rational coefficients.

    Cochains are functions on (ordered index tuple, component) pairs, i.e.
    on strings of the Mayer-Vietoris groupoid up to components; the
    differential is the alternating sum of face restrictions.
    """
    bases = {p: LabeledBasis(cover.simplices(p)) for p in range(p_max + 2)}

    def dmat(p):
        src, tgt = bases[p], bases[p + 1]
        entries = {}
        for row, (idx, c) in enumerate(tgt):
            S = tuple(sorted(set(idx)))
            for k in range(p + 2):
                face = idx[:k] + idx[k + 1:]
                T = tuple(sorted(set(face)))
                col = src.index((face, cover.restrict_to(S, c, T)))
                entries[(row, col)] = entries.get((row, col), 0) + (-1) ** k
        return SparseMatrix(len(tgt), len(src), {k: v for k, v in entries.items() if v})

    mats = {p: dmat(p) for p in range(p_max + 1)}
    table = CohomologyTable()
    for p in range(p_max + 1):
        d_in = mats[p - 1] if p else SparseMatrix(len(bases[0]), 0)
        grp = cohomology_at(d_in, mats[p])
        table.dims[p] = grp.dimension
        table.representatives[p] = [
            {f"{''.join(map(str, bases[p][i][0]))}:{bases[p][i][1]}": format_rational(x)
             for i, x in enumerate(v) if x} for v in grp.representatives]
    return table


# -- finite linear actions on the formal disk ----------------------------------------------

def _mat_inverse(m):
    n = len(m)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(m)]
    for c in range(n):
        piv = next((r for r in range(c, n) if aug[r][c]), None)
        if piv is None:
            return None
        aug[c], aug[piv] = aug[piv], aug[c]
        pv = aug[c][c]
        aug[c] = [x / pv for x in aug[c]]
        for r in range(n):
            if r != c and aug[r][c]:
                f = aug[r][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[c])]
    return tuple(tuple(r[n:]) for r in aug)


def _form_basis(n: int, q: int, cap: int):
    """x^beta dx^I with |I| = q and |beta| + q <= cap."""
    out = []
    for I in combinations(range(n), q):
        for beta in _series.monomials_upto(n, cap - q):
            out.append((I, beta))
    return out


@dataclass
class ActionBicomplex:
    group: FiniteGroupoid
    matrices: Dict
    nvars: int
    cap: int
    pmax: int
    qmax: int
    total: CohomologyTable
    bases: Dict = field(repr=False, default_factory=dict)
    differentials: Dict = field(repr=False, default_factory=dict)

    def act(self, g, form: PolyForm) -> PolyForm:
        """g . omega = pullback of omega along x -> g^{-1} x."""
        inv = _mat_inverse(self.matrices[g])
        return _linear_pullback(form, inv)

    def delta(self, c: Dict, p: int, q: int) -> Dict:
        """Horizontal differential of a cochain ``{string: PolyForm}``."""
        G = self.group
        out = {}
        for t in G.strings(p + 1):
            acc = self.act(t[0], c.get(t[1:] if p else Obj("*"), PolyForm.zero(self.nvars, q)))
            for i in range(1, p + 1):
                face = t[:i - 1] + (G.mul(t[i - 1], t[i]),) + t[i + 1:]
                v = c.get(face, PolyForm.zero(self.nvars, q))
                acc = acc - v if i % 2 else acc + v
            last = c.get(t[:p] if p else Obj("*"), PolyForm.zero(self.nvars, q))
            acc = acc - last if (p + 1) % 2 else acc + last
            if not acc.is_zero():
                out[t] = acc
        return out

    def d(self, c: Dict, p: int) -> Dict:
        out = {}
        for s, w in c.items():
            dw = w.d()
            if not dw.is_zero():
                out[s] = dw
        return out

    def total_d(self, comps: Dict[Tuple[int, int], Dict]) -> Dict[Tuple[int, int], Dict]:
        """D = delta + (-1)^p d on a sum of homogeneous components."""
        out: Dict[Tuple[int, int], Dict] = {}

        def acc(key, part, sign):
            tgt = out.setdefault(key, {})
            for s, w in part.items():
                w = w if sign > 0 else -w
                tgt[s] = tgt[s] + w if s in tgt else w

        for (p, q), c in comps.items():
            acc((p + 1, q), self.delta(c, p, q), 1)
            acc((p, q + 1), self.d(c, p), -1 if p % 2 else 1)
        return {k: {s: w for s, w in v.items() if not w.is_zero()} for k, v in out.items()}

    def cup(self, a: Dict, pa: int, qa: int, b: Dict, pb: int, qb: int) -> Dict:
        """(a u b)(g_1..g_{pa+pb}) = (-1)^(qa pb) a(g_1..g_pa) ^ (g_1...g_pa).b(rest)."""
        G = self.group
        out = {}
        sign = -1 if (qa * pb) % 2 else 1
        for t in G.strings(pa + pb):
            if isinstance(t, Obj):
                head, tail, g = Obj("*"), Obj("*"), None
            else:
                head = t[:pa] if pa else Obj("*")
                tail = t[pa:] if t[pa:] else Obj("*")
                g = G.product_of(t[:pa]) if pa else None
            av = a.get(head)
            bv = b.get(tail)
            if av is None or bv is None:
                continue
            if g is not None:
                bv = self.act(g, bv)
            w = av.wedge(bv)
            if sign < 0:
                w = -w
            if not w.is_zero():
                out[t] = w
        return out


def _linear_pullback(form: PolyForm, m) -> PolyForm:
    n = form.nvars
    phi = [TruncPoly(n, {tuple(int(k == j) for k in range(n)): m[i][j] for j in range(n)})
           for i in range(n)]
    return form.pullback(phi)


def _group_from_matrices(mats: Sequence) -> Tuple[FiniteGroupoid, Dict]:
    ms = [_mat(m) for m in mats]
    if not ms:
        raise NotAGroup("empty matrix list")
    n = len(ms[0])
    for m in ms:
        if len(m) != n or any(len(r) != n for r in m):
            raise NotAGroup("matrices must be square of one size")
        if _mat_inverse(m) is None:
            raise NotAGroup(f"matrix {m!r} is singular")
    if len(set(ms)) != len(ms):
        raise NotAGroup("matrices are repeated")
    index = {m: k for k, m in enumerate(ms)}
    ident = _identity(n)
    if ident not in index:
        raise NotAGroup("the identity matrix is missing")
    for a in ms:
        for b in ms:
            if _matmul(a, b) not in index:
                raise NotAGroup("the matrices are not closed under products")
    G = FiniteGroupoid.from_group(list(range(len(ms))), lambda a, b: index[_matmul(ms[a], ms[b])],
                                  index[ident])
    return G, {k: m for k, m in enumerate(ms)}


def action_bicomplex(mats: Sequence, cap: int, pmax: int, qmax: int) -> ActionBicomplex:
    """Group cochains valued in polynomial forms for a finite linear group.

    C^{p,q} consists of functions on G^p valued in q-forms x^beta dx^I with
    weight |beta| + q <= cap.  The de Rham differential and the linear
    action both preserve that weight, so the truncation is a subcomplex.
    Total cohomology is reported in degrees 0..pmax using every bidegree
    with p + q <= pmax + 1 and q <= qmax.
    """
    G, matrices = _group_from_matrices(mats)
    n = len(matrices[0])
    if cap < pmax + qmax + 1:
        raise CapTooSmall(f"cap {cap} is below pmax + qmax + 1 = {pmax + qmax + 1}")
    qtop = min(qmax, n)
    bc = ActionBicomplex(G, matrices, n, cap, pmax, qmax, CohomologyTable())

    def basis(k):
        labels = []
        for q in range(min(k, qtop) + 1):
            p = k - q
            for s in G.strings(p):
                for f in _form_basis(n, q, cap):
                    labels.append((p, q, s, f))
        return LabeledBasis(labels)

    for k in range(pmax + 3):
        bc.bases[k] = basis(k)

    action_cache: Dict = {}

    def act_basis(g, q, f):
        key = (g, q, f)
        if key not in action_cache:
            I, beta = f
            form = PolyForm(n, q, {I: TruncPoly.monomial(beta)})
            action_cache[key] = bc.act(g, form)
        return action_cache[key]

    def dmat(k):
        src, tgt = bc.bases[k], bc.bases[k + 1]
        entries: Dict = {}
        for col, (p, q, s, f) in enumerate(src):
            I, beta = f
            form = PolyForm(n, q, {I: TruncPoly.monomial(beta)})
            # vertical part (-1)^p d
            if q + 1 <= qtop:
                sgn = -1 if p % 2 else 1
                for J, poly in form.d().terms.items():
                    for e, v in poly.terms.items():
                        row = tgt.index((p, q + 1, s, (J, e)))
                        entries[(row, col)] = entries.get((row, col), 0) + sgn * v
            # horizontal part: delta of the basis cochain supported on string s
            for t in G.strings(p + 1):
                contribs = []
                head = t[1:] if p else Obj(G.objects[0])
                if head == s:
                    contribs.append((1, act_basis(t[0], q, f)))
                for i in range(1, p + 1):
                    face = t[:i - 1] + (G.mul(t[i - 1], t[i]),) + t[i + 1:]
                    if face == s:
                        contribs.append((-1 if i % 2 else 1, form))
                last = t[:p] if p else Obj(G.objects[0])
                if last == s:
                    contribs.append((-1 if (p + 1) % 2 else 1, form))
                for sgn, w in contribs:
                    for J, poly in w.terms.items():
                        for e, v in poly.terms.items():
                            row = tgt.index((p + 1, q, t, (J, e)))
                            entries[(row, col)] = entries.get((row, col), 0) + sgn * v
        return SparseMatrix(len(tgt), len(src), {k2: v for k2, v in entries.items() if v})

    for k in range(pmax + 2):
        bc.differentials[k] = dmat(k)
    for k in range(pmax + 1):
        d_in = bc.differentials[k - 1] if k else SparseMatrix(len(bc.bases[0]), 0)
        grp = cohomology_at(d_in, bc.differentials[k])
        bc.total.dims[k] = grp.dimension
        bc.total.representatives[k] = [
            {_render_bicomplex_label(bc.bases[k][i]): format_rational(x) for i, x in enumerate(v) if x}
            for v in grp.representatives]
    return bc


def _render_bicomplex_label(label) -> str:
    p, q, s, (I, beta) = label
    string = "()" if isinstance(s, Obj) else "(" + ",".join(map(str, s)) + ")"
    mono = "*".join(f"x{i + 1}^{b}" for i, b in enumerate(beta) if b) or "1"
    dx = "^".join(f"dx{i + 1}" for i in I)
    return f"{string}:{mono}{(' ' + dx) if dx else ''}"
