"""Exact polynomial geometry on a formal base.

Polynomials in ``n`` variables with rational coefficients, vector fields and
differential forms with polynomial coefficients, and truncated composition
of based polynomial maps.  Products and brackets grow degree freely unless a
polynomial carries a ``cap``; truncation is always explicit.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial
from typing import Dict, List, Optional, Sequence, Tuple

from . import _series as S
from .linalg import format_rational, parse_rational

__all__ = [
    "VarMismatch",
    "DegreeMismatch",
    "BasePointMismatch",
    "InsufficientOrder",
    "TruncPoly",
    "PolyVectorField",
    "PolyForm",
    "PolyMap",
    "poly_arith",
    "vf_bracket",
    "de_rham_d",
    "form_algebra",
    "poly_compose",
]


class VarMismatch(ValueError):
    pass


class DegreeMismatch(ValueError):
    pass


class BasePointMismatch(ValueError):
    pass


class InsufficientOrder(ValueError):
    pass


def _min_cap(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class TruncPoly:
    """Polynomial in ``nvars`` variables, optionally truncated above ``cap``."""

    __slots__ = ("nvars", "terms", "cap")

    def __init__(self, nvars: int, terms=None, cap: Optional[int] = None):
        self.nvars = nvars
        self.cap = cap
        clean = {}
        for e, v in (terms or {}).items():
            e = tuple(e)
            if len(e) != nvars:
                raise VarMismatch(f"exponent {e} has wrong length for {nvars} variables")
            if cap is not None and sum(e) > cap:
                continue
            v = parse_rational(v)
            if v:
                clean[e] = clean.get(e, 0) + v
        self.terms: Dict[Tuple[int, ...], Fraction] = {e: v for e, v in clean.items() if v}

    @classmethod
    def _raw(cls, nvars, terms, cap=None) -> "TruncPoly":
        p = cls.__new__(cls)
        p.nvars, p.terms, p.cap = nvars, terms, cap
        if cap is not None:
            p.terms = S.truncate(terms, cap)
        return p

    @classmethod
    def const(cls, nvars: int, c, cap: Optional[int] = None) -> "TruncPoly":
        return cls(nvars, {(0,) * nvars: c}, cap)

    @classmethod
    def var(cls, nvars: int, i: int, cap: Optional[int] = None) -> "TruncPoly":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1}, cap)

    @classmethod
    def monomial(cls, exp: Sequence[int], coef=1, cap: Optional[int] = None) -> "TruncPoly":
        return cls(len(exp), {tuple(exp): coef}, cap)

    @classmethod
    def zero(cls, nvars: int, cap: Optional[int] = None) -> "TruncPoly":
        return cls._raw(nvars, {}, cap)

    def _check(self, other: "TruncPoly"):
        if self.nvars != other.nvars:
            raise VarMismatch(f"{self.nvars} vs {other.nvars} variables")

    def _lift(self, other) -> "TruncPoly":
        if isinstance(other, TruncPoly):
            self._check(other)
            return other
        return TruncPoly.const(self.nvars, other)

    # ring operations ----------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        return TruncPoly._raw(self.nvars, S.add(self.terms, other.terms),
                              _min_cap(self.cap, other.cap))

    __radd__ = __add__

    def __neg__(self):
        return TruncPoly._raw(self.nvars, {e: -v for e, v in self.terms.items()}, self.cap)

    def __sub__(self, other):
        other = self._lift(other)
        return TruncPoly._raw(self.nvars, S.add(self.terms, other.terms, -1),
                              _min_cap(self.cap, other.cap))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncPoly):
            s = parse_rational(other)
            return TruncPoly._raw(self.nvars, S.scale(self.terms, s), self.cap)
        self._check(other)
        cap = _min_cap(self.cap, other.cap)
        return TruncPoly._raw(self.nvars, S.mul(self.terms, other.terms, cap), cap)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        return TruncPoly._raw(self.nvars, S.power(self.terms, n, self.nvars, self.cap), self.cap)

    def truncate(self, n: int) -> "TruncPoly":
        return TruncPoly._raw(self.nvars, S.truncate(self.terms, n), self.cap)

    def with_cap(self, cap: Optional[int]) -> "TruncPoly":
        return TruncPoly._raw(self.nvars, dict(self.terms), cap)

    # calculus ---------------------------------------------------------------
    def diff(self, i: int) -> "TruncPoly":
        return TruncPoly._raw(self.nvars, S.diff(self.terms, i), self.cap)

    def evaluate(self, point: Sequence):
        if len(point) != self.nvars:
            raise VarMismatch("point has wrong dimension")
        return S.evaluate(self.terms, [parse_rational(x) if not hasattr(x, "tag") else x
                                       for x in point])

    def substitute(self, polys: Sequence["TruncPoly"], cap: Optional[int] = None) -> "TruncPoly":
        """Compose with ``x_i -> polys[i]``."""
        if len(polys) != self.nvars:
            raise VarMismatch("need one substitution per variable")
        m = polys[0].nvars if polys else 0
        for p in polys:
            if p.nvars != m:
                raise VarMismatch("substitutions disagree on nvars")
        return TruncPoly._raw(m, S.substitute(self.terms, [p.terms for p in polys], m, cap), cap)

    def shift(self, point: Sequence) -> "TruncPoly":
        """``p(point + u)`` as a polynomial in ``u``."""
        subs = [TruncPoly(self.nvars, {tuple(int(i == j) for j in range(self.nvars)): 1,
                                       (0,) * self.nvars: parse_rational(point[i])})
                for i in range(self.nvars)]
        return self.substitute(subs).with_cap(self.cap)

    # inspection -------------------------------------------------------------
    @property
    def degree(self) -> int:
        return S.degree(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def coeff(self, exp: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(exp), Fraction(0))

    def constant_term(self) -> Fraction:
        return self.coeff((0,) * self.nvars)

    def is_homogeneous(self) -> Optional[int]:
        """The common degree of all terms, ``None`` if mixed, ``-1`` for zero."""
        degs = {sum(e) for e in self.terms}
        if not degs:
            return -1
        return degs.pop() if len(degs) == 1 else None

    def __eq__(self, other):
        if isinstance(other, TruncPoly):
            return self.nvars == other.nvars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == ({(0,) * self.nvars: Fraction(other)} if other else {})
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda t: (sum(t[0]), tuple(-x for x in t[0])))

    def __repr__(self):
        if not self.terms:
            return "0"
        names = ["x", "y", "z"] if self.nvars <= 3 else [f"x{i + 1}" for i in range(self.nvars)]
        parts = []
        for e, v in self.sorted_terms():
            mono = "*".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k)
            if not mono:
                parts.append(str(v))
            elif v == 1:
                parts.append(mono)
            else:
                parts.append(f"{v}*{mono}")
        return " + ".join(parts)

    def to_json(self) -> list:
        return [{"exp": list(e), "coef": format_rational(v)} for e, v in self.sorted_terms()]

    @classmethod
    def from_json(cls, data: list, nvars: int, cap: Optional[int] = None) -> "TruncPoly":
        terms = {}
        for t in data:
            e = tuple(t["exp"])
            terms[e] = terms.get(e, 0) + parse_rational(t["coef"])
        return cls(nvars, terms, cap)


def poly_arith(a: TruncPoly, b: Optional[TruncPoly], mode: str, n: Optional[int] = None) -> TruncPoly:
    if mode == "add":
        return a + b
    if mode == "mul":
        return a * b
    if mode == "truncate":
        return a.truncate(n)
    raise ValueError(f"unknown mode {mode!r}")


def _as_poly(nvars, p) -> TruncPoly:
    if isinstance(p, TruncPoly):
        if p.nvars != nvars:
            raise VarMismatch(f"{p.nvars} vs {nvars} variables")
        return p
    return TruncPoly.const(nvars, p)


class PolyVectorField:
    """Vector field sum_i X^i d/dx_i with polynomial coefficients."""

    __slots__ = ("nvars", "components")

    def __init__(self, components: Sequence):
        self.nvars = len(components)
        self.components = tuple(_as_poly(self.nvars, c) for c in components)

    @classmethod
    def coordinate(cls, nvars: int, i: int) -> "PolyVectorField":
        return cls([TruncPoly.const(nvars, int(j == i)) for j in range(nvars)])

    @classmethod
    def zero(cls, nvars: int) -> "PolyVectorField":
        return cls([TruncPoly.zero(nvars) for _ in range(nvars)])

    @classmethod
    def euler(cls, nvars: int) -> "PolyVectorField":
        return cls([TruncPoly.var(nvars, i) for i in range(nvars)])

    def __getitem__(self, i):
        return self.components[i]

    def apply(self, f: TruncPoly) -> TruncPoly:
        f = _as_poly(self.nvars, f)
        out = TruncPoly.zero(self.nvars)
        for i, xi in enumerate(self.components):
            if xi:
                out = out + xi * f.diff(i)
        return out

    def bracket(self, other: "PolyVectorField") -> "PolyVectorField":
        if self.nvars != other.nvars:
            raise VarMismatch("vector fields on different bases")
        return PolyVectorField([self.apply(other[i]) - other.apply(self[i])
                                for i in range(self.nvars)])

    def __add__(self, other):
        return PolyVectorField([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        return PolyVectorField([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return PolyVectorField([-a for a in self.components])

    def scale(self, f) -> "PolyVectorField":
        return PolyVectorField([c * f for c in self.components])

    __mul__ = scale
    __rmul__ = scale

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def __eq__(self, other):
        return isinstance(other, PolyVectorField) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        parts = [f"({c})d{i + 1}" for i, c in enumerate(self.components) if c]
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> list:
        return [c.to_json() for c in self.components]


def vf_bracket(x: PolyVectorField, y: PolyVectorField) -> PolyVectorField:
    return x.bracket(y)


def _merge_sign(i: Tuple[int, ...], j: Tuple[int, ...]):
    """Sign and sorted union for dx^I ^ dx^J, or (0, None) if they overlap."""
    if set(i) & set(j):
        return 0, None
    inv = sum(1 for a in i for b in j if a > b)
    return (-1) ** inv, tuple(sorted(i + j))


class PolyForm:
    """Differential form of a fixed degree with polynomial coefficients."""

    __slots__ = ("nvars", "degree", "terms")

    def __init__(self, nvars: int, degree: int, terms=None):
        self.nvars = nvars
        self.degree = degree
        out: Dict[Tuple[int, ...], TruncPoly] = {}
        for idx, f in (terms or {}).items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise DegreeMismatch(f"index {idx} in a degree-{degree} form")
            if len(set(idx)) < len(idx):
                continue
            order = sorted(range(len(idx)), key=lambda k: idx[k])
            sign = _perm_sign(order)
            key = tuple(sorted(idx))
            if any(not (0 <= k < nvars) for k in key):
                raise IndexError(f"form index {key} out of range")
            f = _as_poly(nvars, f) * sign
            out[key] = out[key] + f if key in out else f
        self.terms = {k: v for k, v in out.items() if v}

    @classmethod
    def function(cls, f: TruncPoly) -> "PolyForm":
        return cls(f.nvars, 0, {(): f})

    @classmethod
    def basis(cls, nvars: int, idx: Sequence[int], f=1) -> "PolyForm":
        return cls(nvars, len(idx), {tuple(idx): f})

    @classmethod
    def zero(cls, nvars: int, degree: int) -> "PolyForm":
        return cls(nvars, degree)

    def coeff(self, idx) -> TruncPoly:
        return self.terms.get(tuple(idx), TruncPoly.zero(self.nvars))

    def _same(self, other: "PolyForm"):
        if self.nvars != other.nvars:
            raise VarMismatch("forms on different bases")
        if self.degree != other.degree:
            raise DegreeMismatch(f"degrees {self.degree} and {other.degree}")

    def __add__(self, other):
        self._same(other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t[k] + v if k in t else v
        return PolyForm(self.nvars, self.degree, t)

    def __neg__(self):
        return PolyForm(self.nvars, self.degree, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "PolyForm":
        return PolyForm(self.nvars, self.degree, {k: v * f for k, v in self.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        return (isinstance(other, PolyForm) and self.nvars == other.nvars
                and self.degree == other.degree and self.terms == other.terms)

    def __hash__(self):
        return hash((self.nvars, self.degree, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"({f}) d{'^d'.join(str(i + 1) for i in k) or '1'}"
                          for k, f in sorted(self.terms.items()))

    def d(self) -> "PolyForm":
        out: Dict[Tuple[int, ...], TruncPoly] = {}
        for idx, f in self.terms.items():
            for j in range(self.nvars):
                if j in idx:
                    continue
                df = f.diff(j)
                if not df:
                    continue
                sign, key = _merge_sign((j,), idx)
                out[key] = out[key] + df * sign if key in out else df * sign
        return PolyForm(self.nvars, self.degree + 1, out)

    def wedge(self, other: "PolyForm") -> "PolyForm":
        if self.nvars != other.nvars:
            raise VarMismatch("forms on different bases")
        out: Dict[Tuple[int, ...], TruncPoly] = {}
        for i, f in self.terms.items():
            for j, g in other.terms.items():
                sign, key = _merge_sign(i, j)
                if not sign:
                    continue
                h = f * g * sign
                out[key] = out[key] + h if key in out else h
        return PolyForm(self.nvars, self.degree + other.degree, out)

    def interior(self, x: PolyVectorField) -> "PolyForm":
        out: Dict[Tuple[int, ...], TruncPoly] = {}
        for idx, f in self.terms.items():
            for pos, i in enumerate(idx):
                if not x[i]:
                    continue
                key = idx[:pos] + idx[pos + 1:]
                h = f * x[i] * ((-1) ** pos)
                out[key] = out[key] + h if key in out else h
        return PolyForm(self.nvars, self.degree - 1, out)

    def lie(self, x: PolyVectorField) -> "PolyForm":
        """Lie derivative by the Cartan formula."""
        return self.d().interior(x) + self.interior(x).d()

    def pullback(self, phi: Sequence[TruncPoly]) -> "PolyForm":
        """Pullback along the polynomial map ``x -> phi(x)`` of the base to itself."""
        n = self.nvars
        if len(phi) != n:
            raise VarMismatch("pullback map must have one component per variable")
        dphi = [PolyForm(n, 1, {(j,): phi[i].diff(j) for j in range(n)}) for i in range(n)]
        out = PolyForm.zero(n, self.degree)
        for idx, f in self.terms.items():
            term = PolyForm.function(f.substitute(list(phi)).with_cap(f.cap))
            for i in idx:
                term = term.wedge(dphi[i])
            out = out + term
        return out

    def evaluate(self, vectors: Sequence[PolyVectorField]) -> TruncPoly:
        """Full contraction ``omega(X_1, ..., X_q)``."""
        if len(vectors) != self.degree:
            raise DegreeMismatch("need one vector per form degree")
        w = self
        for x in vectors:
            w = w.interior(x)
        return w.coeff(())

    def to_json(self) -> list:
        return [{"index": list(k), "coef": f.to_json()} for k, f in sorted(self.terms.items())]


def _perm_sign(order: Sequence[int]) -> int:
    inv = 0
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if order[i] > order[j]:
                inv += 1
    return -1 if inv % 2 else 1


def de_rham_d(w: PolyForm) -> PolyForm:
    return w.d()


def form_algebra(op: str, *args) -> PolyForm:
    if op == "wedge":
        a, b = args
        return a.wedge(b)
    if op == "interior":
        x, w = args
        return w.interior(x)
    if op == "lie":
        x, w = args
        return w.lie(x)
    raise ValueError(f"unknown form operation {op!r}")


class PolyMap:
    """Truncated Taylor data of a map sending ``source`` to ``target``.

    ``displacement[j]`` is the polynomial ``u -> F_j(source + u) - target_j``
    with no constant term and degree at most ``order``.
    """

    __slots__ = ("source", "target", "displacement", "order")

    def __init__(self, source: Sequence, target: Sequence,
                 displacement: Sequence[TruncPoly], order: int):
        if order < 1:
            raise InsufficientOrder("order must be at least 1")
        self.source = tuple(parse_rational(v) for v in source)
        self.target = tuple(parse_rational(v) for v in target)
        n = len(self.source)
        if len(displacement) != len(self.target):
            raise VarMismatch("one displacement polynomial per target coordinate")
        disp = []
        for p in displacement:
            p = _as_poly(n, p).truncate(order).with_cap(None)
            if p.constant_term():
                raise ValueError("displacement must vanish at the source point")
            disp.append(p)
        self.displacement = tuple(disp)
        self.order = order

    @classmethod
    def from_polynomials(cls, source: Sequence, polys: Sequence[TruncPoly], order: int) -> "PolyMap":
        """Jet at ``source`` of the global polynomial map ``x -> polys(x)``."""
        source = [parse_rational(v) for v in source]
        target = [p.evaluate(source) for p in polys]
        disp = [p.shift(source) - t for p, t in zip(polys, target)]
        return cls(source, target, disp, order)

    @classmethod
    def identity(cls, point: Sequence, order: int) -> "PolyMap":
        n = len(point)
        return cls(point, point, [TruncPoly.var(n, i) for i in range(n)], order)

    def compose(self, inner: "PolyMap", order: Optional[int] = None) -> "PolyMap":
        """``self o inner``; requires ``inner.target == self.source``."""
        if order is None:
            order = min(self.order, inner.order)
        if inner.target != self.source:
            raise BasePointMismatch(f"{inner.target} is not {self.source}")
        if order > self.order or order > inner.order:
            raise InsufficientOrder(f"requested order {order} exceeds available "
                                    f"{min(self.order, inner.order)}")
        disp = [p.substitute(list(inner.displacement), cap=order).with_cap(None)
                for p in self.displacement]
        return PolyMap(inner.source, self.target, disp, order)

    def derivatives(self) -> List[Dict[Tuple[int, ...], Fraction]]:
        """Per target coordinate, partial derivatives ``{alpha: d^alpha F}`` (value at alpha=0)."""
        out = []
        n = len(self.source)
        for j, p in enumerate(self.displacement):
            d = {(0,) * n: self.target[j]}
            for e, v in p.terms.items():
                d[e] = v * _mfact(e)
            out.append(d)
        return out

    def taylor_values(self) -> List[Fraction]:
        """For one-dimensional maps: (F, F', ..., F^(order)) at the source point."""
        if len(self.source) != 1 or len(self.target) != 1:
            raise VarMismatch("taylor_values needs a one-dimensional map")
        d = self.derivatives()[0]
        return [d.get((k,), Fraction(0)) for k in range(self.order + 1)]

    def __eq__(self, other):
        return (isinstance(other, PolyMap) and self.source == other.source
                and self.target == other.target and self.order == other.order
                and self.displacement == other.displacement)

    def __repr__(self):
        return f"PolyMap({self.source} -> {self.target}, order {self.order}: {list(self.displacement)})"

    def to_json(self) -> dict:
        return {
            "source": [format_rational(v) for v in self.source],
            "target": [format_rational(v) for v in self.target],
            "order": self.order,
            "components": [p.to_json() for p in self.displacement],
        }


def _mfact(e: Sequence[int]) -> int:
    out = 1
    for k in e:
        out *= factorial(k)
    return out


def poly_compose(f: PolyMap, g: PolyMap, order: int) -> PolyMap:
    """Taylor data of ``f o g`` at the source of ``g`` through ``order``."""
    return f.compose(g, order)
