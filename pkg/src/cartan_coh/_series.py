"""Polynomial arithmetic on bare term dictionaries.

A polynomial is a dict mapping exponent tuples to coefficients.  The
coefficients can live in any commutative ring whose elements support
``+``, ``*`` and truth testing (Fraction, dual numbers, sympy expressions).
These helpers back both :mod:`formal` (rational coefficients) and
:mod:`jet` (dual-number coefficients).
"""

from __future__ import annotations

from typing import Dict, Optional, Sequence, Tuple

Exp = Tuple[int, ...]
Terms = Dict[Exp, object]


def clean(terms: Terms) -> Terms:
    return {e: v for e, v in terms.items() if v}


def add(a: Terms, b: Terms, scale=1) -> Terms:
    out = dict(a)
    for e, v in b.items():
        nv = out.get(e, 0) + scale * v
        if nv:
            out[e] = nv
        else:
            out.pop(e, None)
    return out


def scale(a: Terms, s) -> Terms:
    return clean({e: s * v for e, v in a.items()})


def mul(a: Terms, b: Terms, cap: Optional[int] = None) -> Terms:
    out: Terms = {}
    for e1, v1 in a.items():
        d1 = sum(e1)
        if cap is not None and d1 > cap:
            continue
        for e2, v2 in b.items():
            if cap is not None and d1 + sum(e2) > cap:
                continue
            e = tuple(x + y for x, y in zip(e1, e2))
            out[e] = out.get(e, 0) + v1 * v2
    return clean(out)


def power(a: Terms, n: int, nvars: int, cap: Optional[int] = None) -> Terms:
    out: Terms = {(0,) * nvars: 1}
    for _ in range(n):
        out = mul(out, a, cap)
    return out


def truncate(a: Terms, cap: int) -> Terms:
    return {e: v for e, v in a.items() if sum(e) <= cap}


def degree(a: Terms) -> int:
    return max((sum(e) for e in a), default=-1)


def diff(a: Terms, i: int) -> Terms:
    out: Terms = {}
    for e, v in a.items():
        k = e[i]
        if k:
            ne = e[:i] + (k - 1,) + e[i + 1:]
            out[ne] = out.get(ne, 0) + k * v
    return clean(out)


def evaluate(a: Terms, point: Sequence):
    total = 0
    for e, v in a.items():
        term = v
        for x, k in zip(point, e):
            if k:
                term = term * x ** k
        total = total + term
    return total


def substitute(a: Terms, subs: Sequence[Terms], nvars_out: int,
               cap: Optional[int] = None) -> Terms:
    """Replace variable ``i`` of ``a`` by the polynomial ``subs[i]``."""
    cache: Dict[Tuple[int, int], Terms] = {}
    one = {(0,) * nvars_out: 1}

    def pw(i, k):
        key = (i, k)
        if key not in cache:
            cache[key] = one if k == 0 else mul(pw(i, k - 1), subs[i], cap)
        return cache[key]

    out: Terms = {}
    for e, v in a.items():
        term = {(0,) * nvars_out: v}
        for i, k in enumerate(e):
            if k:
                term = mul(term, pw(i, k), cap)
        out = add(out, term)
    return out


def monomials(nvars: int, deg: int):
    """All exponent tuples of total degree ``deg`` in graded-lex order."""
    if nvars == 0:
        if deg == 0:
            yield ()
        return
    for first in range(deg, -1, -1):
        for rest in monomials(nvars - 1, deg - first):
            yield (first,) + rest


def monomials_upto(nvars: int, deg: int):
    for d in range(deg + 1):
        yield from monomials(nvars, d)
