"""Nested dual numbers for exact first-order variations.

``Dual(tag, a, b)`` stands for ``a + b*eps_tag`` with ``eps_tag**2 = 0``.
Different tags are independent infinitesimals; the larger tag is always the
outer wrapper, so ``a`` and ``b`` only ever contain smaller tags or plain
scalars.  Arithmetic is exact when the scalars are exact.
"""

from __future__ import annotations

from fractions import Fraction


def _tag(x) -> int:
    return x.tag if isinstance(x, Dual) else -1


def _split(x, tag):
    """Return (real, eps) parts of ``x`` with respect to ``tag``."""
    if isinstance(x, Dual) and x.tag == tag:
        return x.a, x.b
    return x, 0


class Dual:
    __slots__ = ("tag", "a", "b")

    def __init__(self, tag: int, a, b=0):
        self.tag = tag
        self.a = a
        self.b = b

    @staticmethod
    def make(tag, a, b):
        if not b:
            return a
        return Dual(tag, a, b)

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def __add__(self, other):
        t = max(self.tag, _tag(other))
        a1, b1 = _split(self, t)
        a2, b2 = _split(other, t)
        return Dual.make(t, a1 + a2, b1 + b2)

    __radd__ = __add__

    def __neg__(self):
        return Dual(self.tag, -self.a, -self.b)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        t = max(self.tag, _tag(other))
        a1, b1 = _split(self, t)
        a2, b2 = _split(other, t)
        return Dual.make(t, a1 * a2, a1 * b2 + b1 * a2)

    __rmul__ = __mul__

    def inverse(self):
        inv_a = _inv(self.a)
        return Dual.make(self.tag, inv_a, -self.b * inv_a * inv_a)

    def __truediv__(self, other):
        return self * _inv(other)

    def __rtruediv__(self, other):
        return other * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        out = 1
        base = self
        while n:
            if n & 1:
                out = base * out
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        return not bool(self - other)

    def __hash__(self):
        return hash((self.tag, self.a, self.b))

    def __repr__(self):
        return f"Dual[{self.tag}]({self.a!r}, {self.b!r})"


def _inv(x):
    if isinstance(x, Dual):
        return x.inverse()
    if isinstance(x, int):
        return Fraction(1, x)
    return 1 / x


def real(x, tag: int):
    """Part of ``x`` free of ``eps_tag``."""
    return _split(x, tag)[0]


def eps(x, tag: int):
    """Coefficient of ``eps_tag`` in ``x``."""
    return _split(x, tag)[1]


def inv(x):
    return _inv(x)
