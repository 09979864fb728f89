"""Small symbolic expression IR over exact rationals.

Expressions are immutable trees built from constants, symbols, sums,
products, max/min, and division by a constant (exact or ceiling).
Symbols stand for loop bounds, which are always integers >= 1, so every
expression produced by the cost model is monotone nondecreasing in each
symbol.  Constants may be negative (halo extents subtract a constant)
but whole model expressions stay nonnegative on valid environments.

All construction goes through the helper functions (`const`, `sum_of`,
`prod_of`, ...) which return canonical simplified nodes, so structural
equality of two expressions means algebraic equality of the canonical
forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

Number = Union[int, Fraction]


class SymExpr:
    """Base class; concrete nodes are the frozen dataclasses below."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(SymExpr):
    value: Number


@dataclass(frozen=True)
class Sym(SymExpr):
    name: str


@dataclass(frozen=True)
class Sum(SymExpr):
    terms: tuple[SymExpr, ...]


@dataclass(frozen=True)
class Prod(SymExpr):
    factors: tuple[SymExpr, ...]


@dataclass(frozen=True)
class Max(SymExpr):
    terms: tuple[SymExpr, ...]


@dataclass(frozen=True)
class Min(SymExpr):
    terms: tuple[SymExpr, ...]


@dataclass(frozen=True)
class DivC(SymExpr):
    """Exact division by a positive rational constant."""

    num: SymExpr
    den: Number


@dataclass(frozen=True)
class CeilDiv(SymExpr):
    """Ceiling division by a positive rational constant."""

    num: SymExpr
    den: Number


# short alias used in annotations elsewhere
Expr = SymExpr


def _norm_num(v: Number) -> Number:
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else v
    return v


def const(v: Number) -> Const:
    return Const(_norm_num(Fraction(v) if not isinstance(v, (int, Fraction)) else v))


def _key(e: SymExpr):
    # Total order on canonical nodes, used to sort n-ary operands.
    if isinstance(e, Const):
        f = Fraction(e.value)
        return (0, f.numerator, f.denominator)
    if isinstance(e, Sym):
        return (1, e.name)
    if isinstance(e, Sum):
        return (2,) + tuple(_key(t) for t in e.terms)
    if isinstance(e, Prod):
        return (3,) + tuple(_key(t) for t in e.factors)
    if isinstance(e, Max):
        return (4,) + tuple(_key(t) for t in e.terms)
    if isinstance(e, Min):
        return (5,) + tuple(_key(t) for t in e.terms)
    if isinstance(e, DivC):
        f = Fraction(e.den)
        return (6, _key(e.num), f.numerator, f.denominator)
    if isinstance(e, CeilDiv):
        f = Fraction(e.den)
        return (7, _key(e.num), f.numerator, f.denominator)
    raise TypeError(f"not a SymExpr: {e!r}")


def sum_of(terms: Iterable[SymExpr]) -> SymExpr:
    flat: list[SymExpr] = []
    acc: Number = 0
    for t in terms:
        if isinstance(t, Sum):
            flat.extend(t.terms)
        elif isinstance(t, Const):
            acc = _norm_num(acc + t.value)
        else:
            flat.append(t)
    # nested sums were already canonical, but constants may hide inside
    out: list[SymExpr] = []
    for t in flat:
        if isinstance(t, Const):
            acc = _norm_num(acc + t.value)
        else:
            out.append(t)
    if acc != 0 or not out:
        out.append(Const(_norm_num(acc)))
    out.sort(key=_key)
    return out[0] if len(out) == 1 else Sum(tuple(out))


def prod_of(factors: Iterable[SymExpr]) -> SymExpr:
    flat: list[SymExpr] = []
    acc: Number = 1
    for f in factors:
        if isinstance(f, Prod):
            flat.extend(f.factors)
        else:
            flat.append(f)
    out: list[SymExpr] = []
    for f in flat:
        if isinstance(f, Const):
            acc = _norm_num(acc * f.value)
        else:
            out.append(f)
    if acc == 0:
        return Const(0)
    if acc != 1 or not out:
        out.append(Const(_norm_num(acc)))
    out.sort(key=_key)
    return out[0] if len(out) == 1 else Prod(tuple(out))


def _extremum(terms: Iterable[SymExpr], cls, pick) -> SymExpr:
    flat: list[SymExpr] = []
    cval: Number | None = None
    for t in terms:
        if isinstance(t, cls):
            inner = t.terms
        else:
            inner = (t,)
        for u in inner:
            if isinstance(u, Const):
                cval = u.value if cval is None else pick(cval, u.value)
            else:
                flat.append(u)
    seen = set()
    out = []
    for t in sorted(flat, key=_key):
        k = _key(t)
        if k not in seen:
            seen.add(k)
            out.append(t)
    if cval is not None:
        out.insert(0, Const(_norm_num(cval)))
    if not out:
        raise ValueError("max/min of nothing")
    return out[0] if len(out) == 1 else cls(tuple(out))


def max_of(terms: Iterable[SymExpr]) -> SymExpr:
    return _extremum(terms, Max, max)


def min_of(terms: Iterable[SymExpr]) -> SymExpr:
    return _extremum(terms, Min, min)


def div_const(num: SymExpr, den: Number) -> SymExpr:
    den = _norm_num(Fraction(den))
    if den <= 0:
        raise ValueError(f"divisor must be positive, got {den}")
    if den == 1:
        return num
    if isinstance(num, Const):
        return Const(_norm_num(Fraction(num.value) / den))
    if isinstance(num, DivC):
        return DivC(num.num, _norm_num(Fraction(num.den) * den))
    return DivC(num, den)


def ceil_div(num: SymExpr, den: Number) -> SymExpr:
    den = _norm_num(Fraction(den))
    if den <= 0:
        raise ValueError(f"divisor must be positive, got {den}")
    if den == 1:
        return num
    if isinstance(num, Const):
        return Const(math.ceil(Fraction(num.value) / den))
    return CeilDiv(num, den)


def simplify(e: SymExpr) -> SymExpr:
    """Bottom-up rebuild through the canonicalizing constructors. Idempotent."""
    if isinstance(e, (Const, Sym)):
        return Const(_norm_num(e.value)) if isinstance(e, Const) else e
    if isinstance(e, Sum):
        return sum_of(simplify(t) for t in e.terms)
    if isinstance(e, Prod):
        return prod_of(simplify(f) for f in e.factors)
    if isinstance(e, Max):
        return max_of(simplify(t) for t in e.terms)
    if isinstance(e, Min):
        return min_of(simplify(t) for t in e.terms)
    if isinstance(e, DivC):
        return div_const(simplify(e.num), e.den)
    if isinstance(e, CeilDiv):
        return ceil_div(simplify(e.num), e.den)
    raise TypeError(f"not a SymExpr: {e!r}")


def evaluate(e: SymExpr, env: Mapping[str, Number]) -> Number:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Sym):
        try:
            return env[e.name]
        except KeyError:
            raise KeyError(f"unbound symbol {e.name}") from None
    if isinstance(e, Sum):
        acc: Number = 0
        for t in e.terms:
            acc = acc + evaluate(t, env)
        return _norm_num(acc)
    if isinstance(e, Prod):
        acc = 1
        for f in e.factors:
            acc = acc * evaluate(f, env)
        return _norm_num(acc)
    if isinstance(e, Max):
        return _norm_num(max(evaluate(t, env) for t in e.terms))
    if isinstance(e, Min):
        return _norm_num(min(evaluate(t, env) for t in e.terms))
    if isinstance(e, DivC):
        v = evaluate(e.num, env)
        d = e.den
        if isinstance(v, int) and isinstance(d, int):
            q, r = divmod(v, d)
            return q if r == 0 else Fraction(v, d)
        return _norm_num(Fraction(v) / Fraction(d))
    if isinstance(e, CeilDiv):
        v = evaluate(e.num, env)
        return math.ceil(Fraction(v) / Fraction(e.den))
    raise TypeError(f"not a SymExpr: {e!r}")


def substitute(e: SymExpr, env: Mapping[str, Number]) -> SymExpr:
    """Replace any subset of symbols with constants, then re-canonicalize."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Sym):
        return Const(_norm_num(env[e.name])) if e.name in env else e
    if isinstance(e, Sum):
        return sum_of(substitute(t, env) for t in e.terms)
    if isinstance(e, Prod):
        return prod_of(substitute(f, env) for f in e.factors)
    if isinstance(e, Max):
        return max_of(substitute(t, env) for t in e.terms)
    if isinstance(e, Min):
        return min_of(substitute(t, env) for t in e.terms)
    if isinstance(e, DivC):
        return div_const(substitute(e.num, env), e.den)
    if isinstance(e, CeilDiv):
        return ceil_div(substitute(e.num, env), e.den)
    raise TypeError(f"not a SymExpr: {e!r}")


def symbols_of(e: SymExpr) -> frozenset[str]:
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Sym):
        return frozenset((e.name,))
    if isinstance(e, (Sum, Max, Min)):
        out: frozenset[str] = frozenset()
        for t in e.terms:
            out |= symbols_of(t)
        return out
    if isinstance(e, Prod):
        out = frozenset()
        for f in e.factors:
            out |= symbols_of(f)
        return out
    if isinstance(e, (DivC, CeilDiv)):
        return symbols_of(e.num)
    raise TypeError(f"not a SymExpr: {e!r}")


def partition_terms(e: SymExpr) -> tuple[SymExpr, ...]:
    """Top-level operands of an n-ary node, or the expression itself."""
    if isinstance(e, (Sum, Max, Min)):
        return e.terms
    if isinstance(e, Prod):
        return e.factors
    return (e,)


def quotient_of_products(a: SymExpr, b: SymExpr) -> SymExpr:
    """Cancel b out of a where both are products of symbols and constants.

    Raises ValueError when the division is not exact at the symbol level,
    e.g. (k1*k2)/k1 is k2 but (k1+k2)/k1 is rejected.
    """

    def factors(e: SymExpr) -> list[SymExpr]:
        if isinstance(e, Prod):
            return list(e.factors)
        return [e]

    num = factors(simplify(a))
    den = factors(simplify(b))
    cnum: Fraction = Fraction(1)
    for d in den:
        if isinstance(d, Const):
            cnum /= Fraction(d.value)
            continue
        for i, n in enumerate(num):
            if _key(n) == _key(d):
                num.pop(i)
                break
        else:
            raise ValueError(f"cannot cancel {d!r}")
    num.append(Const(_norm_num(cnum)))
    return prod_of(num)


def to_text(e: SymExpr) -> str:
    """Readable infix form, used by the explain command and debugging."""
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Sum):
        return " + ".join(to_text(t) for t in e.terms)
    if isinstance(e, Prod):
        parts = []
        for f in e.factors:
            t = to_text(f)
            parts.append(f"({t})" if isinstance(f, Sum) else t)
        return "*".join(parts)
    if isinstance(e, Max):
        return "max(" + ", ".join(to_text(t) for t in e.terms) + ")"
    if isinstance(e, Min):
        return "min(" + ", ".join(to_text(t) for t in e.terms) + ")"
    if isinstance(e, DivC):
        t = to_text(e.num)
        if isinstance(e.num, (Sum, Prod)):
            t = f"({t})"
        return f"{t}/{e.den}"
    if isinstance(e, CeilDiv):
        return f"ceil({to_text(e.num)}/{e.den})"
    raise TypeError(f"not a SymExpr: {e!r}")
