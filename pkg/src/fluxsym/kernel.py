"""Symbolic expression kernel.

A small, purpose-built expression engine: immutable trees over rational
constants, named symbols, sums, products, powers and function applications,
with exact rational arithmetic, a canonical (idempotent) normal form,
differentiation with jet-symbol bookkeeping, simultaneous substitution,
randomized zero testing and double-precision evaluation.

The normal form is a collected "generalized Laurent polynomial": a sum of
monomials, each a rational coefficient times powers of atomic bases.  Bases
are symbols, function applications, or sums raised to a negative-integer or
non-integer exponent (kept opaque).  Positive integer powers of sums are
expanded; powers with equal bases combine by exponent addition.  Non-integer
powers assume positive bases (evaluation raises otherwise).
"""

from __future__ import annotations

import math
import random
import threading
from dataclasses import dataclass
from fractions import Fraction


class KernelError(Exception):
    """Base class for kernel failures."""


class UndeclaredSymbolError(KernelError):
    pass


class ArityError(KernelError):
    pass


class DifferentiationError(KernelError):
    pass


class SubstitutionError(KernelError):
    pass


class EvaluationError(KernelError):
    pass


# --------------------------------------------------------------------------
# Expression nodes
# --------------------------------------------------------------------------

class Expr:
    """Immutable expression tree node. Arithmetic operators build raw
    (unnormalized) trees; call normalize() at API boundaries."""

    __slots__ = ()

    def __add__(self, other):
        return Add((self, as_expr(other)))

    def __radd__(self, other):
        return Add((as_expr(other), self))

    def __sub__(self, other):
        return Add((self, Mul((MINUS_ONE, as_expr(other)))))

    def __rsub__(self, other):
        return Add((as_expr(other), Mul((MINUS_ONE, self))))

    def __mul__(self, other):
        return Mul((self, as_expr(other)))

    def __rmul__(self, other):
        return Mul((as_expr(other), self))

    def __truediv__(self, other):
        return Mul((self, Pow(as_expr(other), MINUS_ONE)))

    def __rtruediv__(self, other):
        return Mul((as_expr(other), Pow(self, MINUS_ONE)))

    def __pow__(self, other):
        return Pow(self, as_expr(other))

    def __neg__(self):
        return Mul((MINUS_ONE, self))

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"<{type(self).__name__} {to_text(self)}>"


@dataclass(frozen=True, repr=False)
class Rat(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True, repr=False)
class Sym(Expr):
    name: str


@dataclass(frozen=True, repr=False)
class Add(Expr):
    terms: tuple


@dataclass(frozen=True, repr=False)
class Mul(Expr):
    factors: tuple


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True, repr=False)
class Call(Expr):
    func: str
    args: tuple


ZERO = Rat(Fraction(0))
ONE = Rat(Fraction(1))
MINUS_ONE = Rat(Fraction(-1))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Rat(Fraction(x))
    raise TypeError(f"cannot interpret {x!r} as an expression")


def rat(p, q=1) -> Rat:
    return Rat(Fraction(p, q))


# --------------------------------------------------------------------------
# Symbol table
# --------------------------------------------------------------------------

KINDS = ("coordinate", "parameter", "jet", "arbitrary-function", "arbitrary-constant")


@dataclass(frozen=True)
class SymbolInfo:
    name: str
    kind: str
    base: str | None = None          # jet: the differentiated function
    order: tuple | None = None       # jet: (d/dr count, d/dt count)
    arity: int | None = None         # arbitrary-function: argument count
    depends: tuple = ()              # arity-0 functions: implicit arguments


class SymbolTable:
    """Append-only registry of symbol names and their roles.

    Jets are named "<base>_<r...><t...>" (r's before t's), so mixed partials
    canonicalize to a single symbol regardless of differentiation order.
    """

    def __init__(self):
        self._entries: dict[str, SymbolInfo] = {}
        self._lock = threading.RLock()

    def declare(self, name: str, kind: str, *, base=None, order=None,
                arity=None, depends=()) -> Sym:
        if kind not in KINDS:
            raise KernelError(f"unknown symbol kind {kind!r}")
        info = SymbolInfo(name, kind, base, order, arity, tuple(depends))
        with self._lock:
            prior = self._entries.get(name)
            if prior is not None:
                if prior != info:
                    raise KernelError(
                        f"symbol {name!r} already declared as {prior.kind}")
                return Sym(name)
            if kind == "jet":
                if base is None or order is None or sum(order) < 1:
                    raise KernelError("jet symbols need a base and a nonempty order")
                if base not in self._entries:
                    raise KernelError(f"jet base {base!r} is not declared")
            self._entries[name] = info
        return Sym(name)

    def info(self, name: str) -> SymbolInfo:
        try:
            return self._entries[name]
        except KeyError:
            raise UndeclaredSymbolError(f"symbol {name!r} is not declared") from None

    def is_declared(self, name: str) -> bool:
        return name in self._entries

    def names(self):
        return list(self._entries)

    def jet_name(self, base: str, d_r: int, d_t: int) -> str:
        return f"{base}_" + "r" * d_r + "t" * d_t

    def jet(self, base: str, d_r: int, d_t: int) -> Sym:
        """The jet of `base` with the given multi-index, declared on demand."""
        if d_r == d_t == 0:
            return Sym(base)
        name = self.jet_name(base, d_r, d_t)
        with self._lock:
            if name not in self._entries:
                self.declare(name, "jet", base=base, order=(d_r, d_t))
        return Sym(name)

    def derivative_function(self, func: str) -> str:
        """Name of the derivative symbol of a unary function (G -> G')."""
        info = self.info(func)
        if info.kind != "arbitrary-function" or info.arity != 1:
            raise DifferentiationError(
                f"{func!r} is not a unary arbitrary function")
        name = func + "'"
        with self._lock:
            if name not in self._entries:
                self._entries[name] = SymbolInfo(name, "arbitrary-function", arity=1)
        return name


# --------------------------------------------------------------------------
# Canonical normal form
# --------------------------------------------------------------------------
#
# Internal representation during normalization:
#   poly     : dict  monomial -> Fraction           (sum of monomials)
#   monomial : tuple of (base Expr, exponent Expr)  sorted by sort key
#
# Bases are normalized atoms (Sym, Call, Rat for irrational constant powers,
# or Add for opaque sum powers); exponents are normalized expressions.

def _key(e: Expr):
    """Deterministic total order on normalized expressions."""
    if isinstance(e, Rat):
        return (0, e.value)
    if isinstance(e, Sym):
        return (1, e.name)
    if isinstance(e, Call):
        return (2, e.func, tuple(_key(a) for a in e.args))
    if isinstance(e, Pow):
        return (3, _key(e.base), _key(e.exponent))
    if isinstance(e, Mul):
        return (4, tuple(_key(f) for f in e.factors))
    if isinstance(e, Add):
        return (5, tuple(_key(t) for t in e.terms))
    raise TypeError(type(e))


def _poly_add(p: dict, q: dict) -> dict:
    out = dict(p)
    for mono, c in q.items():
        nc = out.get(mono, Fraction(0)) + c
        if nc:
            out[mono] = nc
        else:
            out.pop(mono, None)
    return out


def _poly_scale(p: dict, c: Fraction) -> dict:
    if not c:
        return {}
    return {m: v * c for m, v in p.items()}


def _is_int(e: Expr) -> bool:
    return isinstance(e, Rat) and e.value.denominator == 1


def _merge_pairs(pairs_a, pairs_b):
    """Combine two power lists, adding exponents of equal bases.

    Returns (pairs, expansions) where expansions are (add_expr, k) factors
    whose exponent became a positive integer and must be multiplied out.
    """
    acc: dict = {}
    order: list = []
    for base, exp in list(pairs_a) + list(pairs_b):
        if base in acc:
            acc[base] = _add_exponents(acc[base], exp)
        else:
            acc[base] = exp
            order.append(base)
    pairs = []
    expansions = []
    for base in order:
        exp = acc[base]
        if isinstance(exp, Rat) and exp.value == 0:
            continue
        if isinstance(base, Add) and _is_int(exp) and exp.value > 0:
            expansions.append((base, int(exp.value)))
            continue
        pairs.append((base, exp))
    pairs.sort(key=lambda be: _key(be[0]))
    return tuple(pairs), expansions


def _add_exponents(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Rat) and isinstance(b, Rat):
        return Rat(a.value + b.value)
    return normalize(Add((a, b)))


def _mul_exponent(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Rat) and isinstance(b, Rat):
        return Rat(a.value * b.value)
    return normalize(Mul((a, b)))


def _mono_mul(m1, c1: Fraction, m2, c2: Fraction):
    pairs, expansions = _merge_pairs(m1, m2)
    return pairs, c1 * c2, expansions


def _maybe_atomize(p: dict, other: dict):
    """If the primitive part of multi-term `p` equals an opaque power base
    already present in `other`, represent p as that base to first power so
    exponents combine instead of distributing over the expansion."""
    if len(p) < 2:
        return None
    bases = {b for mono in other for b, _ in mono if isinstance(b, Add)}
    if not bases:
        return None
    c, prim = _poly_content(p)
    prim_expr = _rebuild(prim)
    if prim_expr in bases:
        return {((prim_expr, ONE),): c}
    return None


def _poly_mul(p: dict, q: dict) -> dict:
    q2 = _maybe_atomize(q, p)
    if q2 is not None:
        q = q2
    else:
        p2 = _maybe_atomize(p, q)
        if p2 is not None:
            p = p2
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            pairs, c, expansions = _mono_mul(m1, c1, m2, c2)
            term = {pairs: c}
            for base, k in expansions:
                term = _poly_mul(term, _poly_int_pow(_to_poly(base), k))
            out = _poly_add(out, term)
    return out


def _poly_int_pow(p: dict, k: int) -> dict:
    result = {(): Fraction(1)}
    acc = p
    while k:
        if k & 1:
            result = _poly_mul(result, acc)
        k >>= 1
        if k:
            acc = _poly_mul(acc, acc)
    return result


def _poly_content(p: dict):
    """Split a multi-term poly into (leading coefficient, primitive poly)."""
    lead = max(p, key=lambda m: _key(_rebuild({m: Fraction(1)})))
    c = p[lead]
    return c, _poly_scale(p, 1 / c)


def _coef_power_atom(c: Fraction, exponent: Expr):
    """Rational constant raised to a non-integer exponent, as a (base, exp) pair."""
    return (Rat(c), exponent)


def _to_poly(e: Expr) -> dict:
    if isinstance(e, Rat):
        return {(): e.value} if e.value else {}
    if isinstance(e, (Sym, Call)):
        if isinstance(e, Call):
            e = Call(e.func, tuple(normalize(a) for a in e.args))
        return {((e, ONE),): Fraction(1)}
    if isinstance(e, Add):
        out: dict = {}
        for t in e.terms:
            out = _poly_add(out, _to_poly(t))
        return out
    if isinstance(e, Mul):
        return _poly_product(e.factors)
    if isinstance(e, Pow):
        return _poly_product((e,))
    raise TypeError(type(e))


def _poly_product(factors) -> dict:
    """Product of (possibly powered) factors with base/exponent pairs
    collected *before* any expansion, so powers of the same sum combine
    across factors.  Non-integer exponents distribute over products
    (positive-base convention)."""
    coef = Fraction(1)
    pairs: list = []
    zero = False

    def absorb(f: Expr, outer_exp: Expr):
        nonlocal coef, zero
        if zero:
            return
        if isinstance(f, Mul):
            for g in f.factors:
                absorb(g, outer_exp)
            return
        if isinstance(f, Pow):
            absorb(f.base, _mul_exponent(normalize(f.exponent), outer_exp))
            return
        pf = _to_poly(f)
        if not pf:
            # 0**e: zero for positive integer exponents, opaque otherwise
            if isinstance(outer_exp, Rat) and outer_exp.value > 0:
                zero = True
            else:
                pairs.append((ZERO, outer_exp))
            return
        if len(pf) == 1:
            (mono, c), = pf.items()
            pairs.extend((b, _mul_exponent(x, outer_exp)) for b, x in mono)
            if c != 1:
                if _is_int(outer_exp):
                    coef *= c ** int(outer_exp.value)
                else:
                    pairs.append(_coef_power_atom(c, outer_exp))
            return
        c, prim = _poly_content(pf)
        if c != 1:
            if _is_int(outer_exp):
                coef *= c ** int(outer_exp.value)
            else:
                pairs.append(_coef_power_atom(c, outer_exp))
        pairs.append((_rebuild(prim), outer_exp))

    for f in factors:
        absorb(f, ONE)
    if zero:
        return {}
    merged, expansions = _merge_pairs(pairs, [])
    out = {merged: coef}
    for base, k in expansions:
        out = _poly_mul(out, _poly_int_pow(_to_poly(base), k))
    return out


def _rebuild(p: dict) -> Expr:
    if not p:
        return ZERO
    terms = []
    for mono, coef in p.items():
        factors = []
        if coef != 1 or not mono:
            factors.append(Rat(coef))
        for base, exp in mono:
            if isinstance(exp, Rat) and exp.value == 1:
                factors.append(base)
            else:
                factors.append(Pow(base, exp))
        terms.append(factors[0] if len(factors) == 1 else Mul(tuple(factors)))
    terms.sort(key=_key)
    return terms[0] if len(terms) == 1 else Add(tuple(terms))


def normalize(e: Expr) -> Expr:
    """Canonical form: expanded, collected, deterministically ordered.
    Idempotent; structural equality of normal forms is the kernel's equality."""
    return _rebuild(_to_poly(as_expr(e)))


def equal(a: Expr, b: Expr) -> bool:
    return normalize(Add((as_expr(a), Mul((MINUS_ONE, as_expr(b)))))) == ZERO


def sign_normalize(e: Expr) -> Expr:
    """Flip the overall sign so the leading monomial's coefficient is positive."""
    p = _to_poly(as_expr(e))
    if not p:
        return ZERO
    lead = max(p, key=lambda m: _key(_rebuild({m: Fraction(1)})))
    if p[lead] < 0:
        p = _poly_scale(p, Fraction(-1))
    return _rebuild(p)


def free_symbols(e: Expr) -> set:
    out: set = set()
    stack = [as_expr(e)]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Sym):
            out.add(cur.name)
        elif isinstance(cur, Add):
            stack.extend(cur.terms)
        elif isinstance(cur, Mul):
            stack.extend(cur.factors)
        elif isinstance(cur, Pow):
            stack.extend((cur.base, cur.exponent))
        elif isinstance(cur, Call):
            out.add(cur.func)
            stack.extend(cur.args)
    return out


def collect_by(e: Expr, split_names: tuple) -> dict:
    """Group the normal form of `e` by monomials in the named symbols.

    Returns {key monomial Expr (in the split symbols only): coefficient Expr}.
    Split symbols must occur with integer exponents.
    """
    split = set(split_names)
    groups: dict = {}
    for mono, coef in _to_poly(as_expr(e)).items():
        key_pairs, rest_pairs = [], []
        for base, exp in mono:
            if isinstance(base, Sym) and base.name in split:
                if not _is_int(exp):
                    raise KernelError(
                        f"non-integer power of split symbol {base.name}")
                key_pairs.append((base, exp))
            else:
                rest_pairs.append((base, exp))
        key = _rebuild({tuple(key_pairs): Fraction(1)})
        part = {tuple(rest_pairs): coef}
        groups[key] = _poly_add(groups.get(key, {}), part)
    return {k: _rebuild(v) for k, v in groups.items() if v}


def poly_div_exact(p: Expr, q: Expr):
    """Monomial-quotient division: returns monomial m with p == q*m, else None.

    Exact and deterministic; covers the engine's jet eliminations, whose
    multipliers are always single monomials.
    """
    pp = _to_poly(as_expr(p))
    qq = _to_poly(as_expr(q))
    if not qq:
        return None
    if not pp:
        return ZERO
    lead_p = max(pp, key=lambda m: _key(_rebuild({m: Fraction(1)})))
    for mono_q in sorted(qq, key=lambda m: _key(_rebuild({m: Fraction(1)}))):
        inv = tuple((b, _mul_exponent(e, MINUS_ONE)) for b, e in mono_q)
        pairs, c, expansions = _mono_mul(lead_p, pp[lead_p], inv, 1 / qq[mono_q])
        if expansions:
            continue
        cand = {pairs: c}
        if _poly_add(pp, _poly_scale(_poly_mul(cand, qq), Fraction(-1))) == {}:
            return _rebuild(cand)
    return None


def clear_denominators(e: Expr) -> Expr:
    """Multiply by the minimal symbol monomial making all symbol powers
    nonnegative (r**-1 terms become polynomial)."""
    p = _to_poly(as_expr(e))
    mins: dict = {}
    for mono in p:
        for base, exp in mono:
            if isinstance(base, Sym) and _is_int(exp) and exp.value < 0:
                cur = mins.get(base, Fraction(0))
                mins[base] = min(cur, exp.value)
    if not mins:
        return _rebuild(p)
    factor = {tuple(sorted(((b, Rat(-v)) for b, v in mins.items()),
                           key=lambda be: _key(be[0]))): Fraction(1)}
    return _rebuild(_poly_mul(p, factor))


# --------------------------------------------------------------------------
# Differentiation
# --------------------------------------------------------------------------

def differentiate(e: Expr, var, table: SymbolTable) -> Expr:
    """Partial derivative with jet bookkeeping.

    Coordinates r, t drive the jets: an arity-0 function symbol F(r,t)
    differentiates to its jet (D -> D_r), a jet to the next jet (D_r -> D_rr),
    and a unary arbitrary function by the chain rule through its derivative
    symbol.  phi and w are independent coordinates at this layer and
    differentiate to 0 under d/dr, d/dt.
    """
    var_name = var.name if isinstance(var, Sym) else str(var)
    if not table.is_declared(var_name) or table.info(var_name).kind != "coordinate":
        raise DifferentiationError(f"{var_name!r} is not a coordinate")
    return normalize(_diff(as_expr(e), var_name, table))


def _diff(e: Expr, var: str, table: SymbolTable) -> Expr:
    if isinstance(e, Rat):
        return ZERO
    if isinstance(e, Sym):
        return _diff_symbol(e, var, table)
    if isinstance(e, Add):
        return Add(tuple(_diff(t, var, table) for t in e.terms))
    if isinstance(e, Mul):
        terms = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = _diff(f, var, table)
            if df == ZERO:
                continue
            terms.append(Mul(tuple(fs[:i] + (df,) + fs[i + 1:])))
        return Add(tuple(terms)) if terms else ZERO
    if isinstance(e, Pow):
        if normalize(_diff(e.exponent, var, table)) != ZERO:
            raise DifferentiationError(
                f"exponent {to_text(e.exponent)} depends on {var}")
        db = normalize(_diff(e.base, var, table))
        if db == ZERO:
            return ZERO
        return Mul((e.exponent, Pow(e.base, Add((e.exponent, MINUS_ONE))), db))
    if isinstance(e, Call):
        terms = []
        for i, a in enumerate(e.args):
            da = _diff(a, var, table)
            if da == ZERO:
                continue
            if e.func == "exp":
                dfn = Call("exp", e.args)
            else:
                info = table.info(e.func)
                if info.arity != len(e.args):
                    raise ArityError(
                        f"{e.func} called with {len(e.args)} args, arity {info.arity}")
                if len(e.args) != 1:
                    raise DifferentiationError(
                        f"chain rule implemented for unary functions only: {e.func}")
                dfn = Call(table.derivative_function(e.func), e.args)
            terms.append(Mul((dfn, da)))
        return Add(tuple(terms)) if terms else ZERO
    raise TypeError(type(e))


def _diff_symbol(s: Sym, var: str, table: SymbolTable) -> Expr:
    if s.name == var:
        return ONE
    info = table.info(s.name) if table.is_declared(s.name) else None
    if info is None:
        raise UndeclaredSymbolError(f"symbol {s.name!r} is not declared")
    if var not in ("r", "t"):
        return ZERO
    if info.kind == "arbitrary-function" and info.arity in (0, None) and info.depends:
        if var in info.depends:
            return table.jet(s.name, int(var == "r"), int(var == "t"))
        return ZERO
    if info.kind == "jet":
        base_info = table.info(info.base)
        if base_info.kind == "coordinate" or var in base_info.depends:
            d_r, d_t = info.order
            return table.jet(info.base, d_r + int(var == "r"), d_t + int(var == "t"))
        return ZERO
    return ZERO


# --------------------------------------------------------------------------
# Substitution
# --------------------------------------------------------------------------

def substitute(e: Expr, bindings: dict, table: SymbolTable) -> Expr:
    """Simultaneous substitution; the result is normalized.

    Keys are symbols (or names).  Binding an arity-0 function symbol also
    rewrites its jets to the corresponding derivatives of the replacement.
    Binding an applied function symbol is an arity error.
    """
    named: dict[str, Expr] = {}
    for k, v in bindings.items():
        name = k.name if isinstance(k, Sym) else str(k)
        named[name] = as_expr(v)
    for name in list(named):
        if table.is_declared(name):
            info = table.info(name)
            if info.kind == "arbitrary-function" and (info.arity or 0) >= 1:
                raise SubstitutionError(
                    f"cannot substitute applied function symbol {name!r} "
                    f"(arity {info.arity})")
            if info.kind == "arbitrary-function" and info.depends:
                repl = named[name]
                for other in table.names():
                    oi = table.info(other)
                    if oi.kind == "jet" and oi.base == name and other not in named:
                        d_r, d_t = oi.order
                        named[other] = _nth_derivative(repl, d_r, d_t, table)
    return normalize(_subst(as_expr(e), named))


def _nth_derivative(e: Expr, d_r: int, d_t: int, table: SymbolTable) -> Expr:
    out = e
    for _ in range(d_r):
        out = differentiate(out, "r", table)
    for _ in range(d_t):
        out = differentiate(out, "t", table)
    return out


def _subst(e: Expr, named: dict) -> Expr:
    if isinstance(e, Rat):
        return e
    if isinstance(e, Sym):
        return named.get(e.name, e)
    if isinstance(e, Add):
        return Add(tuple(_subst(t, named) for t in e.terms))
    if isinstance(e, Mul):
        return Mul(tuple(_subst(f, named) for f in e.factors))
    if isinstance(e, Pow):
        return Pow(_subst(e.base, named), _subst(e.exponent, named))
    if isinstance(e, Call):
        if e.func in named:
            raise SubstitutionError(
                f"cannot substitute applied function symbol {e.func!r}")
        return Call(e.func, tuple(_subst(a, named) for a in e.args))
    raise TypeError(type(e))


# --------------------------------------------------------------------------
# Numeric evaluation
# --------------------------------------------------------------------------

_FD_STEP = 1e-6


def evaluate(e: Expr, point: dict, fns: dict | None = None,
             table: SymbolTable | None = None) -> float:
    """Double-precision value of `e` with all free symbols bound.

    `point` maps symbol names (or Syms) to numbers; `fns` maps function
    names to callables.  A derivative symbol G' without an explicit callable
    falls back to a central finite difference of G (step 1e-6).
    """
    env = {(k.name if isinstance(k, Sym) else str(k)): float(v)
           for k, v in point.items()}
    fns = dict(fns or {})
    return _eval(as_expr(e), env, fns)


def _eval(e: Expr, env: dict, fns: dict) -> float:
    if isinstance(e, Rat):
        return float(e.value)
    if isinstance(e, Sym):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"unbound symbol {e.name!r}") from None
    if isinstance(e, Add):
        return sum(_eval(t, env, fns) for t in e.terms)
    if isinstance(e, Mul):
        out = 1.0
        for f in e.factors:
            out *= _eval(f, env, fns)
        return out
    if isinstance(e, Pow):
        b = _eval(e.base, env, fns)
        x = _eval(e.exponent, env, fns)
        if b == 0.0 and x < 0:
            raise EvaluationError("division by zero (negative power of 0)")
        if b < 0.0 and x != round(x):
            raise EvaluationError(
                f"non-integral power of a negative base: ({b})**{x}")
        return b ** x
    if isinstance(e, Call):
        args = [_eval(a, env, fns) for a in e.args]
        fn = _resolve_fn(e.func, fns)
        return float(fn(*args))
    raise TypeError(type(e))


def _resolve_fn(name: str, fns: dict):
    if name in fns:
        return fns[name]
    if name == "exp":
        return math.exp
    if name.endswith("'"):
        base = _resolve_fn(name[:-1], fns)
        def fd(x, _f=base):
            return (_f(x + _FD_STEP) - _f(x - _FD_STEP)) / (2 * _FD_STEP)
        return fd
    raise EvaluationError(f"no callable bound for function {name!r}")


# --------------------------------------------------------------------------
# Zero testing
# --------------------------------------------------------------------------

class ZeroVerdict:
    ZERO = "zero"
    NONZERO = "nonzero"
    UNKNOWN = "unknown"


def _sample_fraction(rng: random.Random) -> Fraction:
    num = rng.choice([n for n in range(-6, 7) if n != 0])
    den = rng.randint(1, 4)
    return Fraction(num, den)


def _sample_poly(rng: random.Random, degree=3):
    return [_sample_fraction(rng) for _ in range(degree + 1)]


def _poly_eval(coeffs, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_derivative(coeffs):
    return [c * k for k, c in enumerate(coeffs)][1:] or [Fraction(0)]


class _Inexact(Exception):
    pass


def _eval_exact(e: Expr, env: dict, fpolys: dict) -> Fraction:
    if isinstance(e, Rat):
        return e.value
    if isinstance(e, Sym):
        return env[e.name]
    if isinstance(e, Add):
        return sum((_eval_exact(t, env, fpolys) for t in e.terms), Fraction(0))
    if isinstance(e, Mul):
        out = Fraction(1)
        for f in e.factors:
            out *= _eval_exact(f, env, fpolys)
        return out
    if isinstance(e, Pow):
        x = _eval_exact(e.exponent, env, fpolys)
        if x.denominator != 1:
            raise _Inexact
        b = _eval_exact(e.base, env, fpolys)
        if b == 0 and x < 0:
            raise ZeroDivisionError
        return b ** int(x)
    if isinstance(e, Call):
        if e.func == "exp" or len(e.args) != 1:
            raise _Inexact
        x = _eval_exact(e.args[0], env, fpolys)
        return _poly_eval(fpolys[e.func], x)
    raise TypeError(type(e))


def is_zero(e: Expr, table: SymbolTable, trials: int = 32,
            seed: int = 0, rng: random.Random | None = None) -> str:
    """'zero' iff the normal form is 0; otherwise randomized evaluation.

    Samples all symbols at random rationals (jets independently) and
    arbitrary functions as random cubic polynomials with exact derivative
    polynomials for their primed symbols.  Any nonzero evaluation gives
    'nonzero'; all-zero without a structural zero is reported 'unknown',
    never silently treated as zero.
    """
    n = normalize(e)
    if n == ZERO:
        return ZeroVerdict.ZERO
    rng = rng or random.Random(seed)
    syms = sorted(free_symbols(n))
    names, funcs = [], []
    for s in syms:
        info = table.info(s) if table.is_declared(s) else None
        if info is not None and info.kind == "arbitrary-function" and (info.arity or 0) >= 1:
            funcs.append(s)
        elif s == "exp":
            funcs.append(s)
        else:
            names.append(s)
    bases = sorted({f.rstrip("'") for f in funcs if f != "exp"})
    exact_possible = "exp" not in funcs

    for _ in range(trials):
        for attempt in range(5):
            env = {s: _sample_fraction(rng) for s in names}
            fpolys: dict = {}
            for b in bases:
                poly = _sample_poly(rng)
                fpolys[b] = poly
                d = poly
                for k in range(1, 4):
                    d = _poly_derivative(d)
                    fpolys[b + "'" * k] = d
            try:
                if exact_possible:
                    val = _eval_exact(n, env, fpolys)
                    if val != 0:
                        return ZeroVerdict.NONZERO
                else:
                    envf = {s: abs(float(v)) + 0.5 for s, v in env.items()}
                    fns = {name: (lambda x, _p=p: float(_poly_eval(
                        _p, Fraction(x).limit_denominator(10**6))))
                        for name, p in fpolys.items()}
                    val = _eval(n, envf, fns)
                    if abs(val) > 1e-9:
                        return ZeroVerdict.NONZERO
                break
            except (ZeroDivisionError, EvaluationError, _Inexact):
                if attempt == 4:
                    return ZeroVerdict.UNKNOWN
                continue
    return ZeroVerdict.UNKNOWN


# --------------------------------------------------------------------------
# Printer (deterministic; output parses back to a structurally equal tree)
# --------------------------------------------------------------------------

def _needs_parens_in_product(e: Expr) -> bool:
    return isinstance(e, Add) or (isinstance(e, Rat) and e.value < 0)


def _pow_base_text(e: Expr) -> str:
    if isinstance(e, (Add, Mul, Pow)) or (
            isinstance(e, Rat) and (e.value < 0 or e.value.denominator != 1)):
        return f"({to_text(e)})"
    return to_text(e)


def _pow_exp_text(e: Expr) -> str:
    if isinstance(e, Rat) and e.value >= 0 and e.value.denominator == 1:
        return to_text(e)
    return f"({to_text(e)})"


def to_text(e: Expr) -> str:
    """Deterministic infix form using the documented grammar."""
    if isinstance(e, Rat):
        v = e.value
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_text(a) for a in e.args)})"
    if isinstance(e, Pow):
        return f"{_pow_base_text(e.base)}^{_pow_exp_text(e.exponent)}"
    if isinstance(e, Mul):
        factors = list(e.factors)
        sign = ""
        if factors and isinstance(factors[0], Rat) and factors[0].value < 0:
            if factors[0].value == -1 and len(factors) > 1:
                factors = factors[1:]
            else:
                factors[0] = Rat(-factors[0].value)
            sign = "-"
        parts = [f"({to_text(f)})" if _needs_parens_in_product(f) else to_text(f)
                 for f in factors]
        return sign + "*".join(parts)
    if isinstance(e, Add):
        out = []
        for i, t in enumerate(e.terms):
            txt = f"({to_text(t)})" if isinstance(t, Add) else to_text(t)
            if i == 0:
                out.append(txt)
            elif txt.startswith("-"):
                out.append(f" - {txt[1:]}")
            else:
                out.append(f" + {txt}")
        return "".join(out)
    raise TypeError(type(e))
