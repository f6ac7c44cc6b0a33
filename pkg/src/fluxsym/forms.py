"""Differential forms over the extended coordinate set.

Wedge slots are ordered t < r < phi < w < D < Gamma.  The last two are the
formal differentials of the material functions: they appear when a form is
written before restricting to the solution manifold (the gradient-closure
2-form needs dD as a basis slot) and are removed by sectioning, which
expands every dependent differential over dr, dt.

Storage is canonical: strictly increasing slot tuples, normalized
coefficients, zero coefficients pruned.  Forms are immutable values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .kernel import (
    Add, Expr, Mul, Pow, Rat, Sym, SymbolTable, ZERO, as_expr,
    differentiate, normalize, sign_normalize, to_text,
)
from .model import Model

SLOTS = ("t", "r", "phi", "w", "D", "Gamma")
_SLOT_INDEX = {name: i for i, name in enumerate(SLOTS)}
BASE_SLOTS = ("t", "r", "phi", "w")


class FormError(Exception):
    pass


def _sort_with_sign(indices):
    """Insertion sort returning (sorted tuple, permutation sign); None for
    repeated slots."""
    idx = list(indices)
    sign = 1
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(idx, idx[1:]):
        if a == b:
            return None, 0
    return tuple(idx), sign


@dataclass(frozen=True)
class DifferentialForm:
    degree: int
    coefficients: tuple  # ((slot index tuple, Expr), ...) sorted

    @staticmethod
    def build(degree: int, terms) -> "DifferentialForm":
        """terms: iterable of (slot name/index tuple, coefficient)."""
        acc: dict = {}
        for slots, coef in terms:
            idx = tuple(_SLOT_INDEX[s] if isinstance(s, str) else int(s)
                        for s in slots)
            if len(idx) != degree:
                raise FormError(f"term {slots} does not have degree {degree}")
            srt, sign = _sort_with_sign(idx)
            if sign == 0:
                continue
            coef = as_expr(coef) if sign > 0 else Mul((Rat(-1), as_expr(coef)))
            acc[srt] = Add((acc[srt], coef)) if srt in acc else coef
        out = []
        for key in sorted(acc):
            c = normalize(acc[key])
            if c != ZERO:
                out.append((key, c))
        return DifferentialForm(degree, tuple(out))

    def get(self, *slot_names) -> Expr:
        idx, sign = _sort_with_sign(
            tuple(_SLOT_INDEX[s] for s in slot_names))
        if sign == 0:
            return ZERO
        for key, coef in self.coefficients:
            if key == idx:
                return coef if sign > 0 else normalize(Mul((Rat(-1), coef)))
        return ZERO

    def is_zero(self) -> bool:
        return not self.coefficients

    def map_coefficients(self, fn) -> "DifferentialForm":
        return DifferentialForm.build(
            self.degree, [(key, fn(c)) for key, c in self.coefficients])

    def __add__(self, other):
        if isinstance(other, DifferentialForm):
            if other.is_zero():
                return self
            if self.is_zero():
                return other
            if other.degree != self.degree:
                raise FormError("cannot add forms of different degree")
            return DifferentialForm.build(
                self.degree, list(self.coefficients) + list(other.coefficients))
        return NotImplemented

    def __sub__(self, other):
        return self + other.scale(Rat(-1))

    def scale(self, factor) -> "DifferentialForm":
        return DifferentialForm.build(
            self.degree,
            [(key, Mul((as_expr(factor), c))) for key, c in self.coefficients])

    def __str__(self):
        if not self.coefficients:
            return "0"
        parts = []
        for key, coef in self.coefficients:
            basis = "∧".join(f"d{SLOTS[i]}" for i in key)
            parts.append(f"({to_text(coef)})·{basis}" if basis else to_text(coef))
        return " + ".join(parts)


def zero_form(degree: int) -> DifferentialForm:
    return DifferentialForm(degree, ())


def scalar_form(e) -> DifferentialForm:
    c = normalize(as_expr(e))
    return DifferentialForm(0, ()) if c == ZERO else DifferentialForm(0, (((), c),))


def d_slot(name: str) -> DifferentialForm:
    """The basis 1-form d<name>."""
    return DifferentialForm.build(1, [((name,), Rat(1))])


def wedge(alpha: DifferentialForm, beta: DifferentialForm) -> DifferentialForm:
    """Bilinear graded-anticommutative product; degree overflow (which would
    vanish anyway) is reported and clamps to the zero form."""
    degree = alpha.degree + beta.degree
    if degree > len(SLOTS):
        warnings.warn(
            f"wedge degree {degree} exceeds the {len(SLOTS)} available slots; "
            "returning the zero form", stacklevel=2)
        return zero_form(len(SLOTS))
    if alpha.degree == 0:
        return beta.map_coefficients(
            lambda c, a=alpha: Mul((a.get(), c))) if not alpha.is_zero() else zero_form(degree)
    if beta.degree == 0:
        return alpha.map_coefficients(
            lambda c, b=beta: Mul((c, b.get()))) if not beta.is_zero() else zero_form(degree)
    terms = []
    for key_a, coef_a in alpha.coefficients:
        for key_b, coef_b in beta.coefficients:
            terms.append((key_a + key_b, Mul((coef_a, coef_b))))
    return DifferentialForm.build(degree, terms)


def exterior_d(alpha: DifferentialForm, table: SymbolTable) -> DifferentialForm:
    """Exterior derivative.

    On a 0-form f the four base coordinates are treated as independent and
    the material symbols contribute their jets on dr, dt (via the kernel's
    differentiation); on higher forms, Leibniz over the coefficients.
    Nilpotent: d(d(alpha)) = 0.
    """
    if alpha.degree == 0:
        f = alpha.get()
        terms = []
        for name in BASE_SLOTS:
            df = differentiate(f, name, table)
            if df != ZERO:
                terms.append(((name,), df))
        return DifferentialForm.build(1, terms)
    terms = []
    for key, coef in alpha.coefficients:
        for name in BASE_SLOTS:
            df = differentiate(coef, name, table)
            if df != ZERO:
                terms.append(((_SLOT_INDEX[name],) + key, df))
    return DifferentialForm.build(alpha.degree + 1, terms)


@dataclass(frozen=True)
class SectionMap:
    """Declarations "q depends on (r, t)" for the dependent slots.

    Sectioning replaces each dependent differential by its expansion over
    dr, dt with jet coefficients: dphi -> phi_r dr + phi_t dt, dw -> w_r dr +
    w_t dt, dD -> D_r dr + D_t dt, dGamma -> Gamma_r dr + Gamma_t dt.
    """
    replacements: tuple  # ((slot name, 1-form), ...)

    @staticmethod
    def standard(model: Model) -> "SectionMap":
        table = model.table
        repl = []
        for name in ("phi", "w", "D", "Gamma"):
            one_form = DifferentialForm.build(1, [
                (("r",), table.jet(name, 1, 0)),
                (("t",), table.jet(name, 0, 1)),
            ])
            repl.append((name, one_form))
        return SectionMap(tuple(repl))

    def validate(self):
        for name, one_form in self.replacements:
            if name in ("t", "r"):
                raise FormError("base coordinates cannot be dependent")
            for key, _ in one_form.coefficients:
                if any(SLOTS[i] not in ("t", "r") for i in key):
                    raise FormError(
                        f"dependency cycle: d{name} expands over a dependent slot")


def section(alpha: DifferentialForm, smap: SectionMap) -> DifferentialForm:
    """Restrict to the solution manifold: expand all dependent differentials
    so the result lives on the dt, dr basis only."""
    if alpha.degree < 1:
        raise FormError("sectioning needs a form of degree >= 1")
    smap.validate()
    repl = {name: form for name, form in smap.replacements}
    out = zero_form(alpha.degree)
    for key, coef in alpha.coefficients:
        term = scalar_form(coef)
        for i in key:
            name = SLOTS[i]
            factor = repl.get(name, d_slot(name))
            term = wedge(term, factor)
        out = out + term
    return out


def annul(alpha: DifferentialForm) -> Expr:
    """The dt∧dr coefficient of a sectioned 2-form; setting it to zero
    recovers the underlying equation.  The sign is normalized so that the
    flux time-derivative term (any phi_t/w_t jet) carries a negative sign,
    falling back to a positive leading monomial."""
    if alpha.degree != 2:
        raise FormError("annul expects a 2-form")
    residual = None
    for key, coef in alpha.coefficients:
        if key == (_SLOT_INDEX["t"], _SLOT_INDEX["r"]):
            residual = coef
        else:
            raise FormError(
                f"residual component on d{SLOTS[key[0]]}∧d{SLOTS[key[1]]}; "
                "section the form first")
    if residual is None:
        return ZERO
    from .kernel import collect_by
    for jet in ("phi_t", "w_t"):
        groups = collect_by(residual, (jet,))
        linear = groups.get(Sym(jet))
        if linear is not None:
            lead = sign_normalize(linear)
            if lead == normalize(linear):
                residual = normalize(Mul((Rat(-1), residual)))
            return normalize(residual)
    return sign_normalize(residual)


# --------------------------------------------------------------------------
# The model's exterior differential system
# --------------------------------------------------------------------------

def build_mu1(model: Model, geometry, r_multiplied: bool = False) -> DifferentialForm:
    """Flux-balance 2-form.

    geometry: the index expression (model.geometry_index(...)).  With
    r_multiplied=True, returns r times the form (n D replacing n r^-1 D r),
    which keeps the coefficients regular at r = 0.

    The production term is stored on dr∧dt so that section+annul recovers
    the governing equation exactly (the published display carries it on
    dt∧dr, which is inconsistent with its own sectioned expansion by exactly
    this sign).
    """
    m = model
    geometry = as_expr(geometry)
    if isinstance(geometry, Rat) and geometry.value not in (0, 1, 2):
        raise ValueError("literal geometry index must be 0, 1 or 2")
    rfac = m.r if r_multiplied else Rat(1)
    curv = Mul((geometry, m.D)) if r_multiplied else Mul(
        (geometry, Pow(m.r, Rat(-1)), m.D))
    terms = [
        (("phi", "r"), Mul((rfac, Pow(m.v, Rat(-1))))),
        (("phi", "t"), curv),
        (("phi", "t"), Mul((rfac, m.jet("D", 1, 0)))),
        (("w", "t"), Mul((rfac, m.D))),
        (("r", "t"), Mul((rfac, m.Gamma, m.phi))),
    ]
    return DifferentialForm.build(2, terms)


def build_mu2(model: Model) -> DifferentialForm:
    """Gradient-definition 2-form: w dt∧dr + dphi∧dt."""
    return DifferentialForm.build(2, [
        (("t", "r"), model.w),
        (("phi", "t"), Rat(1)),
    ])


def build_mu3(model: Model, expand: bool = False) -> DifferentialForm:
    """Gradient-closure 2-form D_r dr∧dt - dD∧dt.

    By default dD is kept as a formal slot (the two-term display form);
    expand=True sections it immediately, under which the form cancels to
    zero identically.
    """
    form = DifferentialForm.build(2, [
        (("r", "t"), model.jet("D", 1, 0)),
        (("D", "t"), Rat(-1)),
    ])
    if expand:
        return section(form, SectionMap.standard(model))
    return form
