"""Exact scalar kernel for the Cayley-Klein deformation engine.

The coefficient domain is built in layers, all exact (no floats anywhere):

* ``GaussianRational`` -- a + b*i over ``fractions.Fraction``.
* Laurent monomials in the contraction parameters j_1..j_{nvars}, stored as
  integer exponent tuples.
* ``VSeries`` -- truncated power series in the deformation variable v whose
  coefficients are Laurent polynomials over Gaussian rationals.
* ``ScalarExpr`` -- closed forms: finite sums of atomic products
  ``c * j-monomial * v^p * prod(atom^e)`` where each atom is
  cosh/sinh/tanh(c0 * J * v) with an exact rational-or-Gaussian multiplier c0
  and a monomial argument J.  ``expand`` maps these homomorphically onto
  ``VSeries`` at any truncation order.

Nilpotent (Pimenov) parameters: ``specialize`` substitutes per-slot values
1, i or iota_k.  A slot set to iota_k turns into a *marker* slot: surviving
exponents live in {0, 1}, squares vanish, and a negative exponent with a
nonzero coefficient raises :class:`UndefinedContraction` (a/iota_k is defined
only for a = 0, while iota_k/iota_k = 1 -- exponent cancellation happens
symbolically before substitution).  The set of marker slots travels with each
value as ``nil`` so that ring operations keep annihilating squares.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

__all__ = [
    "GaussianRational",
    "VSeries",
    "Atom",
    "Term",
    "ScalarExpr",
    "UndefinedContraction",
    "UNIT",
    "IMAG",
    "NIL",
    "KEEP",
    "parse_assignment",
    "assignment_nil_slots",
]


class UndefinedContraction(Exception):
    """A nilpotent parameter ended up in a denominator with nonzero numerator.

    Carries the slot (0-based), the offending exponent, and a free-form
    context string naming the relation/term that produced it.
    """

    def __init__(self, slot: int, exponent: int, context: str = ""):
        self.slot = slot
        self.exponent = exponent
        self.context = context
        msg = f"iota_{slot + 1}^{exponent} with nonzero coefficient"
        if context:
            msg += f" in {context}"
        super().__init__(msg)


# ---------------------------------------------------------------------------
# Gaussian rationals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianRational:
    """Exact complex rational re + im*i."""

    re: Fraction
    im: Fraction

    @staticmethod
    def of(re, im=0) -> "GaussianRational":
        return GaussianRational(Fraction(re), Fraction(im))

    def __add__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def inverse(self) -> "GaussianRational":
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivisionError("inverse of 0")
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other: "GaussianRational") -> "GaussianRational":
        return self * other.inverse()

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __pow__(self, e: int) -> "GaussianRational":
        if e < 0:
            return self.inverse() ** (-e)
        out = G_ONE
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __bool__(self) -> bool:
        return not self.is_zero()

    def sort_key(self):
        return (self.re, self.im)

    def render(self) -> str:
        """Deterministic text form, e.g. ``1``, ``-i``, ``2/3``, ``(1+2*i)/3``."""
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            if self.im == 1:
                return "i"
            if self.im == -1:
                return "-i"
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        im = abs(self.im)
        imtxt = "i" if im == 1 else f"{im}*i"
        return f"({self.re}{sign}{imtxt})"

    def to_json(self):
        return {"re": str(self.re), "im": str(self.im)}

    @staticmethod
    def from_json(obj) -> "GaussianRational":
        return GaussianRational(Fraction(obj["re"]), Fraction(obj["im"]))


G_ZERO = GaussianRational.of(0)
G_ONE = GaussianRational.of(1)
G_I = GaussianRational.of(0, 1)


# ---------------------------------------------------------------------------
# Assignments of the contraction parameters
# ---------------------------------------------------------------------------

UNIT = "1"       # j_k = 1
IMAG = "i"       # j_k = i
NIL = "iota"     # j_k = iota_k (nilpotent)
KEEP = "j"       # leave j_k symbolic

_TOKENS = (UNIT, IMAG, NIL, KEEP)


def parse_assignment(text: str, nvars: int) -> tuple:
    """Parse a comma-separated assignment like ``iota,1`` or ``1,j,iota``."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != nvars:
        raise ValueError(f"expected {nvars} assignment slots, got {len(parts)}")
    for p in parts:
        if p not in _TOKENS:
            raise ValueError(f"bad assignment token {p!r} (use 1, i, iota or j)")
    return tuple(parts)


def assignment_nil_slots(assignment) -> frozenset:
    return frozenset(k for k, tok in enumerate(assignment) if tok == NIL)


# ---------------------------------------------------------------------------
# Laurent monomials (plain exponent tuples) and Laurent polynomials (dicts)
# ---------------------------------------------------------------------------

def unit_mono(nvars: int) -> tuple:
    return (0,) * nvars


def mono_mul(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def mono_render(exp: tuple, nil=frozenset()) -> str:
    parts = []
    for k, e in enumerate(exp):
        if e == 0:
            continue
        name = f"iota{k + 1}" if k in nil else f"j{k + 1}"
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts)


def _jp_add_into(acc: dict, exp: tuple, c: GaussianRational) -> None:
    cur = acc.get(exp)
    s = c if cur is None else cur + c
    if s.is_zero():
        acc.pop(exp, None)
    else:
        acc[exp] = s


def _jp_mul(p: dict, q: dict, nil: frozenset) -> dict:
    out: dict = {}
    for ea, ca in p.items():
        for eb, cb in q.items():
            e = mono_mul(ea, eb)
            if nil and any(e[k] >= 2 for k in nil):
                continue
            _jp_add_into(out, e, ca * cb)
    return out


# ---------------------------------------------------------------------------
# Truncated power series in v
# ---------------------------------------------------------------------------

class VSeries:
    """Power series in v truncated at ``order``; coefficients are Laurent
    polynomials (dict jexp -> GaussianRational, zero coefficients never
    stored).  ``nil`` marks slots holding nilpotent markers."""

    __slots__ = ("order", "nvars", "nil", "coeffs")

    def __init__(self, order: int, nvars: int, coeffs=None, nil=frozenset()):
        self.order = order
        self.nvars = nvars
        self.nil = frozenset(nil)
        self.coeffs = coeffs if coeffs is not None else [dict() for _ in range(order + 1)]

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(order: int, nvars: int, nil=frozenset()) -> "VSeries":
        return VSeries(order, nvars, nil=nil)

    @staticmethod
    def const(order: int, nvars: int, c: GaussianRational, exp=None, vpow=0,
              nil=frozenset()) -> "VSeries":
        s = VSeries(order, nvars, nil=nil)
        if not c.is_zero() and vpow <= order:
            e = unit_mono(nvars) if exp is None else exp
            if not (nil and any(e[k] >= 2 for k in nil)):
                s.coeffs[vpow][e] = c
        return s

    @staticmethod
    def one(order: int, nvars: int, nil=frozenset()) -> "VSeries":
        return VSeries.const(order, nvars, G_ONE, nil=nil)

    # -- ring operations ----------------------------------------------------

    def _check(self, other: "VSeries") -> None:
        if self.order != other.order:
            raise ValueError(f"order mismatch: {self.order} != {other.order}")
        if self.nvars != other.nvars or self.nil != other.nil:
            raise ValueError("series live in different rings")

    def __add__(self, other: "VSeries") -> "VSeries":
        self._check(other)
        out = VSeries(self.order, self.nvars, nil=self.nil)
        for p in range(self.order + 1):
            acc = dict(self.coeffs[p])
            for e, c in other.coeffs[p].items():
                _jp_add_into(acc, e, c)
            out.coeffs[p] = acc
        return out

    def __neg__(self) -> "VSeries":
        out = VSeries(self.order, self.nvars, nil=self.nil)
        for p in range(self.order + 1):
            out.coeffs[p] = {e: -c for e, c in self.coeffs[p].items()}
        return out

    def __sub__(self, other: "VSeries") -> "VSeries":
        return self + (-other)

    def __mul__(self, other: "VSeries") -> "VSeries":
        self._check(other)
        out = VSeries(self.order, self.nvars, nil=self.nil)
        for pa in range(self.order + 1):
            if not self.coeffs[pa]:
                continue
            for pb in range(self.order + 1 - pa):
                if not other.coeffs[pb]:
                    continue
                prod = _jp_mul(self.coeffs[pa], other.coeffs[pb], self.nil)
                acc = out.coeffs[pa + pb]
                for e, c in prod.items():
                    _jp_add_into(acc, e, c)
        return out

    def scale(self, c: GaussianRational) -> "VSeries":
        out = VSeries(self.order, self.nvars, nil=self.nil)
        if c.is_zero():
            return out
        for p in range(self.order + 1):
            out.coeffs[p] = {e: cc * c for e, cc in self.coeffs[p].items()}
        return out

    def invert(self) -> "VSeries":
        """Multiplicative inverse; requires the v^0 coefficient to be a single
        nonzero multiple of the unit monomial."""
        c0 = self.coeffs[0]
        u = unit_mono(self.nvars)
        if list(c0.keys()) != [u]:
            raise ValueError("constant term is not an invertible monomial")
        c = c0[u]
        inv_c = c.inverse()
        out = VSeries(self.order, self.nvars, nil=self.nil)
        out.coeffs[0][u] = inv_c
        # b_p = -(1/c) * sum_{t=1..p} a_t b_{p-t}
        for p in range(1, self.order + 1):
            acc: dict = {}
            for t in range(1, p + 1):
                if not self.coeffs[t]:
                    continue
                prod = _jp_mul(self.coeffs[t], out.coeffs[p - t], self.nil)
                for e, cc in prod.items():
                    _jp_add_into(acc, e, cc)
            out.coeffs[p] = {e: -(cc * inv_c) for e, cc in acc.items()}
        return out

    def __pow__(self, e: int) -> "VSeries":
        if e < 0:
            return self.invert() ** (-e)
        out = VSeries.one(self.order, self.nvars, nil=self.nil)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    # -- predicates & equality ---------------------------------------------

    def is_zero(self) -> bool:
        return all(not c for c in self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VSeries):
            return NotImplemented
        return (self.order == other.order and self.nvars == other.nvars
                and self.nil == other.nil and self.coeffs == other.coeffs)

    def __hash__(self):
        raise TypeError("VSeries is not hashable")

    # -- specialization ------------------------------------------------------

    def specialize(self, assignment, context: str = "") -> "VSeries":
        """Substitute 1 / i / iota_k / keep per slot (Pimenov rules)."""
        if len(assignment) != self.nvars:
            raise ValueError("assignment length mismatch")
        if self.nil:
            for k in self.nil:
                if assignment[k] != KEEP:
                    raise ValueError("slot already specialized")
        new_nil = self.nil | assignment_nil_slots(assignment)
        out = VSeries(self.order, self.nvars, nil=new_nil)
        for p in range(self.order + 1):
            acc = out.coeffs[p]
            for exp, c in self.coeffs[p].items():
                newexp = list(exp)
                coeff = c
                dead = False
                for k, tok in enumerate(assignment):
                    e = exp[k]
                    if tok == KEEP or e == 0:
                        continue
                    if tok == UNIT:
                        newexp[k] = 0
                    elif tok == IMAG:
                        coeff = coeff * (G_I ** e)
                        newexp[k] = 0
                    else:  # NIL
                        if e >= 2:
                            dead = True
                            break
                        if e < 0:
                            raise UndefinedContraction(k, e, context)
                if dead:
                    continue
                _jp_add_into(acc, tuple(newexp), coeff)
        return out

    # -- rendering -----------------------------------------------------------

    def render(self) -> str:
        parts = []
        for p in range(self.order + 1):
            for e in sorted(self.coeffs[p]):
                c = self.coeffs[p][e]
                piece = c.render()
                m = mono_render(e, self.nil)
                if m:
                    piece = f"{piece}*{m}" if piece not in ("1",) else m
                if p:
                    vtxt = "v" if p == 1 else f"v^{p}"
                    piece = f"{piece}*{vtxt}" if piece not in ("1",) else vtxt
                parts.append(piece)
        return " + ".join(parts) if parts else "0"

    def to_json(self):
        return {
            "order": self.order,
            "nvars": self.nvars,
            "nil": sorted(self.nil),
            "coeffs": [
                [
                    {"jexp": list(e), "re": str(c.re), "im": str(c.im)}
                    for e, c in sorted(self.coeffs[p].items())
                ]
                for p in range(self.order + 1)
            ],
        }


# ---------------------------------------------------------------------------
# Closed-form expressions
# ---------------------------------------------------------------------------

_ATOM_KINDS = ("cosh", "sinh", "tanh")
_ODD = {"sinh": True, "tanh": True, "cosh": False}


@dataclass(frozen=True)
class Atom:
    """Hyperbolic atom kind(c * J * v): ``arg`` is the monomial J (non-negative
    exponents), ``coeff`` the exact multiplier c."""

    kind: str
    coeff: GaussianRational
    arg: tuple

    def sort_key(self):
        return (self.kind, self.arg, self.coeff.sort_key())

    def conjugate(self) -> "Atom":
        return Atom(self.kind, self.coeff.conjugate(), self.arg)

    def render(self, nil=frozenset()) -> str:
        c = self.coeff
        m = mono_render(self.arg, nil)
        inner = m + "*v" if m else "v"
        if c == G_ONE:
            pass
        elif c.im == 0 and c.re.numerator == 1:
            inner = f"{inner}/{c.re.denominator}"
        else:
            inner = f"{c.render()}*{inner}"
        return f"{self.kind}({inner})"


@dataclass(frozen=True)
class Term:
    """Atomic product coeff * j-monomial * v^vpow * prod(atom^exp)."""

    coeff: GaussianRational
    jexp: tuple
    vpow: int
    atoms: tuple  # tuple of (Atom, int) sorted by atom sort key, exponents != 0

    def key(self):
        return (self.vpow, self.jexp, tuple((a.sort_key(), e) for a, e in self.atoms))


def _norm_atom(kind: str, coeff: GaussianRational, arg: tuple):
    """Canonicalize an atom; returns (sign, Atom or None-for-collapsed, const).

    cosh(-x) = cosh(x), sinh/tanh(-x) = -sinh/tanh(x); zero argument collapses
    (cosh -> 1, sinh/tanh -> 0).
    """
    if coeff.is_zero():
        if kind == "cosh":
            return G_ONE, None
        return G_ZERO, None
    if coeff.sort_key() < G_ZERO.sort_key():
        if kind == "cosh":
            return G_ONE, Atom(kind, -coeff, arg)
        return -G_ONE, Atom(kind, -coeff, arg)
    return G_ONE, Atom(kind, coeff, arg)


class ScalarExpr:
    """Canonical sum of atomic products.  Immutable by convention."""

    __slots__ = ("nvars", "nil", "terms")

    def __init__(self, nvars: int, terms=(), nil=frozenset()):
        self.nvars = nvars
        self.nil = frozenset(nil)
        self.terms = tuple(terms)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def _collect(nvars, raw_terms, nil) -> "ScalarExpr":
        acc: dict = {}
        for t in raw_terms:
            if t.coeff.is_zero():
                continue
            if nil and any(t.jexp[k] >= 2 for k in nil):
                continue
            key = (t.jexp, t.vpow, t.atoms)
            cur = acc.get(key)
            c = t.coeff if cur is None else cur + t.coeff
            if c.is_zero():
                acc.pop(key, None)
            else:
                acc[key] = c
        terms = tuple(
            Term(c, jexp, vpow, atoms)
            for (jexp, vpow, atoms), c in sorted(
                acc.items(), key=lambda kv: (kv[0][1], kv[0][0], tuple((a.sort_key(), e) for a, e in kv[0][2]))
            )
        )
        return ScalarExpr(nvars, terms, nil)

    @staticmethod
    def zero(nvars: int, nil=frozenset()) -> "ScalarExpr":
        return ScalarExpr(nvars, (), nil)

    @staticmethod
    def const(nvars: int, c, nil=frozenset()) -> "ScalarExpr":
        if not isinstance(c, GaussianRational):
            c = GaussianRational.of(c)
        if c.is_zero():
            return ScalarExpr.zero(nvars, nil)
        return ScalarExpr(nvars, (Term(c, unit_mono(nvars), 0, ()),), nil)

    @staticmethod
    def one(nvars: int, nil=frozenset()) -> "ScalarExpr":
        return ScalarExpr.const(nvars, G_ONE, nil)

    @staticmethod
    def imag(nvars: int, nil=frozenset()) -> "ScalarExpr":
        return ScalarExpr.const(nvars, G_I, nil)

    @staticmethod
    def mono(nvars: int, exp: tuple, c=G_ONE, vpow=0, nil=frozenset()) -> "ScalarExpr":
        if not isinstance(c, GaussianRational):
            c = GaussianRational.of(c)
        return ScalarExpr._collect(nvars, [Term(c, tuple(exp), vpow, ())], nil)

    @staticmethod
    def atom(nvars: int, kind: str, arg: tuple, coeff=None, power: int = 1,
             nil=frozenset()) -> "ScalarExpr":
        """kind(coeff * arg * v) ** power, canonicalized."""
        if kind not in _ATOM_KINDS:
            raise ValueError(f"unknown atom kind {kind}")
        if coeff is None:
            coeff = G_ONE
        elif not isinstance(coeff, GaussianRational):
            coeff = GaussianRational.of(coeff)
        if power < 0 and kind != "cosh":
            raise ValueError("negative powers only for cosh atoms")
        sign, a = _norm_atom(kind, coeff, tuple(arg))
        if a is None:
            if sign.is_zero():  # sinh/tanh of 0
                if power < 0:
                    raise ValueError("negative power of a vanishing atom")
                return ScalarExpr.zero(nvars, nil)
            return ScalarExpr.one(nvars, nil)  # cosh of 0
        c = sign ** power if not sign == G_ONE else G_ONE
        return ScalarExpr._collect(
            nvars, [Term(c, unit_mono(nvars), 0, ((a, power),))], nil
        )

    # -- ring operations -----------------------------------------------------

    def _check(self, other: "ScalarExpr") -> None:
        if self.nvars != other.nvars or self.nil != other.nil:
            raise ValueError("expressions live in different rings")

    def __add__(self, other: "ScalarExpr") -> "ScalarExpr":
        self._check(other)
        return ScalarExpr._collect(self.nvars, self.terms + other.terms, self.nil)

    def __neg__(self) -> "ScalarExpr":
        return ScalarExpr(
            self.nvars,
            tuple(Term(-t.coeff, t.jexp, t.vpow, t.atoms) for t in self.terms),
            self.nil,
        )

    def __sub__(self, other: "ScalarExpr") -> "ScalarExpr":
        return self + (-other)

    def __mul__(self, other: "ScalarExpr") -> "ScalarExpr":
        self._check(other)
        raw = []
        for ta in self.terms:
            for tb in other.terms:
                atoms: dict = {}
                for a, e in ta.atoms + tb.atoms:
                    atoms[a] = atoms.get(a, 0) + e
                merged = tuple(
                    sorted(((a, e) for a, e in atoms.items() if e != 0),
                           key=lambda ae: ae[0].sort_key())
                )
                raw.append(Term(ta.coeff * tb.coeff, mono_mul(ta.jexp, tb.jexp),
                                ta.vpow + tb.vpow, merged))
        return ScalarExpr._collect(self.nvars, raw, self.nil)

    def scale(self, c: GaussianRational) -> "ScalarExpr":
        if c.is_zero():
            return ScalarExpr.zero(self.nvars, self.nil)
        return ScalarExpr(
            self.nvars,
            tuple(Term(t.coeff * c, t.jexp, t.vpow, t.atoms) for t in self.terms),
            self.nil,
        )

    def times_v(self, k: int = 1) -> "ScalarExpr":
        return ScalarExpr(
            self.nvars,
            tuple(Term(t.coeff, t.jexp, t.vpow + k, t.atoms) for t in self.terms),
            self.nil,
        )

    def conjugate(self) -> "ScalarExpr":
        """Complex conjugation with v and the contraction parameters real."""
        raw = [
            Term(t.coeff.conjugate(), t.jexp, t.vpow,
                 tuple((a.conjugate(), e) for a, e in t.atoms))
            for t in self.terms
        ]
        return ScalarExpr._collect(self.nvars, raw, self.nil)

    def inverse(self) -> "ScalarExpr":
        """Inverse of a single atomic product whose atoms are all cosh and
        whose v-power vanishes (enough for solved-rule coefficients)."""
        if len(self.terms) != 1:
            raise ValueError("inverse only for single atomic products")
        t = self.terms[0]
        if t.vpow != 0:
            raise ValueError("v-power is not invertible")
        if any(a.kind != "cosh" for a, _ in t.atoms):
            raise ValueError("only cosh atoms are invertible")
        if self.nil and any(t.jexp[k] != 0 for k in self.nil):
            raise ValueError("nilpotent markers are not invertible")
        return ScalarExpr(
            self.nvars,
            (Term(t.coeff.inverse(), tuple(-e for e in t.jexp), 0,
                  tuple((a, -e) for a, e in t.atoms)),),
            self.nil,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScalarExpr):
            return NotImplemented
        return (self.nvars == other.nvars and self.nil == other.nil
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.nvars, self.nil, self.terms))

    # -- evaluation ----------------------------------------------------------

    def expand(self, order: int) -> VSeries:
        return _expand_cached(self, order)

    def is_zero(self, order: int) -> bool:
        """Zero test at truncation order (exact for v-polynomials below it)."""
        if not self.terms:
            return True
        return self.expand(order).is_zero()

    def is_const_one(self) -> bool:
        return (len(self.terms) == 1 and self.terms[0].coeff == G_ONE
                and self.terms[0].vpow == 0 and not self.terms[0].atoms
                and not any(self.terms[0].jexp))

    # -- specialization ------------------------------------------------------

    def specialize(self, assignment, context: str = "") -> "ScalarExpr":
        """Per-slot substitution with the closed-form collapse rules:
        a nilpotent argument mu (mu^2 = 0) gives sinh(c mu v) -> c mu v,
        cosh -> 1, tanh -> c mu v; a vanishing argument gives sinh/tanh -> 0,
        cosh -> 1."""
        if len(assignment) != self.nvars:
            raise ValueError("assignment length mismatch")
        if self.nil:
            for k in self.nil:
                if assignment[k] != KEEP:
                    raise ValueError("slot already specialized")
        new_nil = self.nil | assignment_nil_slots(assignment)
        raw = []
        for t in self.terms:
            out = _specialize_term(t, assignment, self.nvars, context)
            if out is not None:
                raw.append(out)
        return ScalarExpr._collect(self.nvars, raw, new_nil)

    # -- rendering -----------------------------------------------------------

    def render(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for t in self.terms:
            factors = []
            m = mono_render(t.jexp, self.nil)
            if m:
                factors.append(m)
            if t.vpow:
                factors.append("v" if t.vpow == 1 else f"v^{t.vpow}")
            for a, e in t.atoms:
                atxt = a.render(self.nil)
                factors.append(atxt if e == 1 else f"{atxt}^{e}")
            body = "*".join(factors)
            c = t.coeff
            if not body:
                parts.append(c.render())
            elif c == G_ONE:
                parts.append(body)
            elif c == -G_ONE:
                parts.append(f"-{body}")
            else:
                parts.append(f"{c.render()}*{body}")
        return " + ".join(parts).replace("+ -", "- ")

    def render_latex(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for t in self.terms:
            factors = []
            m = _mono_latex(t.jexp, self.nil)
            if m:
                factors.append(m)
            if t.vpow:
                factors.append("v" if t.vpow == 1 else f"v^{{{t.vpow}}}")
            for a, e in t.atoms:
                atxt = _atom_latex(a, self.nil)
                factors.append(atxt if e == 1 else f"{atxt}^{{{e}}}")
            body = " ".join(factors)
            c = t.coeff
            ctxt = _gauss_latex(c)
            if not body:
                parts.append(ctxt)
            elif ctxt == "1":
                parts.append(body)
            elif ctxt == "-1":
                parts.append(f"-{body}")
            else:
                parts.append(f"{ctxt} {body}")
        return " + ".join(parts).replace("+ -", "- ")

    def to_json(self):
        return {
            "nvars": self.nvars,
            "nil": sorted(self.nil),
            "terms": [
                {
                    "coeff": t.coeff.to_json(),
                    "jexp": list(t.jexp),
                    "vpow": t.vpow,
                    "atoms": [
                        {"kind": a.kind, "coeff": a.coeff.to_json(),
                         "arg": list(a.arg), "pow": e}
                        for a, e in t.atoms
                    ],
                }
                for t in self.terms
            ],
        }

    @staticmethod
    def from_json(obj) -> "ScalarExpr":
        nvars = obj["nvars"]
        nil = frozenset(obj["nil"])
        raw = []
        for tj in obj["terms"]:
            atoms = tuple(
                (Atom(aj["kind"], GaussianRational.from_json(aj["coeff"]),
                      tuple(aj["arg"])), aj["pow"])
                for aj in tj["atoms"]
            )
            raw.append(Term(GaussianRational.from_json(tj["coeff"]),
                            tuple(tj["jexp"]), tj["vpow"], atoms))
        return ScalarExpr._collect(nvars, raw, nil)


def _specialize_term(t: Term, assignment, nvars: int, context: str):
    coeff = t.coeff
    vpow = t.vpow
    exp = list(t.jexp)
    atoms: dict = {}
    for a, e in t.atoms:
        # Specialize the atom argument.
        gamma = a.coeff
        kept = [0] * nvars
        markers = [0] * nvars
        arg_dead = False
        for k, tok in enumerate(assignment):
            ae = a.arg[k]
            if ae == 0:
                continue
            if tok == KEEP:
                kept[k] = ae
            elif tok == UNIT:
                pass
            elif tok == IMAG:
                gamma = gamma * (G_I ** ae)
            else:  # NIL
                if ae >= 2:
                    arg_dead = True
                    break
                markers[k] = 1
        if arg_dead or gamma.is_zero():
            # argument vanished: cosh -> 1, sinh/tanh -> 0
            if a.kind == "cosh":
                continue
            if e < 0:
                raise ValueError("negative power of a vanishing atom")
            return None
        if any(markers):
            # nilpotent argument mu: cosh -> 1, sinh/tanh -> mu*v (square 0)
            if a.kind == "cosh":
                continue
            if e >= 2:
                return None
            coeff = coeff * gamma
            vpow += 1
            for k in range(nvars):
                exp[k] += markers[k] + kept[k]
            continue
        sign, na = _norm_atom(a.kind, gamma, tuple(kept))
        if na is None:
            if sign.is_zero():
                if e < 0:
                    raise ValueError("negative power of a vanishing atom")
                return None
            continue
        if sign != G_ONE:
            coeff = coeff * (sign ** e)
        atoms[na] = atoms.get(na, 0) + e
    # Specialize the Laurent monomial and validate markers.
    for k, tok in enumerate(assignment):
        if tok == KEEP:
            continue
        e = exp[k]
        if tok == UNIT:
            exp[k] = 0
        elif tok == IMAG:
            if e:
                coeff = coeff * (G_I ** e)
            exp[k] = 0
        else:  # NIL -- e now includes collapse contributions
            if e >= 2:
                return None
            if e < 0:
                raise UndefinedContraction(k, e, context or f"term {t}")
    merged = tuple(sorted(((a, e) for a, e in atoms.items() if e != 0),
                          key=lambda ae: ae[0].sort_key()))
    return Term(coeff, tuple(exp), vpow, merged)


# ---------------------------------------------------------------------------
# Expansion to series
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _hyper_series(kind: str, coeff: GaussianRational, arg: tuple, order: int,
                  nvars: int, nil: frozenset) -> VSeries:
    if kind == "tanh":
        s = _hyper_series("sinh", coeff, arg, order, nvars, nil)
        c = _hyper_series("cosh", coeff, arg, order, nvars, nil)
        return s * c.invert()
    out = VSeries(order, nvars, nil=nil)
    start = 1 if _ODD[kind] else 0
    for p in range(start, order + 1, 2):
        if nil and p >= 2 and any(arg[k] for k in nil):
            break  # nilpotent argument: higher powers vanish
        cp = (coeff ** p) * GaussianRational.of(Fraction(1, factorial(p)))
        e = tuple(x * p for x in arg)
        if not cp.is_zero():
            out.coeffs[p][e] = cp
    return out


@lru_cache(maxsize=None)
def _atom_power_series(atom: Atom, power: int, order: int, nvars: int,
                       nil: frozenset) -> VSeries:
    base = _hyper_series(atom.kind, atom.coeff, atom.arg, order, nvars, nil)
    return base ** power


@lru_cache(maxsize=None)
def _expand_cached(expr: ScalarExpr, order: int) -> VSeries:
    out = VSeries(order, expr.nvars, nil=expr.nil)
    for t in expr.terms:
        if t.vpow > order:
            continue
        s = VSeries.const(order, expr.nvars, t.coeff, exp=t.jexp, vpow=t.vpow,
                          nil=expr.nil)
        for a, e in t.atoms:
            s = s * _atom_power_series(a, e, order, expr.nvars, expr.nil)
        out = out + s
    return out


# ---------------------------------------------------------------------------
# LaTeX helpers
# ---------------------------------------------------------------------------

def _gauss_latex(c: GaussianRational) -> str:
    def frac(f: Fraction) -> str:
        if f.denominator == 1:
            return str(f.numerator)
        sign = "-" if f < 0 else ""
        return f"{sign}\\frac{{{abs(f.numerator)}}}{{{f.denominator}}}"

    if c.im == 0:
        return frac(c.re)
    if c.re == 0:
        if c.im == 1:
            return "i"
        if c.im == -1:
            return "-i"
        return f"{frac(c.im)} i"
    sign = "+" if c.im > 0 else "-"
    im = abs(c.im)
    imtxt = "i" if im == 1 else f"{frac(im)} i"
    return f"\\left({frac(c.re)} {sign} {imtxt}\\right)"


def _mono_latex(exp: tuple, nil=frozenset()) -> str:
    parts = []
    for k, e in enumerate(exp):
        if e == 0:
            continue
        name = f"\\iota_{{{k + 1}}}" if k in nil else f"j_{{{k + 1}}}"
        parts.append(name if e == 1 else f"{name}^{{{e}}}")
    return " ".join(parts)


def _atom_latex(a: Atom, nil=frozenset()) -> str:
    m = _mono_latex(a.arg, nil)
    inner = f"{m} v" if m else "v"
    c = a.coeff
    if c == G_ONE:
        pass
    elif c.im == 0 and c.re.numerator == 1:
        inner = f"\\frac{{{inner}}}{{{c.re.denominator}}}"
    else:
        inner = f"{_gauss_latex(c)} {inner}"
    return f"\\{a.kind}\\left({inner}\\right)"
