"""Real algebraic numbers and exact sign evaluation.

Univariate root isolation uses Descartes' rule of signs with bisection on
irreducible factors, so isolating intervals never have rational roots at
their endpoints.  Points with several algebraic coordinates live in a single
number field ``Q(theta)`` built by primitive elements; that gives exact zero
tests for any polynomial at the point, and signs of nonzero values follow by
refining ``theta`` until an interval enclosure excludes zero.
"""
from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field as dc_field, replace

from flint import fmpq, fmpq_mat, fmpq_mpoly_ctx, fmpq_poly, fmpz, fmpz_poly

from .polycore import Poly, rat

__all__ = [
    "RealAlgebraicNumber", "NumberField", "AlgebraicPoint", "isolate_roots",
    "cauchy_bound", "sign_at", "compare", "refine", "simplest_between", "interruptible",
]

_interrupt: ContextVar[Callable[[], None] | None] = ContextVar("interrupt", default=None)


@contextmanager
def interruptible(check: Callable[[], None] | None):
    """Call ``check`` periodically inside long isolation and refinement loops."""
    token = _interrupt.set(check)
    try:
        yield
    finally:
        _interrupt.reset(token)


def _poll() -> None:
    check = _interrupt.get()
    if check is not None:
        check()


# --------------------------------------------------------------------------
# univariate helpers
# --------------------------------------------------------------------------

def _sgn(x) -> int:
    return (x > 0) - (x < 0)


def _to_fmpq_poly(p) -> fmpq_poly:
    if isinstance(p, Poly):
        return p.to_upoly()
    if isinstance(p, fmpz_poly):
        return fmpq_poly(p)
    if isinstance(p, fmpq_poly):
        return p
    return fmpq_poly([rat(c) for c in p])


def _primitive_int(p) -> fmpz_poly:
    """Integer primitive polynomial with positive leading coefficient."""
    q = _to_fmpq_poly(p)
    num = q.numer()
    if num.is_zero():
        return num
    c = num.content()
    if num.leading_coefficient() < 0:
        c = -c
    return fmpz_poly([x // c for x in num.coeffs()])


def cauchy_bound(p) -> fmpq:
    """``1 + max |a_i| / |a_n|``; every real root lies strictly inside ``(-B, B)``."""
    q = _to_fmpq_poly(p)
    if q.degree() < 1:
        raise ValueError("Cauchy bound of a constant polynomial")
    cs = q.coeffs()
    lead = abs(cs[-1])
    return 1 + max(abs(c) for c in cs[:-1]) / lead


def _interval_horner(coeffs: Sequence, lo: fmpq, hi: fmpq) -> tuple[fmpq, fmpq]:
    """Enclosure of a polynomial (coefficients low->high) over ``[lo, hi]``."""
    if not coeffs:
        return fmpq(0), fmpq(0)
    a = b = fmpq(coeffs[-1])
    for c in reversed(coeffs[:-1]):
        prods = (a * lo, a * hi, b * lo, b * hi)
        a, b = min(prods) + c, max(prods) + c
    return a, b


def _descartes(p: fmpz_poly, a: fmpq, b: fmpq) -> int:
    """Sign variations bounding the number of roots of ``p`` in ``(a, b)``."""
    q = fmpq_poly(p)(fmpq_poly([a, b - a])).numer()
    rev = fmpz_poly(list(reversed(q.coeffs())))
    shifted = rev(fmpz_poly([1, 1]))
    count, last = 0, 0
    for c in shifted.coeffs():
        if c != 0:
            s = 1 if c > 0 else -1
            if last and s != last:
                count += 1
            last = s
    return count


def _arb_bounds(x) -> tuple[fmpq, fmpq]:
    out = []
    for e in (x.lower(), x.upper()):
        m, k = e.man_exp()
        out.append(fmpq(m) * fmpq(2) ** int(k) if k >= 0 else fmpq(m, fmpz(2) ** int(-k)))
    return out[0], out[1]


def _isolate_numeric(p: fmpz_poly) -> list[tuple[fmpq, fmpq]] | None:
    """Certified arb root enclosures, checked by sign changes; ``None`` if unusable."""
    try:
        roots = p.complex_roots()
    except Exception:  # pragma: no cover - defensive, falls back to bisection
        return None
    out = []
    for z, _ in roots:
        if not z.imag.is_zero():
            continue
        lo, hi = _arb_bounds(z.real)
        if not lo < hi or _sgn(p(lo)) * _sgn(p(hi)) >= 0:
            return None
        out.append((lo, hi))
    out.sort()
    if any(a[1] >= b[0] for a, b in zip(out, out[1:])):
        return None
    return out


def _isolate_irreducible(p: fmpz_poly) -> list[tuple[fmpq, fmpq]]:
    """Isolating open intervals for an irreducible polynomial of degree >= 2."""
    fast = _isolate_numeric(p)
    if fast is not None:
        return fast
    bound = cauchy_bound(p)
    out = []
    stack = [(-bound, bound)]
    while stack:
        _poll()
        a, b = stack.pop()
        v = _descartes(p, a, b)
        if v == 0:
            continue
        if v == 1:
            out.append((a, b))
            continue
        m = (a + b) / 2
        stack.append((m, b))
        stack.append((a, m))
    out.sort()
    return out


def simplest_between(lo: fmpq | None, hi: fmpq | None) -> fmpq:
    """Rational of least denominator (then least magnitude) in the open interval."""
    if lo is None and hi is None:
        return fmpq(0)
    if lo is None:
        return fmpq(0) if hi > 0 else fmpq(hi.ceil() - 1 if hi.q == 1 else hi.floor())
    if hi is None:
        return fmpq(0) if lo < 0 else fmpq(lo.floor() + 1)
    if not lo < hi:
        raise ValueError(f"empty interval ({lo}, {hi})")
    if lo < 0 < hi:
        return fmpq(0)
    if hi <= 0:
        return -simplest_between(-hi, -lo)
    fl = lo.floor()
    if fl + 1 < hi:
        return fmpq(fl + 1)
    if lo == fl:
        y = simplest_between(1 / (hi - fl), None)
    else:
        y = simplest_between(1 / (hi - fl), 1 / (lo - fl))
    return fl + 1 / y


# --------------------------------------------------------------------------
# real algebraic numbers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RealAlgebraicNumber:
    """A real root of ``defining`` designated by an isolating interval.

    ``defining`` is an irreducible primitive integer polynomial with positive
    leading coefficient.  Rational numbers have a linear defining polynomial
    and ``lo == hi``; otherwise ``(lo, hi)`` is open, contains exactly one root
    and neither endpoint is a root.
    """

    defining: fmpz_poly
    lo: fmpq
    hi: fmpq
    # (number field, squarefree polynomial over it) this root was isolated from
    over: tuple | None = dc_field(default=None, compare=False, repr=False)

    @classmethod
    def from_rational(cls, q) -> RealAlgebraicNumber:
        q = rat(q)
        return cls(fmpz_poly([-q.p, q.q]), q, q)

    @property
    def is_rational(self) -> bool:
        return self.lo == self.hi

    @property
    def value(self) -> fmpq:
        if not self.is_rational:
            raise ValueError("irrational algebraic number has no rational value")
        return self.lo

    @property
    def degree(self) -> int:
        return self.defining.degree()

    def __float__(self) -> float:
        r = self.refine(fmpq(1, 2**60))
        return float((r.lo + r.hi) / 2) if not r.is_rational else float(r.lo)

    def bisect(self) -> RealAlgebraicNumber:
        if self.is_rational:
            return self
        m = (self.lo + self.hi) / 2
        s_lo = _sgn(self.defining(self.lo))
        if _sgn(self.defining(m)) == s_lo:
            return replace(self, lo=m)
        return replace(self, hi=m)

    def refine(self, width) -> RealAlgebraicNumber:
        """Same root, interval no wider than ``width``."""
        width = rat(width)
        if width <= 0:
            raise ValueError("width must be positive")
        r = self
        while r.hi - r.lo > width:
            r = r.bisect()
        return r

    def separate_from(self, q: fmpq) -> RealAlgebraicNumber:
        """Refine until the rational ``q`` (assumed different) is outside the closed interval."""
        r = self
        while not r.is_rational and r.lo <= q <= r.hi:
            r = r.bisect()
        return r

    def sign_of(self, q) -> int:
        """Exact sign of the univariate rational polynomial ``q`` at this number."""
        qp = _to_fmpq_poly(q)
        if self.is_rational:
            return _sgn(qp(self.lo))
        if qp.is_zero():
            return 0
        if (fmpq_poly(self.defining).gcd(qp)).degree() > 0:
            # defining polynomial is irreducible, so a common factor means it divides q
            return 0
        cs = qp.coeffs()
        r = self
        while True:
            _poll()
            a, b = _interval_horner(cs, r.lo, r.hi)
            if a > 0:
                return 1
            if b < 0:
                return -1
            r = r.bisect()

    def interval_str(self) -> str:
        return f"[{self.lo}, {self.hi}]"

    def __str__(self) -> str:
        if self.is_rational:
            return str(self.lo)
        return f"root({self.defining}, {self.lo}, {self.hi})"


def refine(r: RealAlgebraicNumber, width) -> RealAlgebraicNumber:
    return r.refine(width)


def _closed_overlap(a: RealAlgebraicNumber, b: RealAlgebraicNumber) -> bool:
    return not (a.hi < b.lo or b.hi < a.lo)


def compare(a: RealAlgebraicNumber, b: RealAlgebraicNumber) -> int:
    """Exact three-way comparison: -1, 0 or 1."""
    if a.is_rational and b.is_rational:
        return _sgn(a.lo - b.lo)
    if a.defining == b.defining:
        lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
        if lo < hi and _sgn(a.defining(lo)) != _sgn(a.defining(hi)):
            return 0
    # distinct numbers: refine until the closed intervals separate
    while _closed_overlap(a, b):
        if a.hi - a.lo >= b.hi - b.lo:
            if a.is_rational:
                b = b.bisect()
            else:
                a = a.bisect()
        else:
            if b.is_rational:
                a = a.bisect()
            else:
                b = b.bisect()
    return -1 if a.hi < b.lo else 1


def _separate_all(roots: list[RealAlgebraicNumber]) -> list[RealAlgebraicNumber]:
    """Refine a list of pairwise distinct numbers to disjoint closed intervals, sorted."""
    roots = list(roots)
    changed = True
    while changed:
        changed = False
        roots.sort(key=lambda r: (r.lo, r.hi))
        for i in range(len(roots) - 1):
            a, b = roots[i], roots[i + 1]
            if _closed_overlap(a, b):
                if a.hi - a.lo >= b.hi - b.lo and not a.is_rational:
                    roots[i] = a.bisect()
                else:
                    roots[i + 1] = b.bisect()
                changed = True
    roots.sort(key=lambda r: (r.lo, r.hi))
    return roots


def isolate_roots(p) -> list[RealAlgebraicNumber]:
    """Distinct real roots of a nonzero univariate polynomial, in increasing order.

    Accepts a univariate :class:`Poly`, ``fmpq_poly``/``fmpz_poly`` or a
    coefficient list (low to high).  Closed isolating intervals come out
    pairwise disjoint.
    """
    q = _to_fmpq_poly(p)
    if q.is_zero():
        raise ValueError("cannot isolate roots of the zero polynomial")
    if q.degree() < 1:
        return []
    roots: list[RealAlgebraicNumber] = []
    for f, _ in q.factor()[1]:
        fi = _primitive_int(f)
        if fi.degree() == 1:
            a0, a1 = fi.coeffs()
            roots.append(RealAlgebraicNumber.from_rational(fmpq(-a0, a1)))
            continue
        for lo, hi in _isolate_irreducible(fi):
            roots.append(RealAlgebraicNumber(fi, lo, hi))
    return _separate_all(roots)


# --------------------------------------------------------------------------
# number fields and algebraic points
# --------------------------------------------------------------------------

_T = "_t"


class NumberField:
    """``Q(theta)`` for a real algebraic ``theta`` of degree >= 2.

    Elements are ``fmpq_poly`` values reduced modulo the monic minimal
    polynomial.  The field remembers the tightest interval for ``theta`` it
    has computed so far; that cache never changes the designated root.
    """

    def __init__(self, theta: RealAlgebraicNumber):
        if theta.degree < 2:
            raise ValueError("a number field needs an irrational generator")
        self.theta = theta
        m = fmpq_poly(theta.defining)
        self.minpoly: fmpq_poly = m / m.coeffs()[-1]
        self.degree = theta.degree

    def reduce(self, e: fmpq_poly) -> fmpq_poly:
        return e % self.minpoly

    def mul(self, a: fmpq_poly, b: fmpq_poly) -> fmpq_poly:
        return (a * b) % self.minpoly

    def inv(self, a: fmpq_poly) -> fmpq_poly:
        g, s, _ = a.xgcd(self.minpoly)
        if g.degree() != 0:
            raise ZeroDivisionError("inverse of zero in a number field")
        return s / g.coeffs()[0]

    def gen(self) -> fmpq_poly:
        return fmpq_poly([0, 1])

    def _refine_theta(self):
        self.theta = self.theta.bisect()

    def enclosure(self, e: fmpq_poly) -> tuple[fmpq, fmpq]:
        t = self.theta
        return _interval_horner(e.coeffs(), t.lo, t.hi)

    def sign(self, e: fmpq_poly) -> int:
        if e.is_zero():
            return 0
        if e.degree() == 0:
            return _sgn(e.coeffs()[0])
        while True:
            _poll()
            a, b = self.enclosure(e)
            if a > 0:
                return 1
            if b < 0:
                return -1
            self._refine_theta()

    def narrow(self, e: fmpq_poly, width: fmpq) -> tuple[fmpq, fmpq]:
        """Enclosure of ``e`` no wider than ``width``."""
        while True:
            _poll()
            a, b = self.enclosure(e)
            if b - a <= width:
                return a, b
            self._refine_theta()

    def __repr__(self) -> str:
        return f"NumberField({self.minpoly})"


def _ctx(names):
    return fmpq_mpoly_ctx.get(names, "lex")


def _upoly_to_mpoly(p: fmpq_poly, name: str):
    ctx = _ctx((name,))
    return ctx.from_dict({(i,): c for i, c in enumerate(p.coeffs()) if c != 0})


def _mpoly_to_upoly(p) -> fmpq_poly:
    if p.is_zero():
        return fmpq_poly([])
    deg = p.degrees()[0]
    cs = [fmpq(0)] * (deg + 1)
    for exp, c in zip(p.monoms(), p.coeffs()):
        cs[exp[0]] = c
    return fmpq_poly(cs)


# K-polynomials: dense lists of field elements, index = power.

def kp_strip(kp: list[fmpq_poly]) -> list[fmpq_poly]:
    kp = list(kp)
    while kp and kp[-1].is_zero():
        kp.pop()
    return kp


def kp_eval(field: NumberField | None, kp: list[fmpq_poly], x: fmpq) -> fmpq_poly:
    acc = fmpq_poly([])
    for c in reversed(kp):
        acc = acc * x + c
    return acc


def kp_derivative(kp):
    return [c * i for i, c in enumerate(kp)][1:]


def kp_divmod(field: NumberField, a, b):
    a = kp_strip(a)
    b = kp_strip(b)
    if not b:
        raise ZeroDivisionError
    inv_lead = field.inv(b[-1])
    q = [fmpq_poly([])] * max(len(a) - len(b) + 1, 0)
    a = list(a)
    while len(a) >= len(b) and a:
        c = field.mul(a[-1], inv_lead)
        shift = len(a) - len(b)
        q[shift] = c
        for i, bc in enumerate(b):
            a[shift + i] = field.reduce(a[shift + i] - c * bc)
        a = kp_strip(a)
    return q, a


def kp_monic(field: NumberField, a):
    a = kp_strip(a)
    inv = field.inv(a[-1])
    return [field.mul(c, inv) for c in a]


def kp_gcd(field: NumberField, a, b):
    a, b = kp_strip(a), kp_strip(b)
    while b:
        _, r = kp_divmod(field, a, b)
        a, b = b, r
    return kp_monic(field, a) if a else a


def kp_squarefree(field: NumberField, a):
    a = kp_strip(a)
    if len(a) <= 2:
        return a
    g = kp_gcd(field, a, kp_derivative(a))
    if len(g) <= 1:
        return a
    q, _ = kp_divmod(field, a, g)
    return q


def _shifted_norm(mu: fmpq_poly, kp, c=0) -> fmpq_poly:
    """``Res_t(mu(t), kp(t, y - c*t))`` as a polynomial in ``y``; ``mu`` is monic.

    With a monic ``mu`` the resultant is the product of ``kp`` over the
    conjugates, so it commutes with specialising ``y``.  Evaluating at
    ``0..n`` and interpolating keeps every step a univariate flint call and
    lets a timeout interrupt between points.
    """
    n = mu.degree() * (len(kp) - 1)
    vals = []
    for j in range(n + 1):
        _poll()
        lin = fmpq_poly([j, -c])
        acc = fmpq_poly([])
        for e in reversed(kp):
            acc = (acc * lin + e) % mu
        vals.append(fmpq(0) if acc.is_zero() else mu.resultant(acc))
    # Newton divided differences on unit-spaced nodes
    for level in range(1, n + 1):
        for i in range(n, level - 1, -1):
            vals[i] = (vals[i] - vals[i - 1]) / level
    out = fmpq_poly([vals[n]])
    for i in range(n - 1, -1, -1):
        out = out * fmpq_poly([-i, 1]) + vals[i]
    return out


def kp_norm(field: NumberField, kp) -> fmpq_poly:
    """``Res_t(minpoly(t), kp(t, y))`` as a polynomial in ``y``."""
    return _shifted_norm(field.minpoly, kp_strip(kp))


def kp_real_roots(field: NumberField | None, kp) -> list[RealAlgebraicNumber]:
    """Distinct real roots of a polynomial with coefficients in ``field``."""
    kp = kp_strip(kp)
    if len(kp) <= 1:
        return []
    if field is None:
        return isolate_roots(fmpq_poly([c.coeffs()[0] if not c.is_zero() else 0 for c in kp]))
    if all(c.degree() <= 0 for c in kp):
        return isolate_roots(fmpq_poly([c.coeffs()[0] if not c.is_zero() else 0 for c in kp]))
    norm = kp_norm(field, kp)
    cands = isolate_roots(norm)
    sq = kp_squarefree(field, kp)
    out = []
    for r in cands:
        if r.is_rational:
            if kp_eval(field, kp, r.lo).is_zero():
                out.append(r)
            continue
        s_lo = field.sign(kp_eval(field, sq, r.lo))
        s_hi = field.sign(kp_eval(field, sq, r.hi))
        if s_lo != s_hi:
            out.append(replace(r, over=(field, tuple(sq))))
    return out


def _compose_in_field(field: NumberField, e: fmpq_poly, sub: fmpq_poly) -> fmpq_poly:
    acc = fmpq_poly([])
    for c in reversed(e.coeffs()):
        acc = field.reduce(acc * sub + c)
    return acc


def _primitive_element(field: NumberField, beta: RealAlgebraicNumber, kp=None):
    """Return ``(new_field, theta_in_new, beta_in_new)`` for ``Q(theta, beta)``.

    ``kp`` is an optional squarefree polynomial over ``field`` vanishing at
    ``beta``; it is usually of much lower degree than the rational defining
    polynomial, which keeps the new field small.
    """
    if kp is not None:
        kp = kp_monic(field, kp)
        if len(kp) < 2:
            kp = None
    if kp is None:
        kp = [fmpq_poly([a]) for a in fmpq_poly(beta.defining).coeffs()]
        kp = [c / kp[-1].coeffs()[0] for c in kp]
    mu = field.minpoly
    for c in (1, -1, 2, -2, 3, -3, 5, -5, 7, -7, 11, -11):
        norm = _shifted_norm(mu, kp, c)
        if norm.gcd(norm.derivative()).degree() == 0:
            break
    else:  # pragma: no cover - a separating integer always exists
        raise RuntimeError("no primitive element found")
    # identify the root c*theta + beta among the roots of the norm
    roots = isolate_roots(norm)
    th = field.theta
    b = beta
    while True:
        _poll()
        lo = b.lo + (c * th.lo if c > 0 else c * th.hi)
        hi = b.hi + (c * th.hi if c > 0 else c * th.lo)
        hits = [i for i, r in enumerate(roots) if not (r.hi < lo or hi < r.lo)]
        if len(hits) == 1:
            break
        field._refine_theta()
        th = field.theta
        b = b.bisect()
        roots = [r.bisect() for r in roots]
    new_theta = roots[hits[0]]
    if new_theta.degree == 1:  # pragma: no cover - theta irrational already
        raise RuntimeError("primitive element collapsed to a rational")
    nf = NumberField(new_theta)
    theta_new = nf.reduce(_theta_in_generator(field, kp, c))
    beta_new = nf.reduce(nf.gen() - c * theta_new)
    return nf, theta_new, beta_new


def _theta_in_generator(field: NumberField, kp: list[fmpq_poly], c) -> fmpq_poly:
    """Write ``t`` as a polynomial in ``g = s + c*t`` inside ``K[s]/(kp(s))``.

    ``K = Q(t)`` and ``kp`` is monic.  The norm of ``g`` is squarefree, so
    ``g`` generates that algebra over ``Q`` and its powers below the
    dimension form a basis.  One rational linear solve replaces a Euclidean
    gcd over the new field, whose coefficients grow quickly.
    """
    d1, k = field.degree, len(kp) - 1
    dim = d1 * k
    cq = fmpq(c)
    t_gen = field.gen()
    # element = k field elements, index = power of s
    elem = [fmpq_poly([1])] + [fmpq_poly([])] * (k - 1)
    cols = []
    for _ in range(dim):
        _poll()
        col = []
        for e in elem:
            cs = e.coeffs()
            col.extend(list(cs) + [fmpq(0)] * (d1 - len(cs)))
        cols.append(col)
        top = elem[-1]
        nxt = [fmpq_poly([])] + elem[:-1]
        for j in range(k):
            nxt[j] = field.reduce(nxt[j] - top * kp[j] + cq * t_gen * elem[j])
        elem = nxt
    mat = fmpq_mat(dim, dim, [cols[j][i] for i in range(dim) for j in range(dim)])
    rhs = fmpq_mat(dim, 1, [1 if i == 1 else 0 for i in range(dim)])
    sol = mat.solve(rhs)
    return fmpq_poly([sol[i, 0] for i in range(dim)])
class AlgebraicPoint:
    """An exact point: coordinates as elements of one number field (or Q)."""

    __slots__ = ("vars", "field", "coords", "rans")

    def __init__(self, vars_: tuple[str, ...] = (), field: NumberField | None = None,
                 coords: tuple[fmpq_poly, ...] = (), rans: tuple[RealAlgebraicNumber, ...] = ()):
        self.vars = vars_
        self.field = field
        self.coords = coords
        self.rans = rans

    @classmethod
    def from_map(cls, point: Mapping[str, RealAlgebraicNumber | fmpq | int],
                 order: Iterable[str] | None = None) -> AlgebraicPoint:
        pt = cls()
        for v in (order if order is not None else sorted(point)):
            val = point[v]
            if not isinstance(val, RealAlgebraicNumber):
                val = RealAlgebraicNumber.from_rational(val)
            pt = pt.extend(v, val)
        return pt

    def as_map(self) -> dict[str, RealAlgebraicNumber]:
        return dict(zip(self.vars, self.rans))

    def __contains__(self, v: str) -> bool:
        return v in self.vars

    def extend(self, var: str, value: RealAlgebraicNumber | fmpq | int) -> AlgebraicPoint:
        if not isinstance(value, RealAlgebraicNumber):
            value = RealAlgebraicNumber.from_rational(value)
        if var in self.vars:
            raise ValueError(f"{var} already assigned")
        if value.is_rational:
            return AlgebraicPoint(self.vars + (var,), self.field,
                                  self.coords + (fmpq_poly([value.lo]),), self.rans + (value,))
        if self.field is None:
            nf = NumberField(value)
            return AlgebraicPoint(self.vars + (var,), nf,
                                  self.coords + (nf.gen(),), self.rans + (value,))
        kp = value.over[1] if value.over and value.over[0] is self.field else None
        nf, theta_new, beta_new = _primitive_element(self.field, value, kp)
        coords = tuple(_compose_in_field(nf, c, theta_new) for c in self.coords)
        return AlgebraicPoint(self.vars + (var,), nf, coords + (beta_new,), self.rans + (value,))

    def is_rational(self) -> bool:
        return self.field is None

    def rational_values(self) -> dict[str, fmpq]:
        return {v: r.lo for v, r in zip(self.vars, self.rans) if r.is_rational}

    # ------------------------------------------------------------ evaluation
    def element(self, p: Poly) -> fmpq_poly:
        """``p`` evaluated at the point, as a field element."""
        missing = [v for v in p.vars if v not in self.vars]
        if missing:
            raise KeyError(f"unassigned variables {missing}")
        if self.field is None or not p.vars:
            vals = {v: r.lo for v, r in zip(self.vars, self.rans) if v in p.vars}
            return fmpq_poly([p.evaluate(vals)])
        ctx = _ctx((_T,))
        idx = {v: i for i, v in enumerate(self.vars)}
        args = [_upoly_to_mpoly(self.coords[idx[v]], _T) for v in p.vars]
        composed = p._p.compose(*args, ctx=ctx)
        return self.field.reduce(_mpoly_to_upoly(composed))

    def sign(self, p: Poly) -> int:
        e = self.element(p)
        if self.field is None:
            return _sgn(e.coeffs()[0]) if not e.is_zero() else 0
        return self.field.sign(e)

    def is_zero(self, p: Poly) -> bool:
        return self.element(p).is_zero()

    def upoly(self, p: Poly, var: str) -> list[fmpq_poly]:
        """``p`` with every coordinate but ``var`` substituted (K-polynomial in ``var``)."""
        return kp_strip([self.element(c) for c in p.coeffs_in(var)])

    def real_roots(self, p: Poly, var: str) -> list[RealAlgebraicNumber]:
        return kp_real_roots(self.field, self.upoly(p, var))

    def lazard_upoly(self, p: Poly, var: str) -> tuple[list[fmpq_poly], bool]:
        """Lazard evaluation of ``p`` at this point, leaving ``var`` symbolic.

        Before substituting each coordinate the largest power of
        ``(x_j - alpha_j)`` dividing the partially evaluated polynomial is
        removed (computed as the first non-vanishing Taylor coefficient), so
        the result is zero only when ``p`` is.  The flag reports whether
        ``p`` itself vanished identically on the fibre.
        """
        u = self.upoly(p, var)
        if u or p.is_zero():
            if p.is_zero():
                raise ValueError("Lazard evaluation of the zero polynomial")
            return u, False
        g = p
        for j, xj in enumerate(self.vars):
            if xj not in g.vars:
                continue
            later = set(self.vars[j + 1:]) | {var}
            while not self._survives(g, later):
                g = g.derivative(xj)
        return self.upoly(g, var), True

    def _survives(self, g: Poly, later: set[str]) -> bool:
        groups: dict[tuple, dict] = {}
        for mono, c in g.terms():
            key = tuple(sorted((v, e) for v, e in mono.items() if v in later))
            rest = tuple((v, e) for v, e in mono.items() if v not in later)
            groups.setdefault(key, {})[rest] = c
        return any(not self.is_zero(Poly.from_terms(t)) for t in groups.values())

    def enclosure(self, p: Poly, width) -> tuple[fmpq, fmpq]:
        e = self.element(p)
        if self.field is None:
            v = e.coeffs()[0] if not e.is_zero() else fmpq(0)
            return v, v
        return self.field.narrow(e, rat(width))

    def __repr__(self) -> str:
        return "AlgebraicPoint(" + ", ".join(f"{v}={r}" for v, r in zip(self.vars, self.rans)) + ")"


def sign_at(p: Poly, point: Mapping[str, RealAlgebraicNumber | fmpq | int]) -> int:
    """Exact sign of ``p`` at a point given as ``{var: RealAlgebraicNumber}``."""
    pt = AlgebraicPoint.from_map({v: point[v] for v in p.vars})
    return pt.sign(p)
