"""Binary forms, form tuples and the local solubility of the conic bundles they define.

A tuple ``F = (F_ij)`` defines ``G_1 x^2 + G_2 y^2 = G_3 z^2`` with
``G_i = prod_j F_ij``.  Clearing ``G_3`` gives the fibre conics
``Phi_1(t) x^2 + Phi_2(t) y^2 = z^2`` where ``Phi_1 = G_1 G_3`` and
``Phi_2 = G_2 G_3``.

Good-reduction certificate used by :func:`everywhere_locally_soluble`: let
``p`` be odd, ``p > 2d`` with ``d = deg(G_1 G_2 G_3)``, and ``p`` not dividing
the discriminant of ``G_1 G_2 G_3``.  Then no ``F_ij`` vanishes mod ``p`` and
``G_1 G_2 G_3`` has at most ``d < p + 1`` zeros on ``P^1(F_p)``.  Any other
point ``t`` makes ``Phi_1(t), Phi_2(t)`` both ``p``-adic units, and the
Hilbert symbol of two units at odd ``p`` is +1, so the fibre over ``t`` has a
``Q_p``-point.  Only the finitely many remaining primes need a search.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterator, Sequence

import numpy as np

from .arith import FactorizationError, factor, kronecker, primes_up_to, valuation
from .hilbert import constancy_level, detector, hilbert_classical

__all__ = [
    "BinaryForm",
    "Shape",
    "FormTuple",
    "Status",
    "SolubilityVerdict",
    "resultant",
    "binary_discriminant",
    "is_separable",
    "sample_tuple",
    "fibre_soluble_q",
    "real_points_exist",
    "qp_points_exist",
    "everywhere_locally_soluble",
    "Chart",
    "residue_charts",
]


@dataclass(frozen=True)
class BinaryForm:
    """Form of formal degree ``len(coeffs) - 1``; ``coeffs[j]`` multiplies ``t1**j * t2**(d-j)``."""

    coeffs: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise ValueError("a form needs at least one coefficient")
        object.__setattr__(self, "coeffs", tuple(int(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def height(self) -> int:
        return max(abs(c) for c in self.coeffs)

    def __call__(self, n1: int, n2: int) -> int:
        return self.evaluate(n1, n2)

    def evaluate(self, n1: int, n2: int) -> int:
        # homogeneous Horner in n1, carrying the matching power of n2
        acc = self.coeffs[-1]
        pw = 1
        for c in reversed(self.coeffs[:-1]):
            pw *= n2
            acc = acc * n1 + c * pw
        return acc

    def __mul__(self, other: "BinaryForm") -> "BinaryForm":
        out = [0] * (self.degree + other.degree + 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return BinaryForm(tuple(out))

    def d_t1(self) -> "BinaryForm":
        if self.degree == 0:
            return BinaryForm((0,))
        return BinaryForm(tuple(j * c for j, c in enumerate(self.coeffs) if j))

    def d_t2(self) -> "BinaryForm":
        d = self.degree
        if d == 0:
            return BinaryForm((0,))
        return BinaryForm(tuple((d - j) * c for j, c in enumerate(self.coeffs[:-1])))

    @classmethod
    def one(cls) -> "BinaryForm":
        return cls((1,))

    def __str__(self) -> str:
        d = self.degree
        terms = []
        for j, c in enumerate(self.coeffs):
            if c:
                mono = "*".join(s for s in (
                    f"t1^{j}" if j > 1 else ("t1" if j == 1 else ""),
                    f"t2^{d - j}" if d - j > 1 else ("t2" if d - j == 1 else ""),
                ) if s)
                terms.append(f"{c}*{mono}" if mono else str(c))
        return " + ".join(terms) or "0"


def _bareiss_det(m: list[list[int]]) -> int:
    n = len(m)
    if n == 0:
        return 1
    a = [row[:] for row in m]
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k]:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def resultant(f: BinaryForm, g: BinaryForm) -> int:
    """Resultant of two binary forms of formal degrees m, n (Sylvester determinant)."""
    m, n = f.degree, g.degree
    a = list(reversed(f.coeffs))  # descending in t1
    b = list(reversed(g.coeffs))
    size = m + n
    rows = []
    for i in range(n):
        rows.append([0] * i + a + [0] * (size - m - 1 - i))
    for i in range(m):
        rows.append([0] * i + b + [0] * (size - n - 1 - i))
    return _bareiss_det(rows)


def binary_discriminant(f: BinaryForm) -> int:
    """``Res(df/dt1, df/dt2)``, which is ``D**(D-2)`` times the discriminant up to sign.

    Unlike ``Res(f, df/dt1)`` it does not degenerate when ``t2`` divides f.
    """
    if f.degree < 2:
        return 0 if f.is_zero() else 1
    return resultant(f.d_t1(), f.d_t2())


@dataclass(frozen=True)
class Shape:
    m: tuple[int, int, int]
    d: tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]

    def __post_init__(self) -> None:
        if len(self.m) != 3 or self.m[0] * self.m[1] <= 0 or self.m[2] < 0:
            raise ValueError(f"bad multiplicities {self.m}")
        if tuple(len(x) for x in self.d) != tuple(self.m):
            raise ValueError("degree lists do not match multiplicities")
        if any(dij < 1 for row in self.d for dij in row):
            raise ValueError("degrees must be positive")

    @property
    def total_degree(self) -> int:
        return sum(sum(row) for row in self.d)

    @classmethod
    def parse(cls, text: str) -> "Shape":
        """Parse ``"m1,m2,m3:d11,...,d1m1,d21,...,d3m3"``, e.g. ``"1,1,0:1,1"``."""
        head, _, tail = text.partition(":")
        m = tuple(int(x) for x in head.split(","))
        flat = [int(x) for x in tail.split(",") if x.strip()]
        if len(m) != 3 or len(flat) != sum(m):
            raise ValueError(f"cannot parse shape {text!r}")
        d, k = [], 0
        for mi in m:
            d.append(tuple(flat[k : k + mi]))
            k += mi
        return cls((m[0], m[1], m[2]), (d[0], d[1], d[2]))

    def __str__(self) -> str:
        return ",".join(map(str, self.m)) + ":" + ",".join(str(x) for row in self.d for x in row)


@dataclass(frozen=True)
class FormTuple:
    forms: tuple[tuple[BinaryForm, ...], tuple[BinaryForm, ...], tuple[BinaryForm, ...]]

    def __post_init__(self) -> None:
        Shape(self.m, self.degrees)  # validates

    @property
    def m(self) -> tuple[int, int, int]:
        return tuple(len(g) for g in self.forms)  # type: ignore[return-value]

    @property
    def degrees(self):
        return tuple(tuple(f.degree for f in g) for g in self.forms)

    @property
    def shape(self) -> Shape:
        return Shape(self.m, self.degrees)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[Sequence[Sequence[int]]]) -> "FormTuple":
        groups = [tuple(BinaryForm(tuple(c)) for c in g) for g in coeffs]
        while len(groups) < 3:
            groups.append(())
        return cls((groups[0], groups[1], groups[2]))

    def G(self, i: int) -> BinaryForm:
        out = BinaryForm.one()
        for f in self.forms[i - 1]:
            out = out * f
        return out

    @cached_property
    def phi(self) -> tuple[BinaryForm, BinaryForm]:
        g3 = self.G(3)
        return self.G(1) * g3, self.G(2) * g3

    @cached_property
    def product(self) -> BinaryForm:
        return self.G(1) * self.G(2) * self.G(3)

    def height(self) -> int:
        return max(f.height() for g in self.forms for f in g)

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "shape": {"m": list(self.m), "d": [list(r) for r in self.degrees]},
            "coeffs": [[list(f.coeffs) for f in g] for g in self.forms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str | dict) -> "FormTuple":
        obj = json.loads(text) if isinstance(text, str) else text
        ft = cls.from_coeffs(obj["coeffs"])
        shape = obj.get("shape")
        if shape is not None:
            want = Shape(tuple(shape["m"]), tuple(tuple(r) for r in shape["d"]))
            if want != ft.shape:
                raise ValueError(f"shape {want} does not match coefficients {ft.shape}")
        return ft


def phi_pair(F: FormTuple) -> tuple[BinaryForm, BinaryForm]:
    return F.phi


def is_separable(F: FormTuple) -> bool:
    """True iff prod F_ij is nonzero and squarefree on P^1 over the algebraic closure."""
    prod = F.product
    if prod.is_zero():
        return False
    return binary_discriminant(prod) != 0


def sample_tuple(shape: Shape, H: int, rng_seed: int) -> FormTuple:
    """Tuple with every coefficient independent uniform on {-H, ..., H}."""
    if H < 1:
        raise ValueError("H must be >= 1")
    rng = np.random.default_rng(rng_seed)
    groups = []
    for row in shape.d:
        groups.append(tuple(
            BinaryForm(tuple(int(c) for c in rng.integers(-H, H, size=dij + 1, endpoint=True)))
            for dij in row
        ))
    return FormTuple((groups[0], groups[1], groups[2]))


def fibre_soluble_q(F: FormTuple, n1: int, n2: int) -> bool:
    """Whether the fibre over (n1 : n2) has a rational point (degenerate fibres count)."""
    if math.gcd(n1, n2) != 1:
        raise ValueError("fibre coordinates must be coprime")
    phi1, phi2 = F.phi
    return detector(phi1(n1, n2), phi2(n1, n2)).delta > 0


class Status(str, enum.Enum):
    SOLUBLE = "SOLUBLE"
    INSOLUBLE = "INSOLUBLE"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class SolubilityVerdict:
    status: Status
    certificate: dict[str, Any] | None = field(default=None, compare=False)

    def __bool__(self) -> bool:
        return self.status is Status.SOLUBLE


# --- real places --------------------------------------------------------------

def _poly_trim(p: list[Fraction]) -> list[Fraction]:
    while p and p[-1] == 0:
        p.pop()
    return p


def _poly_eval(p: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _poly_rem(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a = a[:]
    while len(a) >= len(b):
        q = a[-1] / b[-1]
        shift = len(a) - len(b)
        for i, c in enumerate(b):
            a[shift + i] -= q * c
        a.pop()
        _poly_trim(a)
    return a


def _sturm_chain(p: list[Fraction]) -> list[list[Fraction]]:
    dp = _poly_trim([i * c for i, c in enumerate(p)][1:])
    chain = [p, dp]
    while chain[-1]:
        r = _poly_rem(chain[-2], chain[-1])
        chain.append([-c for c in r])
    chain.pop()
    return chain


def _sign_changes(values: Iterator[int]) -> int:
    prev, n = 0, 0
    for v in values:
        if v:
            if prev and v != prev:
                n += 1
            prev = v
    return n


def _sgn(x) -> int:
    return (x > 0) - (x < 0)


def _changes_at(chain, x: Fraction) -> int:
    return _sign_changes(_sgn(_poly_eval(q, x)) for q in chain)


def _changes_at_inf(chain, positive: bool) -> int:
    return _sign_changes(
        _sgn(q[-1]) * (1 if positive or (len(q) - 1) % 2 == 0 else -1) for q in chain
    )


def _root_bound(p: Sequence[Fraction]) -> Fraction:
    lead = abs(p[-1])
    return 1 + max((abs(c) / lead for c in p[:-1]), default=Fraction(0))


def _isolate_roots(p: list[Fraction]) -> list[tuple[Fraction, Fraction]]:
    """Disjoint half-open intervals (a, b], each holding exactly one distinct real root of p.

    The Sturm count V(a) - V(b) is exact on (a, b] even when b or a is a root.
    """
    chain = _sturm_chain(p)
    bound = _root_bound(p)
    out = []
    stack = [(-bound, bound)]
    while stack:
        a, b = stack.pop()
        n = _changes_at(chain, a) - _changes_at(chain, b)
        if n == 0:
            continue
        if n == 1:
            out.append((a, b))
            continue
        mid = (a + b) / 2
        stack.append((mid, b))
        stack.append((a, mid))
    return sorted(out)


def _nonneg_witness(form: BinaryForm) -> dict[str, Any] | None:
    """A point of R^2 - {0} where ``form >= 0``, or None if it is negative definite."""
    d = form.degree
    if form.is_zero():
        return {"t": [1, 0], "value": 0}
    lead = form.coeffs[-1]  # value at (1, 0)
    if lead >= 0:
        return {"t": [1, 0], "value": lead}
    if d % 2:
        return {"t": [-1, 0], "value": -lead}
    f = [Fraction(c) for c in form.coeffs]
    for t in (Fraction(0), Fraction(1), Fraction(-1)):
        v = _poly_eval(f, t)
        if v >= 0:
            return {"t": [str(t), "1"], "value": str(v)}
    intervals = _isolate_roots(f)
    if not intervals:
        return None
    candidates = []
    for a, b in intervals:
        candidates += [a, b]
    for a, b in zip(intervals, intervals[1:]):
        candidates.append((a[1] + b[0]) / 2)
    for t in candidates:
        v = _poly_eval(f, t)
        if v >= 0:
            return {"t": [str(t), "1"], "value": str(v)}
    # only even-multiplicity real roots: the form vanishes at an algebraic point
    a, b = intervals[0]
    return {"root_interval": [str(a), str(b)], "value": "0"}


def real_points_exist(F: FormTuple) -> SolubilityVerdict:
    """Exact decision of X_F(R) != {} via Sturm sequences."""
    refusals = []
    for i, form in enumerate(F.phi, start=1):
        w = _nonneg_witness(form)
        if w is not None:
            return SolubilityVerdict(Status.SOLUBLE, {"place": "inf", "phi": i, **w})
        refusals.append({"phi": i, "leading": form.coeffs[-1], "real_roots": 0})
    return SolubilityVerdict(Status.INSOLUBLE, {"place": "inf", "negative_definite": refusals})


# --- p-adic residue classes ---------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """A slice of the primitive vectors of Z_p^2.

    ``"A"``: t = lam * (u, 1); ``"B"``: t = lam * (1, p*u), with u in Z_p and lam
    running over one square class of units.  ``weight`` is the Haar mass of the
    slice per unit measure of u.
    """

    name: str
    lam: int
    weight: Fraction

    def point(self, p: int, u: int) -> tuple[int, int]:
        if self.name == "A":
            return self.lam * u, self.lam
        return self.lam, self.lam * p * u


def _unit_square_classes(p: int) -> list[int]:
    if p == 2:
        return [1, 3, 5, 7]
    g = next(a for a in range(2, p) if kronecker(a, p) == -1)
    return [1, g]


def residue_charts(p: int, deg1: int, deg2: int) -> list[Chart]:
    """Charts covering Z_p^2 - pZ_p^2; a single unit class suffices when both degrees are even."""
    unit_mass = Fraction(p - 1, p)
    if deg1 % 2 == 0 and deg2 % 2 == 0:
        lams = [(1, unit_mass)]
    else:
        reps = _unit_square_classes(p)
        lams = [(lam, unit_mass / len(reps)) for lam in reps]
    out = []
    for name, factor_ in (("A", Fraction(1)), ("B", Fraction(1, p))):
        for lam, mass in lams:
            out.append(Chart(name, lam, mass * factor_))
    return out


def class_values(phi1: BinaryForm, phi2: BinaryForm, p: int, chart: Chart, u: int, level: int):
    """Evaluate both forms at the class representative.

    Returns ``(a, b)`` when the valuations and unit parts (to the constancy
    level) of both values are constant on the class, else None.
    """
    t = chart.point(p, u)
    a, b = phi1(*t), phi2(*t)
    lam = constancy_level(p)
    if a == 0 or b == 0:
        return None
    if valuation(a, p) + lam > level or valuation(b, p) + lam > level:
        return None
    return a, b


def qp_points_exist(F: FormTuple, p: int, max_level: int = 6) -> SolubilityVerdict:
    """Residue-class search for a fibre with a Q_p-point.

    Classes t mod p**level are refined until both fibre coefficients have
    constant valuation and unit part; a class with Hilbert symbol +1 certifies
    solubility for every t in it.
    """
    phi1, phi2 = F.phi
    charts = residue_charts(p, phi1.degree, phi2.degree)
    frontier: list[tuple[int, int]] = [(ci, 0) for ci in range(len(charts))]
    level, checked = 0, 0
    while frontier:
        level += 1
        if level > max_level:
            return SolubilityVerdict(Status.UNKNOWN, {
                "place": p, "max_level": max_level, "undetermined": len(frontier)})
        nxt = []
        step = p ** (level - 1)
        for ci, u0 in frontier:
            chart = charts[ci]
            for k in range(p):
                u = u0 + k * step
                checked += 1
                vals = class_values(phi1, phi2, p, chart, u, level)
                if vals is None:
                    nxt.append((ci, u))
                    continue
                if hilbert_classical(vals[0], vals[1], p) == 1:
                    t = chart.point(p, u)
                    return SolubilityVerdict(Status.SOLUBLE, {
                        "place": p, "chart": chart.name, "lam": chart.lam, "residue": u,
                        "level": level, "t": list(t), "phi": list(vals),
                        "mass": str(chart.weight / p**level),
                    })
        frontier = nxt
    return SolubilityVerdict(Status.INSOLUBLE, {"place": p, "level": level, "classes": checked})


def _bad_primes(F: FormTuple) -> list[int]:
    prod = F.product
    d = prod.degree
    bad = set(primes_up_to(2 * d)) | {2}
    disc = binary_discriminant(prod)
    if disc == 0:
        raise ValueError("tuple is not separable")
    bad.update(factor(2 * disc).primes())
    return sorted(bad)


def _cheap_fibres(F: FormTuple) -> list[tuple[int, int]]:
    """Small fibres plus the rational roots of linear factors (degenerate, hence soluble)."""
    pts = [(1, 0), (0, 1), (1, 1), (1, -1), (-1, 0), (0, -1), (-1, -1), (-1, 1)]
    for group in F.forms:
        for f in group:
            if f.degree == 1 and not f.is_zero():
                c0, c1 = f.coeffs
                g = math.gcd(c0, c1)
                pts.append((-c0 // g, c1 // g))
    return pts


def everywhere_locally_soluble(F: FormTuple, max_level: int = 6) -> SolubilityVerdict:
    """Decide X_F(R) != {} and X_F(Q_p) != {} for all p, up to the search depth."""
    for t in _cheap_fibres(F):
        if fibre_soluble_q(F, *t):
            return SolubilityVerdict(Status.SOLUBLE, {"global_fibre": list(t)})
    real = real_points_exist(F)
    if real.status is Status.INSOLUBLE:
        return real
    try:
        primes = _bad_primes(F)
    except FactorizationError as exc:
        return SolubilityVerdict(Status.UNKNOWN, {"reason": str(exc)})
    local: dict[str, Any] = {}
    unknown = []
    for p in primes:
        v = qp_points_exist(F, p, max_level)
        if v.status is Status.INSOLUBLE:
            return v
        if v.status is Status.UNKNOWN:
            unknown.append(p)
        local[str(p)] = v.certificate
    cert = {"real": real.certificate, "primes": local, "good_reduction_above": 2 * F.product.degree}
    if unknown:
        return SolubilityVerdict(Status.UNKNOWN, {**cert, "unknown_primes": unknown})
    return SolubilityVerdict(Status.SOLUBLE, cert)
