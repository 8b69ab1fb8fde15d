"""Certified enclosures of the local densities omega_v(F) and their product.

``omega_p`` integrates ``1 + (Phi_1(t), Phi_2(t))'_p`` over primitive
``t in Z_p^2`` (normalised by the mass ``1 - p**-2`` of that set) with exact
rational arithmetic on residue classes.  ``omega_inf`` integrates
``1 + (Phi_1(t), Phi_2(t))'_inf`` over the punctured box
``gamma <= |t_i| <= 1`` using outward-rounded interval arithmetic on a grid.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .arith import primes_up_to
from .forms import BinaryForm, FormTuple, class_values, residue_charts
from .hilbert import analytic_symbol

__all__ = [
    "Interval",
    "DensityBudgetError",
    "DensityProfile",
    "omega_p",
    "omega_inf",
    "singular_series",
    "default_gamma",
]

_INF = math.inf


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with outward-rounded arithmetic."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @classmethod
    def from_fractions(cls, lo: Fraction, hi: Fraction) -> "Interval":
        a, b = float(lo), float(hi)
        if Fraction(a) > lo:
            a = _down(a)
        if Fraction(b) < hi:
            b = _up(b)
        return cls(a, b)

    @property
    def width(self) -> float:
        return _up(self.hi - self.lo)

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def __contains__(self, x: float) -> bool:
        return self.contains(x)

    def subset_of(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(_down(self.lo + other.lo), _up(self.hi + other.hi))

    def __mul__(self, other: "Interval | float") -> "Interval":
        if not isinstance(other, Interval):
            other = Interval.point(float(other))
        pairs = [(self.lo, other.lo), (self.lo, other.hi), (self.hi, other.lo), (self.hi, other.hi)]
        # a product with an exact zero factor needs no rounding
        lo = min(0.0 if a == 0 or b == 0 else _down(a * b) for a, b in pairs)
        hi = max(0.0 if a == 0 or b == 0 else _up(a * b) for a, b in pairs)
        return Interval(lo, hi)

    __rmul__ = __mul__

    def to_list(self) -> list[float]:
        return [self.lo, self.hi]

    def __str__(self) -> str:
        return f"[{self.lo:.12g}, {self.hi:.12g}]"


class DensityBudgetError(RuntimeError):
    """Refinement budget exhausted; ``best`` holds the enclosure reached so far."""

    def __init__(self, message: str, best: Interval):
        super().__init__(message)
        self.best = best


def omega_p(F: FormTuple, p: int, tol: float = 1e-3, max_classes: int = 2_000_000) -> Interval:
    """Enclosure of omega_p(F) of width <= tol.

    Undetermined classes are refined heaviest first, so a smaller tol
    continues the same refinement and returns a nested enclosure.
    """
    phi1, phi2 = F.phi
    charts = residue_charts(p, phi1.degree, phi2.degree)
    norm = 1 - Fraction(1, p * p)
    determined = Fraction(0)
    undetermined = Fraction(0)
    heap: list[tuple[Fraction, int, int, int]] = []  # (-mass, chart, level, residue)
    for ci, ch in enumerate(charts):
        heap.append((-ch.weight, ci, 0, 0))
        undetermined += ch.weight
    heapq.heapify(heap)
    tol_q = Fraction(tol)
    processed = 0

    def enclosure() -> Interval:
        return Interval.from_fractions(determined / norm, (determined + 2 * undetermined) / norm)

    # width of the enclosure is 2 * undetermined / norm
    while heap and 2 * undetermined > tol_q * norm:
        neg_mass, ci, level, u0 = heapq.heappop(heap)
        mass = -neg_mass
        undetermined -= mass
        child_mass = mass / p
        step = p**level
        ch = charts[ci]
        for k in range(p):
            u = u0 + k * step
            vals = class_values(phi1, phi2, p, ch, u, level + 1)
            if vals is None:
                heapq.heappush(heap, (-child_mass, ci, level + 1, u))
                undetermined += child_mass
            else:
                determined += child_mass * (1 + analytic_symbol(vals[0], vals[1], p))
        processed += p
        if processed > max_classes:
            raise DensityBudgetError(f"omega_{p}: class budget {max_classes} exhausted", enclosure())
    return enclosure()


def default_gamma(H: float) -> float:
    """gamma = 1 / log L with L = sqrt(log H), clamped to [0.01, 0.5]."""
    if H <= math.e:
        return 0.5
    L = math.sqrt(math.log(H))
    if L <= 1:
        return 0.5
    return min(0.5, max(0.01, 1.0 / math.log(L)))


# --- vectorised interval arithmetic for omega_inf ------------------------------

def _imul(alo, ahi, blo, bhi):
    p1, p2, p3, p4 = alo * blo, alo * bhi, ahi * blo, ahi * bhi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return np.nextafter(lo, -_INF), np.nextafter(hi, _INF)


def _ipowers(lo, hi, n):
    """Interval enclosures of x**k for k = 0..n (even powers respect x = 0)."""
    out = [(np.ones_like(lo), np.ones_like(hi))]
    for k in range(1, n + 1):
        plo, phi = _imul(out[-1][0], out[-1][1], lo, hi)
        if k % 2 == 0:
            # x**k >= 0 and |x|**k is monotone: tighter and still sound
            plo = np.maximum(plo, 0.0)
            zero_in = (lo <= 0) & (hi >= 0)
            plo = np.where(zero_in, 0.0, plo)
        out.append((plo, phi))
    return out


def _form_enclosure(form: BinaryForm, xp, yp):
    d = form.degree
    lo = np.zeros_like(xp[0][0])
    hi = np.zeros_like(xp[0][0])
    for j, c in enumerate(form.coeffs):
        if c == 0:
            continue
        mlo, mhi = _imul(xp[j][0], xp[j][1], yp[d - j][0], yp[d - j][1])
        c = float(c)
        a, b = c * mlo, c * mhi
        tlo, thi = np.nextafter(np.minimum(a, b), -_INF), np.nextafter(np.maximum(a, b), _INF)
        lo = np.nextafter(lo + tlo, -_INF)
        hi = np.nextafter(hi + thi, _INF)
    return lo, hi


def _phi_enclosures(F: FormTuple, xlo, xhi, ylo, yhi):
    maxd = max(f.degree for g in F.forms for f in g)
    xp, yp = _ipowers(xlo, xhi, maxd), _ipowers(ylo, yhi, maxd)
    enc = {}
    for i in (1, 2, 3):
        for j, f in enumerate(F.forms[i - 1]):
            enc[(i, j)] = _form_enclosure(f, xp, yp)

    def product(groups):
        lo, hi = np.ones_like(xlo), np.ones_like(xlo)
        for i in groups:
            for j in range(len(F.forms[i - 1])):
                lo, hi = _imul(lo, hi, *enc[(i, j)])
        return lo, hi

    return product((1, 3)), product((2, 3))


def _axis_cells(gamma: float, n_half: int):
    e = np.linspace(gamma, 1.0, n_half + 1)
    lo = np.concatenate([-e[::-1][:-1], e[:-1]])
    hi = np.concatenate([-e[::-1][1:], e[1:]])
    # widen by an ulp so the float cells cover the exact ones
    return np.nextafter(lo, -_INF), np.nextafter(hi, _INF)


def omega_inf(F: FormTuple, gamma: float, grid_n: int = 256) -> Interval:
    """Enclosure of the integral of 1 + (Phi_1, Phi_2)'_inf over gamma <= |t_i| <= 1.

    ``grid_n`` cells per coordinate (half on each side of zero).
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if grid_n < 2 or grid_n % 2:
        raise ValueError("grid_n must be a positive even integer")
    n_half = grid_n // 2
    clo, chi = _axis_cells(gamma, n_half)
    xlo, ylo = np.meshgrid(clo, clo, indexing="ij")
    xhi, yhi = np.meshgrid(chi, chi, indexing="ij")
    (a_lo, a_hi), (b_lo, b_hi) = _phi_enclosures(F, xlo.ravel(), xhi.ravel(), ylo.ravel(), yhi.ravel())
    both_neg = (a_hi < 0) & (b_hi < 0)
    some_pos = (a_lo >= 0) | (b_lo >= 0)
    n_pos = int(np.count_nonzero(some_pos))
    n_unsure = a_lo.size - n_pos - int(np.count_nonzero(both_neg))
    # exact cell side is (1 - gamma) / n_half
    side = Interval(_down(_down(1.0 - gamma) / n_half), _up(_up(1.0 - gamma) / n_half))
    area = side * side
    lo = 2.0 * area.lo * n_pos
    hi = 2.0 * area.hi * (n_pos + n_unsure)
    return Interval(_down(lo) if n_pos else 0.0, _up(hi) if n_pos + n_unsure else 0.0)


_SIX_OVER_PI2 = Interval(_down(6 / math.pi**2), _up(6 / math.pi**2))


@dataclass
class DensityProfile:
    omega_inf: Interval
    omega_p: dict[int, Interval]
    sing: Interval
    prime_cutoff: float
    gamma: float
    omitted: list[int] | None = None
    notes: list[str] = field(default_factory=list)

    def to_json_obj(self) -> dict[str, Any]:
        obj = {
            "omega_inf": self.omega_inf.to_list(),
            "omega_p": {str(p): iv.to_list() for p, iv in sorted(self.omega_p.items())},
            "sing": self.sing.to_list(),
            "prime_cutoff": self.prime_cutoff,
            "gamma": self.gamma,
        }
        if self.omitted is not None:
            obj["omitted_primes"] = self.omitted
        if self.notes:
            obj["notes"] = self.notes
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def singular_series(
    F: FormTuple,
    prime_cutoff: float,
    gamma: float,
    tol: float = 1e-3,
    grid_n: int = 256,
    report_omitted_up_to: int | None = None,
) -> DensityProfile:
    """Enclosure of (6 / pi^2) * omega_inf * prod_{p <= P} omega_p.

    With ``report_omitted_up_to`` set, primes in (P, bound] whose density is
    not exactly 1 are listed; omitting them is the truncation error.
    """
    oinf = omega_inf(F, gamma, grid_n)
    per_prime: dict[int, Interval] = {}
    notes = []
    total = _SIX_OVER_PI2 * oinf
    for p in primes_up_to(int(math.floor(prime_cutoff))):
        try:
            iv = omega_p(F, p, tol)
        except DensityBudgetError as exc:
            iv = exc.best
            notes.append(f"omega_{p} budget exhausted; width {iv.width:.3g}")
        per_prime[p] = iv
        total = total * iv
    omitted = None
    if report_omitted_up_to is not None:
        omitted = []
        for p in primes_up_to(report_omitted_up_to):
            if p <= prime_cutoff:
                continue
            try:
                iv = omega_p(F, p, tol)
            except DensityBudgetError as exc:
                iv = exc.best
            if not (iv.lo == 1.0 and iv.hi == 1.0):
                omitted.append(p)
    # clamp the lower end at zero: densities are nonnegative
    total = Interval(max(0.0, total.lo), max(0.0, total.hi))
    return DensityProfile(oinf, per_prime, total, prime_cutoff, gamma, omitted, notes)

