"""Classical and analytic Hilbert symbols, the conic detector and its split.

The analytic symbol ``(t1, t2)'_p`` agrees with the classical Hilbert symbol
except that it is forced to 0 on zero arguments, on pairs whose valuations
are both even (odd p), and at p = 2 on even-even pairs whose unit parts are
incongruent mod 4.  The detector ``delta(t) = prod_p (1 + (t1, t2)'_p)`` is
positive exactly when ``t1 x^2 + t2 y^2 = z^2`` has a rational point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Iterator

from .arith import factor, is_probable_prime, kronecker, unit_part, valuation

__all__ = [
    "Place",
    "INF",
    "DetectorValue",
    "hilbert_classical",
    "analytic_symbol",
    "detector",
    "delta_det",
    "delta_rand",
    "delta_det_flat",
    "symbol_class_sum",
    "reciprocity_tail_sum",
    "constancy_level",
    "active_primes",
]


@dataclass(frozen=True)
class Place:
    """A place of Q: ``prime=None`` is the archimedean place."""

    prime: int | None = None

    def __post_init__(self) -> None:
        if self.prime is not None and not is_probable_prime(self.prime):
            raise ValueError(f"not a prime: {self.prime}")

    @property
    def is_archimedean(self) -> bool:
        return self.prime is None

    @classmethod
    def finite(cls, p: int) -> "Place":
        return cls(p)

    @classmethod
    def parse(cls, text: str) -> "Place":
        if text.lower() in ("inf", "infinity", "oo", "r"):
            return INF
        return cls(int(text))

    def __str__(self) -> str:
        return "inf" if self.prime is None else str(self.prime)


INF = Place(None)


def _as_place(v: Place | int | None) -> Place:
    if isinstance(v, Place):
        return v
    return INF if v is None else Place(v)


def constancy_level(p: int) -> int:
    """Precision of unit parts that fixes the symbol: mod p, or mod 8 at p = 2."""
    return 3 if p == 2 else 1


def _hilbert_at_p(a: int, b: int, p: int) -> int:
    alpha, beta = valuation(a, p), valuation(b, p)
    u, w = unit_part(a, p), unit_part(b, p)
    if p == 2:
        eps_u, eps_w = ((u - 1) // 2) % 2, ((w - 1) // 2) % 2
        om_u, om_w = ((u * u - 1) // 8) % 2, ((w * w - 1) // 8) % 2
        e = eps_u * eps_w + alpha * om_w + beta * om_u
        return -1 if e % 2 else 1
    s = 1
    if alpha * beta % 2 and p % 4 == 3:
        s = -s
    if beta % 2:
        s *= kronecker(u, p)
    if alpha % 2:
        s *= kronecker(w, p)
    return s


def hilbert_classical(a: int, b: int, v: Place | int | None) -> int:
    """Hilbert symbol (a, b)_v in {-1, +1} for nonzero integers a, b."""
    if a == 0 or b == 0:
        raise ValueError("Hilbert symbol needs nonzero arguments")
    v = _as_place(v)
    if v.is_archimedean:
        return -1 if (a < 0 and b < 0) else 1
    return _hilbert_at_p(a, b, v.prime)


def analytic_symbol(t1: int, t2: int, v: Place | int | None) -> int:
    """The zero-average modification (t1, t2)'_v in {-1, 0, +1}."""
    if t1 == 0 or t2 == 0:
        return 0
    v = _as_place(v)
    if v.is_archimedean:
        return hilbert_classical(t1, t2, v)
    p = v.prime
    b1, b2 = valuation(t1, p), valuation(t2, p)
    if b1 % 2 == 0 and b2 % 2 == 0:
        if p != 2:
            return 0
        if (unit_part(t1, 2) - unit_part(t2, 2)) % 4:
            return 0
    return _hilbert_at_p(t1, t2, p)


def active_primes(t1: int, t2: int) -> tuple[int, ...]:
    """Primes dividing 2*t1*t2, the only ones where the analytic symbol can be nonzero."""
    ps = {2}
    ps.update(factor(t1).primes())
    ps.update(factor(t2).primes())
    return tuple(sorted(ps))


@dataclass(frozen=True)
class DetectorValue:
    delta: int
    conductor: int
    per_prime: tuple[tuple[int, int], ...]
    archimedean: int

    @property
    def active(self) -> tuple[tuple[int, int], ...]:
        """(prime, symbol) pairs with a nonzero symbol, i.e. the primes of N_t."""
        return tuple((p, s) for p, s in self.per_prime if s)


def detector(t1: int, t2: int) -> DetectorValue:
    if t1 == 0 or t2 == 0:
        return DetectorValue(1, 1, (), 0)
    per_prime = tuple((p, analytic_symbol(t1, t2, p)) for p in active_primes(t1, t2))
    delta, conductor = 1, 1
    for p, s in per_prime:
        delta *= 1 + s
        if s:
            conductor *= p
    return DetectorValue(delta, conductor, per_prime, hilbert_classical(t1, t2, INF))


def _divisor_terms(active: Iterable[tuple[int, int]]) -> Iterator[tuple[int, int, tuple[int, ...]]]:
    """Yield (s, prod_{p|s} symbol_p, primes of s) over all s dividing N_t."""
    active = tuple(active)
    for k in range(len(active) + 1):
        for combo in combinations(active, k):
            s, sign = 1, 1
            for p, e in combo:
                s *= p
                sign *= e
            yield s, sign, tuple(p for p, _ in combo)


def delta_det(t1: int, t2: int, z: float) -> int:
    """(1 + (t1,t2)'_inf) * sum over squarefree s <= z of prod_{p|s} (t1,t2)'_p."""
    if t1 == 0 or t2 == 0:
        return 1
    dv = detector(t1, t2)
    total = sum(sign for s, sign, _ in _divisor_terms(dv.active) if s <= z)
    return (1 + dv.archimedean) * total


def delta_rand(t1: int, t2: int, z: float) -> int:
    if t1 == 0 or t2 == 0:
        return 0
    return detector(t1, t2).delta - delta_det(t1, t2, z)


def delta_det_flat(t1: int, t2: int, z: float, T: float) -> int:
    """delta_det restricted to s with prod_{p|s} p**max(v_p(t1), v_p(t2)) <= T.

    The weight constraint is vacuous for s = 1, so that term always survives.
    """
    if t1 == 0 or t2 == 0:
        return 1
    dv = detector(t1, t2)
    total = 0
    for s, sign, primes in _divisor_terms(dv.active):
        if s > z:
            continue
        if primes:
            weight = 1
            for p in primes:
                weight *= p ** max(valuation(t1, p), valuation(t2, p))
            if weight > T:
                continue
        total += sign
    return (1 + dv.archimedean) * total


def symbol_class_sum(p: int, beta1: int, beta2: int) -> Fraction:
    """Haar integral of (t1,t2)'_p over v_p(t1) = beta1, v_p(t2) = beta2, exactly.

    The symbol is constant on classes mod p**(beta_i + lambda); each class
    pair carries mass p**-(beta1 + lambda) * p**-(beta2 + lambda).
    """
    lam = constancy_level(p)
    mod1, mod2 = p ** (beta1 + lam), p ** (beta2 + lam)
    reps1 = [p**beta1 * u for u in range(1, p**lam) if u % p]
    reps2 = [p**beta2 * u for u in range(1, p**lam) if u % p]
    total = sum(analytic_symbol(a, b, p) for a in reps1 for b in reps2)
    return Fraction(total, mod1 * mod2)


def reciprocity_tail_sum(t1: int, t2: int, z: float) -> tuple[int, int]:
    """Both sides of the reciprocity symmetry for the truncated divisor sum.

    Returns (sum_{s <= z}, (t1,t2)_R * sum_{s >= N_t/z}), each over squarefree
    s dividing N_t; the two agree by Hilbert reciprocity.
    """
    if t1 == 0 or t2 == 0:
        raise ValueError("reciprocity_tail_sum needs t1*t2 != 0")
    dv = detector(t1, t2)
    n_t = dv.conductor
    terms = list(_divisor_terms(dv.active))
    left = sum(sign for s, sign, _ in terms if s <= z)
    # s >= N_t / z  <=>  s * z >= N_t, kept exact for integer z
    right = sum(sign for s, sign, _ in terms if s * z >= n_t)
    return left, dv.archimedean * right
