"""Exact integer primitives: valuations, Kronecker symbols, factorization."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache

__all__ = [
    "Factorization",
    "FactorizationError",
    "valuation",
    "unit_part",
    "kronecker",
    "legendre",
    "is_probable_prime",
    "factor",
    "prime_divisors",
    "primes_up_to",
    "squarefree_part",
    "MAX_FACTOR_BITS",
]

TRIAL_BOUND = 10**6
MAX_FACTOR_BITS = 256
MR_ROUNDS = 64
RHO_BUDGET = 1 << 26


class FactorizationError(ArithmeticError):
    """Raised when an integer is too large or resists the rho budget."""


@dataclass(frozen=True)
class Factorization:
    value: int
    sign: int
    factors: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    def reconstruct(self) -> int:
        out = self.sign
        for p, e in self.factors:
            out *= p**e
        return out


def _check_nonzero(n: int) -> None:
    if n == 0:
        raise ValueError("valuation of 0 is infinite; callers must special-case zero")


def valuation(n: int, p: int) -> int:
    """Largest e with p**e dividing n."""
    _check_nonzero(n)
    if p < 2:
        raise ValueError(f"not a prime: {p}")
    n = abs(n)
    if p == 2:
        return (n & -n).bit_length() - 1
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


def unit_part(n: int, p: int) -> int:
    """n / p**v_p(n), sign preserved."""
    _check_nonzero(n)
    if p == 2:
        return n >> valuation(n, 2)
    while n % p == 0:
        n //= p
    return n


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n), extending the Jacobi symbol to all n."""
    if n == 0:
        return 1 if abs(a) == 1 else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    # factor out powers of two from n
    v = (n & -n).bit_length() - 1
    if v:
        if a % 2 == 0:
            return 0
        n >>= v
        if v % 2 == 1 and a % 8 in (3, 5):
            result = -result
    # now n odd positive: Jacobi symbol
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def legendre(a: int, p: int) -> int:
    """Legendre symbol for an odd prime p."""
    r = pow(a % p, (p - 1) // 2, p)
    return -1 if r == p - 1 else r


@lru_cache(maxsize=None)
def primes_up_to(n: int) -> tuple[int, ...]:
    if n < 2:
        return ()
    sieve = bytearray([1]) * (n + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(n) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(range(i * i, n + 1, i)))
    return tuple(i for i, flag in enumerate(sieve) if flag)


_SMALL_PRIMES = primes_up_to(1000)


def is_probable_prime(n: int, rounds: int = MR_ROUNDS) -> bool:
    """Miller-Rabin with `rounds` bases drawn from an RNG seeded by n.

    Error probability below 4**-rounds; the witness set depends only on n so
    repeated calls agree.
    """
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    if n < 1_000_000:
        return True
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    rng = random.Random(n)
    # the first 12 prime bases make the test deterministic below 3.3e24
    bases = list(_SMALL_PRIMES[:12])
    bases += [rng.randrange(2, n - 1) for _ in range(max(0, rounds - len(bases)))]
    for a in bases:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_brent(n: int, seed: int, budget: int) -> int:
    rng = random.Random(seed)
    y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
    g = r = q = 1
    steps = 0
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = math.gcd(q, n)
            k += m
        r *= 2
        steps += r
        if steps > budget:
            raise FactorizationError(f"rho budget exhausted on {n}")
    if g == n:
        while True:
            ys = (ys * ys + c) % n
            g = math.gcd(abs(x - ys), n)
            if g > 1:
                break
    return g


def _split(n: int, out: dict[int, int], budget: int) -> None:
    if n == 1:
        return
    if is_probable_prime(n):
        out[n] = out.get(n, 0) + 1
        return
    r = math.isqrt(n)
    if r * r == n:
        _split(r, out, budget)
        _split(r, out, budget)
        return
    for seed in range(8):
        d = _pollard_brent(n, seed, budget)
        if d != n:
            _split(d, out, budget)
            _split(n // d, out, budget)
            return
    raise FactorizationError(f"could not split {n}")


@lru_cache(maxsize=1 << 18)
def _factor_abs(n: int, budget: int) -> tuple[tuple[int, int], ...]:
    out: dict[int, int] = {}
    for p in primes_up_to(TRIAL_BOUND):
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out[p] = e
        # once the cofactor is prime, the rest of the trial range is wasted work
        if p == 997 and n > 1 and is_probable_prime(n):
            break
    if n > 1:
        _split(n, out, budget)
    return tuple(sorted(out.items()))


def factor(n: int, max_bits: int = MAX_FACTOR_BITS, budget: int = RHO_BUDGET) -> Factorization:
    """Factor a nonzero integer: trial division to 10**6, then Pollard-Brent rho."""
    _check_nonzero(n)
    if abs(n).bit_length() > max_bits:
        raise FactorizationError(f"|n| exceeds {max_bits} bits")
    return Factorization(n, 1 if n > 0 else -1, _factor_abs(abs(n), budget))


def prime_divisors(n: int) -> tuple[int, ...]:
    return factor(n).primes()


def squarefree_part(n: int) -> int:
    """Signed squarefree kernel: n = squarefree_part(n) * k**2."""
    f = factor(n)
    out = f.sign
    for p, e in f.factors:
        if e % 2:
            out *= p
    return out
