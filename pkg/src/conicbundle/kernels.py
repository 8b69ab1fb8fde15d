"""Heat kernels on the circle, the Jacobi theta transformation, and discrepancy functionals.

``K_H(alpha) = sum_n exp(-pi n^2 / H^2) e^{i n alpha}``, equivalently, by
Poisson summation, ``H * sum_m exp(-pi H^2 (alpha/2pi - m)^2)``.  The second
(Gaussian) form converges in a handful of terms for every H >= 1 and is the
one used for evaluation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import erfc

__all__ = [
    "HeatKernel",
    "kernel_value",
    "kernel_value_fourier",
    "kernel_fourier",
    "tail_mass",
    "tail_bound",
    "theta",
    "theta_transform_residual",
    "DiscrepancyQuery",
    "DiscrepancyBudgetError",
    "discrepancy",
]

# exp(-pi r^2) below 1e-17 for r >= 3.55; both series drop terms with that margin
_TAIL_EXP = 40.0


@dataclass(frozen=True)
class HeatKernel:
    H: float

    def __post_init__(self) -> None:
        if not self.H >= 1:
            raise ValueError("heat kernel needs H >= 1")

    def __call__(self, alpha: float) -> float:
        return kernel_value(self, alpha)


def _reduce(alpha: float) -> float:
    """alpha / 2pi reduced to (-1/2, 1/2]."""
    x = alpha / (2 * math.pi)
    x -= math.floor(x + 0.5)
    return x


def kernel_value(k: HeatKernel, alpha: float) -> float:
    """K_H(alpha) via the Gaussian side.

    Terms with |x - m| >= r satisfy exp(-pi H^2 (x-m)^2) <= exp(-pi H^2 r^2);
    r is chosen so that bound is e^-40 and, summed geometrically, the dropped
    part is below 1e-15 of the m = 0 term's lower bound exp(-pi H^2 / 4).
    """
    H = k.H
    x = _reduce(alpha)
    r = math.sqrt((_TAIL_EXP + math.pi * H * H / 4) / (math.pi * H * H))
    M = int(math.ceil(r)) + 1
    total = 0.0
    for m in range(-M, M + 1):
        total += math.exp(-math.pi * H * H * (x - m) ** 2)
    return H * total


def kernel_value_fourier(k: HeatKernel, alpha: float) -> float:
    """K_H(alpha) from the Fourier series; only a cross-check of kernel_value."""
    H = k.H
    N = int(math.ceil(H * math.sqrt(_TAIL_EXP / math.pi))) + 1
    n = np.arange(1, N + 1, dtype=float)
    return 1.0 + 2.0 * float(np.sum(np.exp(-math.pi * n * n / (H * H)) * np.cos(n * alpha)))


def kernel_fourier(k: HeatKernel, n: int) -> float:
    """Fourier coefficient exp(-pi n^2 / H^2)."""
    return math.exp(-math.pi * n * n / (k.H * k.H))


def tail_mass(k: HeatKernel, delta: float) -> float:
    """Integral of K_H over delta < |alpha| <= pi.

    Each Gaussian term integrates to a difference of complementary error
    functions; taking erfc of the positive side keeps tiny tails accurate.
    """
    if not 0 < delta < math.pi:
        raise ValueError("delta must lie in (0, pi)")
    H = k.H
    c = math.sqrt(math.pi) * H
    r = math.sqrt(_TAIL_EXP / math.pi) / H
    M = int(math.ceil(r)) + 1
    total = 0.0
    # by symmetry the integral over (delta, pi] is doubled
    for m in range(-M, M + 1):
        a = c * (delta / (2 * math.pi) - m)
        b = c * (0.5 - m)
        if a >= 0:
            total += erfc(a) - erfc(b)
        else:
            total += erfc(-b) - erfc(-a)
    return max(0.0, float(2 * math.pi * total))


def tail_bound(k: HeatKernel, delta: float, constant: float = 10.0) -> float:
    """constant / (delta H exp((delta H)^2 / 4 pi)), the super-exponential tail envelope."""
    dh = delta * k.H
    # in log form so that huge exponents underflow to 0 instead of overflowing
    return math.exp(math.log(constant) - math.log(dh) - dh * dh / (4 * math.pi))


def theta(z, tau, dps: int = 50):
    """Jacobi theta sum_n exp(pi i n^2 tau + 2 pi i n z) in mpmath at ``dps`` digits.

    Term magnitudes are exp(-pi Im(tau) (n + c)^2 + pi Im(z)^2 / Im(tau)) with
    c = Im(z)/Im(tau); the sum runs over |n + c| <= R with the dropped
    gaussian tail below 10**-(dps + 5) of the peak.
    """
    with mpmath.workdps(dps):
        z, tau = mpmath.mpc(z), mpmath.mpc(tau)
        t = tau.imag
        if t <= 0:
            raise ValueError("theta needs Im(tau) > 0")
        c = z.imag / t
        R = mpmath.sqrt(((dps + 5) * mpmath.log(10)) / (mpmath.pi * t)) + 2
        lo, hi = int(mpmath.floor(-c - R)), int(mpmath.ceil(-c + R))
        s = mpmath.mpc(0)
        ipi = mpmath.mpc(0, 1) * mpmath.pi
        for n in range(lo, hi + 1):
            s += mpmath.exp(ipi * n * n * tau + 2 * ipi * n * z)
        return s


def theta_transform_residual(z: complex, tau: complex, dps: int = 50) -> float:
    """|theta(z/tau; -1/tau) - e^{-pi i/4} tau^{1/2} e^{pi i z^2/tau} theta(z; tau)|.

    tau^{1/2} is the principal root, which lies in the first quadrant for Im tau > 0.
    """
    if complex(tau).imag <= 0:
        raise ValueError("theta_transform_residual needs Im(tau) > 0")
    with mpmath.workdps(dps):
        z, tau = mpmath.mpc(z), mpmath.mpc(tau)
        i = mpmath.mpc(0, 1)
        lhs = theta(z / tau, -1 / tau, dps)
        rhs = mpmath.exp(-i * mpmath.pi / 4) * mpmath.sqrt(tau) * mpmath.exp(i * mpmath.pi * z * z / tau)
        rhs *= theta(z, tau, dps)
        return float(abs(lhs - rhs))


# --- discrepancy -------------------------------------------------------------

MAX_BOX_POINTS = 10**7
MAX_DIM = 3
MAX_MODULUS = 100


class DiscrepancyBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class DiscrepancyQuery:
    """Box bounds x_k, moduli q_k and the phase mode ("progressions" or "exponential")."""

    x: tuple[float, ...]
    q: tuple[int, ...]
    mode: str = "progressions"

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "q", tuple(int(v) for v in self.q))
        if not 1 <= len(self.x) <= MAX_DIM or len(self.q) != len(self.x):
            raise DiscrepancyBudgetError(f"need 1 <= m <= {MAX_DIM} with matching moduli")
        if any(v <= 0 for v in self.x) or any(v == 0 for v in self.q):
            raise ValueError("bounds must be positive and moduli nonzero")
        if self.mode not in ("progressions", "exponential"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if math.prod(2 * math.floor(v) + 1 for v in self.x) > MAX_BOX_POINTS:
            raise DiscrepancyBudgetError("box exceeds the enumeration budget")
        if self.mode == "exponential" and any(abs(v) > MAX_MODULUS for v in self.q):
            raise DiscrepancyBudgetError(f"|q_k| must be <= {MAX_MODULUS} for phase enumeration")

    @property
    def m(self) -> int:
        return len(self.x)


def _box_values(f: Callable[[tuple[int, ...]], complex], bounds: Sequence[int]) -> np.ndarray:
    axes = [range(-b, b + 1) for b in bounds]
    vals = np.array([complex(f(t)) for t in itertools.product(*axes)], dtype=complex)
    return vals.reshape([2 * b + 1 for b in bounds])


def _max_prefix(g: np.ndarray) -> float:
    s = g
    for ax in range(g.ndim):
        s = np.cumsum(s, axis=ax)
    return float(np.max(np.abs(s)))


def discrepancy(f: Callable[[tuple[int, ...]], complex], query: DiscrepancyQuery) -> float:
    """sup over prefix boxes [-x, v] of |sum f|, maximised over residue classes or phases.

    The prefix sum is a step function of v, so integer v_k suffice.
    """
    bounds = [int(math.floor(v)) for v in query.x]
    vals = _box_values(f, bounds)
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in bounds], indexing="ij")
    qs = [abs(v) for v in query.q]
    best = 0.0
    if query.mode == "progressions":
        res = [g % q for g, q in zip(grids, qs)]
        for r in itertools.product(*[range(q) for q in qs]):
            mask = np.ones(vals.shape, dtype=bool)
            for rk, rr in zip(res, r):
                mask &= rk == rr
            best = max(best, _max_prefix(np.where(mask, vals, 0)))
    else:
        for b in itertools.product(*[range(q) for q in qs]):
            phase = np.zeros(vals.shape)
            for bk, g, q in zip(b, grids, query.q):
                phase = phase + bk * g / q
            best = max(best, _max_prefix(vals * np.exp(2j * np.pi * phase)))
    return best
