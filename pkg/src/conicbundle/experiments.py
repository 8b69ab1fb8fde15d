"""Fibre counts and the ensemble experiments built on them.

Reports are deterministic: tuple k of a run is drawn from
``default_rng(seed ^ k)``, records are written in index order, JSON uses
sorted keys, and wall-clock timings are only included on request.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Callable

from .densities import default_gamma, singular_series
from .forms import (
    FormTuple,
    Shape,
    Status,
    everywhere_locally_soluble,
    fibre_soluble_q,
    is_separable,
    sample_tuple,
)
from .hilbert import delta_rand, detector

__all__ = [
    "SCHEMA_VERSION",
    "EnsembleConfig",
    "RunReport",
    "box_points",
    "count_S_F",
    "count_soluble_fibres",
    "draw_separable",
    "l2_experiment",
    "hasse_experiment",
    "randomness_law_experiment",
]

SCHEMA_VERSION = "1"
RANDLAW_MAX_POINTS = 10**8


@lru_cache(maxsize=1 << 20)
def _delta(a: int, b: int) -> int:
    return detector(a, b).delta


def box_points(x: float, gamma: float):
    """Primitive n in Z^2 with gamma*x <= |n_i| <= x for both coordinates."""
    X = int(math.floor(x))
    lo = gamma * x
    vals = [v for v in range(-X, X + 1) if abs(v) >= lo]
    for n1 in vals:
        for n2 in vals:
            if math.gcd(n1, n2) == 1:
                yield n1, n2


def count_S_F(F: FormTuple, x: float, gamma: float) -> int:
    """S_F(x): sum of delta(Phi_1(n), Phi_2(n)) over the primitive points of the punctured box."""
    if x < 1:
        raise ValueError("x must be >= 1")
    phi1, phi2 = F.phi
    return sum(_delta(phi1(*n), phi2(*n)) for n in box_points(x, gamma))


def count_soluble_fibres(F: FormTuple, x: float) -> int:
    """Points (n1 : n2) of height <= x whose fibre has a rational point.

    One representative per projective point (n2 > 0, or n = (1, 0)).  When a
    Phi_i has odd degree the conics over n and -n differ by a sign, so the
    point counts if either lift is soluble.
    """
    X = int(math.floor(x))
    total = 0
    for n2 in range(0, X + 1):
        for n1 in range(-X, X + 1):
            if n2 == 0 and n1 != 1:
                continue
            if math.gcd(n1, n2) != 1:
                continue
            if fibre_soluble_q(F, n1, n2) or fibre_soluble_q(F, -n1, -n2):
                total += 1
    return total


@dataclass
class EnsembleConfig:
    shape: Shape
    H: int
    N: int = 100
    seed: int = 0
    x: float | None = None
    z: float | None = None
    prime_cutoff: float | None = None
    gamma: float | None = None
    tol: float = 1e-3
    grid_n: int = 256
    max_level: int = 6
    record_timings: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.shape, str):
            self.shape = Shape.parse(self.shape)
        if self.N < 1 or self.H < 1:
            raise ValueError("N and H must be positive")
        if self.x is not None and self.x < 1:
            raise ValueError("x must be >= 1")

    @property
    def x_eff(self) -> float:
        if self.x is not None:
            return float(self.x)
        return max(5.0, self.H ** (1.0 / (100 * self.shape.total_degree)))

    @property
    def z_eff(self) -> float:
        return float(self.z) if self.z is not None else max(2.0, self.H**0.1)

    @property
    def prime_cutoff_eff(self) -> float:
        if self.prime_cutoff is not None:
            return float(self.prime_cutoff)
        return max(math.sqrt(math.log(self.H)) if self.H > 1 else 0.0, 20.0)

    @property
    def gamma_eff(self) -> float:
        return float(self.gamma) if self.gamma is not None else default_gamma(self.H)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["shape"] = str(self.shape)
        d.update(x_eff=self.x_eff, z_eff=self.z_eff, prime_cutoff_eff=self.prime_cutoff_eff,
                 gamma_eff=self.gamma_eff)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EnsembleConfig":
        keep = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**keep)


@dataclass
class RunReport:
    kind: str
    config: dict[str, Any]
    records: list[dict[str, Any]]
    aggregate: dict[str, Any]
    rejections: int = 0
    failures: int = 0
    schema_version: str = SCHEMA_VERSION
    timings: dict[str, float] | None = field(default=None)

    @property
    def exit_code(self) -> int:
        return 2 if self.failures else 0

    def to_json(self) -> str:
        obj = asdict(self)
        if obj["timings"] is None:
            del obj["timings"]
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        """Per-tuple records as RFC 4180 CSV, with a schema_version column."""
        cols = sorted({k for r in self.records for k in r})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["schema_version", *cols])
        for r in self.records:
            row = []
            for c in cols:
                v = r.get(c, "")
                row.append(json.dumps(v, sort_keys=True) if isinstance(v, (list, dict)) else v)
            w.writerow([self.schema_version, *row])
        return buf.getvalue()

    def write(self, path: str) -> None:
        text = self.to_csv() if path.endswith(".csv") else self.to_json()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def draw_separable(cfg: EnsembleConfig):
    """The first N separable draws as (index, tuple) pairs, and the number of rejected draws."""
    accepted, k = [], 0
    while len(accepted) < cfg.N:
        F = sample_tuple(cfg.shape, cfg.H, cfg.seed ^ k)
        if is_separable(F):
            accepted.append((k, F))
        k += 1
        if k > 1000 * cfg.N:
            raise RuntimeError("separable tuples too rare for this shape and height")
    return accepted, k - len(accepted)


def _run(kind: str, cfg: EnsembleConfig, per_tuple: Callable[[FormTuple], dict[str, Any]],
         aggregate: Callable[[list[dict[str, Any]]], dict[str, Any]]) -> RunReport:
    t0 = time.perf_counter()
    tuples, rejections = draw_separable(cfg)
    records, failures = [], 0
    for k, F in tuples:
        rec: dict[str, Any] = {"id": k, "coeffs": F.to_json_obj()["coeffs"]}
        start = time.perf_counter()
        try:
            rec.update(per_tuple(F))
        except Exception as exc:  # recorded, never fatal for the run
            rec["error"] = f"{type(exc).__name__}: {exc}"
            failures += 1
        if cfg.record_timings:
            rec["wall_time"] = time.perf_counter() - start
        records.append(rec)
    ok = [r for r in records if "error" not in r]
    agg = aggregate(ok)
    agg.update(n_records=len(records), n_ok=len(ok))
    timings = {"total": time.perf_counter() - t0} if cfg.record_timings else None
    return RunReport(kind, cfg.to_dict(), records, agg, rejections, failures, timings=timings)


def l2_experiment(cfg: EnsembleConfig) -> RunReport:
    """Normalised squared deviation |S_F(x) - Sing(F) x^2|^2 / x^4 per tuple, and its mean."""
    x, gamma, P = cfg.x_eff, cfg.gamma_eff, cfg.prime_cutoff_eff

    def one(F: FormTuple) -> dict[str, Any]:
        s = count_S_F(F, x, gamma)
        prof = singular_series(F, P, gamma, cfg.tol, cfg.grid_n)
        main = prof.sing.mid * x * x
        return {
            "S_F": s,
            "sing": prof.sing.to_list(),
            "x2_sing": [prof.sing.lo * x * x, prof.sing.hi * x * x],
            "deviation": (s - main) ** 2 / x**4,
        }

    def agg(rs):
        devs = [r["deviation"] for r in rs]
        return {
            "mean_deviation": statistics.fmean(devs) if devs else None,
            "median_deviation": statistics.median(devs) if devs else None,
        }

    return _run("l2", cfg, one, agg)


def hasse_experiment(cfg: EnsembleConfig) -> RunReport:
    """ELS verdict and soluble-fibre search up to height x for each tuple."""
    x, gamma = cfg.x_eff, cfg.gamma_eff

    def one(F: FormTuple) -> dict[str, Any]:
        v = everywhere_locally_soluble(F, cfg.max_level)
        count = count_soluble_fibres(F, x)
        return {
            "els": v.status.value,
            "soluble_fibres": count,
            "S_F": count_S_F(F, x, gamma),
        }

    def agg(rs):
        els = [r for r in rs if r["els"] == Status.SOLUBLE.value]
        succ = [r for r in els if r["soluble_fibres"] > 0]
        return {
            "els_fraction": len(els) / len(rs) if rs else None,
            "unknown_rate": sum(r["els"] == Status.UNKNOWN.value for r in rs) / len(rs) if rs else None,
            "success_fraction": len(succ) / len(els) if els else None,
            "chain_violations": sum(1 for r in rs if r["S_F"] > 0 and r["soluble_fibres"] == 0),
        }

    return _run("hasse", cfg, one, agg)


def randomness_law_experiment(x1: float, x2: float, x3: float, z: float,
                              signs: tuple[int, int] = (1, 1)) -> float:
    """|sum_{1 <= t_i <= x_i} delta_rand(s1 t1 t3, s2 t2 t3, z)| / (x1 x2 x3)."""
    X1, X2, X3 = (int(math.floor(v)) for v in (x1, x2, x3))
    if X1 * X2 * X3 > RANDLAW_MAX_POINTS:
        raise ValueError("box exceeds the enumeration guard")
    s1, s2 = signs
    if s1 not in (1, -1) or s2 not in (1, -1):
        raise ValueError("signs must be +1 or -1")
    cache: dict[tuple[int, int], int] = {}
    total = 0
    for t3 in range(1, X3 + 1):
        for t1 in range(1, X1 + 1):
            a = s1 * t1 * t3
            for t2 in range(1, X2 + 1):
                key = (a, s2 * t2 * t3)
                v = cache.get(key)
                if v is None:
                    v = cache[key] = delta_rand(key[0], key[1], z)
                total += v
    return abs(total) / (x1 * x2 * x3)
