"""Command line entry point: ``conicbundle <subcommand> ...``.

Exit codes: 0 success, 2 when some tuples of an ensemble run failed, 1 on
configuration errors (bad flags, unreadable input).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import Any, Sequence

from .densities import DensityBudgetError, omega_inf, omega_p, singular_series
from .experiments import (
    EnsembleConfig,
    count_S_F,
    count_soluble_fibres,
    hasse_experiment,
    l2_experiment,
    randomness_law_experiment,
)
from .forms import FormTuple
from .hilbert import Place, analytic_symbol, detector, hilbert_classical
from .kernels import (
    HeatKernel,
    kernel_fourier,
    kernel_value,
    kernel_value_fourier,
    tail_bound,
    tail_mass,
    theta_transform_residual,
)

log = logging.getLogger("conicbundle")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse's default exit status 2 is reserved here
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(obj: Any) -> None:
    print(json.dumps(obj, sort_keys=True))


def _read_form(path: str) -> FormTuple:
    try:
        text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
        return FormTuple.from_json(text)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read form tuple from {path}: {exc}") from exc


def _parse_signs(text: str) -> tuple[int, int]:
    parts = [p.strip() for p in text.split(",")]
    table = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
    if len(parts) != 2 or any(p not in table for p in parts):
        raise ConfigError(f"signs must look like '+,-', got {text!r}")
    return table[parts[0]], table[parts[1]]


def cmd_symbol(a) -> int:
    place = Place.parse(a.place)
    fn = hilbert_classical if a.classical else analytic_symbol
    _emit({"t1": a.t1, "t2": a.t2, "place": str(place), "classical": a.classical,
           "symbol": fn(a.t1, a.t2, place)})
    return 0


def cmd_detector(a) -> int:
    dv = detector(a.t1, a.t2)
    _emit({"t1": a.t1, "t2": a.t2, "delta": dv.delta, "conductor": dv.conductor,
           "per_prime": {str(p): s for p, s in dv.per_prime}, "archimedean": dv.archimedean})
    return 0


def cmd_density(a) -> int:
    F = _read_form(a.form)
    if a.prime.lower() == "inf":
        gamma = a.gamma if a.gamma is not None else 0.5
        iv = omega_inf(F, gamma, a.grid)
        _emit({"place": "inf", "gamma": gamma, "grid_n": a.grid, "omega": iv.to_list()})
        return 0
    p = Place.parse(a.prime).prime
    try:
        iv = omega_p(F, p, a.tol)
    except DensityBudgetError as exc:
        _emit({"place": p, "omega": exc.best.to_list(), "error": str(exc)})
        return 2
    _emit({"place": p, "tol": a.tol, "omega": iv.to_list()})
    return 0


def cmd_sing(a) -> int:
    F = _read_form(a.form)
    prof = singular_series(F, a.cutoff, a.gamma, a.tol, a.grid, a.omitted)
    print(prof.to_json())
    return 2 if prof.notes else 0


def cmd_count(a) -> int:
    F = _read_form(a.form)
    gamma = a.gamma if a.gamma is not None else 0.5
    _emit({"x": a.x, "gamma": gamma, "S_F": count_S_F(F, a.x, gamma),
           "soluble_fibres": count_soluble_fibres(F, a.x)})
    return 0


def _ensemble_config(a) -> EnsembleConfig:
    base: dict[str, Any] = {}
    if a.config:
        try:
            with open(a.config, encoding="utf-8") as fh:
                base = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {a.config}: {exc}") from exc
    flags = {"shape": a.shape, "H": a.H, "x": a.x, "N": a.N, "seed": a.seed, "z": a.z,
             "prime_cutoff": a.cutoff, "gamma": a.gamma, "tol": a.tol,
             "max_level": a.max_level, "record_timings": a.timings or None}
    base.update({k: v for k, v in flags.items() if v is not None})
    if "shape" not in base or "H" not in base:
        raise ConfigError("--shape and --H are required (flag or config file)")
    try:
        return EnsembleConfig.from_dict(base)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _finish_run(report, out: str | None) -> int:
    if out:
        report.write(out)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(report.to_json())
    print(json.dumps(report.aggregate, sort_keys=True), file=sys.stderr)
    return report.exit_code


def cmd_l2(a) -> int:
    return _finish_run(l2_experiment(_ensemble_config(a)), a.out)


def cmd_hasse(a) -> int:
    return _finish_run(hasse_experiment(_ensemble_config(a)), a.out)


def cmd_randlaw(a) -> int:
    signs = _parse_signs(a.signs)
    value = randomness_law_experiment(a.x1, a.x2, a.x3, a.z, signs)
    _emit({"x": [a.x1, a.x2, a.x3], "z": a.z, "signs": list(signs), "value": value})
    return 0


def cmd_kernel_check(a) -> int:
    import random

    k = HeatKernel(a.H)
    rng = random.Random(a.seed)
    alphas = [rng.uniform(-math.pi, math.pi) for _ in range(100)]
    dual = max(abs(kernel_value(k, t) - kernel_value_fourier(k, t)) for t in alphas)
    tails = {}
    for d in (0.2, 0.5, 1.0):
        t = tail_mass(k, d)
        tails[str(d)] = {"tail": t, "ratio": t / tail_bound(k, d, 1.0)}
    _emit({
        "H": a.H,
        "fourier_0": kernel_fourier(k, 0),
        "fourier_H_minus_exp_pi": abs(kernel_fourier(k, round(a.H)) - math.exp(-math.pi))
        if float(a.H).is_integer() else None,
        "dual_max_error": dual,
        "theta_residual": theta_transform_residual(0.3, 0.01j),
        "tails": tails,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conicbundle", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("symbol", help="analytic (or classical) Hilbert symbol")
    s.add_argument("t1", type=int)
    s.add_argument("t2", type=int)
    s.add_argument("--place", default="inf", help="prime or 'inf'")
    s.add_argument("--classical", action="store_true")
    s.set_defaults(fn=cmd_symbol)

    s = sub.add_parser("detector", help="delta(t1, t2) and the conductor")
    s.add_argument("t1", type=int)
    s.add_argument("t2", type=int)
    s.set_defaults(fn=cmd_detector)

    s = sub.add_parser("density", help="enclosure of omega_p or omega_inf")
    s.add_argument("--form", required=True, help="form tuple JSON file, '-' for stdin")
    s.add_argument("--prime", required=True, help="prime or 'inf'")
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--gamma", type=float)
    s.add_argument("--grid", type=int, default=256)
    s.set_defaults(fn=cmd_density)

    s = sub.add_parser("sing", help="truncated singular series")
    s.add_argument("--form", required=True)
    s.add_argument("--cutoff", type=float, default=20.0)
    s.add_argument("--gamma", type=float, default=0.5)
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--grid", type=int, default=256)
    s.add_argument("--omitted", type=int, help="list primes up to this bound with omega_p != 1")
    s.set_defaults(fn=cmd_sing)

    s = sub.add_parser("count", help="S_F(x) and the number of soluble fibres of height <= x")
    s.add_argument("--form", required=True)
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--gamma", type=float)
    s.set_defaults(fn=cmd_count)

    for name, fn, help_ in (("l2", cmd_l2, "mean squared deviation from the singular series"),
                            ("hasse", cmd_hasse, "ELS verdicts and soluble fibre search")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON file with EnsembleConfig fields; flags override it")
        s.add_argument("--shape", help="e.g. '1,1,0:1,1' (multiplicities:degrees)")
        s.add_argument("--H", type=int)
        s.add_argument("--x", type=float)
        s.add_argument("--N", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--z", type=float)
        s.add_argument("--cutoff", type=float)
        s.add_argument("--gamma", type=float)
        s.add_argument("--tol", type=float)
        s.add_argument("--max-level", dest="max_level", type=int)
        s.add_argument("--timings", action="store_true", help="add wall times (breaks byte-identity)")
        s.add_argument("--out", help="output file; .csv for CSV, otherwise JSON")
        s.set_defaults(fn=fn)

    s = sub.add_parser("randlaw", help="normalised random-part sum over a box")
    s.add_argument("--x1", type=float, required=True)
    s.add_argument("--x2", type=float, required=True)
    s.add_argument("--x3", type=float, required=True)
    s.add_argument("--z", type=float, required=True)
    s.add_argument("--signs", default="+,+")
    s.set_defaults(fn=cmd_randlaw)

    s = sub.add_parser("kernel-check", help="heat-kernel identities for one H")
    s.add_argument("--H", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_kernel_check)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"conicbundle: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"conicbundle: invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
