import csv
import io
import json
import math
import random

import pytest
from oracles import divisor_sum_direct

from conicbundle.experiments import (
    EnsembleConfig,
    RunReport,
    box_points,
    count_S_F,
    count_soluble_fibres,
    draw_separable,
    hasse_experiment,
    l2_experiment,
    randomness_law_experiment,
)
from conicbundle.forms import FormTuple, Shape, fibre_soluble_q, is_separable, sample_tuple
from conicbundle.hilbert import analytic_symbol, delta_rand

LINEAR = FormTuple.from_coeffs([[[0, 1]], [[1, 0]], []])  # Phi = (t1, t2)


def _delta_direct(a, b):
    return divisor_sum_direct(a, b, lambda s: True)


def test_box_points():
    pts = list(box_points(3, 0.1))
    assert len(pts) == len(set(pts))
    assert all(1 <= abs(a) <= 3 and 1 <= abs(b) <= 3 and math.gcd(a, b) == 1 for a, b in pts)
    assert len(pts) == 4 * 7  # 7 coprime pairs in [1, 3]^2, four sign patterns
    assert (0, 1) in list(box_points(3, 0.0))


def test_count_S_F_by_hand():
    expected = 0
    for n1 in range(-3, 4):
        for n2 in range(-3, 4):
            if n1 and n2 and math.gcd(n1, n2) == 1:
                expected += _delta_direct(n1, n2)
    assert count_S_F(LINEAR, 3, 0.1) == expected
    assert expected > 0


def test_count_S_F_order_free():
    F = FormTuple.from_coeffs([[[1, 2]], [[-3, 1]], [[1, 1]]])
    pts = list(box_points(9, 0.2))
    random.Random(1).shuffle(pts)
    p1, p2 = F.phi
    assert count_S_F(F, 9, 0.2) == sum(_delta_direct(p1(*n), p2(*n)) if p1(*n) and p2(*n) else 1 for n in pts)


def test_count_S_F_rejects_small_x():
    with pytest.raises(ValueError):
        count_S_F(LINEAR, 0.5, 0.1)


def test_count_soluble_fibres_small():
    # height 1: (1 : 0) and (0 : 1) are degenerate, (1 : 1) and (-1 : 1) have 1 as a coefficient
    assert count_soluble_fibres(LINEAR, 1) == 4
    # (-1, -1) fails over R, but the other lift of (1 : 1) is soluble
    assert not fibre_soluble_q(LINEAR, -1, -1)


def test_count_soluble_fibres_monotone():
    F = sample_tuple(Shape.parse("1,1,0:1,1"), 30, 5)
    counts = [count_soluble_fibres(F, x) for x in range(1, 9)]
    assert counts == sorted(counts)


def test_count_soluble_fibres_matches_direct():
    F = FormTuple.from_coeffs([[[2, 3]], [[-5, 1]], []])
    X = 6
    seen = set()
    for n1 in range(-X, X + 1):
        for n2 in range(-X, X + 1):
            if math.gcd(n1, n2) == 1 and fibre_soluble_q(F, n1, n2):
                seen.add((n1, n2) if (n2, n1) > (0, 0) else (-n1, -n2))
    assert count_soluble_fibres(F, X) == len(seen)


def test_S_F_positive_implies_soluble_fibre():
    for k in range(30):
        F = sample_tuple(Shape.parse("1,1,0:1,1"), 20, 900 + k)
        if is_separable(F) and count_S_F(F, 6, 0.2) > 0:
            assert count_soluble_fibres(F, 6) > 0


def test_config_defaults_and_round_trip():
    cfg = EnsembleConfig("1,1,0:1,1", H=200, N=3, seed=4, x=8, prime_cutoff=20)
    d = cfg.to_dict()
    assert d["shape"] == "1,1,0:1,1" and d["x_eff"] == 8.0
    assert EnsembleConfig.from_dict(d) == cfg
    with pytest.raises(ValueError):
        EnsembleConfig("1,1,0:1,1", H=0)
    assert EnsembleConfig("1,1,0:1,1", H=10**6).x_eff >= 5


def test_draw_separable_deterministic():
    cfg = EnsembleConfig("1,1,0:1,1", H=2, N=10, seed=123)
    a, ra = draw_separable(cfg)
    b, rb = draw_separable(cfg)
    assert a == b and ra == rb
    assert len(a) == 10 and all(is_separable(F) for _, F in a)
    assert [k for k, _ in a] == sorted(k for k, _ in a)


def _small_cfg(**kw):
    base = dict(shape="1,1,0:1,1", H=200, N=4, seed=20261014, x=6, prime_cutoff=7, grid_n=64)
    base.update(kw)
    return EnsembleConfig(**base)


def test_l2_single_tuple_recomputable():
    from conicbundle.densities import singular_series

    cfg = _small_cfg(N=1)
    rep = l2_experiment(cfg)
    (rec,) = rep.records
    F = FormTuple.from_json({"coeffs": rec["coeffs"]})
    assert count_S_F(F, cfg.x_eff, cfg.gamma_eff) == rec["S_F"]
    prof = singular_series(F, cfg.prime_cutoff_eff, cfg.gamma_eff, cfg.tol, cfg.grid_n)
    assert prof.sing.to_list() == rec["sing"]
    assert rec["deviation"] == pytest.approx((rec["S_F"] - prof.sing.mid * 36) ** 2 / 6**4)
    assert rep.aggregate["mean_deviation"] == rec["deviation"]
    assert rep.exit_code == 0


def test_reports_byte_identical():
    a, b = hasse_experiment(_small_cfg()), hasse_experiment(_small_cfg())
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()
    assert "wall_time" not in a.to_json()
    rows = list(csv.reader(io.StringIO(a.to_csv())))
    assert rows[0][0] == "schema_version" and len(rows) == 1 + 4
    assert a.to_csv().endswith("\r\n")


def test_timings_on_request():
    rep = hasse_experiment(_small_cfg(N=1, record_timings=True))
    obj = json.loads(rep.to_json())
    assert "timings" in obj and "wall_time" in obj["records"][0]


def test_failure_exit_code():
    rep = RunReport("l2", {}, [{"id": 0, "error": "boom"}], {}, failures=1)
    assert rep.exit_code == 2


def test_report_write(tmp_path):
    rep = hasse_experiment(_small_cfg(N=2))
    rep.write(str(tmp_path / "r.json"))
    rep.write(str(tmp_path / "r.csv"))
    assert (tmp_path / "r.json").read_text() == rep.to_json()
    assert (tmp_path / "r.csv").read_bytes() == rep.to_csv().encode()


def test_randlaw_small_box_direct():
    z = 2.5
    total = sum(delta_rand(t1 * t3, t2 * t3, z) for t1 in range(1, 5) for t2 in range(1, 4) for t3 in range(1, 3))
    assert randomness_law_experiment(4, 3, 2, z) == abs(total) / 24


def test_randlaw_full_range():
    # z beyond every conductor: delta_rand = -eps_inf * delta
    total = 0
    for t1 in range(1, 7):
        for t2 in range(1, 7):
            for t3 in range(1, 7):
                a, b = t1 * t3, -(t2 * t3)
                total -= analytic_symbol(a, b, None) * _delta_direct(a, b)
    assert randomness_law_experiment(6, 6, 6, 10**4, (1, -1)) == pytest.approx(abs(total) / 216)


def test_randlaw_guards():
    with pytest.raises(ValueError):
        randomness_law_experiment(2, 2, 2, 1, (2, 1))
    with pytest.raises(ValueError):
        randomness_law_experiment(10**3, 10**3, 10**3, 1)
