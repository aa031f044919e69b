import random
from decimal import Decimal
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mpf

from mertens_enum import evaluator as ev, zeros
from mertens_enum.enumeration import EnumCandidate
from mertens_enum.evaluator import IntervalValue
from mertens_enum.mertens import CandidateY
from mertens_enum.zeros import Mode, WeightedZero, ZeroDataset, ZetaZero
from oracles import plain_sum


def synthetic_ds(mode, triples):
    """Synthetic zeros; values are padded to 30 decimal places (data is read as +-1 ulp)."""
    from decimal import Context
    ctx = Context(prec=80)
    q = Decimal(10) ** -30
    ws = []
    k = Decimal(zeros.DAMPING[Mode(mode)])
    for g, a, p in triples:
        z = ZetaZero(*(ctx.quantize(Decimal(x), q) for x in (g, a, p)), 30)
        ws.append(WeightedZero(z, zeros.alpha_star(z, k), k))
    return ZeroDataset(Mode(mode), tuple(ws), None)


def iv(lo, hi):
    return IntervalValue(mpf(lo), mpf(hi), 128)


def test_empty_dataset():
    v = ev.eval_h(Fraction(12345), synthetic_ds("hp", []))
    assert v.lo == v.hi == 0
    assert ev.eval_qN(5, synthetic_ds("qn", []), 0).hi == 0


def test_single_zero_cosine_zero():
    ds = synthetic_ds("hp", [("1000", "1", "0.5")])
    v = ev.eval_h(Fraction(1, 2000), ds)  # gamma*y - psi = 0
    with mpmath.workprec(200):
        assert v.contains(2 * mpmath.exp(mpf("-1.5")))
    assert v.width < mpf(2) ** -30


def test_qn_all_cosines_one():
    trip = [("14.1", "0.25", "0"), ("21.0", "0.125", "0"), ("25.0", "0.0625", "0")]
    v = ev.eval_qN(0, synthetic_ds("qn", trip), 3)
    assert v.contains(mpf("0.875"))
    assert ev.eval_qN(0, synthetic_ds("qn", trip), 2).contains(mpf("0.75"))


def test_mode_mismatch():
    with pytest.raises(ValueError):
        ev.eval_h(1, synthetic_ds("qn", [("14.1", "0.25", "0")]))
    with pytest.raises(ValueError):
        ev.eval_h(-1, synthetic_ds("hp", [("14.1", "0.25", "0")]))


def test_precision_error_names_zero():
    z = ZetaZero(Decimal("14.134725"), Decimal("0.0891"), Decimal("1.69"), 3)  # few digits only
    ds = ZeroDataset(Mode.HP, (WeightedZero(z, zeros.alpha_star(z, "1.5e-6"), Decimal("1.5e-6")),), None)
    with pytest.raises(ev.EvaluationPrecisionError, match="gamma=14.134725"):
        ev.eval_h(Fraction(10**20), ds)


@pytest.fixture(scope="module")
def first50(first2000):
    return zeros.weight_dataset(first2000[:50], "qn")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**30), st.integers(0, 10**6))
def test_qn_matches_plain_oracle(first50, whole, frac):
    y = Fraction(whole) + Fraction(frac, 10**6)
    v = ev.eval_qN(y, first50, 50)
    trip = [(str(z.base.gamma), str(z.base.alpha), str(z.base.psi)) for z in first50.zeros]
    ref = plain_sum(ev.fraction_to_decimal(y), trip, 0)
    with mpmath.workprec(300):
        slack = v.width + mpf(10) ** -60
        assert v.lo - slack <= ref <= v.hi + slack


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**25), st.sampled_from(["hp", "hstr"]))
def test_damped_matches_plain_oracle(first2000, whole, mode):
    ds = zeros.weight_dataset(first2000[:100], mode, 237)
    y = Fraction(whole) + Fraction(1, 7)
    v = ev.eval_h(y, ds, tail_tol=0.0)
    trip = [(str(z.base.gamma), str(z.base.alpha), str(z.base.psi)) for z in ds.zeros]
    ref = plain_sum(ev.fraction_to_decimal(y, 60), trip, zeros.DAMPING[Mode(mode)])
    with mpmath.workprec(300):
        slack = v.width + mpf(10) ** -45
        assert v.lo - slack <= ref <= v.hi + slack


_SMALL = {}


def _small(first2000):
    if "ds" not in _SMALL:
        _SMALL["ds"] = zeros.weight_dataset(first2000[:10], "qn")
    return _SMALL["ds"]


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 10**20), st.sampled_from([64, 96, 128]))
def test_precision_doubling_nests(first2000, yi, p):
    ds = _small(first2000)
    y = Fraction(yi, 3)
    a = ev.eval_qN(y, ds, 10, p)
    b = ev.eval_qN(y, ds, 10, 2 * p)
    assert a.lo <= b.lo and b.hi <= a.hi


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 10**22))
def test_truncation_consistency(first50, n, extra, yi):
    m = min(50, n + extra)
    y = Fraction(yi, 11)
    a = ev.eval_qN(y, first50, n)
    b = ev.eval_qN(y, first50, m)
    with mpmath.workprec(200):
        tail = 2 * mpmath.fsum(mpf(str(z.base.alpha)) for z in first50.zeros[n:m])
        assert a.lo - b.hi <= tail and b.lo - a.hi <= tail


def test_eval_qn_by_height(first50):
    y = Fraction(10**12 + 3, 8)
    by_h = ev.eval_qN(y, first50, 30, by="height")
    below = sum(1 for z in first50.zeros if z.base.gamma < 30)
    assert below == 3
    trip = [(str(z.base.gamma), str(z.base.alpha), str(z.base.psi)) for z in first50.zeros if z.base.gamma < 30]
    ref = plain_sum(ev.fraction_to_decimal(y), trip, 0)
    with mpmath.workprec(300):
        assert by_h.lo - by_h.width <= ref <= by_h.hi + by_h.width


# bounds ---------------------------------------------------------------------

def test_straddling_threshold_is_no_hit():
    rep = ev.to_bound(Fraction(10**10), iv("-1.0000001", "-0.9999"), Mode.HSTR)
    assert not rep.hit
    rep = ev.to_bound(Fraction(10**10), iv("0.99", "1.01"), Mode.HP)
    assert not rep.hit


def test_hp_record_bound_arithmetic():
    y = ev.to_fraction("2316046459031032843375257.362502")
    rep = ev.to_bound(y, iv("-1.0121", "-1.0119"), Mode.HP)
    assert rep.hit and rep.in_range
    assert mpmath.nstr(rep.bound_simple, 4) == "2.316e+24"


def test_hstr_record_hit_bound():
    y = ev.to_fraction("19571878850562201959.215107")
    rep = ev.to_bound(y, iv("-1.0071", "-1.0069"), Mode.HSTR)
    assert rep.hit
    assert mpmath.nstr(rep.bound_simple, 3) == "1.96e+19"
    assert mpmath.nstr(rep.bound_refined, 3) == "1.96e+19"
    assert rep.bound_widened <= rep.bound_refined
    assert rep.widened_correction_log10 is not None


def test_synthetic_sqrt_arithmetic():
    # y + sqrt(y) on a 3.21e64-sized input, to four significant digits
    rep = ev.to_bound(Fraction(321 * 10**62), iv("1.1", "1.2"), Mode.HP)
    assert mpmath.nstr(rep.bound_simple, 4) == "3.21e+64"
    with mpmath.workprec(300):
        Y = mpf(321) * mpf(10) ** 62
        assert abs(rep.bound_simple - (Y + mpmath.sqrt(Y))) < 1
        assert abs(rep.bound_refined - (Y + 2 * mpmath.sqrt(mpf("1.5e-6") * Y))) < 1


def test_qn_reports_no_bound():
    rep = ev.to_bound(Fraction(10**10), iv("1.5", "1.6"), Mode.QN)
    assert rep.bound_simple is None and rep.bound_refined is None and not rep.in_range


def test_out_of_range_y():
    rep = ev.to_bound(Fraction(100), iv("1.5", "1.6"), Mode.HP)  # 100 < e^7
    assert rep.hit and not rep.in_range and rep.bound_simple is None


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-7, 0.5), st.floats(0, 0.5), st.integers(1200, 10**20))
def test_widened_bound_monotone(excess, more, yi):
    a = ev.to_bound(Fraction(yi), iv(-(1 + excess) - 1e-12, -(1 + excess)), Mode.HSTR)
    b = ev.to_bound(Fraction(yi), iv(-(1 + excess + more) - 1e-12, -(1 + excess + more)), Mode.HSTR)
    if a.bound_widened is not None:
        assert b.bound_widened is not None and b.bound_widened <= a.bound_widened


def test_report_json_is_strings():
    rep = ev.to_bound(ev.to_fraction("19571878850562201959.215107"), iv("-1.0071", "-1.0069"), Mode.HSTR)
    js = rep.to_json()
    assert js["y"] == "19571878850562201959.215107"
    for k in ("h_lo", "h_hi", "bound_simple", "bound_refined", "bound_widened", "widened_correction_log10"):
        assert isinstance(js[k], str)


def test_fraction_decimal_roundtrip():
    for s in ["0", "12.5", "-3.000244140625", "19571878850562201959.215107"]:
        assert ev.fraction_to_decimal(ev.to_fraction(s)) == s.rstrip("0").rstrip(".") if "." in s else s


# correlation ------------------------------------------------------------------

def test_correlation_two_candidates(first2000):
    ds = zeros.weight_dataset(first2000[:20], "hp", 78)
    trip = []
    for i, y in enumerate([Fraction(10**6), Fraction(10**6 + 1)]):
        h = ev.eval_h(y, ds)
        trip.append((EnumCandidate((), 10 + i, ()), CandidateY(0, y, 0, 10 + i, (0, 0)), h))
    rep = ev.correlation_report(trip, list(ds.zeros[:5]))
    assert len(rep.rows) == 2
    assert abs(rep.rank_corr_partial) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ev.correlation_report(trip[:1], list(ds.zeros[:5]))


def test_correlation_csv(tmp_path, first2000):
    ds = zeros.weight_dataset(first2000[:20], "hp", 78)
    trip = [(EnumCandidate((), d, ()), CandidateY(0, Fraction(y), 0, d, (0, 0)), ev.eval_h(Fraction(y), ds))
            for d, y in [(5, 3000), (3, 4000), (9, 5000)]]
    ev.correlation_report(trip, list(ds.zeros[:5])).write_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "dist_sq,partial_sum,h_lo,h_hi" and len(lines) == 4
