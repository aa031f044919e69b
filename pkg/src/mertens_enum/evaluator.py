"""Certified evaluation of the weighted zero sums and counterexample bounds.

    h(y)   = 2 sum_i alpha_i exp(-k gamma_i^2) cos(gamma_i y - psi_i)   (hp, hstr)
    q_N(y) = 2 sum_i alpha_i cos(gamma_i y - psi_i)                      (first N zeros)

Each datum is enclosed as +-1 unit in its last printed digit and the sum is
evaluated in mpmath interval arithmetic, so the returned interval contains the
sum for every value consistent with the data. Zeros whose combined weight is
below a tolerance are replaced by the rigorous enclosure [-S, S] of their sum.
"""
from __future__ import annotations

import csv
import math
import weakref
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

import mpmath
from mpmath import iv, mp, mpf
from scipy.stats import spearmanr

from ._iv import decimal_ball, exact, iv_precision
from .zeros import DAMPING, Mode, ZeroDataset

HP_THRESHOLD_EXCESS = "exp(-40)"
HSTR_THRESHOLD_EXCESS = Decimal("6e-8")
K_DAMPING = {Mode.HP: Decimal(DAMPING[Mode.HP]), Mode.HSTR: Decimal(DAMPING[Mode.HSTR])}
Y_MIN_LOG, Y_MAX_LOG = 7, 50000  # y must lie in [e^7, e^50000]


class EvaluationPrecisionError(ValueError):
    pass


@dataclass(frozen=True)
class IntervalValue:
    lo: mpf
    hi: mpf
    precision_bits: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty interval")

    @property
    def mid(self) -> mpf:
        return (self.lo + self.hi) / 2

    @property
    def width(self) -> mpf:
        return self.hi - self.lo

    @property
    def abs_lo(self) -> mpf:
        """Smallest |value| over the interval."""
        if self.lo <= 0 <= self.hi:
            return mpf(0)
        return min(abs(self.lo), abs(self.hi))

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def intersects(self, lo, hi) -> bool:
        return self.lo <= hi and lo <= self.hi


def to_fraction(y) -> Fraction:
    if isinstance(y, Fraction):
        return y
    if isinstance(y, (int, Decimal)):
        return Fraction(y)
    if isinstance(y, float):
        return Fraction(y)
    return Fraction(Decimal(str(y)))


def fraction_to_decimal(fr: Fraction, max_digits: int = 80) -> str:
    """Exact decimal string when the expansion terminates, else ``max_digits`` places."""
    fr = Fraction(fr)
    sign = "-" if fr < 0 else ""
    fr = abs(fr)
    whole, rem = divmod(fr.numerator, fr.denominator)
    digits = []
    while rem and len(digits) < max_digits:
        rem *= 10
        d, rem = divmod(rem, fr.denominator)
        digits.append(str(d))
    return sign + str(whole) + ("." + "".join(digits) if digits else "")


# per-dataset cache of interval term data, keyed by (prec, damped)
_TERMS: "weakref.WeakKeyDictionary[ZeroDataset, dict]" = weakref.WeakKeyDictionary()


def _terms(dataset: ZeroDataset, prec: int, damped: bool):
    cache = _TERMS.setdefault(dataset, {})
    key = (prec, damped)
    if key not in cache:
        with iv_precision(prec):
            out = []
            for z in dataset.zeros:
                g = decimal_ball(z.base.gamma)
                w = 2 * decimal_ball(z.base.alpha)
                if damped and z.damping_k:
                    w = w * iv.exp(-exact(z.damping_k) * g * g)
                out.append((g, decimal_ball(z.base.psi), w))
            # suffix[j] bounds sum_{i >= j} |w_i| from above
            suffix = [iv.mpf(0)] * (len(out) + 1)
            for j in range(len(out) - 1, -1, -1):
                suffix[j] = suffix[j + 1] + iv.mpf(out[j][2].b)
        cache[key] = (out, [mp.make_mpf(s._mpi_[1]) for s in suffix])
    return cache[key]


def _bits_of(y: Fraction) -> int:
    return max(1, abs(y.numerator).bit_length() - y.denominator.bit_length() + 1)


def _evaluate(y: Fraction, dataset: ZeroDataset, count: int, damped: bool, precision_bits: int,
              tail_tol: float | None):
    if count == 0:
        return IntervalValue(mpf(0), mpf(0), precision_bits)
    gmax = max(float(z.base.gamma) for z in dataset.zeros[:count])
    work = precision_bits + _bits_of(y) + int(math.log2(gmax)) + 1 + 64
    work = -(-work // 64) * 64
    target_width = mpmath.ldexp(1, -precision_bits // 4)
    for attempt in range(2):
        terms, suffix = _terms(dataset, work, damped)
        with iv_precision(work):
            Y = exact(y)
            s = iv.mpf(0)
            truncate = tail_tol is not None and count == len(terms)
            for j in range(count):
                if truncate and suffix[j] <= tail_tol:
                    s += iv.mpf([-suffix[j], suffix[j]])
                    break
                g, ps, w = terms[j]
                s += w * iv.cos(g * Y - ps)
            val = IntervalValue(mp.make_mpf(s._mpi_[0]), mp.make_mpf(s._mpi_[1]), precision_bits)
        if val.width <= target_width:
            return val
        work *= 2
    worst = max(range(count), key=lambda j: float(terms[j][2].b) *
                (float(terms[j][0].delta) * float(abs(y)) + float(terms[j][1].delta)))
    z = dataset.zeros[worst]
    raise EvaluationPrecisionError(
        f"interval width {mpmath.nstr(val.width, 5)} exceeds 2^-{precision_bits // 4}; "
        f"zero gamma={z.base.gamma} ({z.base.precision_digits} digits) limits y={fraction_to_decimal(y, 10)}")


def eval_h(y, dataset: ZeroDataset, precision_bits: int = 128, tail_tol: float | None = None) -> IntervalValue:
    """Enclosure of h_P(y) (hp dataset) or h_StR(y) (hstr dataset)."""
    if dataset.mode not in (Mode.HP, Mode.HSTR):
        raise ValueError(f"eval_h needs an hp or hstr dataset, got {dataset.mode.value}")
    y = to_fraction(y)
    if y < 0:
        raise ValueError("y must be non-negative")
    if tail_tol is None:
        tail_tol = 2.0 ** (-precision_bits // 4) / 8
    return _evaluate(y, dataset, len(dataset), True, precision_bits, tail_tol)


def eval_qN(y, dataset: ZeroDataset, N: int, precision_bits: int = 128, by: str = "count") -> IntervalValue:
    """Enclosure of q_N(y): undamped sum over the N heaviest zeros, or gamma < N with by="height"."""
    y = to_fraction(y)
    if by == "height":
        sub = ZeroDataset(dataset.mode, tuple(z for z in dataset.zeros if z.base.gamma < N), N)
        return _evaluate(y, sub, len(sub), False, precision_bits, None)
    if not 0 <= N <= len(dataset):
        raise ValueError(f"N={N} outside 0..{len(dataset)}")
    return _evaluate(y, dataset, N, False, precision_bits, None)


def threshold(mode: Mode) -> IntervalValue:
    mode = Mode(mode)
    with iv_precision(128):
        if mode is Mode.HP:
            t = 1 + iv.exp(-40)
        else:
            t = 1 + exact(HSTR_THRESHOLD_EXCESS)
    return IntervalValue(mp.make_mpf(t._mpi_[0]), mp.make_mpf(t._mpi_[1]), 128)


@dataclass(frozen=True)
class CandidateReport:
    y: Fraction
    h_value: IntervalValue
    mode: Mode
    hit: bool
    bound_simple: mpf | None  # exponent: y + sqrt(y)
    bound_refined: mpf | None  # exponent: y + 2 sqrt(k y)
    bound_widened: mpf | None = None  # refined exponent after the alpha-widening correction
    widened_correction_log10: float | None = None  # log10 of 0.99 alpha exp(y/2 + sqrt(k y))
    in_range: bool = True

    def to_json(self) -> dict:
        def s(x, n=30):
            return None if x is None else mpmath.nstr(x, n, strip_zeros=False)

        return {
            "y": fraction_to_decimal(self.y),
            "mode": self.mode.value,
            "h_lo": s(self.h_value.lo, 40),
            "h_hi": s(self.h_value.hi, 40),
            "precision_bits": self.h_value.precision_bits,
            "hit": self.hit,
            "in_range": self.in_range,
            "bound_simple": s(self.bound_simple, 25),
            "bound_refined": s(self.bound_refined, 25),
            "bound_widened": s(self.bound_widened, 25),
            "widened_correction_log10": (None if self.widened_correction_log10 is None
                                         else f"{self.widened_correction_log10:.12g}"),
        }


def to_bound(y, h: IntervalValue, mode: Mode) -> CandidateReport:
    """Turn a certified |h(y)| > threshold into bounds on the least counterexample.

    The least counterexample x satisfies x < exp(bound_*) when ``hit`` is set.
    QN values never produce a bound.
    """
    mode = Mode(mode)
    y = to_fraction(y)
    if mode is Mode.QN:
        with iv_precision(128):
            hit = h.abs_lo > 1
        return CandidateReport(y, h, mode, bool(hit), None, None, in_range=False)
    thr = threshold(mode)
    hit = bool(h.abs_lo > thr.hi)
    prec = max(128, _bits_of(y) + 64)
    with mp.workprec(prec):
        Y = mpf(y.numerator) / y.denominator
        in_range = Y > 0 and Y >= mpmath.exp(Y_MIN_LOG) and mpmath.log(Y) <= Y_MAX_LOG
        if not in_range:
            return CandidateReport(y, h, mode, hit, None, None, in_range=False)
        k = mpf(str(K_DAMPING[mode]))
        simple = Y + mpmath.sqrt(Y)
        refined = Y + 2 * mpmath.sqrt(k * Y)
        widened = corr = None
        excess = h.abs_lo - (1 + mpf(str(HSTR_THRESHOLD_EXCESS)) if mode is Mode.HSTR else thr.hi)
        if hit and excess > 0:
            b = Y / 2 + mpmath.sqrt(k * Y)
            # exp(refined) - 0.99 a exp(b) = exp(refined + log1p(-0.99 a exp(b - refined)))
            widened = refined + mpmath.log1p(-mpf("0.99") * excess * mpmath.exp(b - refined))
            corr = float(mpmath.log10(mpf("0.99") * excess) + b / mpmath.log(10))
    return CandidateReport(y, h, mode, hit, simple, refined, widened, corr, True)


@dataclass
class CorrelationReport:
    rows: list[dict]
    rank_corr_partial: float
    rank_corr_dist: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["dist_sq", "partial_sum", "h_lo", "h_hi"])
            for r in self.rows:
                w.writerow([r["dist_sq"], r["partial_sum"], r["h_lo"], r["h_hi"]])


def partial_sum(y, zeros) -> mpf:
    """2 sum alpha*_i cos(gamma_i y - psi_i) over the given (lattice) zeros, midpoint data."""
    y = to_fraction(y)
    gmax = max(float(z.base.gamma) for z in zeros)
    with mp.workprec(_bits_of(y) + int(math.log2(gmax)) + 96):
        Y = mpf(y.numerator) / y.denominator
        return 2 * mpmath.fsum(z.alpha_star * mpmath.cos(mpf(str(z.base.gamma)) * Y - mpf(str(z.base.psi)))
                               for z in zeros)


def correlation_report(candidates, zeros) -> CorrelationReport:
    """Rows (dist_sq, partial sum over lattice zeros, full h interval) plus rank correlations.

    ``candidates`` holds (EnumCandidate, CandidateY, IntervalValue) triples.
    """
    if len(candidates) < 2:
        raise ValueError("need at least two candidates")
    rows = []
    for cand, cy, h in candidates:
        ps = partial_sum(cy.y, zeros)
        rows.append({"dist_sq": int(cand.dist_sq), "partial_sum": mpmath.nstr(ps, 20),
                     "h_lo": mpmath.nstr(h.lo, 20), "h_hi": mpmath.nstr(h.hi, 20),
                     "_ps": float(ps), "_h": float(h.mid)})
    ps = [r.pop("_ps") for r in rows]
    hv = [r.pop("_h") for r in rows]
    dist = [float(r["dist_sq"]) for r in rows]
    rho_p = float(spearmanr(ps, hv).statistic)
    rho_d = float(spearmanr(dist, [abs(v) for v in hv]).statistic)
    return CorrelationReport(rows, rho_p, rho_d)
