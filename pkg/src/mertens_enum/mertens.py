"""The unbalanced lattice for weighted zeta-zero phase approximation.

Row 0 carries the scaled heights ``floor(sqrt(a*_i) gamma_i 2^nu_y)`` and
``2^nu_t``; rows 1..N are the diagonal moduli ``floor(sqrt(a*_i) 2 pi 2^nu)``.
A lattice point u = x * row0 + sum p_i row_i close to the target
``floor(sqrt(a*_i) psi_i 2^nu)`` gives y = x 2^(nu_y - nu) with every
gamma_i y close to psi_i modulo 2 pi.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

import mpmath
from mpmath import iv, mp, mpf

from ._iv import exact, floor_if_determined, iv_precision
from .enumeration import EnumCandidate, EnumTarget
from .lattice import LatticeBasis
from .zeros import Mode, WeightedZero


class InsufficientPrecisionError(ValueError):
    pass


class Sign(str, enum.Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"


@dataclass(frozen=True)
class MertensParams:
    N: int
    nu: int
    nu_y: int
    nu_t: int
    radius_scale: float = 1.0
    mode: Mode = Mode.HP
    sign: Sign = Sign.POSITIVE

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "sign", Sign(self.sign))
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.nu < self.nu_y:
            raise ValueError("need nu >= nu_y")
        if self.nu_t < 0:
            raise ValueError("nu_t must be >= 0")
        if self.radius_scale < 1:
            raise ValueError("radius_scale must be >= 1")


@dataclass(frozen=True)
class PredictedRanges:
    c: float
    entry_range: tuple[float, float]
    y_range: tuple[float, float]


@dataclass(frozen=True)
class MertensInstance:
    basis: LatticeBasis
    target: EnumTarget  # w.r.t. ``basis``
    zeros: tuple[WeightedZero, ...]
    params: MertensParams
    K: mpf
    det: int
    heights: tuple[int, ...] = field(repr=False)  # floor(sqrt(a*) gamma 2^nu_y)
    moduli: tuple[int, ...] = field(repr=False)  # floor(sqrt(a*) 2 pi 2^nu)
    phases: tuple[int, ...] = field(repr=False)  # target entries

    @property
    def target_vector(self) -> tuple[int, ...]:
        return self.target.ambient


@dataclass(frozen=True)
class CandidateY:
    x: int
    y: Fraction
    residual_sq: int
    dist_sq: int
    predicted_range: tuple[float, float]
    residuals: tuple[int, ...] = field(repr=False, default=())


def _required_digits(magnitude_bits: float) -> int:
    return math.ceil((magnitude_bits + 2) / math.log2(10)) + 1


def _entries(z: WeightedZero, p: MertensParams, prec: int):
    with iv_precision(prec):
        g = exact(z.base.gamma)
        sa = iv.sqrt(exact(z.base.alpha) * iv.exp(-exact(z.damping_k) * g * g))
        phase = exact(z.base.psi)
        if p.sign is Sign.NEGATIVE:
            phase = phase + iv.pi
        two_nu = iv.mpf(2) ** p.nu
        return (
            floor_if_determined(sa * g * iv.mpf(2) ** p.nu_y),
            floor_if_determined(sa * 2 * iv.pi * two_nu),
            floor_if_determined(sa * phase * two_nu),
        )


def build_instance(zeros, params: MertensParams) -> MertensInstance:
    """Construct basis, target and radius; floors are certified by interval arithmetic."""
    zeros = tuple(zeros)
    N = params.N
    if len(zeros) != N:
        raise ValueError(f"expected {N} zeros, got {len(zeros)}")
    if any(a.alpha_star < b.alpha_star for a, b in zip(zeros, zeros[1:])):
        raise ValueError("zeros must be sorted by descending alpha_star")
    heights, moduli, phases = [], [], []
    for z in zeros:
        # entries are ~ 2^(nu + log2(2 pi gamma)); the data must resolve them
        mag = max(params.nu + 3, params.nu_y + math.log2(float(z.base.gamma)) + 1)
        if z.base.precision_digits < _required_digits(mag):
            raise InsufficientPrecisionError(
                f"zero gamma={z.base.gamma} carries {z.base.precision_digits} digits; "
                f"{_required_digits(mag)} needed at nu={params.nu}")
        prec = int(mag) + 64
        for _ in range(4):
            a, d, t = _entries(z, params, prec)
            if None not in (a, d, t):
                break
            prec *= 2
        else:
            raise InsufficientPrecisionError(f"cannot certify floors for gamma={z.base.gamma}")
        heights.append(a)
        moduli.append(d)
        phases.append(t)

    rows = [heights + [1 << params.nu_t]]
    for i in range(N):
        rows.append([0] * i + [moduli[i]] + [0] * (N - i))
    basis = LatticeBasis.from_rows(rows)
    ambient = tuple(phases) + (0,)
    # t = 0 * row0 + sum (T_i / P_i) row_i
    coords = (Fraction(0),) + tuple(Fraction(t, d) for t, d in zip(phases, moduli))
    det = 1 << params.nu_t
    for d in moduli:
        det *= d
    inst = MertensInstance(basis, EnumTarget(coords, ambient), zeros, params, mpf(0), det,
                           tuple(heights), tuple(moduli), tuple(phases))
    object.__setattr__(inst, "K", radius(inst))
    return inst


def radius(instance: MertensInstance) -> mpf:
    """K = scale * sqrt((N+1)/(2 pi e)) * det^(1/(N+1))."""
    m = instance.params.N + 1
    with mp.workprec(128):
        root = mpmath.exp(mpmath.log(mpf(instance.det)) / m)
        return mpf(instance.params.radius_scale) * mpmath.sqrt(mpf(m) / (2 * mpmath.pi * mpmath.e)) * root


def balanced_mod(a: int, p: int) -> int:
    """Representative of a mod p in (-p/2, p/2]."""
    r = a % p
    return r - p if 2 * r > p else r


def recover_y(candidate: EnumCandidate, instance: MertensInstance) -> CandidateY:
    p = instance.params
    last = candidate.point[-1]
    x, rem = divmod(last, 1 << p.nu_t)
    if rem:
        raise ValueError("candidate is not a point of this lattice (last entry not a multiple of 2^nu_t)")
    res = tuple(balanced_mod(x * a - t, d)
                for a, t, d in zip(instance.heights, instance.phases, instance.moduli))
    residual_sq = sum(e * e for e in res)
    y = Fraction(x, 1 << (p.nu - p.nu_y))
    return CandidateY(x, y, residual_sq, int(candidate.dist_sq),
                      predict_ranges(p, instance.zeros).y_range, res)


def predict_ranges(params: MertensParams, zeros) -> PredictedRanges:
    """Entry-size and y heuristics from the Gaussian-heuristic radius."""
    N = params.N
    zeros = list(zeros)[:N]
    with mp.workprec(128):
        s = sum(mpmath.log(2 * mpmath.pi * mpmath.sqrt(z.alpha_star), 2) for z in zeros)
        c = float(s / (N + 1) - mpmath.log(2 * mpmath.pi * mpmath.e, 2) / 2)
    shift = (params.nu - params.nu_t) / (N + 1)
    g = params.radius_scale
    e_lo = 2.0 ** (c - shift)
    y_lo = 2.0 ** (c + params.nu_y - params.nu_t - shift)
    return PredictedRanges(c, (e_lo, e_lo * g), (y_lo, y_lo * g))


def instance_manifest(instance: MertensInstance, dataset_sha256: str | None = None) -> dict:
    p = instance.params
    pr = predict_ranges(p, instance.zeros)
    with mp.workprec(128):
        log2_det = float(mpmath.log(mpf(instance.det), 2))
        K = mpmath.nstr(instance.K, 30)
    def dec(x):
        return f"{x:.12g}"

    return {
        "params": {"N": p.N, "nu": p.nu, "nu_y": p.nu_y, "nu_t": p.nu_t,
                   "radius_scale": dec(p.radius_scale), "mode": p.mode.value, "sign": p.sign.value},
        "zero_dataset_sha256": dataset_sha256,
        "zeros_gamma": [str(z.base.gamma) for z in instance.zeros],
        "det": str(instance.det),
        "log2_det": dec(log2_det),
        "K": K,
        "predicted": {"c": dec(pr.c), "entry_range": [dec(x) for x in pr.entry_range],
                      "y_range": [dec(x) for x in pr.y_range]},
    }
