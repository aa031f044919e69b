"""Cylinder-pruned lattice point enumeration around a target.

The search is a depth-first traversal of the Schnorr-Euchner tree with the
bounding test ``rho_k <= R^2_{m+1-k}``. Candidates that pass the floating test
are re-verified (exact squared distance, projected norms at doubled GSO
precision) before being yielded.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
from mpmath import mp, mpf

from .lattice import GramSchmidtData, LatticeBasis, exact_gram_schmidt, gram_schmidt, solve_coordinates

log = logging.getLogger(__name__)

# Floating bound tests accept up to this relative excess; exact checks follow.
SLACK = 2.0 ** -30


@dataclass(frozen=True)
class PruningProfile:
    radii_sq: tuple[float, ...]
    base_radius: float
    f_values: tuple[float, ...]

    def __post_init__(self):
        if any(b < a for a, b in zip(self.radii_sq, self.radii_sq[1:])):
            raise ValueError("pruning radii must be non-decreasing")
        if abs(self.f_values[-1] ** 2 - 1.0) > 2.0 ** -20:
            raise ValueError("f(m) must be 1")

    @property
    def dim(self) -> int:
        return len(self.radii_sq)

    @classmethod
    def from_f(cls, f_values, radius: float) -> "PruningProfile":
        f_values = tuple(float(f) for f in f_values)
        r2 = float(radius) ** 2
        return cls(tuple(f * f * r2 for f in f_values), float(radius), f_values)

    def scaled(self, radius: float) -> "PruningProfile":
        return PruningProfile.from_f(self.f_values, radius)


def full_profile(m: int, radius: float) -> PruningProfile:
    """No pruning: f identically 1."""
    return PruningProfile.from_f([1.0] * m, radius)


def beta_mean_plus_two_sigma(i: int, m: int) -> float:
    """min(1, mean + 2 sd) of Beta(i/2, (m-i)/2), the squared norm of a random
    unit vector projected to i dimensions."""
    if i >= m:
        return 1.0
    p = i / m
    var = p * (1.0 - p) / (m / 2 + 1)
    return min(1.0, p + 2.0 * math.sqrt(var))


def linear_beta_profile(m: int, radius: float) -> PruningProfile:
    if m < 1 or radius <= 0:
        raise ValueError("need m >= 1 and radius > 0")
    f2 = [beta_mean_plus_two_sigma(i, m) for i in range(1, m + 1)]
    # clamping can only break monotonicity through rounding; enforce it
    for i in range(1, m):
        f2[i] = max(f2[i], f2[i - 1])
    return PruningProfile.from_f([math.sqrt(x) for x in f2], radius)


@dataclass(frozen=True)
class EnumTarget:
    coords_in_basis: tuple  # Fraction or float, t = sum t_i b_i
    ambient: tuple

    @classmethod
    def from_ambient(cls, basis: LatticeBasis, ambient) -> "EnumTarget":
        return cls(tuple(solve_coordinates(basis, ambient)), tuple(ambient))

    @classmethod
    def from_coords(cls, basis: LatticeBasis, coords) -> "EnumTarget":
        coords = tuple(Fraction(c) for c in coords)
        n = basis.dim[1]
        amb = [Fraction(0)] * n
        for c, row in zip(coords, basis.rows):
            if c:
                for j in range(n):
                    amb[j] += c * row[j]
        return cls(coords, tuple(amb))

    @classmethod
    def zero(cls, basis: LatticeBasis) -> "EnumTarget":
        m, n = basis.dim
        return cls((0,) * m, (0,) * n)


@dataclass(frozen=True)
class EnumCandidate:
    coeffs: tuple[int, ...]
    dist_sq: Fraction | int
    point: tuple[int, ...]
    partial_norms: tuple[float, ...] | None = None


def _enum_core(mu, bstar, t, radii_sq, *, dedup=True, svp=False, node_cap=None,
               deadline=None, trace=None, stats=None):
    """Depth-first pruned enumeration, 1-based internally.

    ``mu``/``bstar`` are float GSO data, ``t`` float target coordinates.
    Yields ``(v, rho)`` with v the coefficient list and rho the partial norms
    rho_1..rho_m. In svp mode the zero vector is skipped, only one of +-v is
    visited, and the radii shrink to each new best solution.
    """
    m = len(bstar)
    mu1 = [None] + [[0.0] + list(row) for row in mu]
    b1 = [0.0] + list(bstar)
    t1 = [0.0] + [float(x) for x in t] + [0.0]
    rsq = [0.0] + [r * (1.0 + SLACK) for r in radii_sq]  # rsq[j], j = dimension of projection
    full_r = radii_sq[-1]

    sigma = [[0.0] * (m + 2) for _ in range(m + 2)]
    r = list(range(m + 2))
    v = [0] * (m + 2)
    c = [0.0] * (m + 2)
    w = [0] * (m + 2)
    rho = [0.0] * (m + 2)

    for k in range(m, 0, -1):
        for i in range(m, k, -1):
            sigma[i][k] = sigma[i + 1][k] + (t1[i] - v[i]) * mu1[i][k]
        c[k] = t1[k] + sigma[k + 1][k]
        v[k] = math.ceil(c[k] - 0.5) if k == 1 else math.floor(c[k] + 0.5)
        w[k] = 1
        rho[k] = rho[k + 1] + (c[k] - v[k]) ** 2 * b1[k]

    nodes = 0
    best = math.inf
    k = 1
    while True:
        nodes += 1
        if node_cap is not None and nodes > node_cap:
            if stats is not None:
                stats["incomplete"] = True
            break
        if deadline is not None and not nodes & 1023 and time.monotonic() > deadline:
            if stats is not None:
                stats["incomplete"] = True
                stats["timeout"] = True
            break
        diff = c[k] - v[k]
        rk = rho[k + 1] + diff * diff * b1[k]
        rho[k] = rk
        if trace is not None:
            trace(m + 1 - k, v[k], rk)
        if rk <= rsq[m + 1 - k]:
            if k > 1:
                k -= 1
                if r[k] > r[k - 1]:
                    r[k - 1] = r[k]
                sig = sigma
                for i in range(r[k], k, -1):
                    sig[i][k] = sig[i + 1][k] + (t1[i] - v[i]) * mu1[i][k]
                ck = t1[k] + sig[k + 1][k]
                c[k] = ck
                v[k] = math.ceil(ck - 0.5) if k == 1 else math.floor(ck + 0.5)
                w[k] = 1
                continue
            # k == 1: a solution
            if svp:
                if rk > 0.0 and rk < best:
                    best = rk
                    yield v[1:m + 1], rho[1:m + 1]
                    scale = rk / full_r
                    rsq = [0.0] + [x * scale * (1.0 + SLACK) for x in radii_sq]
            else:
                yield v[1:m + 1], rho[1:m + 1]
            if not dedup:
                # stay at level 1 and move to the next zig-zag value
                if svp and rho[2] == 0.0:
                    v[1] += 1
                elif v[1] > c[1]:
                    v[1] -= w[1]
                    w[1] += 1
                else:
                    v[1] += w[1]
                    w[1] += 1
                continue
        # going up the tree
        k += 1
        if k == m + 1:
            break
        r[k - 1] = k
        if svp and rho[k + 1] == 0.0:
            v[k] += 1
        elif v[k] > c[k]:
            v[k] -= w[k]
            w[k] += 1
        else:
            v[k] += w[k]
            w[k] += 1
    if stats is not None:
        stats["nodes"] = stats.get("nodes", 0) + nodes


class EnumerationRun:
    """Iterable over verified candidates; inspect ``incomplete``/``nodes`` after."""

    def __init__(self, basis: LatticeBasis, gso: GramSchmidtData, target: EnumTarget,
                 profile: PruningProfile, dedup_b1: bool = False, limit: int | None = None,
                 node_cap: int | None = None, trace=None, keep_partial_norms: bool = False):
        m = basis.dim[0]
        if profile.dim != m:
            raise ValueError(f"profile has length {profile.dim}, basis has {m} rows")
        if len(gso.bstar_norms_sq) != m:
            raise ValueError("GSO does not match basis")
        self.basis = basis
        self.gso = gso
        self.target = target
        self.profile = profile
        self.dedup_b1 = dedup_b1
        self.limit = limit
        self.node_cap = node_cap
        self.trace = trace
        self.keep_partial_norms = keep_partial_norms
        self.incomplete = False
        self.nodes = 0
        self.rejected = 0
        self._hi_gso = None
        self._exact_gso = None

    def _verify_gso(self):
        if self._hi_gso is None:
            self._hi_gso = gram_schmidt(self.basis, 2 * self.gso.precision_bits)
        return self._hi_gso

    def _dist_sq(self, coeffs):
        point = self.basis.combine(coeffs)
        d = sum((p - a) ** 2 for p, a in zip(point, self.target.ambient))
        return point, d

    def _projections_ok(self, coeffs) -> bool:
        """All cylinder constraints, decided exactly.

        A doubled-precision pass settles clear cases; values within its error
        band of a bound fall back to rational arithmetic.
        """
        hi = self._verify_gso()
        m = len(coeffs)
        radii = self.profile.radii_sq
        with mp.workprec(hi.precision_bits):
            d = [mpf(c) - _to_mpf(t) for c, t in zip(coeffs, self.target.coords_in_basis)]
            acc = mpf(0)
            eps = mpmath.ldexp(1, -hi.precision_bits // 2)
            for level in range(m - 1, -1, -1):
                y = d[level]
                for j in range(level + 1, m):
                    y += d[j] * hi.mu[j][level]
                acc += y * y * hi.bstar_norms_sq[level]
                bound = mpf(radii[m - 1 - level])
                if acc > bound * (1 + eps):
                    return False
                if acc > bound * (1 - eps):
                    return self._projections_exact(coeffs)
        return True

    def _projections_exact(self, coeffs) -> bool:
        if self._exact_gso is None:
            self._exact_gso = exact_gram_schmidt(self.basis)
        mu, bsq = self._exact_gso
        m = len(coeffs)
        d = [Fraction(c) - Fraction(t) for c, t in zip(coeffs, self.target.coords_in_basis)]
        acc = Fraction(0)
        for level in range(m - 1, -1, -1):
            y = d[level] + sum(d[j] * mu[j][level] for j in range(level + 1, m))
            acc += y * y * bsq[level]
            if acc > Fraction(self.profile.radii_sq[m - 1 - level]):
                return False
        return True

    def __iter__(self):
        tc = self.target.coords_in_basis
        offset = [math.floor(x + Fraction(1, 2)) if isinstance(x, Fraction) else math.floor(x + 0.5) for x in tc]
        frac = [float(x - o) for x, o in zip(tc, offset)]
        mu, bstar = self.gso.as_floats()
        stats = {}
        emitted = 0
        full_r = Fraction(self.profile.radii_sq[-1])
        core = _enum_core(mu, bstar, frac, self.profile.radii_sq, dedup=self.dedup_b1,
                          node_cap=self.node_cap, trace=self.trace, stats=stats)
        try:
            for v, rho in core:
                coeffs = [a + b for a, b in zip(v, offset)]
                point, dist = self._dist_sq(coeffs)
                if self.dedup_b1:
                    coeffs, point, dist = self._coset_minimal(coeffs, point, dist)
                if dist > full_r or not self._projections_ok(coeffs):
                    self.rejected += 1
                    continue
                yield EnumCandidate(tuple(coeffs), dist, point,
                                    tuple(rho) if self.keep_partial_norms else None)
                emitted += 1
                if self.limit is not None and emitted >= self.limit:
                    self.incomplete = True
                    return
        finally:
            self.nodes = stats.get("nodes", 0)
            self.incomplete = self.incomplete or stats.get("incomplete", False)

    def _coset_minimal(self, coeffs, point, dist):
        """Shift along b_1 to the exact distance minimizer (ties: smaller v_1)."""
        b1 = self.basis.rows[0]
        while True:
            moved = False
            for step in (-1, 1):
                p2 = tuple(p + step * b for p, b in zip(point, b1))
                d2 = sum((p - a) ** 2 for p, a in zip(p2, self.target.ambient))
                if d2 < dist or (d2 == dist and step < 0):
                    coeffs = [coeffs[0] + step] + coeffs[1:]
                    point, dist, moved = p2, d2, True
                    break
            if not moved:
                return coeffs, point, dist


def _to_mpf(x):
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def enumerate_bdd(basis: LatticeBasis, gso: GramSchmidtData, target: EnumTarget,
                  profile: PruningProfile, dedup_b1: bool = False, limit: int | None = None,
                  node_cap: int | None = None, **kw) -> EnumerationRun:
    """All lattice points v with ||pi_{m+1-k}(v - t)||^2 <= R_k^2 for every k.

    With ``dedup_b1`` only the distance-minimizing representative of each
    coset v + Z b_1 is produced. Iterate the returned run to stream results.
    """
    return EnumerationRun(basis, gso, target, profile, dedup_b1, limit, node_cap, **kw)


class EmptySearchError(LookupError):
    """Pruned SVP search found no nonzero vector."""


def svp_coefficients(mu, bstar, radii_sq, *, deadline=None, node_cap=None):
    """Float-level SVP core shared with BKZ: best (coeffs, norm_sq) or None.

    Second return value reports whether the search was cut short.
    """
    stats = {}
    best = None
    for v, rho in _enum_core(mu, bstar, [0.0] * len(bstar), radii_sq, dedup=False, svp=True,
                             deadline=deadline, node_cap=node_cap, stats=stats):
        best = (list(v), rho[0])
    return best, stats.get("incomplete", False)


def enumerate_svp(basis: LatticeBasis, gso: GramSchmidtData, profile: PruningProfile | None = None,
                  node_cap: int | None = None) -> EnumCandidate:
    """Shortest nonzero lattice vector within the pruning set (exact with f = 1)."""
    mu, bstar = gso.as_floats()
    if profile is None:
        first = sum(x * x for x in basis.rows[0])
        profile = full_profile(len(bstar), math.sqrt(float(first)) * (1 + 1e-9))
    best, _ = svp_coefficients(mu, bstar, profile.radii_sq, node_cap=node_cap)
    if best is None:
        raise EmptySearchError("no nonzero vector inside the pruned region")
    coeffs = best[0]
    point = basis.combine(coeffs)
    return EnumCandidate(tuple(coeffs), sum(x * x for x in point), point)


def unit_ball_log_volume(m: int) -> float:
    return float((m / 2) * mpmath.log(mpmath.pi) - mpmath.loggamma(m / 2 + 1))


def gaussian_estimate(basis_or_det, profile: PruningProfile) -> float:
    """vol(Ball_m(R)) / det L for the unpruned ball of radius ``profile.base_radius``.

    A heuristic point count; ``basis_or_det`` is a LatticeBasis or a volume.
    """
    from .lattice import determinant

    det = determinant(basis_or_det) if isinstance(basis_or_det, LatticeBasis) else basis_or_det
    m = profile.dim
    with mp.workprec(128):
        logv = unit_ball_log_volume(m) + m * mpmath.log(mpf(profile.base_radius)) - mpmath.log(mpf(det))
        return float(mpmath.exp(logv))
