"""Size reduction, LLL and progressive one-tour-per-blocksize BKZ.

Bases are kept as exact Python integers together with their exact Gram
matrix; Gram-Schmidt data is floating (double by default, mpmath on
escalation) and recomputed from the exact Gram entries as rows change.
Every row operation is mirrored on a unimodular transformation matrix U so
that ``U * original == reduced`` holds exactly.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

from mpmath import mp, mpf

from .enumeration import PruningProfile, full_profile, linear_beta_profile, svp_coefficients
from .lattice import LatticeBasis

log = logging.getLogger(__name__)


class ReductionError(RuntimeError):
    pass


class PrecisionError(ReductionError):
    pass


@dataclass(frozen=True)
class ReductionParams:
    delta: float = 0.99
    beta_start: int = 20
    beta_end: int = 20
    svp_pruning: str = "auto"  # "auto": full up to block 30, linear-beta above; or "none"/"linear-beta"
    svp_timeout: float | None = None
    gso_precision: int | None = None  # None: double precision with one escalation retry
    iteration_cap: int | None = None

    def __post_init__(self):
        if not 0.25 < self.delta < 1:
            raise ValueError("delta must lie in (1/4, 1)")
        if not 2 <= self.beta_start <= self.beta_end:
            raise ValueError("need 2 <= beta_start <= beta_end")


@dataclass(frozen=True)
class TransformationLog:
    unimodular: tuple[tuple[int, ...], ...]


@dataclass
class TourRecord:
    beta: int
    b1_norm_sq: int
    log_norms: list[float]
    elapsed: float
    skipped_blocks: int = 0


@dataclass
class BKZResult:
    basis: LatticeBasis
    transform: TransformationLog
    tours: list[TourRecord] = field(default_factory=list)


class _Workspace:
    """Mutable basis + U + exact Gram matrix + floating GSO rows."""

    def __init__(self, basis: LatticeBasis, prec: int | None = None):
        self.B = basis.to_lists()
        self.m, self.n = basis.dim
        m = self.m
        self.U = [[int(i == j) for j in range(m)] for i in range(m)]
        self.G = [[0] * m for _ in range(m)]
        for i in range(m):
            for j in range(i + 1):
                self.G[i][j] = self.G[j][i] = sum(a * b for a, b in zip(self.B[i], self.B[j]))
        self.set_precision(prec)

    def set_precision(self, prec):
        self.prec = prec
        if prec is None or prec <= 53:
            self.num = float
            self.rnd = lambda x: math.floor(x + 0.5)
            self.big = 2.0 ** 26
        else:
            self.num = lambda x: mpf(x)
            self.rnd = lambda x: int(mp.floor(x + 0.5))
            self.big = mpf(2) ** (prec // 2)
        m = self.m
        zero = self.num(0)
        self.mu = [[zero] * m for _ in range(m)]
        self.r = [[zero] * m for _ in range(m)]

    def basis(self) -> LatticeBasis:
        return LatticeBasis.from_rows(self.B)

    def transform(self) -> TransformationLog:
        return TransformationLog(tuple(tuple(r) for r in self.U))

    # exact row operations -------------------------------------------------
    def addmul(self, i, j, q):
        """b_i += q * b_j."""
        if not q:
            return
        Bi, Bj = self.B[i], self.B[j]
        for t in range(self.n):
            Bi[t] += q * Bj[t]
        Ui, Uj = self.U[i], self.U[j]
        for t in range(self.m):
            Ui[t] += q * Uj[t]
        G = self.G
        gii = G[i][i] + 2 * q * G[i][j] + q * q * G[j][j]
        for t in range(self.m):
            if t != i:
                G[i][t] += q * G[j][t]
                G[t][i] = G[i][t]
        G[i][i] = gii

    def negate(self, i):
        self.B[i] = [-x for x in self.B[i]]
        self.U[i] = [-x for x in self.U[i]]
        for t in range(self.m):
            if t != i:
                self.G[i][t] = -self.G[i][t]
                self.G[t][i] = self.G[i][t]

    def swap(self, i, j):
        self.B[i], self.B[j] = self.B[j], self.B[i]
        self.U[i], self.U[j] = self.U[j], self.U[i]
        G = self.G
        G[i], G[j] = G[j], G[i]
        for row in G:
            row[i], row[j] = row[j], row[i]

    def move(self, src, dst):
        """Move row src to position dst (dst <= src), shifting the rows between."""
        for i in range(src, dst, -1):
            self.swap(i, i - 1)

    # floating GSO -----------------------------------------------------------
    def gso_row(self, k):
        num, mu, r, G = self.num, self.mu, self.r, self.G
        rk, muk = r[k], mu[k]
        for j in range(k):
            s = num(G[k][j])
            rj = mu[j]
            for i in range(j):
                s -= rj[i] * rk[i]
            rk[j] = s
            muk[j] = s / r[j][j]
        s = num(G[k][k])
        for j in range(k):
            s -= muk[j] * rk[j]
        rk[k] = s
        muk[k] = num(1)
        if not rk[k] > 0:
            raise PrecisionError(f"non-positive ||b*_{k}||^2 at precision {self.prec or 53}")

    def gso(self, upto=None):
        for k in range(upto if upto is not None else self.m):
            self.gso_row(k)

    def size_reduce_row(self, k):
        """Size-reduce b_k against b_0..b_{k-1}; GSO rows < k must be current."""
        for _ in range(200):
            self.gso_row(k)
            mu_k = self.mu[k]
            big = False
            for j in range(k - 1, -1, -1):
                q = self.rnd(mu_k[j])
                if q:
                    if abs(q) > self.big:
                        big = True
                    self.addmul(k, j, -q)
                    mu_j = self.mu[j]
                    for i in range(j):
                        mu_k[i] -= q * mu_j[i]
                    mu_k[j] -= q
            if not big:
                self.gso_row(k)
                return
        raise PrecisionError(f"size reduction of row {k} does not converge")

    def lll(self, delta, start=0, end=None, cap=None):
        end = self.m if end is None else end
        for k in range(start):
            self.gso_row(k)
        k = max(start, 1)
        if start == 0 and end > 0:
            self.gso_row(0)
        cap = cap or 10 * self.m * self.m * max(8, max(abs(x).bit_length() for r in self.B for x in r)) + 1000
        steps = 0
        while k < end:
            steps += 1
            if steps > cap:
                raise ReductionError(f"LLL iteration cap {cap} reached at k={k}")
            self.size_reduce_row(k)
            r_prev = self.r[k - 1][k - 1]
            mu_k = self.mu[k][k - 1]
            if delta * r_prev <= self.r[k][k] + mu_k * mu_k * r_prev:
                k += 1
            else:
                self.swap(k, k - 1)
                k = max(k - 1, 1)
                if k == 1:
                    self.gso_row(0)
        return steps


def _escalated(basis: LatticeBasis) -> int:
    return 2 * basis.max_bits() + 64


def _with_escalation(basis: LatticeBasis, prec, job):
    ws = _Workspace(basis, prec)
    try:
        job(ws)
        return ws
    except PrecisionError as exc:
        if prec is not None and prec > 53:
            raise
        hp = _escalated(basis)
        log.warning("%s; retrying at %d bits", exc, hp)
        ws = _Workspace(basis, hp)
        with mp.workprec(hp):
            job(ws)
        return ws


def size_reduce(basis: LatticeBasis, precision_bits: int | None = None):
    def job(ws):
        ws.gso_row(0)
        for k in range(1, ws.m):
            ws.size_reduce_row(k)

    ws = _with_escalation(basis, precision_bits, job)
    return ws.basis(), ws.transform()


def lll(basis: LatticeBasis, params: ReductionParams | None = None):
    params = params or ReductionParams()
    # a hair above delta so the exact Lovasz test survives float rounding
    d = min(params.delta + 2.0 ** -30, 1 - 2.0 ** -40)
    ws = _with_escalation(basis, params.gso_precision, lambda w: w.lll(d, cap=params.iteration_cap))
    return ws.basis(), ws.transform()


def _insert(ws: _Workspace, k: int, coeffs: list[int]):
    """Make sum_i coeffs[i] b_{k+i} the row at position k via unimodular ops."""
    idx = [k + i for i in range(len(coeffs))]
    c = dict(zip(idx, coeffs))
    while True:
        nz = [i for i in idx if c[i]]
        if len(nz) == 1:
            break
        p = min(nz, key=lambda i: (abs(c[i]), i))
        for i in nz:
            if i != p:
                q = c[i] // c[p]
                if q:
                    # c_i -= q c_p  <=>  b_p += q b_i
                    c[i] -= q * c[p]
                    ws.addmul(p, i, q)
    p = nz[0]
    if abs(c[p]) != 1:
        raise ReductionError(f"SVP solution is not primitive (gcd {abs(c[p])})")
    if c[p] < 0:
        ws.negate(p)
    ws.move(p, k)


def _svp_profile(kind: str, block: int, radius: float) -> PruningProfile:
    if kind == "none" or (kind == "auto" and block <= 30):
        return full_profile(block, radius)
    return linear_beta_profile(block, radius)


def bkz_tour(ws: _Workspace, beta: int, params: ReductionParams, delta: float) -> int:
    """One left-to-right pass over blocks [k, min(k+beta, m)); returns skipped blocks."""
    m = ws.m
    skipped = 0
    for k in range(m - 1):
        end = min(k + beta, m)
        ws.gso(end)
        bs = end - k
        mu = [[ws.mu[k + i][k + j] for j in range(i)] for i in range(bs)]
        bstar = [float(ws.r[k + i][k + i]) for i in range(bs)]
        mu = [[float(x) for x in row] for row in mu]
        radius = math.sqrt(bstar[0])
        profile = _svp_profile(params.svp_pruning, bs, radius)
        deadline = time.monotonic() + params.svp_timeout if params.svp_timeout else None
        best, cut = svp_coefficients(mu, bstar, profile.radii_sq, deadline=deadline)
        if cut:
            log.warning("SVP timeout in block [%d, %d); block skipped", k, end)
            skipped += 1
            continue
        if best is None or best[1] >= delta * bstar[0]:
            continue
        _insert(ws, k, best[0])
        ws.lll(delta, start=k)
    return skipped


def bkz_progressive(basis: LatticeBasis, params: ReductionParams | None = None,
                    on_tour=None) -> BKZResult:
    """LLL, then exactly one BKZ tour for each blocksize beta_start..beta_end."""
    from .lattice import profile as basis_profile

    params = params or ReductionParams()
    d = min(params.delta + 2.0 ** -30, 1 - 2.0 ** -40)
    prec = params.gso_precision
    result_tours = []

    def job(ws):
        result_tours.clear()
        ws.lll(d, cap=params.iteration_cap)
        t0 = time.monotonic()
        for beta in range(params.beta_start, min(params.beta_end, ws.m) + 1):
            skipped = bkz_tour(ws, beta, params, d)
            b = ws.basis()
            rec = TourRecord(beta, ws.G[0][0], list(basis_profile(b).log_norms),
                             time.monotonic() - t0, skipped)
            result_tours.append(rec)
            if on_tour:
                on_tour(rec)

    ws = _with_escalation(basis, prec, job)
    return BKZResult(ws.basis(), ws.transform(), result_tours)
