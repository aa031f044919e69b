"""Integer row bases, Gram-Schmidt data and basis profiles.

The lattice is the set of integer combinations of the rows.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import log2

import mpmath
from mpmath import mp, mpf


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeBasis:
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.rows:
            raise ValueError("basis needs at least one row")
        n = len(self.rows[0])
        if any(len(r) != n for r in self.rows):
            raise ValueError("ragged basis")
        if len(self.rows) > n:
            raise RankDeficientError(f"{len(self.rows)} rows in dimension {n}")

    @classmethod
    def from_rows(cls, rows) -> "LatticeBasis":
        return cls(tuple(tuple(int(x) for x in r) for r in rows))

    @property
    def dim(self) -> tuple[int, int]:
        return len(self.rows), len(self.rows[0])

    def to_lists(self) -> list[list[int]]:
        return [list(r) for r in self.rows]

    def max_bits(self) -> int:
        return max(abs(x).bit_length() for r in self.rows for x in r)

    def combine(self, coeffs) -> tuple[int, ...]:
        """Ambient vector sum_i coeffs[i] * row_i (exact)."""
        n = self.dim[1]
        out = [0] * n
        for c, row in zip(coeffs, self.rows):
            if c:
                for j in range(n):
                    out[j] += c * row[j]
        return tuple(out)


@dataclass(frozen=True)
class GramSchmidtData:
    mu: tuple[tuple[mpf, ...], ...]
    bstar_norms_sq: tuple[mpf, ...]
    precision_bits: int

    def as_floats(self) -> tuple[list[list[float]], list[float]]:
        return [[float(x) for x in row] for row in self.mu], [float(x) for x in self.bstar_norms_sq]


@dataclass(frozen=True)
class BasisProfile:
    log_norms: tuple[float, ...]
    log_det: float
    normalized_first: float


def default_precision(basis: LatticeBasis) -> int:
    return 2 * basis.max_bits() + 64


def dot(u, v) -> int:
    return sum(a * b for a, b in zip(u, v))


def gram_matrix(basis: LatticeBasis) -> list[list[int]]:
    rows = basis.rows
    m = len(rows)
    g = [[0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1):
            g[i][j] = g[j][i] = dot(rows[i], rows[j])
    return g


def gram_schmidt(basis: LatticeBasis, precision_bits: int | None = None) -> GramSchmidtData:
    """Floating GSO from the exact Gram matrix at ``precision_bits``."""
    prec = precision_bits or default_precision(basis)
    g = gram_matrix(basis)
    m = len(g)
    with mp.workprec(prec):
        r = [[mpf(0)] * m for _ in range(m)]
        mu = [[mpf(0)] * m for _ in range(m)]
        for i in range(m):
            for j in range(i + 1):
                s = mpf(g[i][j])
                for k in range(j):
                    s -= mu[j][k] * r[i][k]
                r[i][j] = s
                if j < i:
                    mu[i][j] = s / r[j][j]
            mu[i][i] = mpf(1)
            if r[i][i] <= mpf(g[i][i]) * mpmath.ldexp(1, -prec // 2):
                raise RankDeficientError(f"row {i} is numerically dependent at {prec} bits")
        return GramSchmidtData(
            tuple(tuple(row) for row in mu),
            tuple(r[i][i] for i in range(m)),
            prec,
        )


def exact_gram_schmidt(basis: LatticeBasis):
    """Rational GSO from the integer Gram matrix: (mu, bstar_norms_sq) as Fractions."""
    g = gram_matrix(basis)
    m = len(g)
    r = [[Fraction(0)] * m for _ in range(m)]
    mu = [[Fraction(0)] * m for _ in range(m)]
    for i in range(m):
        for j in range(i + 1):
            s = Fraction(g[i][j])
            for k in range(j):
                s -= mu[j][k] * r[i][k]
            r[i][j] = s
            if j < i:
                mu[i][j] = s / r[j][j]
        mu[i][i] = Fraction(1)
        if r[i][i] <= 0:
            raise RankDeficientError(f"row {i} is linearly dependent")
    return mu, [r[i][i] for i in range(m)]


def _bareiss_det(a: list[list[int]]) -> int:
    a = [row[:] for row in a]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def determinant(basis: LatticeBasis):
    """Lattice volume: exact |det| (an int) for square bases, sqrt(det Gram) otherwise."""
    m, n = basis.dim
    if m == n:
        d = abs(_bareiss_det(basis.to_lists()))
        if d == 0:
            raise RankDeficientError("singular basis")
        return d
    gdet = _bareiss_det(gram_matrix(basis))
    if gdet <= 0:
        raise RankDeficientError("singular Gram matrix")
    with mp.workprec(max(64, gdet.bit_length() // 2 + 64)):
        return +mpmath.sqrt(mpf(gdet))


def _log2_big(x) -> float:
    if isinstance(x, int):
        shift = max(0, x.bit_length() - 60)
        return log2(x >> shift) + shift
    return float(mpmath.log(x, 2))


def profile(basis: LatticeBasis, gso: GramSchmidtData | None = None) -> BasisProfile:
    gso = gso or gram_schmidt(basis)
    with mp.workprec(gso.precision_bits):
        logs = tuple(float(mpmath.log(b, 2)) / 2 for b in gso.bstar_norms_sq)
    log_det = sum(logs)
    first = _log2_big(dot(basis.rows[0], basis.rows[0])) / 2
    return BasisProfile(logs, log_det, first - log_det / len(logs))


def solve_coordinates(basis: LatticeBasis, ambient) -> list[Fraction]:
    """Exact coordinates of ``ambient`` w.r.t. a square basis (x = sum c_i b_i)."""
    m, n = basis.dim
    if m != n:
        raise ValueError("coordinates require a square basis")
    # Solve B^T c = t by Gaussian elimination over the rationals.
    a = [[Fraction(basis.rows[j][i]) for j in range(m)] + [Fraction(ambient[i])] for i in range(n)]
    for col in range(m):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / p
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][m] / a[i][i] for i in range(m)]


def dump_basis(basis: LatticeBasis, path) -> None:
    m, n = basis.dim
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m} {n}\n")
        for row in basis.rows:
            fh.write(" ".join(str(x) for x in row) + "\n")


def load_basis(path) -> LatticeBasis:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: first line must be 'm n'")
        m, n = int(header[0]), int(header[1])
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != m or any(len(r) != n for r in rows):
        raise ValueError(f"{path}: expected {m} rows of {n} integers")
    return LatticeBasis.from_rows(rows)
