"""Ingestion and weighting of precomputed nontrivial zeta zeros.

A zero file is UTF-8 text. Lines starting with ``#`` are comments; every other
non-blank line holds three decimal strings ``gamma alpha psi`` where
``alpha = 1/|rho zeta'(rho)|`` and ``psi = arg(rho zeta'(rho))``. Files ending in
``.gz`` are decompressed transparently.
"""
from __future__ import annotations

import enum
import gzip
import hashlib
import io
from dataclasses import dataclass
from decimal import Context, Decimal, InvalidOperation
from pathlib import Path

import mpmath
from mpmath.libmp import from_str
from mpmath import mp, mpf


class ZeroFileError(ValueError):
    """Malformed or inconsistent zero data."""


class Mode(str, enum.Enum):
    HP = "hp"
    HSTR = "hstr"
    QN = "qn"


# Gaussian damping constants k in alpha* = alpha exp(-k gamma^2); kept as
# decimal strings so interval code can enclose them exactly.
DAMPING = {Mode.HP: "1.5e-6", Mode.HSTR: "3e-9", Mode.QN: "0"}
HEIGHT_CUTOFF = {Mode.HP: 14000, Mode.HSTR: 74000, Mode.QN: None}

_PI_DEC = Decimal("3.14159265358979323846264338327950288419716939937510582097494459230781640628620899862803482534211706798")
_NEG_PI = _PI_DEC.copy_negate()  # unary minus would round to the 28-digit default context


@dataclass(frozen=True)
class ZetaZero:
    gamma: Decimal
    alpha: Decimal
    psi: Decimal
    precision_digits: int

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (_NEG_PI < self.psi <= _PI_DEC):
            raise ValueError(f"psi outside (-pi, pi]: {self.psi}")

    def to_line(self) -> str:
        return f"{self.gamma} {self.alpha} {self.psi}"


@dataclass(frozen=True)
class WeightedZero:
    base: ZetaZero
    alpha_star: mpf
    damping_k: Decimal

    @property
    def gamma(self) -> Decimal:
        return self.base.gamma

    @property
    def alpha(self) -> Decimal:
        return self.base.alpha

    @property
    def psi(self) -> Decimal:
        return self.base.psi


@dataclass(frozen=True, eq=False)
class ZeroDataset:
    """Zeros sorted by descending alpha_star (ties: ascending gamma).

    Compared and hashed by identity so evaluators can cache per-dataset work.
    """

    mode: Mode
    zeros: tuple[WeightedZero, ...]
    height_cutoff: float | None

    def __len__(self):
        return len(self.zeros)

    @property
    def precision_digits(self) -> int:
        return min((z.base.precision_digits for z in self.zeros), default=0)


def _sig_digits(d: Decimal) -> int:
    return len(d.as_tuple().digits)


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def _normalize_psi(psi: Decimal, digits: int, lineno: int) -> Decimal:
    if _NEG_PI < psi <= _PI_DEC:
        return psi
    # the default 28-digit context would round pi; compute wide, then round to the input's digits
    wide = Context(prec=110)
    out = Context(prec=len(psi.as_tuple().digits) + 5)
    tol = Decimal(10) ** -(digits - 2)
    two_pi = wide.multiply(2, _PI_DEC)
    if _PI_DEC < psi <= wide.add(_PI_DEC, tol):
        return out.plus(wide.subtract(psi, two_pi))
    if wide.subtract(_NEG_PI, tol) < psi <= _NEG_PI:
        return out.plus(wide.add(psi, two_pi))
    raise ZeroFileError(f"line {lineno}: psi {psi} outside (-pi, pi]")


def parse_zero_file(path, min_digits: int = 0) -> list[ZetaZero]:
    """Read a zero file; returns zeros in strictly ascending gamma."""
    zeros: list[ZetaZero] = []
    with _open_text(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ZeroFileError(f"line {lineno}: expected 'gamma alpha psi', got {len(parts)} fields")
            try:
                gamma, alpha, psi = (Decimal(p) for p in parts)
            except InvalidOperation:
                raise ZeroFileError(f"line {lineno}: not a decimal number") from None
            if not all(v.is_finite() for v in (gamma, alpha, psi)):
                raise ZeroFileError(f"line {lineno}: non-finite value")
            digits = min(_sig_digits(gamma), _sig_digits(alpha), _sig_digits(psi))
            if digits < min_digits:
                raise ZeroFileError(f"line {lineno}: {digits} significant digits < required {min_digits}")
            if gamma <= 0 or alpha <= 0:
                raise ZeroFileError(f"line {lineno}: gamma and alpha must be positive")
            psi = _normalize_psi(psi, digits, lineno)
            if zeros and gamma <= zeros[-1].gamma:
                raise ZeroFileError(f"line {lineno}: gamma non-increasing ({gamma} after {zeros[-1].gamma})")
            zeros.append(ZetaZero(gamma, alpha, psi, digits))
    return zeros


def write_zero_file(zeros, path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for z in zeros:
            fh.write(z.to_line() + "\n")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def alpha_star(zero: ZetaZero, k: Decimal | str, prec: int | None = None) -> mpf:
    """alpha * exp(-k gamma^2) at ``prec`` bits (default: the data's precision)."""
    if prec is None:
        prec = int(zero.precision_digits * 3.33) + 16
    if Decimal(k) == 0:
        # rounded toward zero so alpha_star <= alpha holds exactly
        return mp.make_mpf(from_str(str(zero.alpha), prec, "d"))
    with mp.workprec(prec):
        g = mpf(str(zero.gamma))
        return mpf(str(zero.alpha)) * mpmath.exp(-mpf(str(k)) * g * g)


def weight_dataset(zeros: list[ZetaZero], mode: Mode | str, height_cutoff: float | None = None) -> ZeroDataset:
    mode = Mode(mode)
    if height_cutoff is None:
        height_cutoff = HEIGHT_CUTOFF[mode]
    if zeros and height_cutoff is not None and height_cutoff > float(zeros[-1].gamma) + 1:
        raise ZeroFileError(
            f"height cutoff {height_cutoff} exceeds ingested data (max gamma {zeros[-1].gamma})")
    k = Decimal(DAMPING[mode])
    kept = [z for z in zeros if height_cutoff is None or z.gamma < Decimal(str(height_cutoff))]
    if not kept:
        raise ZeroFileError("no zeros below the height cutoff")
    weighted = [WeightedZero(z, alpha_star(z, k), k) for z in kept]
    weighted.sort(key=lambda w: (-w.alpha_star, w.gamma))
    return ZeroDataset(mode, tuple(weighted), height_cutoff)


def take_top(dataset: ZeroDataset, n: int) -> list[WeightedZero]:
    if not 1 <= n <= len(dataset):
        raise ValueError(f"N={n} outside 1..{len(dataset)}")
    return list(dataset.zeros[:n])
