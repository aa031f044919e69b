"""Small helpers around mpmath's interval context."""
from __future__ import annotations

from contextlib import contextmanager
from decimal import Context, Decimal
from fractions import Fraction

import mpmath
from mpmath import iv
from mpmath.libmp import to_int


@contextmanager
def iv_precision(bits: int):
    old = iv.prec
    iv.prec = bits
    try:
        yield
    finally:
        iv.prec = old


def exact(x):
    """Interval enclosing the exact value of an int/Fraction/Decimal/str."""
    if isinstance(x, int):
        return iv.mpf(x)
    if isinstance(x, Fraction):
        return iv.mpf(x.numerator) / x.denominator
    return iv.mpf(str(x))


def decimal_ball(d: Decimal):
    """Enclosure of a decimal datum known to +-1 unit in its last digit."""
    t = d.as_tuple()
    ulp = Decimal((0, (1,), t.exponent))
    ctx = Context(prec=len(t.digits) + 5)
    return iv.mpf([str(ctx.subtract(d, ulp)), str(ctx.add(d, ulp))])


def floor_if_determined(x):
    """floor of an interval, or None when the endpoints straddle an integer."""
    # floor the raw endpoints exactly; x.a / x.b would round through mp.prec
    lo, hi = (int(to_int(e, "f")) for e in x._mpi_)  # int(): gmpy2 backends return mpz
    return lo if lo == hi else None
