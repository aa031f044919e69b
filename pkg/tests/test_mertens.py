import math
import random
from decimal import Decimal
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from mertens_enum import enumeration as en, lattice, mertens, reduction, zeros
from mertens_enum.mertens import MertensParams, Sign
from mertens_enum.zeros import Mode, WeightedZero, ZetaZero


def synthetic(gamma="1", alpha="1", psi="0", digits=30):
    z = ZetaZero(Decimal(gamma), Decimal(alpha), Decimal(psi), digits)
    return WeightedZero(z, mpmath.mpf(alpha), Decimal(0))


def test_tiny_instance_rows_and_targets():
    p = MertensParams(1, 3, 3, 0, mode="qn", sign="pos")
    inst = mertens.build_instance([synthetic()], p)
    assert inst.basis.rows == ((8, 1), (50, 0))
    assert inst.target_vector == (0, 0)
    neg = mertens.build_instance([synthetic()], MertensParams(1, 3, 3, 0, mode="qn", sign="neg"))
    assert neg.target_vector == (25, 0)


def test_params_invariants():
    with pytest.raises(ValueError):
        MertensParams(0, 10, 5, 0)
    with pytest.raises(ValueError):
        MertensParams(3, 10, 11, 0)
    with pytest.raises(ValueError):
        MertensParams(3, 10, 5, -1)
    with pytest.raises(ValueError):
        MertensParams(3, 10, 5, 0, radius_scale=0.9)


def test_radius_formula():
    # det 1, N+1 = 2: K = sqrt(2 / (2 pi e))
    inst = mertens.build_instance([synthetic()], MertensParams(1, 3, 3, 0, mode="qn"))
    object.__setattr__(inst, "det", 1)
    assert float(mertens.radius(inst)) == pytest.approx(math.sqrt(2 / (2 * math.pi * math.e)), rel=1e-15)
    assert float(mertens.radius(inst)) == pytest.approx(0.3422, abs=1e-4)
    inst2 = mertens.build_instance([synthetic()], MertensParams(1, 3, 3, 0, radius_scale=2.0, mode="qn"))
    object.__setattr__(inst2, "det", 1)
    with mpmath.workprec(128):
        assert mertens.radius(inst2) == 2 * mertens.radius(inst)


def test_balanced_mod():
    assert mertens.balanced_mod(5, 10) == 5
    assert mertens.balanced_mod(6, 10) == -4
    assert mertens.balanced_mod(-5, 10) == 5
    assert mertens.balanced_mod(3, 7) == 3 and mertens.balanced_mod(4, 7) == -3


def _fixture_instance(first2000, N=12, nu=50, nu_y=35, nu_t=8, sign="neg", mode="hp", scale=1.3):
    ds = zeros.weight_dataset(first2000, mode, 2500)
    return mertens.build_instance(zeros.take_top(ds, N), MertensParams(N, nu, nu_y, nu_t, scale, mode, sign))


def _exact_floor(value_fn, digits=120):
    with mpmath.workdps(digits):
        return int(mpmath.floor(value_fn()))


def test_entries_are_true_floors(first2000):
    inst = _fixture_instance(first2000)
    p = inst.params
    for i, z in enumerate(inst.zeros):
        with mpmath.workdps(150):
            g, a, ps = (mpmath.mpf(str(v)) for v in (z.base.gamma, z.base.alpha, z.base.psi))
            sa = mpmath.sqrt(a * mpmath.exp(-mpmath.mpf(str(z.damping_k)) * g * g))
            assert inst.heights[i] == int(mpmath.floor(sa * g * 2 ** p.nu_y))
            assert inst.moduli[i] == int(mpmath.floor(sa * 2 * mpmath.pi * 2 ** p.nu))
            assert inst.phases[i] == int(mpmath.floor(sa * (ps + mpmath.pi) * 2 ** p.nu))
    assert inst.basis.rows[0][-1] == 2 ** p.nu_t
    for i in range(p.N):
        row = inst.basis.rows[i + 1]
        assert row[i] == inst.moduli[i] and sum(1 for x in row if x) == 1


def test_determinant_exact(first2000):
    inst = _fixture_instance(first2000)
    d = 2 ** inst.params.nu_t * math.prod(inst.moduli)
    assert inst.det == d == lattice.determinant(inst.basis)


def test_insufficient_precision_rejected():
    z = synthetic("14.13", "0.089", "1.69", digits=4)
    with pytest.raises(mertens.InsufficientPrecisionError):
        mertens.build_instance([z], MertensParams(1, 60, 40, 5, mode="qn"))


def test_recover_y_trivial_cases(first2000):
    inst = _fixture_instance(first2000)
    zero_pt = en.EnumCandidate((0,) * (inst.params.N + 1), 0, (0,) * (inst.params.N + 1))
    cy = mertens.recover_y(zero_pt, inst)
    assert cy.x == 0 and cy.y == 0
    assert cy.residual_sq == sum(mertens.balanced_mod(-t, d) ** 2 for t, d in zip(inst.phases, inst.moduli))
    p = MertensParams(1, 3, 3, 0, mode="qn")
    tiny = mertens.build_instance([synthetic()], p)
    pt = tiny.basis.rows[0]
    assert mertens.recover_y(en.EnumCandidate((1, 0), 0, pt), tiny).y == 1


def test_predict_ranges_collapse():
    zs = [synthetic("14.1", "0.5", "0.1")]
    pr = mertens.predict_ranges(MertensParams(1, 10, 5, 10, 1.0, "qn"), zs)
    assert pr.entry_range[0] == pr.entry_range[1] == pytest.approx(2 ** pr.c)


def test_pipeline_small_candidates(first2000):
    """Reduce + enumerate a small instance; check the distance split and y recovery on every candidate."""
    inst = _fixture_instance(first2000, N=12, nu=50, nu_y=35, nu_t=4, scale=2.2)
    res = reduction.bkz_progressive(inst.basis, reduction.ReductionParams(beta_start=2, beta_end=10))
    b = res.basis
    assert lattice.determinant(b) == inst.det
    target = en.EnumTarget.from_ambient(b, inst.target_vector)
    K = float(inst.K)
    cands = list(en.enumerate_bdd(b, lattice.gram_schmidt(b), target, en.full_profile(b.dim[0], K), dedup_b1=True))
    assert len(cands) >= 5
    p = inst.params
    K2 = Fraction(K) ** 2
    for c in cands:
        cy = mertens.recover_y(c, inst)
        assert cy.y * 2 ** (p.nu - p.nu_y) == cy.x
        assert cy.y.denominator in (1,) or cy.y.denominator & (cy.y.denominator - 1) == 0
        assert cy.residual_sq + (cy.x * 2 ** p.nu_t) ** 2 == c.dist_sq
        assert cy.residual_sq < K2
        # residual_i / (sqrt(a*) 2^nu) approximates (gamma y - psi') mod 2pi up to the floor errors
        with mpmath.workdps(80):
            Y = mpmath.mpf(cy.y.numerator) / cy.y.denominator
            for z, e, a, d in zip(inst.zeros, cy.residuals, inst.heights, inst.moduli):
                sa = mpmath.sqrt(z.alpha_star)
                g, ps = mpmath.mpf(str(z.base.gamma)), mpmath.mpf(str(z.base.psi)) + mpmath.pi
                wrap = (g * Y - ps + mpmath.pi) % (2 * mpmath.pi) - mpmath.pi
                k = abs(cy.x * a - e) // d + 2
                err = (abs(cy.x) + 2 + k) / (sa * 2 ** p.nu)
                approx = e / (sa * 2 ** p.nu)
                diff = abs(approx - wrap)
                diff = min(diff, abs(diff - 2 * mpmath.pi))
                assert diff <= err
    # printed decimal of y round-trips
    from mertens_enum.evaluator import fraction_to_decimal, to_fraction
    for c in cands:
        y = mertens.recover_y(c, inst).y
        assert to_fraction(fraction_to_decimal(y)) == y


def test_manifest_has_decimal_strings(first2000):
    inst = _fixture_instance(first2000)
    man = mertens.instance_manifest(inst, "abc")
    assert man["zero_dataset_sha256"] == "abc"
    assert int(man["det"]) == inst.det
    assert isinstance(man["predicted"]["c"], str)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 8), st.integers(20, 80), st.integers(0, 15), st.integers(0, 10), st.sampled_from(["pos", "neg"]))
def test_random_entries_exact(first2000, N, nu, dy, nu_t, sign):
    nu_y = nu - dy
    ds = zeros.weight_dataset(first2000[:200], "qn")
    inst = mertens.build_instance(zeros.take_top(ds, N), MertensParams(N, nu, nu_y, min(nu_t, nu), 1.0, "qn", sign))
    for i, z in enumerate(inst.zeros):
        with mpmath.workdps(120):
            g, a, ps = (mpmath.mpf(str(v)) for v in (z.base.gamma, z.base.alpha, z.base.psi))
            if sign == "neg":
                ps += mpmath.pi
            sa = mpmath.sqrt(a)
            assert inst.heights[i] == int(mpmath.floor(sa * g * 2 ** nu_y))
            assert inst.phases[i] == int(mpmath.floor(sa * ps * 2 ** nu))


def test_gaussian_estimate_at_scaled_radius(first2000):
    """With the radius scaled by g the expected count is g^(N+1) / sqrt(pi (N+1)) up to Stirling error."""
    inst = _fixture_instance(first2000, N=120, nu=60, nu_y=45, nu_t=15, scale=1.23)
    est = en.gaussian_estimate(inst.det, en.full_profile(121, float(mertens.radius(inst))))
    assert est == pytest.approx(1.23 ** 121 / math.sqrt(math.pi * 121), rel=0.01)
    # same order of magnitude as the bare count g^(N+1) = 7.6e10
    assert 7.6e10 / 25 < est < 7.6e10
