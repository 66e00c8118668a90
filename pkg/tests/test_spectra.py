"""Torus transforms: orthogonality fixtures, roundtrips, norms, embedding ratio."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracspec import spectra
from fracspec.errors import AliasError, DomainError, HypothesisError, ZeroModeError
from fracspec.spectra import (
    DerivMultiIndex,
    GridField,
    MultiIndex,
    SpectralField,
    analyze,
    apply_derivative_symbol,
    apply_fractional_power,
    embedding_constant,
    liouville_norm_sq,
    modes_within,
    synthesize,
)

TWO_PI = 2.0 * math.pi


def random_field(rng, dim, k, real=False):
    entries = {}
    for idx in modes_within(dim, k):
        entries[idx] = complex(rng.standard_normal(), rng.standard_normal())
    if real:
        sym = {
            idx: 0.5 * (val + entries[-idx].conjugate()) for idx, val in entries.items()
        }
        return SpectralField(sym, k, dimension=dim, real_valued=True)
    return SpectralField(entries, k, dimension=dim)


def test_multi_index_norm_exact_at_large_components():
    n = MultiIndex((2**20, -(2**20), 3))
    assert n.norm_sq == 2**40 + 2**40 + 9


def test_modes_within_counts():
    # 1d: |n|^2 < 10 -> n in -3..3
    assert len(modes_within(1, 10)) == 7
    # 2d: |n|^2 < 2 -> (0,0) and four unit vectors
    assert len(modes_within(2, 2)) == 5
    assert len(modes_within(3, 1)) == 1


def test_analyze_cosine_single_mode():
    m = 9
    x = GridField.axis_points(m)
    g = GridField(np.cos(x))
    c = analyze(g, 10)
    assert c.get(1) == pytest.approx(0.5, abs=1e-14)
    assert c.get(-1) == pytest.approx(0.5, abs=1e-14)
    for idx, val in c.items():
        if idx.components not in ((1,), (-1,)):
            assert abs(val) < 1e-14
    assert c.real_valued


def test_analyze_constant_field():
    g = GridField(np.ones(7))
    c = analyze(g, 4)
    assert c.get(0) == pytest.approx(1.0, abs=1e-15)
    assert abs(c.get(1)) < 1e-15 and abs(c.get(-1)) < 1e-15


def test_synthesize_known_fields():
    c = SpectralField({0: 1.0}, 1)
    g = synthesize(c, 5)
    np.testing.assert_allclose(g.samples, np.ones(5), atol=1e-15)
    c = SpectralField({1: 0.5, -1: 0.5}, 2, real_valued=True)
    g = synthesize(c, 9)
    np.testing.assert_allclose(g.samples.real, np.cos(GridField.axis_points(9)), atol=1e-14)


@pytest.mark.parametrize("dim,k,m", [(1, 26, 11), (2, 8, 7), (3, 5, 5)])
def test_roundtrip_analyze_synthesize(dim, k, m):
    rng = np.random.default_rng(42 + dim)
    c = random_field(rng, dim, k)
    g = synthesize(c, m)
    back = analyze(g, k)
    for idx, val in c.items():
        assert back.get(idx) == pytest.approx(val, abs=1e-12)


def test_parseval_contract():
    rng = np.random.default_rng(7)
    for dim, k, m in ((1, 26, 15), (2, 5, 9)):
        c = random_field(rng, dim, k)
        g = synthesize(c, m)
        lhs = (TWO_PI / m) ** dim * float(np.sum(np.abs(g.samples) ** 2))
        rhs = TWO_PI**dim * c.coefficient_norm_sq()
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_real_grid_gives_hermitian_coefficients():
    rng = np.random.default_rng(3)
    m = 9
    g = GridField(rng.standard_normal((m, m)))
    c = analyze(g, 9)
    for idx, val in c.items():
        assert c.get(-idx) == pytest.approx(val.conjugate(), abs=1e-13)
    assert c.real_valued


def test_alias_error_paths():
    g = GridField(np.ones(5))  # Nyquist range 2
    with pytest.raises(AliasError):
        analyze(g, 10)  # needs |n| up to 3
    c = SpectralField({3: 1.0}, 10)
    with pytest.raises(AliasError):
        synthesize(c, 5)
    # boundary: |n|^2 < 5 means |n| <= 2, fits M=5 exactly
    analyze(g, 5)
    synthesize(SpectralField({2: 1.0}, 5), 5)


def test_grid_field_validation():
    with pytest.raises(DomainError):
        GridField(np.ones(4))  # even
    with pytest.raises(DomainError):
        GridField(np.ones(1))  # too small
    with pytest.raises(DomainError):
        GridField(np.ones((5, 7)))  # not a cube
    f = GridField.from_flat(np.arange(25.0), 2, 5)
    assert f.samples.shape == (5, 5)
    assert f.samples[1, 2] == 7.0  # row-major order


def test_spectral_field_validation():
    with pytest.raises(DomainError):
        SpectralField({3: 1.0}, 9)  # |n|^2 = 9 not < 9
    with pytest.raises(DomainError):
        SpectralField({}, 4)  # dimension unknowable
    SpectralField({}, 4, dimension=2)
    with pytest.raises(DomainError):
        SpectralField({(1, 0): 1.0, (0, 1): 2.0}, 4, real_valued=True)  # no conjugates


def test_liouville_norm_values():
    c = SpectralField({1: 0.5, -1: 0.5}, 2)
    assert liouville_norm_sq(c, 1.0) == pytest.approx(1.0, rel=1e-15)
    c0 = SpectralField({0: 3.0}, 1)
    for a in (-2.0, 0.0, 0.7, 5.0):
        assert liouville_norm_sq(c0, a) == pytest.approx(9.0, rel=1e-15)


def test_liouville_norm_monotone_in_a():
    rng = np.random.default_rng(11)
    c = random_field(rng, 2, 9)
    values = [liouville_norm_sq(c, a) for a in (-1.0, 0.0, 0.4, 0.5, 1.0, 2.0)]
    assert all(v2 >= v1 for v1, v2 in zip(values, values[1:]))


def test_fractional_power_basics():
    c = SpectralField({2: 1.0}, 5)
    out = apply_fractional_power(c, 1.0)
    assert out.get(2) == pytest.approx(4.0)
    assert apply_fractional_power(c, 0.0) is c
    # composition tau = -1 then +1 restores zero-mean fields
    rng = np.random.default_rng(5)
    c = random_field(rng, 1, 17)
    entries = dict(c.items())
    entries[MultiIndex((0,))] = 0j
    c = SpectralField(entries, 17, dimension=1)
    back = apply_fractional_power(apply_fractional_power(c, -1.0), 1.0)
    for idx, val in c.items():
        assert back.get(idx) == pytest.approx(val, abs=1e-14)


def test_fractional_power_zero_mode_guard():
    c = SpectralField({0: 1.0, 1: 1.0}, 2)
    with pytest.raises(ZeroModeError):
        apply_fractional_power(c, -0.5)
    # explicit zero at the zero mode is fine
    c = SpectralField({0: 0.0, 1: 1.0}, 2)
    out = apply_fractional_power(c, -0.5)
    assert out.get(1) == pytest.approx(1.0)


def test_laplacian_consistency_with_analytic_second_derivative():
    # -(d^2/dx^2) cos(3x) = 9 cos(3x)
    m = 11
    x = GridField.axis_points(m)
    c = analyze(GridField(np.cos(3 * x)), 16)
    lap = synthesize(apply_fractional_power(c, 1.0), m)
    np.testing.assert_allclose(lap.samples.real, 9.0 * np.cos(3 * x), atol=1e-10)
    # mixed: sin(2x) with eigenvalue 4
    c = analyze(GridField(np.sin(2 * x)), 16)
    lap = synthesize(apply_fractional_power(c, 1.0), m)
    np.testing.assert_allclose(lap.samples.real, 4.0 * np.sin(2 * x), atol=1e-10)


def test_derivative_symbol():
    m = 11
    x = GridField.axis_points(m)
    c = analyze(GridField(np.cos(3 * x)), 16)
    d1 = synthesize(apply_derivative_symbol(c, DerivMultiIndex((1,))), m)
    np.testing.assert_allclose(d1.samples.real, -3.0 * np.sin(3 * x), atol=1e-10)
    with pytest.raises(DomainError):
        DerivMultiIndex((2, 1))  # |alpha| = 3
    with pytest.raises(DomainError):
        DerivMultiIndex((-1, 0))


def test_embedding_constant_single_mode():
    # one mode: ratio = (1+|n|^2)^{-sigma} / (2pi)^{N/2}
    n = 3
    c = SpectralField({n: 1.0}, 10)
    got = embedding_constant([c], 1.3, DerivMultiIndex((0,)))
    want = (1.0 + 9.0) ** (-1.3) / math.sqrt(TWO_PI)
    assert got == pytest.approx(want, rel=1e-12)


def test_embedding_constant_with_derivative():
    n = 2
    c = SpectralField({n: 1.0}, 5)
    got = embedding_constant([c], 1.5, DerivMultiIndex((2,)))
    want = 4.0 * (1.0 + 4.0) ** (-1.5) / math.sqrt(TWO_PI)
    assert got == pytest.approx(want, rel=1e-12)


def test_embedding_constant_ensemble_finite_and_stable():
    rng = np.random.default_rng(17)
    fields = [random_field(rng, 1, 64) for _ in range(40)]
    c1 = embedding_constant(fields, 1.3, DerivMultiIndex((0,)))
    assert 0.0 < c1 < 10.0
    # ratio never exceeds the analytic bound sqrt(Sum (1+|n|^2)^{-2 sigma}) / (2pi)^{N/2}
    bound = math.sqrt(
        sum((1.0 + i * i) ** (-2.6) for i in range(-7, 8))
    ) / math.sqrt(TWO_PI)
    assert c1 <= bound * (1.0 + 1e-12)


def test_embedding_hypothesis_rejected_at_and_below_threshold():
    c = SpectralField({1: 1.0}, 2)
    with pytest.raises(HypothesisError):
        embedding_constant([c], 1.25, DerivMultiIndex((0,)))  # = 1 + N/4 exactly
    with pytest.raises(HypothesisError):
        embedding_constant([c], 0.8, DerivMultiIndex((0,)))
    with pytest.raises(DomainError):
        embedding_constant([], 1.5, DerivMultiIndex((0,)))
    with pytest.raises(DomainError):
        embedding_constant(
            [SpectralField({}, 2, dimension=1)], 1.5, DerivMultiIndex((0,))
        )


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=3), st.integers(min_value=0, max_value=1000))
def test_property_modes_ball_membership(dim, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 30))
    modes = modes_within(dim, k)
    assert len(set(modes)) == len(modes)
    for idx in modes:
        assert idx.norm_sq < k
    # ball symmetry
    keys = {idx.components for idx in modes}
    assert all(tuple(-c for c in comp) in keys for comp in keys)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_property_roundtrip_random_fields(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(1, 3))
    k = int(rng.integers(2, 20 if dim == 1 else 9))
    c = random_field(rng, dim, k, real=bool(rng.integers(0, 2)))
    m = 2 * math.isqrt(k - 1) + 3
    back = analyze(synthesize(c, m), k)
    for idx, val in c.items():
        assert abs(back.get(idx) - val) < 1e-12
