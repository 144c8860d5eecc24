import math

import pytest
from hypothesis import given, settings, strategies as st

from ldsim import (
    ModelParams,
    ScaledParams,
    RateOverflowError,
    normal_population,
    scale_params,
    unscale_params,
)
from oracle_helpers import rk4

# frozen from the RK4 oracle below before the closed form existed
N_AT_1_RATE_3 = 20.085536923187668


def test_scale_identity_eps_1():
    s = ScaledParams(gamma=2.5, gamma1=3.0, nu=1e-7, epsilon=1.0)
    p = scale_params(s)
    assert p.beta == 2.5
    assert p.mu == 1e-7
    assert p.alpha - p.mu == 3.0


def test_scale_direct_multiplication():
    s = ScaledParams(gamma=2.5, gamma1=3.0, nu=1e-7, epsilon=0.1)
    p = scale_params(s)
    assert p.beta == pytest.approx(0.25, rel=1e-15)
    assert p.mu == pytest.approx(1e-8, rel=1e-15)
    assert p.beta1 == pytest.approx(0.3, rel=1e-15)


def test_unscale_inverse_example():
    p = ModelParams(alpha=0.3 + 1e-8, beta=0.25, mu=1e-8)
    s = unscale_params(p, 0.1)
    assert s.gamma == pytest.approx(2.5, rel=1e-15)
    assert s.nu == pytest.approx(1e-7, rel=1e-15)
    assert s.gamma1 == pytest.approx(3.0, rel=1e-15)


_normal_rate = st.one_of(st.just(0.0), st.floats(1e-300, 50.0))


@given(
    gamma=_normal_rate,
    gamma1=st.floats(1e-6, 50.0),
    nu=_normal_rate,
    k=st.integers(-6, 0),
)
@settings(max_examples=200, deadline=None)
def test_roundtrip_exact_for_pow2_eps(gamma, gamma1, nu, k):
    # binary-exact epsilon makes the multiply/divide pair lossless away from
    # the subnormal range
    s = ScaledParams(gamma=gamma, gamma1=gamma1, nu=nu, epsilon=2.0**k)
    back = unscale_params(scale_params(s), s.epsilon)
    assert back.gamma == s.gamma
    assert back.nu == s.nu
    assert back.gamma1 == s.gamma1


@given(
    gamma=st.floats(1e-3, 50.0),
    gamma1=st.floats(1e-3, 50.0),
    nu=st.floats(1e-12, 10.0),
    epsilon=st.floats(1e-4, 1.0),
)
@settings(max_examples=200, deadline=None)
def test_roundtrip_ulp_for_general_eps(gamma, gamma1, nu, epsilon):
    # general eps cannot round-trip exactly in binary floating point; the
    # reconstruction stays within a few ulp
    s = ScaledParams(gamma=gamma, gamma1=gamma1, nu=nu, epsilon=epsilon)
    back = unscale_params(scale_params(s), epsilon)
    assert back.gamma == pytest.approx(s.gamma, rel=5e-15)
    assert back.nu == pytest.approx(s.nu, rel=5e-15)
    assert back.gamma1 == pytest.approx(s.gamma1, rel=5e-15)


def test_invariant_rejections():
    with pytest.raises(ValueError):
        ModelParams(alpha=-1.0, beta=0.0, mu=0.0)
    with pytest.raises(ValueError):
        ModelParams(alpha=1.0, beta=-0.5, mu=0.0)
    with pytest.raises(ValueError):
        ModelParams(alpha=1.0, beta=0.0, mu=2.0)
    with pytest.raises(ValueError):
        ModelParams(alpha=1.0, beta=0.0, mu=0.0, n0=0.0)
    with pytest.raises(ValueError):
        ScaledParams(gamma=1.0, gamma1=0.0, nu=0.0)
    with pytest.raises(ValueError):
        ScaledParams(gamma=1.0, gamma1=1.0, nu=0.0, epsilon=0.0)
    with pytest.raises(ValueError):
        ScaledParams(gamma=1.0, gamma1=1.0, nu=0.0, epsilon=1.5)
    with pytest.raises(ValueError):
        unscale_params(ModelParams(1.0, 0.0, 0.0), 0.0)


def test_normal_population_initial_condition():
    p = ModelParams(alpha=3.0 + 1e-7, beta=2.5, mu=1e-7)
    assert normal_population(p, 0.0) == 1.0


def test_normal_population_oracle_value():
    # dN/dt = 3N, N(0)=1 integrated by RK4 to 1e-10, frozen above
    oracle = rk4(lambda t, y: [3.0 * y[0]], [1.0], 0.0, 1.0, 200_000)[0]
    assert oracle == pytest.approx(N_AT_1_RATE_3, rel=1e-10)
    p = ModelParams(alpha=3.0 + 1e-7, beta=2.5, mu=1e-7, n0=1.0)
    assert normal_population(ModelParams(3.0, 0.0, 0.0), 1.0) == pytest.approx(
        N_AT_1_RATE_3, rel=1e-12
    )
    assert normal_population(p, 1.0) == pytest.approx(N_AT_1_RATE_3, rel=1e-7)


def test_degenerate_alpha_equals_mu():
    p = ModelParams(alpha=1.0, beta=0.5, mu=1.0, allow_degenerate=True)
    for t in (0.0, 1.0, 10.0):
        assert normal_population(p, t) == p.n0


def test_overflow_signal():
    p = ModelParams(alpha=3.0, beta=0.0, mu=0.0)
    with pytest.raises(RateOverflowError):
        normal_population(p, 1e4)


@given(
    rate=st.floats(0.01, 5.0),
    t1=st.floats(0.0, 20.0),
    t2=st.floats(0.0, 20.0),
    n0=st.floats(0.1, 100.0),
)
@settings(max_examples=200, deadline=None)
def test_semigroup_property(rate, t1, t2, n0):
    p = ModelParams(alpha=rate, beta=0.0, mu=0.0, n0=n0)
    lhs = normal_population(p, t1 + t2) * p.n0
    rhs = normal_population(p, t1) * normal_population(p, t2)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_monotone_in_time():
    p = ModelParams(alpha=2.0, beta=0.0, mu=0.5)
    values = [normal_population(p, t) for t in (0.0, 0.5, 1.0, 2.0, 5.0)]
    assert all(b > a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_scaled_population_identity(eps):
    # N(tau/eps) under scaled rates equals n0*e^{gamma1 tau}: eps cancels
    s = ScaledParams(gamma=2.5, gamma1=3.0, nu=1e-7, epsilon=eps, n0=2.0)
    p = scale_params(s)
    for tau in (0.0, 1.0, 3.3, 6.7):
        expect = s.n0 * math.exp(s.gamma1 * tau)
        assert normal_population(p, s.horizon(tau)) == pytest.approx(expect, rel=1e-12)
