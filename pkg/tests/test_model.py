import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bfburgers.model import (ModelError, builtin_model, custom_model, derive_constants,
                             numeric_eo_split, tabulated_model, validate_model)


@pytest.mark.parametrize("name,beta", [("burgers_arctan", None), ("burgers_alg", None),
                                       ("zero_flux_beta", 3.0), ("zero_flux_beta", 2.5)])
def test_builtins_validate(name, beta):
    rep = validate_model(builtin_model(name, 0.5, beta))
    assert rep.passed, rep.failures()


def test_arctan_closed_form():
    m = builtin_model("burgers_arctan", 0.25)
    s = np.array([-3.0, -0.5, 0.0, 1.0, 7.0])
    assert np.allclose(m.Q(s), 0.5 / math.pi * np.arctan(s), rtol=0, atol=1e-15)
    assert m.q_minus_inf == -0.25 and m.q_plus_inf == 0.25
    assert np.allclose(m.f(s), s * s / 2)


def test_power_law_beta5_against_closed_form():
    # int_0^s (1+r^2)^(-5/2) dr = s (2 s^2 + 3) / (3 (1+s^2)^(3/2)), total 2/3
    m = builtin_model("zero_flux_beta", 2.0, 5.0)
    s = np.linspace(-20, 20, 81)
    exact = 2.0 * s * (2 * s * s + 3) / (2 * (1 + s * s) ** 1.5)
    assert np.max(np.abs(m.Q(s) - exact)) < 1e-13
    assert m.dQ(np.array([0.0]))[0] == pytest.approx(2.0 * 1.5)


def test_power_law_beta3_branch_matches_general():
    s = np.linspace(-50, 50, 201)
    q3 = builtin_model("zero_flux_beta", 1.0, 3.0).Q(s)
    q3b = builtin_model("zero_flux_beta", 1.0, 3.0 + 1e-12).Q(s)
    assert np.max(np.abs(q3 - q3b)) < 1e-9


def test_qinv_round_trip():
    m = builtin_model("burgers_arctan", 1.0)
    y = np.linspace(-0.99, 0.99, 41)
    assert np.allclose(m.Q(m.Qinv(y)), y, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.999, 0.999), st.floats(1.5, 6.0))
def test_qinv_power_law(y, beta):
    m = builtin_model("zero_flux_beta", 1.0, beta)
    s = m.Qinv(np.array([y]))
    assert abs(float(m.Q(s)[0]) - y) < 1e-12


def test_bad_parameters():
    with pytest.raises(ModelError):
        builtin_model("burgers_arctan", 0.0)
    with pytest.raises(ModelError):
        builtin_model("zero_flux_beta", 1.0, 1.0)
    with pytest.raises(ModelError):
        builtin_model("nope")


def test_validation_flags_broken_models():
    # unbounded Q
    lin = custom_model("lin", lambda u: u * u / 2, lambda u: u, lambda s: s,
                       lambda s: np.ones_like(s), -math.inf, math.inf)
    rep = validate_model(lin)
    assert not rep.passed
    assert not rep["saturation levels"].passed
    # Q decreasing near s = 1.5
    wiggle = custom_model("wig", lambda u: 0 * u, lambda u: 0 * u,
                          lambda s: np.arctan(s) + 2 * s * np.exp(-s * s),
                          lambda s: 1 / (1 + s * s) + 2 * (1 - 2 * s * s) * np.exp(-s * s),
                          -math.pi / 2, math.pi / 2)
    rep = validate_model(wiggle)
    assert not rep["Q' > 0"].passed
    assert rep["Q' > 0"].witness is not None
    # f(0) != 0
    shifted = custom_model("shift", lambda u: u * u / 2 + 1, lambda u: u,
                           np.arctan, lambda s: 1 / (1 + s * s), -math.pi / 2, math.pi / 2)
    assert not validate_model(shifted)["f(0)=0"].passed
    # derivative inconsistent with f
    wrong = custom_model("wrong", lambda u: u * u / 2, lambda u: 2 * u,
                         np.arctan, lambda s: 1 / (1 + s * s), -math.pi / 2, math.pi / 2)
    assert not validate_model(wrong)["f' consistent"].passed


def test_derived_constants():
    m = builtin_model("burgers_arctan", 1.0)
    c = derive_constants(m, 2.0)
    assert c.f_lip == pytest.approx(2.0, abs=1e-12)
    assert c.q1 == pytest.approx(2.0 / math.pi, rel=1e-9)
    assert c.q_bar == 1.0
    c3 = derive_constants(builtin_model("zero_flux_beta", 1.0, 3.0), 1.0)
    assert c3.f_lip == 0.0
    assert c3.q1 == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ModelError):
        derive_constants(m, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_numeric_eo_split_cubic(a, b):
    # f = u^3 - u: f' changes sign at +-1/sqrt(3)
    f = lambda u: np.asarray(u) ** 3 - np.asarray(u)  # noqa: E731
    df = lambda u: 3 * np.asarray(u) ** 2 - 1  # noqa: E731
    fp, fm = numeric_eo_split(f, df, -4, 4)
    x = np.array([a, b])
    # the parts add up to f and are monotone in the right direction
    assert np.allclose(fp(x) + fm(x), f(x), atol=1e-12)
    lo, hi = min(a, b), max(a, b)
    assert fp(np.array([hi]))[0] >= fp(np.array([lo]))[0] - 1e-12
    assert fm(np.array([hi]))[0] <= fm(np.array([lo]))[0] + 1e-12


def test_tabulated_model_is_usable():
    u = np.linspace(-3, 3, 61)
    s = np.linspace(-10, 10, 201)
    m = tabulated_model("tab", u, u * u / 2, s, np.tanh(s), -1.0, 1.0)
    rep = validate_model(m, u_range=3.0)
    assert rep.passed, rep.failures()
    assert np.allclose(m.Q(np.array([0.3])), np.tanh(0.3), atol=1e-3)
    big = m.Q(np.array([-1e5, 1e5]))
    assert big[0] > -1.0 and big[1] < 1.0


@pytest.mark.parametrize("name,beta", [("burgers_arctan", None), ("burgers_alg", None),
                                       ("zero_flux_beta", 3.0), ("zero_flux_beta", 1.5)])
def test_qinv_round_trip_wide_range(name, beta):
    m = builtin_model(name, 0.7, beta)
    s = np.concatenate([-np.logspace(-8, 4, 300), [0.0], np.logspace(-8, 4, 300)])
    err = np.abs(m.Qinv(m.Q(s)) - s)
    # one ulp of Q(s) moves s by spacing(Q)/Q'(s); where that exceeds the
    # target the round trip is limited by double precision, not by the solver
    floor = np.spacing(np.abs(m.Q(s))) / m.dQ(s)
    well = floor <= 1e-11 * (1 + np.abs(s))
    assert np.all(err[well] <= 1e-10 * (1 + np.abs(s[well])))
    assert np.all(err[~well] <= 4 * floor[~well])
    if name == "burgers_arctan" or beta == 1.5:
        assert well.all()


@pytest.mark.parametrize("name,beta", [("burgers_arctan", None), ("burgers_alg", None),
                                       ("zero_flux_beta", 3.0)])
def test_strict_saturation_on_probe_grid(name, beta):
    m = builtin_model(name, 1.3, beta)
    s = np.concatenate([-np.logspace(-6, 2, 200), np.logspace(-6, 2, 200)])
    q = m.Q(s)
    assert np.all(q > m.q_minus_inf) and np.all(q < m.q_plus_inf)
    assert np.all(m.dQ(s) > 0)


def test_derived_constants_monotone_in_bound():
    m = custom_model("cubic", lambda u: np.asarray(u) ** 3 - np.asarray(u),
                     lambda u: 3 * np.asarray(u) ** 2 - 1, np.arctan,
                     lambda s: 1 / (1 + s * s), -math.pi / 2, math.pi / 2)
    Ms = [0.1, 0.3, 0.5, 0.8, 1.0, 2.0]
    lips = [derive_constants(m, M).f_lip for M in Ms]
    assert all(b >= a for a, b in zip(lips, lips[1:]))
    # |3u^2 - 1| on [-M, M]: 1 until M = sqrt(2/3), then 3M^2 - 1
    want = [max(1.0, 3 * M * M - 1) for M in Ms]
    assert lips == pytest.approx(want, rel=1e-9)
    burgers = builtin_model("burgers_arctan", 1.0)
    assert derive_constants(burgers, 1.0).f_lip == pytest.approx(1.0, abs=1e-12)
    assert derive_constants(burgers, 1.0).q1 == pytest.approx(2 / math.pi, rel=1e-9)
    assert derive_constants(builtin_model("zero_flux_beta", 1.0, 3.0), 5.0).f_lip == 0.0
