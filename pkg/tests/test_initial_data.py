import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from bfburgers.initial_data import (InitialDatum, Piece, bump, bump_kernel, check_bv_c1_plus,
                                    constant_piece, from_samples, mollification_estimates,
                                    mollified_derivatives, mollify, preset, read_csv_datum,
                                    riemann, sawtooth, step)
from bfburgers.model import builtin_model
from bfburgers.viscous_solver import Grid

KERNEL = bump_kernel()


def _raw(z):
    return math.exp(-1.0 / (1.0 - z * z)) if abs(z) < 1 else 0.0


# unit-mass constant computed independently with adaptive quadrature
_C = 1.0 / integrate.quad(_raw, -1, 1, epsabs=1e-14, epsrel=1e-13)[0]


def test_kernel_normalization_matches_quad():
    assert KERNEL.normalization == pytest.approx(_C, rel=1e-12)
    assert abs(KERNEL.mass() - 1.0) < 1e-14
    assert KERNEL(np.array([1.0, -1.0, 1.5]))[0] == 0.0


def test_kernel_derivative_fd():
    z = np.linspace(-0.95, 0.95, 39)
    d = 1e-6
    fd = (KERNEL(z + d) - KERNEL(z - d)) / (2 * d)
    assert np.allclose(KERNEL.domega(z), fd, atol=1e-7)


def test_mollified_step_against_quad():
    h = 0.1
    g = Grid.from_spacing(-0.2, 0.2, 0.01)
    got = mollify(step(1.0), KERNEL, h, g).u
    # u^h(x) = int_{z > x/h} omega(z) dz
    want = [_C * integrate.quad(_raw, min(max(x / h, -1), 1), 1, epsabs=1e-15)[0] for x in g.x]
    assert np.max(np.abs(got - np.array(want))) < 1e-12


def test_mollify_preserves_mass_and_range():
    u0 = bump(1.5, 0.3, 0.8)
    g = Grid.from_spacing(-1.0, 1.6, 0.002)
    uh = mollify(u0, KERNEL, 0.05, g).u
    exact = integrate.quad(lambda x: 1.5 * math.exp(1 - 1 / (1 - ((x - 0.3) / 0.8) ** 2)),
                           -0.5, 1.1, epsabs=1e-14)[0]
    assert np.sum(uh) * g.dx == pytest.approx(exact, rel=1e-8)
    assert uh.min() >= 0.0 and uh.max() <= 1.5


def test_mollify_linear():
    g = Grid.from_spacing(-1.0, 4.0, 0.005)
    u, v = step(1.0, 0.1), sawtooth(3)
    w = u.scaled_sum(0.7, v, -1.3)
    lhs = mollify(w, KERNEL, 0.05, g).u
    rhs = 0.7 * mollify(u, KERNEL, 0.05, g).u - 1.3 * mollify(v, KERNEL, 0.05, g).u
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_mollify_rejects_bad_widths():
    g = Grid.from_spacing(-1.0, 1.0, 0.01)
    with pytest.raises(ValueError):
        mollify(step(), KERNEL, 0.0, g)
    with pytest.raises(ValueError):
        mollify(step(), KERNEL, 0.03, g)
    # non-strict mode accepts a coarse grid
    assert mollify(step(), KERNEL, 0.02, g, strict=False).u.shape == (g.n,)


def test_mollified_derivatives_of_step():
    h = 0.1
    x = np.linspace(-0.12, 0.12, 25)
    d1, d2 = mollified_derivatives(step(1.0), KERNEL, h, x)
    assert np.allclose(d1, -KERNEL(x / h) / h, atol=1e-12)
    assert np.allclose(d2, -KERNEL.domega(x / h) / h**2, atol=1e-9)


def test_mollified_derivatives_match_differences():
    u0 = sawtooth(2, 0.8, 1.0, -0.5)
    h = 0.08
    x = np.linspace(-0.7, 1.7, 97)
    d1, _ = mollified_derivatives(u0, KERNEL, h, x)
    g = Grid(-0.7, 1.7, 97)
    dd = 1e-5
    up = mollify(u0, KERNEL, h, Grid(-0.7 + dd, 1.7 + dd, 97), strict=False).u
    um = mollify(u0, KERNEL, h, Grid(-0.7 - dd, 1.7 - dd, 97), strict=False).u
    assert g.n == 97
    assert np.allclose(d1, (up - um) / (2 * dd), atol=1e-5)


def test_class_check_presets():
    for u0 in (step(), riemann(0.3, -0.2), bump(), sawtooth()):
        rep = check_bv_c1_plus(u0)
        assert rep.passed, (u0.name, rep.failures())


def test_class_check_rejects_steep_approach():
    # a jump reached with nonzero slope from the left
    pieces = [constant_piece(-math.inf, -1.0, 0.0),
              Piece(-1.0, 0.0, lambda x: 0.3 * (np.asarray(x) + 1),
                    lambda x: 0.3 + 0 * np.asarray(x), lambda x: 0 * np.asarray(x)),
              constant_piece(0.0, math.inf, 0.0)]
    rep = check_bv_c1_plus(InitialDatum(pieces, (-1.0, 0.0), "ramp"))
    assert rep.failures() == ["flat approach at jumps"]


def test_class_check_rejects_slow_tail():
    slow = [Piece(-math.inf, math.inf, lambda x: 1 / (1 + np.abs(np.asarray(x))),
                  lambda x: -np.sign(x) / (1 + np.abs(np.asarray(x))) ** 2,
                  lambda x: 2 / (1 + np.abs(np.asarray(x))) ** 3)]
    rep = check_bv_c1_plus(InitialDatum(slow, (-1.0, 1.0), "slow"))
    assert not rep["integrable outside K (sampled check)"].passed


def test_datum_structure():
    u0 = sawtooth(3, 2.0, 0.5, 1.0)
    assert np.allclose(u0.breaks, [1.0, 1.5, 2.0, 2.5])
    assert [j.size for j in u0.jumps] == pytest.approx([-2.0, -2.0, -2.0])
    assert u0.one_sided(1.5) == pytest.approx((2.0, 0.0))
    assert u0.sup == pytest.approx(2.0)
    with pytest.raises(ValueError):
        InitialDatum([constant_piece(-math.inf, 0.0, 1.0), constant_piece(0.5, math.inf, 0.0)],
                     (0, 1), "gap")


def test_integral_of_sawtooth():
    # each smoothstep tooth has area amplitude * period / 2
    assert sawtooth(4, 1.5, 0.5).integral() == pytest.approx(4 * 1.5 * 0.5 / 2, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=12))
def test_from_samples_interpolates(vals):
    x = np.linspace(0.0, 1.0, len(vals))
    j = 0.5 * (x[2] + x[3])
    u0 = from_samples(x, vals, jumps=[j])
    keep = np.abs(x - j) > 0
    assert np.allclose(u0(x[keep]), np.asarray(vals)[keep], atol=1e-12)
    assert u0(np.array([-5.0]))[0] == vals[0] and u0(np.array([5.0]))[0] == vals[-1]
    assert len(u0.jumps) <= 1


def test_read_csv_datum(tmp_path):
    p = tmp_path / "u0.csv"
    p.write_text("x,u\n0,0\n0.5,1\n1,0\n1.5,0\n")
    u0 = read_csv_datum(p, jumps=[0.75])
    assert u0(np.array([0.5]))[0] == 1.0
    assert len(u0.breaks) == 3
    with pytest.raises(ValueError):
        from_samples([0, 1], [0, 1], jumps=[3.0])


def test_preset_lookup():
    assert preset("bump", amplitude=2.0)(np.array([0.0]))[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        preset("nope")


def test_estimates_step_and_bump():
    model = builtin_model("burgers_arctan", 1.0)
    rows = mollification_estimates(step(1.0), KERNEL, [0.2, 0.1, 0.05], model)
    # total variation of a mollified unit jump is exactly 1
    assert [r.tv for r in rows] == pytest.approx([1.0] * 3, abs=1e-6)
    # h int |u''| = int |omega'| for every h
    ref = integrate.quad(lambda z: abs(float(KERNEL.domega(np.array([z]))[0])), -1, 1,
                         points=[0.0], limit=200)[0]
    assert [r.h_d2 for r in rows] == pytest.approx([ref] * 3, rel=1e-4)
    assert all(r.q_tv <= 1.0 + 2 * model.q_bar for r in rows)
    smooth = mollification_estimates(bump(), KERNEL, [0.2, 0.1, 0.05], model)
    # no jumps: the third column vanishes with h
    assert smooth[-1].h_d2 < 0.5 * smooth[0].h_d2


def test_mollify_constant_is_constant():
    g = Grid.from_spacing(-1.0, 1.0, 0.01)
    uh = mollify(riemann(0.4, 0.4), KERNEL, 0.05, g).u
    assert np.max(np.abs(uh - 0.4)) < 1e-14


@pytest.mark.parametrize("u0", [step(1.0), sawtooth(3, 2.0, 0.5, -0.2), bump(-1.2, 0.1, 0.4),
                                riemann(-0.6, 0.9)], ids=lambda u: u.name)
def test_mollify_sup_bound(u0):
    g = Grid.from_spacing(-1.0, 2.0, 0.005)
    for h in (0.2, 0.05, 0.02):
        assert np.max(np.abs(mollify(u0, KERNEL, h, g).u)) <= u0.sup + 1e-14


def test_mollify_converges_in_l1():
    u0 = sawtooth(3, 1.0, 0.5)
    g = Grid.from_spacing(-0.5, 2.0, 0.0005)
    ref = u0(g.x)
    errs = [np.sum(np.abs(mollify(u0, KERNEL, h, g).u - ref)) * g.dx for h in (0.1, 0.05, 0.025, 0.0125)]
    assert all(b < a + 1e-8 for a, b in zip(errs, errs[1:]))
    # dominated by the three jumps: roughly [u] h int |z| omega per jump
    assert errs[-1] < 3 * 0.0125


def test_three_jump_datum_passes():
    rep = check_bv_c1_plus(sawtooth(3))
    assert rep.passed
    assert rep["finite jump count"].witness == 3


def test_estimates_unit_jump_bounds():
    model = builtin_model("burgers_arctan", 0.5)
    rows = mollification_estimates(step(1.0), KERNEL, [0.1, 0.05, 0.025], model)
    assert all(1.0 - 1e-9 <= r.tv <= 1.1 for r in rows)
    # Q(u_x) runs from 0 to Q(-max) and back: at most 2 Q_bar
    assert all(r.q_tv <= 2 * model.q_bar + 1e-9 for r in rows)


def test_estimates_smooth_third_column():
    model = builtin_model("burgers_arctan", 1.0)
    u0 = bump(1.0, 0.0, 0.8)
    d2 = integrate.quad(lambda x: abs(float(u0.evaluate(np.array([x]), 2)[0])), -0.8, 0.8,
                        limit=400, epsabs=1e-10)[0]
    rows = mollification_estimates(u0, KERNEL, [0.2, 0.1, 0.05], model)
    for r in rows:
        assert r.h_d2 / r.h <= d2 * (1 + 1e-6)
