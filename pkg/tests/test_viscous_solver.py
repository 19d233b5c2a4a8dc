import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bfburgers.initial_data import riemann
from bfburgers.model import builtin_model, derive_constants
from bfburgers.viscous_solver import (Grid, GridField, NumericalInstability, SolverConfig,
                                      apriori_checks, epsilon_continuation, l1_distance, solve,
                                      stable_dt, step)


def test_grid_basics():
    g = Grid.from_spacing(-1.0, 1.0, 0.1)
    assert g.n == 21 and g.dx == pytest.approx(0.1)
    with pytest.raises(ValueError):
        Grid(0.0, 1.0, 5)
    with pytest.raises(ValueError):
        GridField(g, 0.0, np.zeros(3))
    with pytest.raises(ValueError):
        SolverConfig(snapshot_times=(2.0,), t_end=1.0)


def test_single_step_by_hand(burgers):
    # three interior cells, outflow ghosts copy the end values
    g = Grid(0.0, 15.0, 16)
    u = np.zeros(16)
    u[6:9] = [0.5, -0.25, 1.0]
    dt, eps = 0.05, 0.1
    new = step(GridField(g, 0.0, u), burgers, SolverConfig(epsilon=eps), dt).u

    def F(a, b):
        return 0.5 * max(a, 0) ** 2 + 0.5 * min(b, 0) ** 2

    def G(a, b):
        s = b - a
        return 2 / math.pi * math.atan(s) + eps * s

    ue = np.concatenate([[u[0]], u, [u[-1]]])
    want = [u[i] - dt * ((F(ue[i + 1], ue[i + 2]) - G(ue[i + 1], ue[i + 2]))
                         - (F(ue[i], ue[i + 1]) - G(ue[i], ue[i + 1]))) for i in range(16)]
    assert np.allclose(new, want, atol=1e-15)


def test_constant_state_is_stationary(burgers):
    g = Grid(-1.0, 1.0, 41)
    traj = solve(GridField(g, 0.0, np.full(41, 0.7)), burgers, SolverConfig(epsilon=0.01, t_end=0.3))
    assert np.array_equal(traj.final.u, np.full(41, 0.7))


def test_stable_dt_formula(burgers):
    g = Grid.from_spacing(-1.0, 1.0, 0.02)
    u = GridField(g, 0.0, np.linspace(-1.5, 0.5, g.n))
    cfg = SolverConfig(epsilon=0.03, cfl_safety=0.5)
    c = derive_constants(burgers, 1.5)
    assert stable_dt(u, burgers, cfg) == pytest.approx(
        0.5 / (c.f_lip / g.dx + 2 * (c.q1 + 0.03) / g.dx**2), rel=1e-12)


def test_small_amplitude_heat_limit():
    # f = 0 and Q(s) ~ s near 0: a tiny Gaussian follows the heat equation
    model = builtin_model("zero_flux_beta", 1.0, 3.0)
    g = Grid.from_spacing(-5.0, 5.0, 0.02)
    a, s0, T = 1e-4, 0.5, 0.25
    traj = solve(GridField(g, 0.0, a * np.exp(-(g.x / s0) ** 2)), model, SolverConfig(t_end=T))
    var = s0**2 + 4 * T
    exact = a * s0 / math.sqrt(var) * np.exp(-g.x**2 / var)
    assert np.max(np.abs(traj.final.u - exact)) < 1e-3 * a


def test_rarefaction_with_weak_dissipation():
    # the corners are smeared over sqrt(dx t): the L1 error must shrink like dx^(1/2) or faster
    model = builtin_model("burgers_arctan", 1e-4)
    errs = []
    for dx in (0.01, 0.005, 0.0025):
        g = Grid.from_spacing(-1.0, 2.0, dx)
        traj = solve(riemann(0.0, 1.0).sample(g), model, SolverConfig(t_end=1.0))
        errs.append(np.sum(np.abs(traj.final.u - np.clip(g.x, 0.0, 1.0))) * g.dx)
    assert errs[0] < 0.03
    assert all(math.log2(a / b) > 0.45 for a, b in zip(errs, errs[1:]))


def test_periodic_mass_exact(burgers):
    g = Grid(0.0, 1.0, 101)
    u0 = np.sin(2 * np.pi * g.x) + 0.3
    traj = solve(GridField(g, 0.0, u0), burgers,
                 SolverConfig(epsilon=0.01, boundary="periodic", t_end=0.5))
    assert np.sum(traj.final.u) == pytest.approx(np.sum(u0), abs=1e-11)


def test_snapshots_and_determinism(burgers):
    g = Grid.from_spacing(-1.0, 1.0, 0.02)
    u0 = riemann(1.0, 0.0).sample(g)
    cfg = SolverConfig(epsilon=0.02, t_end=0.4, snapshot_times=(0.0, 0.1, 0.25))
    a, b = solve(u0, burgers, cfg), solve(u0, burgers, cfg)
    assert [s.t for s in a.snapshots] == [0.0, 0.1, 0.25, 0.4]
    assert all(np.array_equal(x.u, y.u) for x, y in zip(a.snapshots, b.snapshots))
    assert a.at(0.25).t == 0.25
    with pytest.raises(KeyError):
        a.at(0.3)


def test_oversized_step_is_caught(burgers):
    g = Grid.from_spacing(-1.0, 1.0, 0.01)
    u0 = riemann(1.0, 0.0).sample(g)
    cfg = SolverConfig(epsilon=0.0, t_end=0.5, dt=50 * stable_dt(u0, burgers, SolverConfig()))
    with pytest.raises(NumericalInstability):
        solve(u0, burgers, cfg)


def test_apriori_checks_pass(riemann_run):
    checks = apriori_checks(riemann_run)
    assert set(checks) == {"max_principle", "tv_nonincrease", "l1_nonincrease",
                           "qflux_bv_bounded", "mass_conservation"}
    assert all(ok for ok, _ in checks.values()), checks


def test_epsilon_continuation(burgers):
    g = Grid.from_spacing(-1.0, 2.0, 0.02)
    u0 = riemann(1.0, 0.0).sample(g)
    cfg = SolverConfig(t_end=0.5)
    runs = epsilon_continuation(u0, burgers, cfg, [0.1, 0.05, 0.0])
    assert [r.config.epsilon for r in runs] == [0.1, 0.05, 0.0]
    # the viscous term only smears: differences shrink as epsilon does
    d1 = l1_distance(runs[0].final, runs[2].final)
    d2 = l1_distance(runs[1].final, runs[2].final)
    assert d2 < d1
    with pytest.raises(ValueError):
        epsilon_continuation(u0, burgers, cfg, [0.1, 0.2])
    with pytest.raises(ValueError):
        epsilon_continuation(u0, burgers, cfg, [-0.1])


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 0.05))
def test_maximum_principle_random_riemann(ul, ur, eps):
    model = builtin_model("burgers_arctan", 0.5)
    g = Grid.from_spacing(-1.0, 1.0, 0.04)
    traj = solve(riemann(ul, ur).sample(g), model, SolverConfig(epsilon=eps, t_end=0.2))
    lo, hi = min(ul, ur), max(ul, ur)
    assert traj.final.u.min() >= lo - 1e-12 and traj.final.u.max() <= hi + 1e-12


def test_stable_dt_examples():
    # burgers_alg has Q'(0) = 1 = Q1; sup|u| = 1 gives F = 1
    alg = builtin_model("burgers_alg", 1.0)
    g = Grid.from_spacing(0.0, 1.0, 0.01)
    u = GridField(g, 0.0, np.linspace(-1.0, 0.5, g.n))
    assert stable_dt(u, alg, SolverConfig(epsilon=0.01, cfl_safety=0.4)) == pytest.approx(0.4 / (100 + 20200), rel=1e-9)
    heat = builtin_model("zero_flux_beta", 1.0, 3.0)
    g = Grid.from_spacing(0.0, 2.0, 0.1)
    u = GridField(g, 0.0, np.sin(g.x))
    assert stable_dt(u, heat, SolverConfig(epsilon=0.0, cfl_safety=0.5)) == pytest.approx(2.5e-3, rel=1e-9)
    dts = [stable_dt(u, heat, SolverConfig(cfl_safety=c)) for c in (0.8, 0.4, 0.1, 0.01)]
    assert all(b < a for a, b in zip(dts, dts[1:]))
    with pytest.raises(NumericalInstability):
        stable_dt(_nan_field(g), heat, SolverConfig())


def _nan_field(g):
    f = GridField(g, 0.0, np.zeros(g.n))
    f.u[3] = np.nan
    return f


def test_one_step_is_heat_stencil_for_tiny_slopes():
    model = builtin_model("zero_flux_beta", 1.0, 3.0)
    g = Grid.from_spacing(-1.0, 1.0, 0.05)
    a = 1e-6
    u = a * np.maximum(1 - np.abs(g.x) / 0.5, 0.0)
    eps = 0.02
    dt = 0.5 * stable_dt(GridField(g, 0.0, u), model, SolverConfig(epsilon=eps))
    new = step(GridField(g, 0.0, u), model, SolverConfig(epsilon=eps), dt).u
    lap = np.zeros_like(u)
    lap[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
    heat = u + (1.0 + eps) * dt / g.dx**2 * lap
    # Q(s) = s - s^3/2 + ..., so the defect is third order in the slope
    assert np.max(np.abs(new - heat)) < 1e-12 * a


def test_l1_distance_examples():
    g = Grid.from_spacing(0.0, 4.0, 0.01)
    a = GridField(g, 0.0, np.sin(g.x))
    assert l1_distance(a, a) == 0.0
    c, win = 0.3, (g.x >= 1.0) & (g.x < 2.5)
    b = GridField(g, 0.0, np.sin(g.x) + c * win)
    assert abs(l1_distance(a, b) - c * 1.5) <= g.dx * c + 1e-12
    with pytest.raises(ValueError):
        l1_distance(a, GridField(Grid(0.0, 4.0, 50), 0.0, np.zeros(50)))


def test_epsilon_sweep_is_cauchy(burgers_sharp):
    g = Grid.from_spacing(-1.0, 2.0, 0.01)
    u0 = riemann(1.0, 0.0).sample(g)
    cfg = SolverConfig(t_end=0.6)
    runs = epsilon_continuation(u0, burgers_sharp, cfg, [4 * g.dx, 2 * g.dx, g.dx])
    d01 = l1_distance(runs[0].final, runs[1].final)
    d12 = l1_distance(runs[1].final, runs[2].final)
    assert d12 < d01
    single = epsilon_continuation(u0, burgers_sharp, cfg, [g.dx])
    assert len(single) == 1
    assert np.array_equal(single[0].final.u, runs[2].final.u)
    assert np.array_equal(single[0].final.u, solve(u0, burgers_sharp, SolverConfig(epsilon=g.dx, t_end=0.6)).final.u)


def test_outflow_domain_doubling(burgers_sharp):
    dx, T = 0.01, 0.5
    small = Grid.from_spacing(-1.0, 2.0, dx)
    big = Grid.from_spacing(-4.0, 5.0, dx)
    cfg = SolverConfig(epsilon=dx, t_end=T)
    a = solve(riemann(1.0, 0.0).sample(small), burgers_sharp, cfg).final.u
    b = solve(riemann(1.0, 0.0).sample(big), burgers_sharp, cfg).final.u
    off = int(round((small.x_left - big.x_left) / dx))
    assert np.max(np.abs(a - b[off:off + small.n])) < 1e-10


def test_sharp_riemann_bounds(riemann_run):
    # unit downward jump: sup stays 1 and TV stays 1
    for s in riemann_run.snapshots:
        assert s.u.max() <= 1.0 + 1e-9 and s.u.min() >= -1e-9
        assert np.sum(np.abs(np.diff(s.u))) <= 1.0 + 1e-8
