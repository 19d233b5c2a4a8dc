"""Explicit conservative scheme for ``u_t + f(u)_x = Q(u_x)_x + eps u_xx``.

Convection uses the Engquist-Osher flux, diffusion the flux
``G = Q(D) + eps D`` of the one-sided slope ``D`` at each interface::

    u_i <- u_i - dt/dx (F_{i+1/2} - F_{i-1/2}) + dt/dx (G_{i+1/2} - G_{i-1/2})

With ``dt <= 1 / (F(M)/dx + 2 (Q_1 + eps)/dx^2)`` the update is monotone, so
it obeys the maximum principle, does not increase total variation and
contracts L1 distances between solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from bfburgers.model import ModelConstants, ModelSpec, derive_constants

# tolerance above the maximum-principle bound before a run is aborted
INSTABILITY_TOL = 1e-9


class NumericalInstability(RuntimeError):
    pass


# {{{ grid and state

@dataclass(frozen=True)
class Grid:
    x_left: float
    x_right: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 16:
            raise ValueError(f"grid needs at least 16 nodes, got n={self.n}")
        if not self.x_right > self.x_left:
            raise ValueError(f"empty grid interval [{self.x_left}, {self.x_right}]")

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_left, self.x_right, self.n)

    @classmethod
    def from_spacing(cls, x_left, x_right, dx):
        n = int(round((x_right - x_left) / dx)) + 1
        return cls(x_left, x_left + (n - 1) * dx, n)


@dataclass
class GridField:
    grid: Grid
    t: float
    u: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.u.shape != (self.grid.n,):
            raise ValueError(f"field has {self.u.shape} values for {self.grid.n} nodes")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("field contains non-finite values")

    @property
    def x(self):
        return self.grid.x


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 0.0
    cfl_safety: float = 0.4
    boundary: str = "outflow"
    t_end: float = 1.0
    snapshot_times: Sequence[float] = ()
    # fixed step (must respect the stability bound); None picks stable_dt
    dt: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.boundary not in ("outflow", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if any(t < 0 or t > self.t_end for t in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, t_end]")


@dataclass
class DiagnosticsReport:
    sup_norm_series: list = field(default_factory=list)
    l1_norm_series: list = field(default_factory=list)
    tv_series: list = field(default_factory=list)
    qflux_bv_series: list = field(default_factory=list)
    mass_series: list = field(default_factory=list)
    dt_series: list = field(default_factory=list)
    t_series: list = field(default_factory=list)
    # cumulative mass entering through the boundary
    inflow_series: list = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    u_min0: float = 0.0
    u_max0: float = 0.0

    def __len__(self):
        return len(self.dt_series)

    def rows(self):
        for k in range(len(self)):
            yield (k + 1, self.t_series[k], self.dt_series[k], self.sup_norm_series[k],
                   self.l1_norm_series[k], self.tv_series[k], self.qflux_bv_series[k],
                   self.mass_series[k])


@dataclass
class Trajectory:
    initial: GridField
    snapshots: list
    report: DiagnosticsReport
    model: ModelSpec
    config: SolverConfig
    constants: Optional[ModelConstants] = None

    @property
    def final(self) -> GridField:
        return self.snapshots[-1] if self.snapshots else self.initial

    def at(self, t, tol=1e-12):
        for snap in self.snapshots:
            if abs(snap.t - t) <= tol * max(1.0, abs(t)):
                return snap
        raise KeyError(t)

# }}}


# {{{ scheme

def stable_dt(state: GridField, model: ModelSpec, config: SolverConfig,
              constants: Optional[ModelConstants] = None) -> float:
    if not np.all(np.isfinite(state.u)):
        raise NumericalInstability("non-finite state")
    if constants is None:
        M = max(float(np.max(np.abs(state.u))), 1e-300)
        constants = derive_constants(model, M)
    dx = state.grid.dx
    rate = constants.f_lip / dx + 2.0 * (constants.q1 + config.epsilon) / dx**2
    return config.cfl_safety / rate


class _Stepper:
    """Interface fluxes for one model/grid/boundary combination."""

    def __init__(self, model: ModelSpec, grid: Grid, config: SolverConfig, bound=10.0):
        self.model = model
        self.dx = grid.dx
        self.eps = config.epsilon
        self.periodic = config.boundary == "periodic"
        self.f_plus, self.f_minus = model.eo_split(-bound, bound)

    def fluxes(self, u):
        if self.periodic:
            ue = np.concatenate((u[-1:], u, u[:1]))
        else:
            ue = np.concatenate((u[:1], u, u[-1:]))
        a = ue[:-1]
        b = ue[1:]
        F = self.f_plus(a) + self.f_minus(b)
        D = (b - a) / self.dx
        G = self.model.Q(D) + self.eps * D
        return F, G

    def advance(self, u, dt, fluxes=None):
        F, G = self.fluxes(u) if fluxes is None else fluxes
        H = F - G
        lam = dt / self.dx
        return u - lam * (H[1:] - H[:-1]), dt * (H[0] - H[-1])


def step(state: GridField, model: ModelSpec, config: SolverConfig, dt: float) -> GridField:
    """One forward-Euler step of the conservative scheme."""
    stepper = _Stepper(model, state.grid, config, bound=_split_bound(state.u))
    u_new, _ = stepper.advance(state.u, dt)
    _check_bounds(u_new, float(np.min(state.u)), float(np.max(state.u)), state.t + dt)
    return GridField(state.grid, state.t + dt, u_new)


def _split_bound(u):
    return 1.0 + 2.0 * float(np.max(np.abs(u)))


def _check_bounds(u, lo, hi, t):
    if not np.all(np.isfinite(u)):
        raise NumericalInstability(f"non-finite values at t={t!r}")
    umax, umin = float(np.max(u)), float(np.min(u))
    if umax > hi + INSTABILITY_TOL or umin < lo - INSTABILITY_TOL:
        raise NumericalInstability(
            f"maximum principle violated at t={t!r}: range [{umin!r}, {umax!r}] "
            f"exceeds initial range [{lo!r}, {hi!r}]")


def field_diagnostics(u, stepper: _Stepper, G=None):
    dx = stepper.dx
    if G is None:
        _, G = stepper.fluxes(u)
    return {
        "sup": float(np.max(np.abs(u))),
        "l1": float(np.sum(np.abs(u)) * dx),
        "tv": float(np.sum(np.abs(np.diff(u)))),
        "qbv": float(np.sum(np.abs(np.diff(G)))),
        "mass": float(np.sum(u) * dx),
    }


def solve(u0: GridField, model: ModelSpec, config: SolverConfig) -> Trajectory:
    """Advance ``u0`` to ``config.t_end`` recording snapshots and diagnostics.

    The step is fixed by the initial sup-norm (the maximum principle keeps
    it valid) and shortened to land on every snapshot time.
    """
    grid = u0.grid
    u = u0.u.copy()
    M = max(float(np.max(np.abs(u))), 1e-12)
    constants = derive_constants(model, M)
    dt_max = config.dt if config.dt is not None else stable_dt(u0, model, config, constants)
    if not dt_max > 0:
        raise NumericalInstability(f"non-positive time step {dt_max!r}")
    stepper = _Stepper(model, grid, config, bound=_split_bound(u))

    rep = DiagnosticsReport(u_min0=float(np.min(u)), u_max0=float(np.max(u)))
    fluxes = stepper.fluxes(u)
    rep.initial = field_diagnostics(u, stepper, fluxes[1])

    targets = sorted(set(float(t) for t in config.snapshot_times) | {float(config.t_end)})
    requested = set(float(t) for t in config.snapshot_times)
    snapshots = []
    if 0.0 in requested:
        snapshots.append(GridField(grid, 0.0, u.copy()))

    t = float(u0.t)
    inflow = 0.0
    for target in targets:
        while t < target:
            # the step count to the next target decides the step length
            n_left = math.ceil((target - t) / dt_max * (1.0 - 1e-12))
            dt = dt_max if n_left > 1 else target - t
            u, bflux = stepper.advance(u, dt, fluxes)
            inflow += bflux
            t = target if n_left <= 1 else t + dt
            _check_bounds(u, rep.u_min0, rep.u_max0, t)
            fluxes = stepper.fluxes(u)
            d = field_diagnostics(u, stepper, fluxes[1])
            rep.t_series.append(t)
            rep.dt_series.append(dt)
            rep.sup_norm_series.append(d["sup"])
            rep.l1_norm_series.append(d["l1"])
            rep.tv_series.append(d["tv"])
            rep.qflux_bv_series.append(d["qbv"])
            rep.mass_series.append(d["mass"])
            rep.inflow_series.append(inflow)
        if target in requested:
            if target > 0.0:
                snapshots.append(GridField(grid, target, u.copy()))
        else:
            # t_end is always kept
            snapshots.append(GridField(grid, target, u.copy()))
    return Trajectory(u0, snapshots, rep, model, config, constants)

# }}}


# {{{ comparison and families of runs

def l1_distance(a: GridField, b: GridField) -> float:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    return float(np.sum(np.abs(a.u - b.u)) * a.grid.dx)


def epsilon_continuation(u0: GridField, model: ModelSpec, config: SolverConfig,
                         eps_list: Sequence[float]) -> list:
    eps_list = [float(e) for e in eps_list]
    if any(e < 0 for e in eps_list):
        raise ValueError("viscosities must be non-negative")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    out = []
    for eps in eps_list:
        cfg = SolverConfig(epsilon=eps, cfl_safety=config.cfl_safety,
                           boundary=config.boundary, t_end=config.t_end,
                           snapshot_times=tuple(config.snapshot_times), dt=config.dt)
        out.append(solve(u0, model, cfg))
    return out

# }}}


# {{{ a priori estimate checks

def apriori_checks(traj: Trajectory, mass_tol=1e-10, tv_tol=1e-8, qbv_margin=0.10):
    """Evaluate the discrete a priori estimates on a finished run.

    Returns a mapping ``name -> (passed, worst_excess)``.  The L1 bound is
    only meaningful when no mass enters through the boundary, so it is
    checked against ``sum |u_0| dx`` plus the absolute boundary inflow.
    """
    rep = traj.report
    init = rep.initial
    out = {}
    sup = np.asarray(rep.sup_norm_series)
    bound = max(abs(rep.u_min0), abs(rep.u_max0))
    excess = float(np.max(sup - bound)) if sup.size else 0.0
    out["max_principle"] = (excess <= INSTABILITY_TOL, excess)

    tv = np.asarray([init["tv"]] + list(rep.tv_series))
    excess = float(np.max(np.diff(tv))) if tv.size > 1 else 0.0
    out["tv_nonincrease"] = (excess <= tv_tol, excess)

    inflow = np.asarray(rep.inflow_series)
    l1 = np.asarray(rep.l1_norm_series)
    if l1.size:
        excess = float(np.max(l1 - init["l1"] - np.abs(inflow)))
    else:
        excess = 0.0
    out["l1_nonincrease"] = (excess <= tv_tol, excess)

    qbv = np.asarray(rep.qflux_bv_series)
    excess = float(np.max(qbv - (1.0 + qbv_margin) * init["qbv"])) if qbv.size else 0.0
    out["qflux_bv_bounded"] = (excess <= 0.0, excess)

    mass = np.asarray(rep.mass_series)
    if mass.size:
        scale = 1.0 + init["l1"]
        excess = float(np.max(np.abs(mass - init["mass"] - inflow)) / scale)
    else:
        excess = 0.0
    out["mass_conservation"] = (excess <= mass_tol, excess)
    return out

# }}}

# vim: foldmethod=marker
