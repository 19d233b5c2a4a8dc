"""Post-processing of computed fields: the limit flux, shocks and the weak form.

``q_lim_profile`` reconstructs the limit of ``Q(u_x)`` from centered
difference quotients over a sweep of half-widths.  Shocks are steep runs
of cells; tracked shocks are checked against the chord speed and the
chord admissibility inequality.  ``weak_residual`` evaluates the integral
identity against a bank of smooth space-time bumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from bfburgers.model import ModelSpec
from bfburgers.viscous_solver import GridField, Trajectory


def _fn(f):
    return f.f if isinstance(f, ModelSpec) else f


# {{{ Q_lim reconstruction

@dataclass
class QLimProfile:
    x_nodes: np.ndarray
    q_values: np.ndarray
    h_used: np.ndarray
    saturation_flags: np.ndarray     # |q| within tol of the saturation level
    unsaturated: np.ndarray          # sweep never settled; value from the smallest h
    t: float = 0.0

    @property
    def x(self):
        return self.x_nodes


def q_lim_profile(state: GridField, model: ModelSpec, h_sweep: Optional[Sequence[float]] = None,
                  tol_sat: Optional[float] = None, sat_tol: float = 2e-2) -> QLimProfile:
    """``Q`` of centered quotients ``(u(x+h) - u(x-h)) / 2h`` over a sweep of ``h``.

    At each node the value is taken at the smallest ``h`` for which the
    next sweep value differs by less than ``tol_sat``.  Values beyond the
    grid ends are continued by the edge values.
    """
    dx = state.grid.dx
    if h_sweep is None:
        h_sweep = [dx, 2 * dx, 4 * dx, 8 * dx]
    h_sweep = np.asarray(h_sweep, dtype=np.float64)
    if h_sweep.size < 1 or np.any(np.diff(h_sweep) <= 0):
        raise ValueError("h_sweep must be increasing")
    ks = np.rint(h_sweep / dx).astype(int)
    if np.any(ks < 1) or np.any(np.abs(ks * dx - h_sweep) > 1e-9 * dx):
        raise ValueError("h_sweep entries must be positive multiples of the grid spacing")
    span = model.q_plus_inf - model.q_minus_inf
    if tol_sat is None:
        tol_sat = 1e-3 * span

    u = state.u
    pad = int(ks[-1])
    up = np.concatenate([np.full(pad, u[0]), u, np.full(pad, u[-1])])
    n = u.size
    qs = np.empty((ks.size, n))
    for j, k in enumerate(ks):
        quot = (up[pad + k:pad + k + n] - up[pad - k:pad - k + n]) / (2.0 * k * dx)
        qs[j] = model.Q(quot)
    qs = np.clip(qs, model.q_minus_inf, model.q_plus_inf)

    q = qs[0].copy()
    h_used = np.full(n, h_sweep[0])
    settled = np.zeros(n, dtype=bool)
    if ks.size == 1:
        settled[:] = True
    for j in range(ks.size - 1):
        ok = (~settled) & (np.abs(qs[j + 1] - qs[j]) < tol_sat)
        q[ok] = qs[j, ok]
        h_used[ok] = h_sweep[j]
        settled |= ok
    near_sat = ((q - model.q_minus_inf) <= sat_tol * span) | ((model.q_plus_inf - q) <= sat_tol * span)
    return QLimProfile(state.x.copy(), q, h_used, near_sat, ~settled, state.t)


def continuity_modulus(profile: QLimProfile) -> float:
    """Largest jump of the q-profile between neighbouring nodes."""
    if profile.q_values.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(profile.q_values))))


def q_discontinuities(profile: QLimProfile, tol: float):
    """Node intervals where the q-profile jumps by more than ``tol``."""
    d = np.abs(np.diff(profile.q_values))
    idx = np.flatnonzero(d > tol)
    return [(float(profile.x_nodes[i]), float(profile.x_nodes[i + 1]), float(d[i])) for i in idx]

# }}}


# {{{ shocks

@dataclass
class Shock:
    x: float
    u_minus: float
    u_plus: float
    cells: tuple        # first and last steep cell
    node: int           # node with the steepest centered quotient

    def __iter__(self):
        return iter((self.x, self.u_minus, self.u_plus))


def detect_shocks(state: GridField, model: Optional[ModelSpec] = None,
                  slope_threshold: Optional[float] = None) -> list:
    """Steep runs of cells, each merged into one shock.

    Cells with ``|u_{i+1} - u_i| / dx`` above the threshold (default
    ``0.2 / dx``) and of one sign form a run.  The side states are read
    where the slope first drops below a tenth of the threshold.
    """
    dx = state.grid.dx
    thr = 0.2 / dx if slope_threshold is None else float(slope_threshold)
    u = state.u
    x = state.x
    D = np.diff(u) / dx
    steep = np.abs(D) > thr
    sign = np.sign(D)
    shocks = []
    i = 0
    n = D.size
    while i < n:
        if not steep[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and steep[j + 1] and sign[j + 1] == sign[i]:
            j += 1
        lo = i - 1
        while lo >= 0 and abs(D[lo]) >= 0.1 * thr and sign[lo] == sign[i]:
            lo -= 1
        hi = j + 1
        while hi < n and abs(D[hi]) >= 0.1 * thr and sign[hi] == sign[i]:
            hi += 1
        u_minus = float(u[lo + 1])
        u_plus = float(u[hi])
        # location: crossing of the mid value inside the steep region
        mid = 0.5 * (u_minus + u_plus)
        seg_u = u[lo + 1:hi + 1]
        seg_x = x[lo + 1:hi + 1]
        k = np.flatnonzero((seg_u[:-1] - mid) * (seg_u[1:] - mid) <= 0)
        if k.size:
            k = int(k[np.argmax(np.abs(np.diff(seg_u))[k])])
            du = seg_u[k + 1] - seg_u[k]
            xs = seg_x[k] + (mid - seg_u[k]) / du * dx if du != 0 else seg_x[k]
        else:
            xs = 0.5 * (x[i] + x[j + 1])
        c = np.zeros(u.size)
        c[1:-1] = np.abs(u[2:] - u[:-2])
        node = int(i + np.argmax(c[i:j + 2]))
        if u_minus != u_plus:
            shocks.append(Shock(float(xs), u_minus, u_plus, (i, j), node))
        i = max(j + 1, hi)
    return shocks


@dataclass
class EVerdict:
    satisfied: bool
    worst_violation: float
    worst_at: float
    u_minus: float
    u_plus: float

    def __bool__(self):
        return self.satisfied


def condition_E_check(f, u_minus: float, u_plus: float, n_grid: int = 1001,
                      tol: float = 1e-12) -> EVerdict:
    """Chord inequality between the two states.

    With ``l(u) = f(u-) + (u - u-) (f(u+) - f(u-)) / (u+ - u-)`` a
    decreasing jump needs ``l >= f`` and an increasing one ``l <= f`` on
    the interval between the states.  The worst violation is reported as
    a nonnegative number (zero when satisfied).
    """
    f = _fn(f)
    if u_minus == u_plus:
        raise ValueError("condition E needs two distinct states")
    if n_grid < 101:
        raise ValueError("n_grid must be at least 101")
    fm = float(f(np.array([u_minus]))[0])
    fp = float(f(np.array([u_plus]))[0])
    slope = (fp - fm) / (u_plus - u_minus)
    # violation > 0 where the inequality fails
    orient = 1.0 if u_minus > u_plus else -1.0

    def violation(v):
        v = np.asarray(v, dtype=np.float64)
        chord = fm + (v - u_minus) * slope
        return orient * (f(v) - chord)

    a, b = min(u_minus, u_plus), max(u_minus, u_plus)
    grid = np.linspace(a, b, n_grid)
    vals = violation(grid)
    vals[0] = vals[-1] = 0.0
    k = int(np.argmax(vals))
    at, worst = float(grid[k]), float(vals[k])
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda v: -float(violation(np.array([v]))[0]),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12 * (1.0 + abs(at))})
        if -res.fun > worst:
            at, worst = float(res.x), float(-res.fun)
    scale = 1.0 + abs(fm) + abs(fp)
    ok = worst <= tol * scale
    return EVerdict(ok, max(worst, 0.0), at, float(u_minus), float(u_plus))


@dataclass
class ShockRecord:
    times: np.ndarray
    locations: np.ndarray
    u_minus: np.ndarray
    u_plus: np.ndarray
    measured_speed: np.ndarray
    chord_speed: np.ndarray
    hugoniot_residual: np.ndarray
    admissibility: list = field(default_factory=list)   # EVerdict per record
    truncated: bool = False

    @property
    def admissible(self):
        return all(v.satisfied for v in self.admissibility)

    @property
    def fitted_speed(self):
        if self.times.size < 2:
            return float("nan")
        return float(np.polyfit(self.times, self.locations, 1)[0])

    @property
    def max_residual(self):
        r = self.hugoniot_residual[np.isfinite(self.hugoniot_residual)]
        return float(np.max(r)) if r.size else float("nan")

    def as_dict(self):
        return {
            "times": self.times.tolist(), "locations": self.locations.tolist(),
            "u_minus": self.u_minus.tolist(), "u_plus": self.u_plus.tolist(),
            "measured_speed": self.measured_speed.tolist(), "chord_speed": self.chord_speed.tolist(),
            "hugoniot_residual": self.hugoniot_residual.tolist(),
            "fitted_speed": self.fitted_speed, "admissible": self.admissible,
            "worst_E_violation": max((v.worst_violation for v in self.admissibility), default=0.0),
            "truncated": self.truncated,
        }


def tracking_threshold(trajectory: Trajectory) -> float:
    """Default slope threshold for shocks in a viscous run: ``0.05 / max(dx, eps)``.

    A shock layer is a few ``max(dx, eps)`` wide, so its slope scales with
    the inverse of that width rather than with ``1 / dx`` alone.
    """
    g = (trajectory.snapshots[0] if trajectory.snapshots else trajectory.initial).grid
    eps = getattr(trajectory.config, "epsilon", 0.0) or 0.0
    return 0.05 / max(g.dx, eps)


def track_and_check_hugoniot(trajectory: Trajectory, model: Optional[ModelSpec] = None,
                             slope_threshold: Optional[float] = None,
                             max_shift: Optional[float] = None, include_initial: bool = False,
                             min_points: int = 3) -> list:
    """Follow shocks through the snapshots and compare speeds with chord slopes.

    Shocks are matched to the nearest predicted location (previous position
    advanced by the chord speed).  A track that loses its shock before the
    last snapshot is marked truncated.  Tracks shorter than ``min_points``
    are dropped.  The default slope threshold comes from
    ``tracking_threshold``, low enough to catch shock layers smeared over a
    few cells by the viscosity.
    """
    model = trajectory.model if model is None else model
    states = list(trajectory.snapshots)
    if include_initial:
        states = [trajectory.initial] + states
    states = sorted(states, key=lambda s: s.t)
    if not states:
        return []
    dx = states[0].grid.dx
    thr = tracking_threshold(trajectory) if slope_threshold is None else slope_threshold
    if max_shift is None:
        max_shift = 20.0 * dx

    def chord(a, b):
        fa, fb = model.f(np.array([a, b]))
        return float((fb - fa) / (b - a))

    open_tracks, done = [], []
    for s_idx, st in enumerate(states):
        found = detect_shocks(st, model, thr)
        used = set()
        still = []
        for tr in open_tracks:
            t_prev, y_prev, um, up = tr[-1]
            guess = y_prev + chord(um, up) * (st.t - t_prev)
            best, dist = None, math.inf
            for k, sh in enumerate(found):
                d = abs(sh.x - guess)
                if k not in used and d < dist and np.sign(sh.u_minus - sh.u_plus) == np.sign(um - up):
                    best, dist = k, d
            if best is not None and dist <= max_shift:
                used.add(best)
                sh = found[best]
                tr.append((st.t, sh.x, sh.u_minus, sh.u_plus))
                still.append(tr)
            else:
                done.append((tr, True))
        for k, sh in enumerate(found):
            if k not in used:
                still.append([(st.t, sh.x, sh.u_minus, sh.u_plus)])
        open_tracks = still
    done.extend((tr, False) for tr in open_tracks)

    records = []
    for tr, cut in done:
        if len(tr) < min_points:
            continue
        t, y, um, up = (np.array(c, dtype=np.float64) for c in zip(*tr))
        speed = np.gradient(y, t)
        cs = np.array([chord(a, b) for a, b in zip(um, up)])
        verdicts = [condition_E_check(model.f, a, b) for a, b in zip(um, up)]
        records.append(ShockRecord(t, y, um, up, speed, cs, np.abs(speed - cs), verdicts, cut))
    records.sort(key=lambda r: (r.times[0], r.locations[0]))
    return records

# }}}


# {{{ weak form

def _bump(z):
    z = np.asarray(z, dtype=np.float64)
    inside = np.abs(z) < 1
    d = np.where(inside, 1.0 - z * z, 1.0)
    return np.where(inside, np.exp(-1.0 / d), 0.0)


def _dbump(z):
    z = np.asarray(z, dtype=np.float64)
    inside = np.abs(z) < 1
    d = np.where(inside, 1.0 - z * z, 1.0)
    return np.where(inside, _bump(z) * (-2.0 * z / d**2), 0.0)


@dataclass(frozen=True)
class TestBump:
    """``phi(t, x) = psi((x - xc)/sx) psi((t - tc)/st)`` with the standard bump ``psi``."""
    xc: float
    sx: float
    tc: float
    st: float

    __test__ = False    # not a pytest class

    def __call__(self, t, x):
        return _bump((x - self.xc) / self.sx) * _bump((t - self.tc) / self.st)

    def phi_x_part(self, x):
        return _bump((x - self.xc) / self.sx)

    def phi_t_part(self, t):
        return _bump((t - self.tc) / self.st)


def bump_bank(x_centers, x_scales, t_centers, t_scales) -> list:
    return [TestBump(float(xc), float(sx), float(tc), float(st))
            for xc in x_centers for sx in x_scales for tc in t_centers for st in t_scales]


def default_test_bank(trajectory: Trajectory, slope_threshold=None) -> list:
    """Twelve bumps: 3 centers x 2 spatial x 2 temporal scales.

    The centers straddle the first shock of the middle snapshot (or the
    domain center for smooth runs); the time window stays clear of both
    ends of the run.
    """
    snaps = sorted(trajectory.snapshots, key=lambda s: s.t)
    if len(snaps) < 3:
        raise ValueError("the weak form needs at least 3 snapshots")
    g = snaps[0].grid
    L = g.x_right - g.x_left
    t0, t1 = snaps[0].t, snaps[-1].t
    tc = 0.5 * (t0 + t1)
    mid = snaps[len(snaps) // 2]
    found = detect_shocks(mid, trajectory.model,
                          tracking_threshold(trajectory) if slope_threshold is None else slope_threshold)
    xc = found[0].x if found else 0.5 * (g.x_left + g.x_right)
    sx = (0.08 * L, 0.16 * L)
    # keep all supports inside the domain
    xc = min(max(xc, g.x_left + 0.25 * L), g.x_right - 0.25 * L)
    centers = (xc - 0.5 * sx[0], xc, xc + 0.5 * sx[0])
    return bump_bank(centers, sx, [tc], (0.45 * (t1 - t0), 0.3 * (t1 - t0)))


@dataclass
class WeakResidual:
    bump: TestBump
    residual: float      # the integral itself
    scale: float         # sum of the magnitudes of the three terms
    relative: float


def weak_residual(trajectory: Trajectory, model: Optional[ModelSpec] = None,
                  qlim_profiles: Optional[Sequence[QLimProfile]] = None,
                  test_bank: Optional[Sequence[TestBump]] = None) -> list:
    """``int int u phi_t + f(u) phi_x - Q_lim phi_x`` for every test bump.

    Both derivatives are applied by summation by parts on the snapshot
    times and on cell interfaces, so constant states give an exact zero.
    """
    model = trajectory.model if model is None else model
    snaps = sorted(trajectory.snapshots, key=lambda s: s.t)
    if len(snaps) < 3:
        raise ValueError("the weak form needs at least 3 snapshots")
    if qlim_profiles is None:
        qlim_profiles = [q_lim_profile(s, model) for s in snaps]
    else:
        qlim_profiles = sorted(qlim_profiles, key=lambda p: p.t)
        if len(qlim_profiles) != len(snaps):
            raise ValueError("need one q-profile per snapshot")
    if test_bank is None:
        test_bank = default_test_bank(trajectory)

    g = snaps[0].grid
    x = g.x
    dx = g.dx
    t = np.array([s.t for s in snaps])
    t_half = np.concatenate([[t[0]], 0.5 * (t[1:] + t[:-1]), [t[-1]]])
    w_t = np.diff(t_half)
    x_half = np.concatenate([[x[0] - 0.5 * dx], x + 0.5 * dx])
    U = np.array([s.u for s in snaps])
    FQ = np.array([model.f(s.u) - p.q_values for s, p in zip(snaps, qlim_profiles)])

    out = []
    for phi in test_bank:
        if (phi.xc - phi.sx < x[0] or phi.xc + phi.sx > x[-1]
                or phi.tc - phi.st < t[0] or phi.tc + phi.st > t[-1]):
            raise ValueError(f"test function support {phi} leaves the computed region")
        px = phi.phi_x_part(x)
        px_half = phi.phi_x_part(x_half)
        pt = phi.phi_t_part(t)
        pt_half = phi.phi_t_part(t_half)
        # u phi_t: time differences of phi at the half times
        term_t = dx * (np.diff(pt_half)[:, None] * px[None, :]) * U
        # (f - q) phi_x: space differences of phi at the interfaces
        term_x = (w_t * pt)[:, None] * np.diff(px_half)[None, :] * FQ
        r = float(np.sum(term_t) + np.sum(term_x))
        scale = float(np.sum(np.abs(term_t)) + np.sum(np.abs(term_x)))
        out.append(WeakResidual(phi, r, scale, abs(r) / scale if scale > 0 else 0.0))
    return out


def initial_trace_check(trajectory: Trajectory, u0, a: Optional[float] = None,
                        b: Optional[float] = None, n_early: Optional[int] = None) -> list:
    """``(t, int_a^b |u(t) - u0|)`` for the snapshots in time order.

    ``u0`` may be a grid field, an array of nodal values or anything with
    an ``evaluate`` method (an initial datum).
    """
    snaps = sorted(trajectory.snapshots, key=lambda s: s.t)
    if n_early is not None:
        snaps = snaps[:n_early]
    if not snaps:
        return []
    g = snaps[0].grid
    x = g.x
    if isinstance(u0, GridField):
        ref = u0.u
    elif hasattr(u0, "evaluate"):
        ref = u0.evaluate(x)
    else:
        ref = np.asarray(u0, dtype=np.float64)
    a = x[0] if a is None else a
    b = x[-1] if b is None else b
    sel = (x >= a) & (x <= b)
    return [(float(s.t), float(np.sum(np.abs(s.u[sel] - ref[sel])) * g.dx)) for s in snaps]

# }}}

# vim: foldmethod=marker
