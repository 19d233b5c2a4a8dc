"""Traveling-wave and self-similar reference solutions.

A traveling wave ``u = b(x - s t)`` from ``b_-`` to ``b_+`` satisfies the
first integral ``Q(b') = fhat(b)`` with the chord deficit

    fhat(b) = f(b) - f(b_-) - s (b - b_-),   s = (f(b_+) - f(b_-)) / (b_+ - b_-),

so that ``xi(b) = int_{b_0}^b dB / Q^{-1}(fhat(B))``.  When the deficit dips
below the saturation level ``Q(-inf)`` the profile cannot stay smooth: it
jumps between the two roots of ``fhat = Q(-inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from bfburgers.model import ModelSpec

CONTINUOUS = "continuous"
DISCONTINUOUS = "discontinuous"
NO_WAVE = "no_wave"

_GL20 = np.polynomial.legendre.leggauss(20)
_GL10 = np.polynomial.legendre.leggauss(10)


def _fn(f):
    return f.f if isinstance(f, ModelSpec) else f


def _scalar(f, x):
    return float(np.asarray(f(np.array([x], dtype=np.float64)))[0])


# {{{ chord quantities

def wave_speed(f, b_minus: float, b_plus: float) -> float:
    f = _fn(f)
    if b_minus == b_plus:
        raise ValueError("wave speed needs two distinct states")
    return (_scalar(f, b_plus) - _scalar(f, b_minus)) / (b_plus - b_minus)


def chord_function(f, b_minus, b_plus):
    """``fhat`` for the states, vectorised in ``b``."""
    f = _fn(f)
    s = wave_speed(f, b_minus, b_plus)
    f_m = _scalar(f, b_minus)

    def fhat(b):
        b = np.asarray(b, dtype=np.float64)
        return f(b) - f_m - s * (b - b_minus)
    return fhat


def _polish_extremum(g, x, v, k, sign):
    """Refine an extremum of ``sign * g`` found at grid node ``k``."""
    lo, hi = x[max(k - 1, 0)], x[min(k + 1, len(x) - 1)]
    best_x, best_v = float(x[k]), float(v[k])
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: -sign * _scalar(g, t), bounds=(lo, hi),
                                       method="bounded",
                                       options={"xatol": 1e-13 * (1.0 + abs(best_x))})
        if -sign * res.fun > sign * best_v:
            best_x, best_v = float(res.x), float(-sign * res.fun)
    return best_x, best_v


def chord_deficit(f, b_minus: float, b_plus: float, n_scan: int = 4001):
    """Minimum ``m`` of ``fhat`` on ``[b_+, b_-]`` and where it is attained."""
    fhat = chord_function(f, b_minus, b_plus)
    lo, hi = min(b_minus, b_plus), max(b_minus, b_plus)
    b = np.linspace(lo, hi, n_scan)
    v = fhat(b)
    v[0] = v[-1] = 0.0
    k = int(np.argmin(v))
    argmin, m = _polish_extremum(fhat, b, v, k, sign=-1.0)
    return min(m, 0.0), argmin


@dataclass(frozen=True)
class WaveClass:
    kind: str
    b_minus: float
    b_plus: float
    speed: float
    m: float = 0.0
    argmin: float = float("nan")
    b1: Optional[float] = None
    b2: Optional[float] = None

    @property
    def jump(self):
        return None if self.b1 is None else self.b1 - self.b2


def classify_wave(model: ModelSpec, b_minus: float, b_plus: float,
                  n_scan: int = 4001) -> WaveClass:
    if b_minus == b_plus:
        raise ValueError("wave classification needs two distinct states")
    s = wave_speed(model.f, b_minus, b_plus)
    if b_minus < b_plus:
        return WaveClass(NO_WAVE, b_minus, b_plus, s)

    fhat = chord_function(model.f, b_minus, b_plus)
    b = np.linspace(b_plus, b_minus, n_scan)
    v = fhat(b)
    v[0] = v[-1] = 0.0
    m, argmin = chord_deficit(model.f, b_minus, b_plus, n_scan)

    # a monotone decreasing profile needs Q(b') = fhat(b) < 0 inside
    kmax = int(np.argmax(v))
    _, vmax = _polish_extremum(fhat, b, v, kmax, sign=1.0)
    scale = 1e-12 * (1.0 + float(np.max(np.abs(v))))
    if vmax > scale:
        return WaveClass(NO_WAVE, b_minus, b_plus, s, m, argmin)

    qm = model.q_minus_inf
    if abs(m) <= abs(qm):
        return WaveClass(CONTINUOUS, b_minus, b_plus, s, m, argmin)

    g = v - qm
    neg = np.flatnonzero(g < 0.0)
    if neg.size == 0:
        raise RuntimeError(
            f"no root of fhat = Q(-inf) bracketed although |m|={abs(m)!r} > {abs(qm)!r}")

    def root(lo, hi):
        return optimize.brentq(lambda t: _scalar(fhat, t) - qm, lo, hi, xtol=1e-15)

    # smallest root from the b_+ side, largest from the b_- side
    i = neg[0]
    b2 = root(b[i - 1], b[i]) if i > 0 else root(b_plus, argmin)
    j = neg[-1]
    b1 = root(b[j], b[j + 1]) if j + 1 < n_scan else root(argmin, b_minus)
    return WaveClass(DISCONTINUOUS, b_minus, b_plus, s, m, argmin, b1, b2)


def jump_admissible_local(f, b_m0: float, b_p0: float, n_grid: int = 20001,
                          tol: float = 1e-12) -> bool:
    """Local jump test: ``f(b) - f(b_-0) - s (b - b_-0) <= 0`` on ``[b_+0, b_-0]``."""
    if not b_m0 > b_p0:
        raise ValueError("a local jump needs b_m0 > b_p0")
    f = _fn(f)
    s = (_scalar(f, b_p0) - _scalar(f, b_m0)) / (b_p0 - b_m0)
    fm = _scalar(f, b_m0)

    def excess(b):
        b = np.asarray(b, dtype=np.float64)
        return f(b) - fm - s * (b - b_m0)

    b = np.linspace(b_p0, b_m0, n_grid)
    v = excess(b)
    v[0] = v[-1] = 0.0
    _, worst = _polish_extremum(excess, b, v, int(np.argmax(v)), sign=1.0)
    scale = abs(fm) + abs(_scalar(f, b_p0)) + abs(s) * (b_m0 - b_p0)
    return worst <= tol * (1.0 + scale)

# }}}


# {{{ traveling wave profile

@dataclass
class WaveProfile:
    b_minus: float
    b_plus: float
    speed: float
    classification: WaveClass
    xi_grid: np.ndarray
    b_values: np.ndarray
    slopes: np.ndarray
    m: float
    argmin: float
    quad_error: float = 0.0
    tail_rates: tuple = ()
    mesh: dict = field(default_factory=dict, repr=False)

    @property
    def kind(self):
        return self.classification.kind

    @property
    def b1(self):
        return self.classification.b1

    @property
    def b2(self):
        return self.classification.b2

    def q_hat(self, model: ModelSpec):
        """``Q(b')`` along the profile, ``Q(-inf)`` at the jump."""
        q = model.Q(self.slopes)
        return np.where(np.isinf(self.slopes), np.sign(self.slopes) * model.q_bar, q)


class _Branch:
    """One monotone piece ``b in [start, end)`` with ``xi(start) = 0``.

    ``end`` is the asymptotic state, reached only as ``|xi| -> inf``.
    """

    def __init__(self, model, fhat, start, end, speed, singular_start,
                 rel_gap=1e-9, tol=1e-12):
        self.model = model
        self.fhat = fhat
        self.start = start
        self.end = end
        self.sign = 1.0 if end > start else -1.0
        L = abs(end - start)

        # parameter tau = fraction of the way from start to end
        k_end = int(math.ceil(-math.log2(rel_gap))) + 1
        taus = [1.0 - 2.0 ** -k for k in range(1, k_end + 1)]
        if singular_start:
            taus += [2.0 ** -k for k in range(1, 40)]
        taus += list(np.linspace(0.0, 1.0, 17)[:-1])
        tau = np.unique(np.clip(np.asarray(taus), 0.0, 1.0 - rel_gap))
        tau = np.concatenate([np.linspace(a, c, 5)[:-1] for a, c in zip(tau[:-1], tau[1:])]
                             + [tau[-1:]])
        self.b = start + self.sign * L * tau
        self.xi, self.quad_error = self._cumulative(self.b, tol)

        # linearised tail beyond the last node: b - end ~ exp(rate xi)
        dfhat = _scalar(model.df, end) - speed
        self.rate = dfhat / _scalar(model.dQ, 0.0)

    def integrand(self, B):
        with np.errstate(divide="ignore"):
            return 1.0 / self.model.Qinv(self.fhat(B))

    def _gl(self, a, c, rule):
        x, w = rule
        a = np.asarray(a, dtype=np.float64)[..., None]
        c = np.asarray(c, dtype=np.float64)[..., None]
        half = 0.5 * (c - a)
        B = 0.5 * (a + c) + half * x
        vals = self.integrand(B.ravel()).reshape(B.shape)
        return np.sum(vals * w, axis=-1) * half[..., 0]

    def _cumulative(self, b, tol):
        # bisect cells whose 20- and 10-point rules disagree
        for sweep in range(31):
            hi = self._gl(b[:-1], b[1:], _GL20)
            lo = self._gl(b[:-1], b[1:], _GL10)
            err = np.abs(hi - lo)
            bad = err > tol * (1.0 + np.abs(hi))
            if not np.any(bad) or sweep == 30:
                break
            mids = 0.5 * (b[:-1] + b[1:])[bad]
            b = np.sort(np.concatenate([b, mids]))[::int(self.sign)]
        self.b = b
        xi = np.concatenate([[0.0], np.cumsum(hi)])
        return xi, float(np.max(err)) if err.size else 0.0

    def invert(self, xi_t):
        """``b`` at the targets ``xi_t`` (all on this branch's side)."""
        xi_t = np.asarray(xi_t, dtype=np.float64)
        out = np.empty_like(xi_t)
        # xi runs 0 -> -inf (left branch) or 0 -> +inf (right branch)
        direction = np.sign(self.xi[-1]) or 1.0
        key = direction * self.xi
        tk = direction * xi_t
        beyond = tk >= key[-1]
        if np.any(beyond):
            d_last = self.b[-1] - self.end
            if abs(self.rate) > 1e-14:
                out[beyond] = self.end + d_last * np.exp(self.rate * (xi_t[beyond] - self.xi[-1]))
            else:
                out[beyond] = self.b[-1]
        inside = ~beyond
        if np.any(inside):
            out[inside] = self._newton(xi_t[inside], key, tk[inside])
        return out

    def _newton(self, xi_t, key, tk):
        j = np.clip(np.searchsorted(key, tk, side="right") - 1, 0, len(key) - 2)
        b_a, b_c = self.b[j], self.b[j + 1]
        xi_a, xi_c = self.xi[j], self.xi[j + 1]
        width = np.where(xi_c != xi_a, xi_c - xi_a, 1.0)
        frac = np.clip((xi_t - xi_a) / width, 0.0, 1.0)
        b = b_a + frac * (b_c - b_a)
        lo = np.minimum(b_a, b_c)
        hi = np.maximum(b_a, b_c)
        for _ in range(200):
            F = xi_a + self._gl(b_a, b, _GL20) - xi_t
            g = self.integrand(b)
            # the integrand is negative, so xi decreases as b grows
            lo = np.where(F > 0, b, lo)
            hi = np.where(F < 0, b, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                b_new = b - F / g
            ok = np.isfinite(b_new) & (b_new > lo) & (b_new < hi)
            b_new = np.where(ok, b_new, 0.5 * (lo + hi))
            # an exact hit keeps its node
            b_new = np.where(F == 0, b, b_new)
            done = (np.abs(b_new - b) <= 2e-16 * (1.0 + np.abs(b))) | (F == 0)
            b = b_new
            if np.all(done | (hi - lo <= 4e-16 * (1.0 + np.abs(b)))):
                break
        return b


def wave_profile(model: ModelSpec, b_minus: float, b_plus: float,
                 xi_grid: Sequence[float]) -> WaveProfile:
    """Sample the traveling wave connecting ``b_minus`` to ``b_plus``.

    ``xi(b)`` is integrated on a mesh graded geometrically toward the
    asymptotic states and toward the jump values, then inverted at every
    requested ``xi`` by bracketed Newton on the exact quadrature.
    """
    cls = classify_wave(model, b_minus, b_plus)
    if cls.kind == NO_WAVE:
        raise ValueError(f"no traveling wave connects {b_minus} to {b_plus}")
    fhat = chord_function(model.f, b_minus, b_plus)
    s = cls.speed
    if cls.kind == CONTINUOUS:
        b0 = 0.5 * (b_minus + b_plus)
        left = _Branch(model, fhat, b0, b_minus, s, singular_start=False)
        right = _Branch(model, fhat, b0, b_plus, s, singular_start=False)
    else:
        left = _Branch(model, fhat, cls.b1, b_minus, s, singular_start=True)
        right = _Branch(model, fhat, cls.b2, b_plus, s, singular_start=True)

    xi = np.asarray(xi_grid, dtype=np.float64)
    b = np.empty_like(xi)
    neg = xi < 0
    pos = xi > 0
    zero = xi == 0
    if np.any(neg):
        b[neg] = left.invert(xi[neg])
    if np.any(pos):
        b[pos] = right.invert(xi[pos])
    if cls.kind == CONTINUOUS:
        b[zero] = 0.5 * (b_minus + b_plus)
    else:
        b[zero] = 0.5 * (cls.b1 + cls.b2)

    with np.errstate(divide="ignore"):
        slopes = model.Qinv(fhat(b))
    if cls.kind == DISCONTINUOUS:
        slopes[zero] = -np.inf
    quad_error = max(left.quad_error, right.quad_error)
    return WaveProfile(b_minus, b_plus, s, cls, xi, b, np.asarray(slopes, float),
                       cls.m, cls.argmin, quad_error, (left.rate, right.rate),
                       {"left": left, "right": right})


def profile_at(profile: WaveProfile, xi) -> np.ndarray:
    """Evaluate an already constructed profile at new ``xi`` values."""
    xi = np.asarray(xi, dtype=np.float64)
    left, right = profile.mesh["left"], profile.mesh["right"]
    b = np.empty_like(xi)
    neg, pos, zero = xi < 0, xi > 0, xi == 0
    if np.any(neg):
        b[neg] = left.invert(xi[neg])
    if np.any(pos):
        b[pos] = right.invert(xi[pos])
    if profile.kind == CONTINUOUS:
        b[zero] = 0.5 * (profile.b_minus + profile.b_plus)
    else:
        b[zero] = 0.5 * (profile.b1 + profile.b2)
    return b


def wave_residual(profile: WaveProfile, model: ModelSpec, exclude: float = 0.0):
    """Centered-difference residual of ``-s b' + f(b)' - Q(b')'`` on the grid.

    Nodes within ``exclude`` of the jump (and the two end nodes) are skipped.
    Returns ``(xi_nodes, residual)``.
    """
    xi = profile.xi_grid
    b = profile.b_values
    h = np.diff(xi)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise ValueError("residual needs a uniform xi grid")
    h = h[0]
    s = profile.speed
    conv = (-s * (b[2:] - b[:-2]) + model.f(b[2:]) - model.f(b[:-2])) / (2.0 * h)
    qd = model.Q(np.diff(b) / h)
    diff = (qd[1:] - qd[:-1]) / h
    res = conv - diff
    nodes = xi[1:-1]
    keep = np.ones(nodes.shape, dtype=bool)
    if profile.kind == DISCONTINUOUS:
        # stencils straddling the jump are not meaningful
        keep &= (xi[:-2] > 0) | (xi[2:] < 0)
        keep &= np.abs(nodes) > exclude
    return nodes[keep], res[keep]

# }}}


# {{{ self-similar step solution for f = 0

def selfsimilar_exponent(beta: float) -> float:
    if not beta > 2:
        raise ValueError(f"the jump-preserving regime needs beta > 2, got {beta}")
    return (beta - 2.0) / (beta - 1.0)


@dataclass
class SelfSimilarFit:
    alpha_est: float
    alpha_theory: Optional[float]
    h0_est: float
    t_star_est: float
    collapse_error: float
    amplitude: float = float("nan")
    u_left: float = 1.0
    fit_times: list = field(default_factory=list)
    z_window: tuple = ()
    # per snapshot: (t, measured jump, predicted jump u - 2 sqrt(t) h0)
    jumps: list = field(default_factory=list)
    # first time the measured jump drops below the floor (nan if it never does)
    t_disappear: float = float("nan")


def _jump_at_origin(snap):
    """Jump across ``x = 0``: values at the nearest nodes on both sides."""
    x = snap.grid.x
    i = int(np.searchsorted(x, 0.0))
    return float(snap.u[i - 1] - snap.u[i]), i


def _fit_power(z, h):
    """Fit ``h = h0 - A z^alpha`` by least squares in ``h``.

    For fixed ``h0`` the model is a line in log-log space, so only ``h0`` is
    scanned; the residual is measured on ``h`` itself (a log-space residual
    degenerates as ``h0`` grows).
    """
    logz = np.log(z)
    hmax = float(np.max(h))
    span = max(float(np.ptp(h)), 1e-12)

    def fit(delta):
        r = np.log(hmax + delta - h)
        slope, icpt = np.polyfit(logz, r, 1)
        model = hmax + delta - np.exp(icpt + slope * logz)
        return float(np.sum((h - model) ** 2)), slope, icpt

    deltas = span * np.logspace(-6, 2, 161)
    vals = [fit(d)[0] for d in deltas]
    k = int(np.argmin(vals))
    lo = np.log(deltas[max(k - 1, 0)])
    hi = np.log(deltas[min(k + 1, len(deltas) - 1)])
    res = optimize.minimize_scalar(lambda ld: fit(math.exp(ld))[0], bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-10})
    delta = math.exp(res.x) if res.fun <= vals[k] else deltas[k]
    _, slope, icpt = fit(delta)
    return float(slope), hmax + delta, math.exp(icpt)


def fit_similarity(states: Sequence, beta: Optional[float] = None, u_left: Optional[float] = None,
                   z_hi: float = 0.2, z_lo_cells: float = 2.0,
                   min_jump_fraction: float = 0.1, jump_floor: float = 0.05) -> SelfSimilarFit:
    """Fit the near-jump exponent of a step solution with ``f = 0``.

    Each snapshot is rescaled to ``(z, h) = (x / sqrt(t), u / sqrt(t))`` on
    ``x > 0``.  Snapshots whose jump at the origin is still at least
    ``min_jump_fraction`` of the step height are pooled; ``h(0)`` and the
    exponent come from the best log-log line of ``h(0) - h`` against ``z``
    on ``[z_lo_cells dx / sqrt(t), z_hi]``.

    The disappearance time is where the measured jump first falls below
    ``jump_floor * u_left`` (linear interpolation between snapshots).
    """
    snaps = [s for s in states if s.t > 0]
    if len(snaps) < 3:
        raise ValueError(f"need at least 3 snapshots with t > 0, got {len(snaps)}")
    if u_left is None:
        u_left = float(snaps[0].u[0])

    pooled_z, pooled_h, used = [], [], []
    windows = []
    for snap in snaps:
        jump, i = _jump_at_origin(snap)
        if jump < min_jump_fraction * u_left:
            continue
        x = snap.grid.x
        sq = math.sqrt(snap.t)
        z = x[i:] / sq
        h = snap.u[i:] / sq
        z_lo = z_lo_cells * snap.grid.dx / sq
        sel = (z >= z_lo) & (z <= z_hi)
        if np.count_nonzero(sel) < 4:
            continue
        pooled_z.append(z[sel])
        pooled_h.append(h[sel])
        used.append(snap)
        windows.append((z_lo, z_hi))
    if not used:
        raise ValueError("no snapshot resolves the jump inside the fit window")

    z_all = np.concatenate(pooled_z)
    h_all = np.concatenate(pooled_h)
    alpha, h0, amp = _fit_power(z_all, h_all)
    t_star = (u_left / (2.0 * h0)) ** 2

    # collapse: spread of rescaled profiles on the common window
    z_common = np.linspace(max(w[0] for w in windows), z_hi, 200)
    curves = []
    for snap in used:
        _, i = _jump_at_origin(snap)
        sq = math.sqrt(snap.t)
        curves.append(np.interp(z_common, snap.grid.x[i:] / sq, snap.u[i:] / sq))
    curves = np.asarray(curves)
    mean = curves.mean(axis=0)
    collapse = float(np.mean(np.trapezoid(np.abs(curves - mean), z_common, axis=1)))

    jumps = []
    for snap in snaps:
        j, _ = _jump_at_origin(snap)
        jumps.append((snap.t, j, u_left - 2.0 * math.sqrt(snap.t) * h0))
    floor = jump_floor * u_left
    t_gone = float("nan")
    for (ta, ja, _), (tb, jb, _) in zip(jumps, jumps[1:]):
        if ja >= floor > jb:
            t_gone = ta + (ja - floor) / (ja - jb) * (tb - ta)
            break

    theory = selfsimilar_exponent(beta) if beta is not None and beta > 2 else None
    return SelfSimilarFit(alpha, theory, h0, t_star, collapse, amp, u_left,
                          [s.t for s in used], (min(w[0] for w in windows), z_hi), jumps,
                          t_gone)

# }}}

# vim: foldmethod=marker
