"""Piecewise-smooth initial data with finitely many jumps, and their mollification.

A datum is a list of :class:`Piece` objects covering the real line.  Each
piece carries ``u``, ``u'`` and ``u''``.  Jumps are read off the piece
boundaries and are never smoothed in the datum itself; :func:`mollify`
does the smoothing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, interpolate

from bfburgers.model import ModelSpec, ValidationReport
from bfburgers.viscous_solver import Grid, GridField

FLAT_TOL = 1e-10
JUMP_TOL = 1e-12


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=np.float64))


def _const(c):
    return lambda x: np.full_like(np.asarray(x, dtype=np.float64), c)


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    u: Callable
    du: Callable = _zero
    d2u: Callable = _zero

    def fn(self, order):
        return (self.u, self.du, self.d2u)[order]


@dataclass(frozen=True)
class Jump:
    x: float
    left: float
    right: float

    @property
    def size(self):
        return self.right - self.left


def constant_piece(lo, hi, c):
    return Piece(lo, hi, _const(float(c)))


@dataclass
class InitialDatum:
    pieces: list
    support_hint: tuple = (-1.0, 1.0)
    name: str = "custom"
    jumps: list = field(init=False)
    breaks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pieces = list(self.pieces)
        if not pieces:
            raise ValueError("datum needs at least one piece")
        if pieces[0].lo != -math.inf or pieces[-1].hi != math.inf:
            raise ValueError("pieces must cover the whole real line")
        for a, b in zip(pieces, pieces[1:]):
            if a.hi != b.lo:
                raise ValueError(f"pieces are not contiguous at {a.hi} / {b.lo}")
        for p in pieces:
            if not p.lo < p.hi:
                raise ValueError(f"empty piece [{p.lo}, {p.hi}]")
        self.pieces = pieces
        self.breaks = np.array([p.lo for p in pieces[1:]], dtype=np.float64)
        self.jumps = []
        for k, xb in enumerate(self.breaks):
            left = float(pieces[k].u(np.array([xb]))[0])
            right = float(pieces[k + 1].u(np.array([xb]))[0])
            if abs(right - left) > JUMP_TOL * (1.0 + abs(left) + abs(right)):
                self.jumps.append(Jump(float(xb), left, right))
        lo, hi = self.support_hint
        if len(self.breaks):
            lo, hi = min(lo, self.breaks[0]), max(hi, self.breaks[-1])
        self.support_hint = (float(lo), float(hi))

    # evaluation; ``side`` picks the left (-1) or right (+1) piece at a break
    def _index(self, x, side=1):
        x = np.asarray(x, dtype=np.float64)
        side = np.broadcast_to(np.asarray(side), x.shape)
        right = np.searchsorted(self.breaks, x, side="right")
        left = np.searchsorted(self.breaks, x, side="left")
        return np.where(side > 0, right, left)

    def evaluate(self, x, order=0, side=1):
        x = np.asarray(x, dtype=np.float64)
        idx = self._index(x, side)
        out = np.empty(x.shape)
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.pieces[k].fn(order)(x[sel])
        return out

    def __call__(self, x):
        return self.evaluate(x)

    def derivative(self, x, order=1, side=1):
        return self.evaluate(x, order, side)

    def one_sided(self, xb, order=0):
        """(left, right) limits of the ``order``-th derivative at a break."""
        xb = np.array([xb], dtype=np.float64)
        return float(self.evaluate(xb, order, -1)[0]), float(self.evaluate(xb, order, 1)[0])

    @property
    def sup(self):
        lo, hi = self.support_hint
        xs = np.linspace(lo - 1.0, hi + 1.0, 20001)
        vals = np.concatenate([self.evaluate(xs), self.evaluate(xs, side=-1)])
        return float(np.max(np.abs(vals)))

    def far_field(self):
        lo, hi = self.support_hint
        width = max(hi - lo, 1.0)
        return (float(self.evaluate(np.array([lo - 1e4 * width]))[0]),
                float(self.evaluate(np.array([hi + 1e4 * width]))[0]))

    def integral(self, lo=None, hi=None):
        """Integral over ``[lo, hi]`` (defaults to the support hint)."""
        lo = self.support_hint[0] if lo is None else lo
        hi = self.support_hint[1] if hi is None else hi
        edges = np.concatenate([[lo], self.breaks[(self.breaks > lo) & (self.breaks < hi)], [hi]])
        total = 0.0
        for a, b in zip(edges, edges[1:]):
            k = int(self._index(0.5 * (a + b)))
            piece = self.pieces[k]
            val, _ = integrate.quad(lambda y: float(piece.u(np.array([y]))[0]), a, b,
                                    epsabs=1e-14, epsrel=1e-13, limit=200)
            total += val
        return total

    def sample(self, grid: Grid, t: float = 0.0) -> GridField:
        """Nodal values without smoothing (right limits at nodes on a jump)."""
        return GridField(grid, t, self.evaluate(grid.x))

    def scaled_sum(self, a: float, other: "InitialDatum", b: float) -> "InitialDatum":
        """The datum ``a * self + b * other``."""
        breaks = np.union1d(self.breaks, other.breaks)
        edges = np.concatenate([[-math.inf], breaks, [math.inf]])
        pieces = []
        for lo, hi in zip(edges, edges[1:]):
            mid = 0.5 * (lo + hi) if np.isfinite(lo) and np.isfinite(hi) else (
                hi - 1.0 if np.isfinite(hi) else lo + 1.0)

            def make(order, mid=mid):
                def fn(x):
                    x = np.asarray(x, dtype=np.float64)
                    side = np.where(x > mid, -1, 1)
                    return (a * self.evaluate(x, order, side)
                            + b * other.evaluate(x, order, side))
                return fn
            pieces.append(Piece(lo, hi, make(0), make(1), make(2)))
        sup = (min(self.support_hint[0], other.support_hint[0]),
               max(self.support_hint[1], other.support_hint[1]))
        return InitialDatum(pieces, sup, f"{a}*{self.name}+{b}*{other.name}")


# {{{ presets

def riemann(u_left=1.0, u_right=0.0, x0=0.0) -> InitialDatum:
    pieces = [constant_piece(-math.inf, x0, u_left), constant_piece(x0, math.inf, u_right)]
    return InitialDatum(pieces, (x0 - 1.0, x0 + 1.0), "riemann")


def step(u=1.0, x0=0.0) -> InitialDatum:
    """``u`` to the left of ``x0``, zero to the right."""
    d = riemann(u, 0.0, x0)
    d.name = "step"
    return d


def _bump_parts(amplitude, center, width):
    # a * exp(1 - 1/(1 - r^2)), r = (x - c)/w; peak value a
    def parts(x):
        x = np.asarray(x, dtype=np.float64)
        r = (x - center) / width
        inside = np.abs(r) < 1
        d = np.where(inside, 1.0 - r * r, 1.0)
        g = np.where(inside, amplitude * np.exp(1.0 - 1.0 / d), 0.0)
        dp = -2.0 * r / d**2           # d/dr of -1/(1 - r^2)
        dpp = -2.0 / d**2 - 8.0 * r * r / d**3
        return g, inside, dp, dpp
    return parts


def bump(amplitude=1.0, center=0.0, width=1.0) -> InitialDatum:
    """Smooth compactly supported bump of height ``amplitude``."""
    if width <= 0:
        raise ValueError("bump width must be positive")
    parts = _bump_parts(amplitude, center, width)

    def u(x):
        return parts(x)[0]

    def du(x):
        g, inside, dp, _ = parts(x)
        return np.where(inside, g * dp / width, 0.0)

    def d2u(x):
        g, inside, dp, dpp = parts(x)
        return np.where(inside, g * (dp * dp + dpp) / width**2, 0.0)

    pieces = [Piece(-math.inf, center - width, _zero),
              Piece(center - width, center + width, u, du, d2u),
              Piece(center + width, math.inf, _zero)]
    return InitialDatum(pieces, (center - width, center + width), "bump")


def sawtooth(n_teeth=3, amplitude=1.0, period=1.0, x0=0.0) -> InitialDatum:
    """Teeth rising smoothly (flat at both ends) from 0 to ``amplitude``,
    each ending in a downward jump."""
    if n_teeth < 1 or period <= 0:
        raise ValueError("need n_teeth >= 1 and period > 0")
    pieces = [Piece(-math.inf, x0, _zero)]
    for k in range(n_teeth):
        a = x0 + k * period

        def u(x, a=a):
            s = (np.asarray(x, dtype=np.float64) - a) / period
            return amplitude * s * s * (3.0 - 2.0 * s)

        def du(x, a=a):
            s = (np.asarray(x, dtype=np.float64) - a) / period
            return amplitude * 6.0 * s * (1.0 - s) / period

        def d2u(x, a=a):
            s = (np.asarray(x, dtype=np.float64) - a) / period
            return amplitude * (6.0 - 12.0 * s) / period**2

        pieces.append(Piece(a, a + period, u, du, d2u))
    pieces.append(Piece(x0 + n_teeth * period, math.inf, _zero))
    return InitialDatum(pieces, (x0, x0 + n_teeth * period), "sawtooth")


def from_samples(x, u, jumps: Sequence[float] = (), name="csv") -> InitialDatum:
    """Monotone cubic interpolation of samples, split at declared jumps.

    Samples falling exactly on a jump location are dropped.  Each segment
    is extended to its jump by the interpolant; outside the sample range
    the datum is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    order = np.argsort(x)
    x, u = x[order], u[order]
    if x.size < 2 or np.any(np.diff(x) <= 0):
        raise ValueError("need at least two samples with distinct x")
    jumps = sorted(float(j) for j in jumps)
    for j in jumps:
        if not x[0] < j < x[-1]:
            raise ValueError(f"jump at {j} lies outside the sample range")
    keep = ~np.isin(x, jumps)
    x, u = x[keep], u[keep]
    edges = [x[0]] + jumps + [x[-1]]
    pieces = [constant_piece(-math.inf, x[0], u[0])]
    for lo, hi in zip(edges, edges[1:]):
        sel = (x >= lo) & (x <= hi)
        if np.count_nonzero(sel) < 2:
            raise ValueError(f"segment [{lo}, {hi}] has fewer than two samples")
        p = interpolate.PchipInterpolator(x[sel], u[sel], extrapolate=True)
        pieces.append(Piece(lo, hi, p, p.derivative(1), p.derivative(2)))
    pieces.append(constant_piece(x[-1], math.inf, u[-1]))
    return InitialDatum(pieces, (float(x[0]), float(x[-1])), name)


def read_csv_datum(path, jumps: Sequence[float] = ()) -> InitialDatum:
    """Two-column ``x,u`` file; a header row is optional."""
    xs, us = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                us.append(float(row[1]))
            except ValueError:
                if xs:
                    raise
                continue    # header
    return from_samples(xs, us, jumps, name=str(path))


PRESETS = {"step": step, "riemann": riemann, "bump": bump, "sawtooth": sawtooth}


def preset(name, **params) -> InitialDatum:
    try:
        return PRESETS[name](**params)
    except KeyError:
        raise ValueError(f"unknown initial datum {name!r}; choose from {sorted(PRESETS)}") from None

# }}}


# {{{ class check

def _tail_integrable(fn, edge, width, direction):
    # sampled: integrate over [edge, edge + 1e4 width]; the last decade must be negligible
    d = width * np.logspace(-3, 4, 701)
    xs = edge + direction * np.concatenate([[0.0], d])
    vals = np.abs(fn(xs))
    if not np.all(np.isfinite(vals)):
        return False, math.inf
    seg = 0.5 * (vals[1:] + vals[:-1]) * np.diff(d, prepend=0.0)
    total = float(np.sum(seg))
    last = float(np.sum(seg[d > width * 1e3]))
    return last <= 1e-6 * (1.0 + total), total


def check_bv_c1_plus(u0: InitialDatum, model: Optional[ModelSpec] = None) -> ValidationReport:
    """Itemized check that a datum belongs to the admissible class.

    Integrability outside the support hint is a sampled check.  Constant
    far-field states are allowed: ``u0`` is tested after subtracting them.
    """
    rep = ValidationReport(smoothness="C2 on pieces")
    n_jumps = len(u0.jumps)
    rep.add("finite jump count", np.all(np.isfinite([j.x for j in u0.jumps])), n_jumps,
            f"{n_jumps} jumps")

    worst = 0.0
    where = None
    for j in u0.jumps:
        dl, dr = u0.one_sided(j.x, 1)
        w = max(abs(dl), abs(dr))
        if w > worst:
            worst, where = w, j.x
    rep.add("flat approach at jumps", worst <= FLAT_TOL, worst,
            "" if where is None else f"|u0'| = {worst:.3g} at x = {where}")

    lo, hi = u0.support_hint
    bad = []
    for k, p in enumerate(u0.pieces):
        a, b = max(p.lo, lo - 1.0), min(p.hi, hi + 1.0)
        if not a < b:
            continue
        xs = np.linspace(a, b, 2001)
        for order in range(3):
            if not np.all(np.isfinite(p.fn(order)(xs))):
                bad.append((k, order))
    rep.add("C2 on pieces", not bad, len(bad), "" if not bad else f"non-finite (piece, order): {bad[:5]}")

    left_far, right_far = u0.far_field()
    width = max(hi - lo, 1.0)
    tails_ok = True
    detail = []
    checks = [("u0 - far field", lambda x, c: u0.evaluate(x) - c),
              ("u0''", lambda x, c: u0.evaluate(x, 2))]
    if model is not None:
        # Q(u0')' = Q'(u0') u0''
        checks.append(("Q(u0')'", lambda x, c: model.dQ(u0.evaluate(x, 1)) * u0.evaluate(x, 2)))
    else:
        checks.append(("u0'", lambda x, c: u0.evaluate(x, 1)))
    for label, fn in checks:
        for edge, direction, c in ((lo, -1, left_far), (hi, 1, right_far)):
            ok, total = _tail_integrable(lambda x: fn(x, c), edge, width, direction)
            if not ok:
                tails_ok = False
                detail.append(f"{label} on the {'left' if direction < 0 else 'right'}")
    rep.add("integrable outside K (sampled check)", tails_ok, None,
            "sampled check" + ("" if tails_ok else ": " + ", ".join(detail)))

    rep.add("bounded", np.isfinite(u0.sup), u0.sup)
    return rep

# }}}


# {{{ mollification

@dataclass(frozen=True)
class MollifierKernel:
    omega: Callable
    domega: Callable
    normalization: float
    name: str = "bump"

    def __call__(self, z):
        return self.omega(z)

    def mass(self, n=200):
        z, w = np.polynomial.legendre.leggauss(n)
        return float(np.sum(w * self.omega(z)))


def _bump_raw(z):
    z = np.asarray(z, dtype=np.float64)
    inside = np.abs(z) < 1
    d = np.where(inside, 1.0 - z * z, 1.0)
    return np.where(inside, np.exp(-1.0 / d), 0.0)


def bump_kernel() -> MollifierKernel:
    """``c exp(-1/(1 - z^2))`` on ``(-1, 1)`` with unit mass."""
    z, w = _gauss(200)
    c = 1.0 / float(np.sum(w * _bump_raw(z)))

    def omega(z):
        return c * _bump_raw(z)

    def domega(z):
        z = np.asarray(z, dtype=np.float64)
        inside = np.abs(z) < 1
        d = np.where(inside, 1.0 - z * z, 1.0)
        return np.where(inside, omega(z) * (-2.0 * z / d**2), 0.0)

    return MollifierKernel(omega, domega, c)


_GAUSS = {}


def _gauss(n):
    if n not in _GAUSS:
        _GAUSS[n] = np.polynomial.legendre.leggauss(n)
    return _GAUSS[n]


def _convolve_pieces(u0: InitialDatum, kernel: MollifierKernel, h: float, x, order=0,
                     n_gauss=80, chunk=4096):
    """``int omega(z) u0^(order)(x - h z) dz`` with the z-interval split at breaks."""
    x = np.asarray(x, dtype=np.float64)
    gz, gw = _gauss(n_gauss)
    out = np.empty(x.shape)
    for start in range(0, x.size, chunk):
        xc = x[start:start + chunk]
        # split points in z for every node; those outside (-1, 1) collapse onto the ends
        zb = (xc[:, None] - u0.breaks[None, :]) / h
        zb = np.clip(zb, -1.0, 1.0)
        edges = np.sort(np.concatenate([-np.ones((xc.size, 1)), zb, np.ones((xc.size, 1))], axis=1),
                        axis=1)
        a, b = edges[:, :-1], edges[:, 1:]
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        z = mid[..., None] + half[..., None] * gz
        y = xc[:, None, None] - h * z
        # piece index from the segment midpoint, so nodes never sit on a break
        ymid = xc[:, None] - h * mid
        idx = np.searchsorted(u0.breaks, ymid, side="right")
        vals = np.zeros(y.shape)
        for k in np.unique(idx):
            sel = idx == k
            vals[sel] = u0.pieces[k].fn(order)(y[sel])
        out[start:start + chunk] = np.sum(half * np.sum(gw * kernel.omega(z) * vals, axis=-1), axis=1)
    return out


def mollify(u0: InitialDatum, kernel: MollifierKernel, h: float, grid: Grid,
            n_gauss: int = 80, strict: bool = True) -> GridField:
    """Nodal values of ``u0^h = omega_h * u0`` on ``grid``.

    The quadrature is split at the breaks of ``u0`` and does not use the
    grid, so nodal values stay accurate on coarse grids; ``strict`` still
    insists on ``dx <= h/4`` so that the smoothed profile is resolved.
    """
    if not h > 0:
        raise ValueError(f"mollification width must be positive, got {h}")
    if strict and grid.dx > h / 4.0 * (1.0 + 1e-12):
        raise ValueError(f"grid spacing {grid.dx} does not resolve the kernel width {h} (need dx <= h/4)")
    return GridField(grid, 0.0, _convolve_pieces(u0, kernel, h, grid.x, 0, n_gauss))


def mollified_derivatives(u0: InitialDatum, kernel: MollifierKernel, h: float, x,
                          n_gauss: int = 80):
    """``(u0^h)_x`` and ``(u0^h)_xx`` from the exact differentiation formulas.

    Smooth parts are convolved directly; every break contributes its jump
    in ``u0`` (through ``omega`` and ``omega'``) and its jump in ``u0'``.
    """
    x = np.asarray(x, dtype=np.float64)
    d1 = _convolve_pieces(u0, kernel, h, x, 1, n_gauss)
    d2 = _convolve_pieces(u0, kernel, h, x, 2, n_gauss)
    for xb in u0.breaks:
        ul, ur = u0.one_sided(xb, 0)
        dl, dr = u0.one_sided(xb, 1)
        z = (x - xb) / h
        w = kernel.omega(z) / h
        d1 += (ur - ul) * w
        d2 += (ur - ul) * kernel.domega(z) / h**2 + (dr - dl) * w
    return d1, d2


@dataclass
class EstimateRow:
    h: float
    tv: float          # int |(u0^h)_x|
    q_tv: float        # int |Q((u0^h)_x)_x|
    h_d2: float        # h * int |(u0^h)_xx|


def mollification_estimates(u0: InitialDatum, kernel: MollifierKernel, h_list: Sequence[float],
                            model: ModelSpec, points_per_h: int = 400) -> list:
    """Table of the three uniform-in-h quantities for each width."""
    rows = []
    lo, hi = u0.support_hint
    for h in h_list:
        if not h > 0:
            raise ValueError(f"widths must be positive, got {h}")
        n = int(math.ceil((hi - lo + 4.0 * h) / h * points_per_h)) + 1
        xs = np.linspace(lo - 2.0 * h, hi + 2.0 * h, n)
        d1, d2 = mollified_derivatives(u0, kernel, h, xs)
        tv = float(np.trapezoid(np.abs(d1), xs))
        q_tv = float(np.trapezoid(np.abs(model.dQ(d1) * d2), xs))
        h_d2 = h * float(np.trapezoid(np.abs(d2), xs))
        rows.append(EstimateRow(float(h), tv, q_tv, h_d2))
    return rows

# }}}

# vim: foldmethod=marker
