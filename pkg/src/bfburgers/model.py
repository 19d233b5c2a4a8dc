"""Flux pairs ``(f, Q)`` for ``u_t + f(u)_x = Q(u_x)_x``.

A model couples a convective flux ``f`` (``C^1``, ``f(0) = 0``) with a
bounded, strictly increasing dissipation flux ``Q`` that saturates at
``Q(-inf) < 0 < Q(+inf)``.  Built-in instances cover the arctan and
algebraic saturations used throughout the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize, special
from scipy.interpolate import PchipInterpolator

Array = np.ndarray


class ModelError(ValueError):
    pass


# {{{ flux containers

@dataclass(frozen=True)
class FluxFunction:
    eval: Callable[[Array], Array]
    deriv: Callable[[Array], Array]
    convexity_hint: str = "unknown"
    # (f_plus, f_minus) with f = f_plus + f_minus, f_plus' >= 0 >= f_minus'
    split: Optional[tuple[Callable, Callable]] = None

    def __call__(self, u):
        return self.eval(u)


@dataclass(frozen=True)
class DissipationFlux:
    eval: Callable[[Array], Array]
    deriv: Callable[[Array], Array]
    q_minus_inf: float
    q_plus_inf: float
    tail_exponent_beta: Optional[float] = None
    smoothness: str = "C2"

    def __call__(self, s):
        return self.eval(s)

    def inverse(self, y, rtol=1e-15):
        """Solve ``Q(s) = y`` elementwise by bracketed bisection plus Newton.

        Values on or beyond the saturation levels map to ``-inf``/``+inf``.
        """
        y = np.asarray(y, dtype=np.float64)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.empty_like(y)
        below = y <= self.q_minus_inf
        above = y >= self.q_plus_inf
        out[below] = -np.inf
        out[above] = np.inf
        inside = ~(below | above)
        if np.any(inside):
            out[inside] = _bracketed_inverse(self.eval, self.deriv, y[inside], rtol)
        return out[0] if scalar else out


def _bracketed_inverse(Q, dQ, y, rtol):
    lo = -np.ones_like(y)
    hi = np.ones_like(y)
    for _ in range(1100):
        bad = Q(lo) > y
        if not np.any(bad):
            break
        lo[bad] *= 2.0
    for _ in range(1100):
        bad = Q(hi) < y
        if not np.any(bad):
            break
        hi[bad] *= 2.0

    # bisection down to a loose relative width, then safeguarded Newton
    for _ in range(2200):
        mid = 0.5 * (lo + hi)
        width = hi - lo
        if np.all(width <= 1e-7 * (1.0 + np.abs(mid))):
            break
        left = Q(mid) < y
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)

    s = 0.5 * (lo + hi)
    for _ in range(8):
        qs = Q(s)
        d = dQ(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            s_new = s - (qs - y) / d
        # rounding can push a converged step just past the bracket: clip it
        s_new = np.where(np.isfinite(s_new), np.clip(s_new, lo, hi), s)
        if np.all(np.abs(s_new - s) <= rtol * (1.0 + np.abs(s))):
            s = s_new
            break
        s = s_new
    return s


@dataclass(frozen=True)
class ModelSpec:
    name: str
    flux: FluxFunction
    dissipation: DissipationFlux
    params: dict = field(default_factory=dict)

    # shorthands used by the numerics
    def f(self, u):
        return self.flux.eval(u)

    def df(self, u):
        return self.flux.deriv(u)

    def Q(self, s):
        return self.dissipation.eval(s)

    def dQ(self, s):
        return self.dissipation.deriv(s)

    def Qinv(self, y):
        return self.dissipation.inverse(y)

    @property
    def q_minus_inf(self):
        return self.dissipation.q_minus_inf

    @property
    def q_plus_inf(self):
        return self.dissipation.q_plus_inf

    @property
    def q_bar(self):
        return max(abs(self.q_minus_inf), abs(self.q_plus_inf))

    @property
    def beta(self):
        return self.dissipation.tail_exponent_beta

    def eo_split(self, lo=-10.0, hi=10.0):
        """``(f_plus, f_minus)`` for the Engquist-Osher flux."""
        if self.flux.split is not None:
            return self.flux.split
        return numeric_eo_split(self.flux.eval, self.flux.deriv, lo, hi)

# }}}


# {{{ Engquist-Osher splitting for a general C^1 flux

def numeric_eo_split(f, df, lo, hi, n_scan=20001):
    """Split ``f`` into monotone parts using the critical points of ``f``.

    ``f_plus(u) = int_0^u max(f', 0)`` is assembled exactly from values of
    ``f`` at the sign changes of ``f'`` inside ``[lo, hi]``; ``f'`` is
    assumed not to change sign outside that range.
    """
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    s = np.linspace(lo, hi, n_scan)
    d = np.asarray(df(s), dtype=np.float64)
    crit = []
    for i in range(n_scan - 1):
        if d[i] == 0.0:
            crit.append(s[i])
        elif d[i] * d[i + 1] < 0.0:
            crit.append(optimize.brentq(df, s[i], s[i + 1], xtol=1e-15))
    nodes = np.unique(np.concatenate([[lo, 0.0, hi], crit]))

    # on each segment between nodes f is monotone; record its direction
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    rising = np.asarray(df(mids)) > 0.0
    fn = np.asarray(f(nodes), dtype=np.float64)
    # cumulative increase of f through rising segments, anchored at u = 0
    inc = np.where(rising, fn[1:] - fn[:-1], 0.0)
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    i0 = int(np.searchsorted(nodes, 0.0))
    cum = cum - cum[i0]

    def f_plus(u):
        u = np.asarray(u, dtype=np.float64)
        k = np.clip(np.searchsorted(nodes, u, side="right") - 1, 0, len(mids) - 1)
        seg_rise = rising[k]
        return cum[k] + np.where(seg_rise, f(u) - fn[k], 0.0)

    def f_minus(u):
        return f(u) - f_plus(u)

    return f_plus, f_minus

# }}}


# {{{ validation

@dataclass
class CheckItem:
    name: str
    passed: bool
    witness: Optional[float] = None
    detail: str = ""


@dataclass
class ValidationReport:
    items: list = field(default_factory=list)
    smoothness: str = ""

    def add(self, name, passed, witness=None, detail=""):
        self.items.append(CheckItem(name, bool(passed), witness, detail))

    @property
    def passed(self):
        return all(item.passed for item in self.items)

    def failures(self):
        return [item.name for item in self.items if not item.passed]

    def __getitem__(self, name):
        for item in self.items:
            if item.name == name:
                return item
        raise KeyError(name)


def _probe_grid():
    pos = np.logspace(-6, 6, 241)
    return np.concatenate([-pos[::-1], [0.0], pos])


def _safe(fn, x):
    with np.errstate(all="ignore"):
        try:
            return np.asarray(fn(x), dtype=np.float64)
        except (ArithmeticError, ValueError):
            return np.full(np.shape(x), np.nan)


def _first_bad(x, bad):
    idx = np.flatnonzero(bad)
    return float(x[idx[0]]) if idx.size else None


def validate_model(model: ModelSpec, u_range=5.0) -> ValidationReport:
    """Check the structural assumptions on ``(f, Q)`` at probe points."""
    rep = ValidationReport(smoothness=model.dissipation.smoothness)
    s = _probe_grid()
    u = np.linspace(-u_range, u_range, 401)

    fv = _safe(model.f, u)
    dfv = _safe(model.df, u)
    Qv = _safe(model.Q, s)
    dQv = _safe(model.dQ, s)

    for name, x, vals in (("f finite", u, fv), ("f' finite", u, dfv),
                          ("Q finite", s, Qv), ("Q' finite", s, dQv)):
        bad = ~np.isfinite(vals)
        rep.add(name, not bad.any(), _first_bad(x, bad))

    f0 = float(_safe(model.f, np.array([0.0]))[0])
    rep.add("f(0)=0", np.isfinite(f0) and abs(f0) <= 1e-12, 0.0 if abs(f0) > 1e-12 else None,
            f"f(0)={f0!r}")
    q0 = float(_safe(model.Q, np.array([0.0]))[0])
    rep.add("Q(0)=0", np.isfinite(q0) and abs(q0) <= 1e-12, 0.0 if abs(q0) > 1e-12 else None,
            f"Q(0)={q0!r}")

    # central differences of f against f' on shrinking steps
    errs = []
    # small steps too, so a C^1 table (kinks in f'') still passes
    for delta in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        fd = (_safe(model.f, u + delta) - _safe(model.f, u - delta)) / (2 * delta)
        errs.append(np.nanmax(np.abs(fd - dfv) / (1.0 + np.abs(dfv))))
    best = float(np.nanmin(errs)) if np.any(np.isfinite(errs)) else np.inf
    rep.add("f' consistent", best < 1e-5, None, f"fd errors {errs}")

    rep.add("Q' > 0", bool(np.all(dQv > 0.0)), _first_bad(s, ~(dQv > 0.0)))
    # far out Q may round to its saturation level; require strictness only
    # where the increments are representable
    core = np.abs(s[1:]) <= 1e3
    dq = np.diff(Qv)
    bad = (dq < 0.0) | (core & ~(dq > 0.0))
    rep.add("Q monotone", not bad.any(), _first_bad(s[1:], bad))

    qm, qp = model.q_minus_inf, model.q_plus_inf
    finite_limits = np.isfinite(qm) and np.isfinite(qp) and qm < 0.0 < qp
    rep.add("saturation levels", finite_limits, None, f"Q(-inf)={qm}, Q(+inf)={qp}")
    if finite_limits:
        far = _safe(model.Q, np.array([-1e6, 1e6]))
        ok = (abs(far[0] - qm) < 1e-3 * abs(qm)) and (abs(far[1] - qp) < 1e-3 * abs(qp))
        inside = bool(np.all((Qv >= qm) & (Qv <= qp))
                      and np.all((Qv > qm) & (Qv < qp) | (np.abs(s) > 1e3)))
        rep.add("Q saturates", ok and inside, None if ok else 1e6,
                f"Q(+-1e6)={far.tolist()}")
    else:
        rep.add("Q saturates", False, 1e6, "saturation levels not finite")

    if rep.passed:
        ss = np.concatenate([-np.logspace(-3, 2, 60), np.logspace(-3, 2, 60)])
        qs = model.Q(ss)
        back = model.Qinv(qs)
        rel = np.abs(back - ss) / (1.0 + np.abs(ss))
        # rounding of Q(s) alone moves the exact preimage by eps|Q|/Q'(s)
        floor = 4.0 * np.finfo(float).eps * np.abs(qs) / (model.dQ(ss) * (1.0 + np.abs(ss)))
        bad = rel > np.maximum(1e-10, floor)
        rep.add("Q^-1 round trip", not bad.any(), _first_bad(ss, bad),
                f"max rel err {rel.max():.3e}")
    return rep

# }}}


# {{{ derived constants

@dataclass(frozen=True)
class ModelConstants:
    q_bar: float
    f_lip: float
    q1: float
    m_bound: float


def _refined_max(g, a, b, n=10_001):
    """Max of ``g`` on ``[a, b]``: dense scan, then Brent around the best node."""
    x = np.linspace(a, b, n)
    v = np.asarray(g(x), dtype=np.float64)
    k = int(np.argmax(v))
    best = float(v[k])
    lo, hi = x[max(k - 1, 0)], x[min(k + 1, n - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: -float(g(np.array([t]))[0]),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-10 * (1.0 + abs(x[k]))})
        best = max(best, -float(res.fun))
    return best


def derive_constants(model: ModelSpec, M: float) -> ModelConstants:
    if not M > 0:
        raise ModelError(f"bound M must be positive, got {M}")
    f_lip = _refined_max(lambda u: np.abs(model.df(u)), -M, M)

    # Q' over the real line through s = tan(theta)
    def dq_theta(theta):
        return model.dQ(np.tan(theta))
    lim = 0.5 * math.pi * (1 - 1e-9)
    q1 = _refined_max(dq_theta, -lim, lim)
    return ModelConstants(q_bar=model.q_bar, f_lip=f_lip, q1=q1, m_bound=float(M))

# }}}


# {{{ built-in models

def _burgers_flux():
    return FluxFunction(
        eval=lambda u: 0.5 * np.square(u),
        deriv=lambda u: np.asarray(u, dtype=np.float64) * 1.0,
        convexity_hint="convex",
        split=(lambda u: 0.5 * np.square(np.maximum(u, 0.0)),
               lambda u: 0.5 * np.square(np.minimum(u, 0.0))))


def _zero_flux():
    zero = lambda u: np.zeros_like(np.asarray(u, dtype=np.float64))  # noqa: E731
    return FluxFunction(eval=zero, deriv=zero, convexity_hint="convex",
                        split=(zero, zero))


def arctan_dissipation(q_bar=1.0):
    c = 2.0 * q_bar / math.pi
    return DissipationFlux(
        eval=lambda s: c * np.arctan(s),
        deriv=lambda s: c / (1.0 + np.square(s)),
        q_minus_inf=-q_bar, q_plus_inf=q_bar,
        tail_exponent_beta=2.0, smoothness="C-inf")


def power_dissipation(beta, q_bar=1.0):
    """``Q' = c (1 + s^2)^(-beta/2)`` normalised so that ``Q(+inf) = q_bar``.

    ``Q(s) = q_bar sign(s) I_x(1/2, (beta-1)/2)`` with ``x = s^2/(1+s^2)``,
    the regularised incomplete beta function.
    """
    if not beta > 1:
        raise ModelError(f"tail exponent must exceed 1, got {beta}")
    a, b = 0.5, 0.5 * (beta - 1.0)
    c = q_bar / (0.5 * special.beta(a, b))

    if beta == 3.0:
        def Q(s):
            s = np.asarray(s, dtype=np.float64)
            return q_bar * s / np.sqrt(1.0 + s * s)
    else:
        def Q(s):
            s = np.asarray(s, dtype=np.float64)
            x = s * s / (1.0 + s * s)
            # near saturation use the reflected form so 1 - x keeps its digits
            far = x > 0.5
            inc = np.where(far, 1.0 - special.betainc(b, a, 1.0 / (1.0 + s * s)),
                           special.betainc(a, b, x))
            return q_bar * np.sign(s) * inc

    def dQ(s):
        s = np.asarray(s, dtype=np.float64)
        return c * (1.0 + s * s) ** (-0.5 * beta)

    return DissipationFlux(eval=Q, deriv=dQ, q_minus_inf=-q_bar, q_plus_inf=q_bar,
                           tail_exponent_beta=float(beta), smoothness="C-inf")


BUILTIN_NAMES = ("burgers_arctan", "burgers_alg", "zero_flux_beta")


def builtin_model(name: str, q_bar: float = 1.0, beta: Optional[float] = None) -> ModelSpec:
    if not q_bar > 0:
        raise ModelError(f"q_bar must be positive, got {q_bar}")
    if name == "burgers_arctan":
        return ModelSpec(name, _burgers_flux(), arctan_dissipation(q_bar),
                         {"q_bar": q_bar})
    if name == "burgers_alg":
        return ModelSpec(name, _burgers_flux(), power_dissipation(3.0, q_bar),
                         {"q_bar": q_bar})
    if name == "zero_flux_beta":
        beta = 3.0 if beta is None else float(beta)
        return ModelSpec(name, _zero_flux(), power_dissipation(beta, q_bar),
                         {"q_bar": q_bar, "beta": beta})
    raise ModelError(f"unknown built-in model {name!r}; expected one of {BUILTIN_NAMES}")


def custom_model(name, f, df, Q, dQ, q_minus_inf, q_plus_inf, beta=None,
                 convexity="unknown", smoothness="C2") -> ModelSpec:
    """Wrap user callables; no checks are run here, see :func:`validate_model`."""
    return ModelSpec(name, FluxFunction(f, df, convexity),
                     DissipationFlux(Q, dQ, q_minus_inf, q_plus_inf, beta, smoothness))


def tabulated_model(name, u_table, f_table, s_table, Q_table,
                    q_minus_inf, q_plus_inf) -> ModelSpec:
    """Model from coefficient tables using monotone cubic interpolation.

    Outside the tabulated slopes ``Q`` continues with a ``C^1`` hyperbolic
    tail approaching the given saturation level.  The result is only ``C^1``.
    """
    fi = PchipInterpolator(np.asarray(u_table, float), np.asarray(f_table, float),
                           extrapolate=True)
    dfi = fi.derivative()
    s_table = np.asarray(s_table, float)
    Qi = PchipInterpolator(s_table, np.asarray(Q_table, float), extrapolate=False)
    dQi = Qi.derivative()
    s_lo, s_hi = s_table[0], s_table[-1]
    Q_lo, Q_hi = float(Qi(s_lo)), float(Qi(s_hi))
    d_lo, d_hi = float(dQi(s_lo)), float(dQi(s_hi))
    k_lo = d_lo / (Q_lo - q_minus_inf)
    k_hi = d_hi / (q_plus_inf - Q_hi)

    def Q(s):
        s = np.asarray(s, dtype=np.float64)
        inner = np.clip(s, s_lo, s_hi)
        out = np.asarray(Qi(inner), dtype=np.float64)
        hi = s > s_hi
        lo = s < s_lo
        out = np.where(hi, q_plus_inf - (q_plus_inf - Q_hi) / (1.0 + k_hi * (s - s_hi)), out)
        out = np.where(lo, q_minus_inf + (Q_lo - q_minus_inf) / (1.0 + k_lo * (s_lo - s)), out)
        return out

    def dQ(s):
        s = np.asarray(s, dtype=np.float64)
        inner = np.clip(s, s_lo, s_hi)
        out = np.asarray(dQi(inner), dtype=np.float64)
        out = np.where(s > s_hi, d_hi / (1.0 + k_hi * (s - s_hi)) ** 2, out)
        out = np.where(s < s_lo, d_lo / (1.0 + k_lo * (s_lo - s)) ** 2, out)
        return out

    return ModelSpec(name,
                     FluxFunction(lambda u: fi(np.asarray(u, float)),
                                  lambda u: dfi(np.asarray(u, float))),
                     DissipationFlux(Q, dQ, q_minus_inf, q_plus_inf, None, smoothness="C1"))

# }}}

# vim: foldmethod=marker
