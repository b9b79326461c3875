"""Method-of-steps integrator for the cell equation.

The state is ``(w, v)`` with

    w'(t) = q(v(t)) w(t),
    v'(t) = j(w_t, v_t) - mu v(t),

and ``j`` evaluated by a fresh maturation solve on the ``v`` history at every
stage time.  Steps are classical RK4 of fixed size ``dt <= tau_min / 2``, so
the delayed arguments ``w(t - tau), v(t - tau)`` always lie in completed
history.  The part of the history inside the current step (read by the
maturation path for small ``s``) is supplied by a predictor-corrector:
pass 1 extrapolates the previous step's cubic, later passes use the cubic of
the previous pass.  Dense output is the cubic Hermite interpolant of the
grid values and derivatives.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .delay_kernel import (KernelConfig, F_eval, _kernel_funcs, _march, sample_offsets)
from .errors import DomainError, NegativityIntroduced, NoConvergence, NonFiniteState
from .ingredients import IngredientSet
from .segments import HistorySegment, StatePair, hermite_pair, hermite_value
from .textio import fmt17

__all__ = [
    "SolverConfig",
    "InitialCondition",
    "Trajectory",
    "make_admissible",
    "compat_residual",
    "integrate",
    "verify_w_closed_form",
    "verify_voc",
    "ConvergenceStudy",
    "convergence_study",
    "write_trajectory_csv",
]

logger = logging.getLogger(__name__)

ADMISSIBLE_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Step size, horizon and predictor-corrector settings.

    Use :meth:`for_set` to build a configuration checked against the
    minimal delay of an ingredient set; :func:`integrate` re-checks.
    """

    dt: float
    horizon: float
    corrector_passes: int = 2
    kernel: KernelConfig = field(default_factory=KernelConfig)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.corrector_passes < 1:
            raise ValueError("corrector_passes must be at least 1")

    @classmethod
    def for_set(cls, iset: IngredientSet, horizon: float, dt: Optional[float] = None,
                **kw) -> "SolverConfig":
        """``dt=None`` selects ``tau_min / 4``."""
        tau_min = iset.geom.tau_min
        if dt is None:
            dt = tau_min / 4.0
        cfg = cls(dt, horizon, **kw)
        cfg.check(iset)
        return cfg

    def check(self, iset: IngredientSet) -> None:
        tau_min = iset.geom.tau_min
        if self.dt > 0.5 * tau_min * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds tau_min/2={0.5 * tau_min}")


@dataclass(frozen=True, eq=False)
class InitialCondition:
    state: StatePair
    compat_residual: float

    @property
    def phi(self) -> HistorySegment:
        return self.state.w_seg

    @property
    def psi(self) -> HistorySegment:
        return self.state.v_seg


def compat_residual(state: StatePair, iset: IngredientSet,
                    kcfg: Optional[KernelConfig] = None) -> float:
    """``|phi'(0) - F_1| + |psi'(0) - F_2|``: distance from the solution manifold."""
    f1, f2 = F_eval(state.w_seg, state.v_seg, iset, kcfg)
    return abs(state.w_seg.derivs[-1] - f1) + abs(state.v_seg.derivs[-1] - f2)


def _refine_near_zero(seg: HistorySegment, knots_new: np.ndarray) -> HistorySegment:
    """Insert knots; the represented function is unchanged."""
    knots = np.union1d(seg.knots, knots_new)
    v, d = seg.eval_many(knots)
    # stored knots keep their exact data
    idx = np.searchsorted(knots, seg.knots)
    v[idx] = seg.values
    d[idx] = seg.derivs
    return HistorySegment(knots, v, d)


def make_admissible(raw: StatePair, iset: IngredientSet,
                    kcfg: Optional[KernelConfig] = None, *, damping: float = 0.5,
                    max_iter: int = 50, tol: float = ADMISSIBLE_TOL,
                    bump_knots: int = 257) -> InitialCondition:
    """Move a nonnegative history pair onto the solution manifold.

    Each component receives the bump
    ``c(theta) = alpha * theta * exp(theta / sigma) * chi(theta)``
    (``sigma = h / 16``) on ``(-h/4, 0]``, where ``chi`` is the quintic
    smoothstep rising from 0 at ``-h/4`` to 1 at ``0``.  The cutoff makes the
    bump join the raw history with matching value, slope and curvature;
    ``theta * exp(theta / sigma)`` alone does not vanish at ``-h/4``.  The bump
    leaves ``x(0)`` unchanged and shifts ``x'(0)`` by ``alpha``; the two
    amplitudes are found by damped fixed-point iteration on
    ``x'(0) = F(x)``.  This construction is ours: any admissible history
    works as initial data.

    The bump varies on the scale ``sigma``, so ``bump_knots`` equispaced
    knots are inserted on ``[-h/4, 0]`` first; a coarse Hermite
    representation would leave second-derivative jumps that cost the
    integrator its order.

    Raises
    ------
    NoConvergence
        The residual is still above ``tol`` after ``max_iter`` iterations.
    NegativityIntroduced
        The correction makes a component negative.
    """
    for seg in (raw.w_seg, raw.v_seg):
        if seg.values.min() < 0:
            raise ValueError("raw history values must be nonnegative")
    f = np.array(F_eval(raw.w_seg, raw.v_seg, iset, kcfg))
    d0 = np.array([raw.w_seg.derivs[-1], raw.v_seg.derivs[-1]])
    r = f - d0
    if np.abs(r).sum() <= tol:
        return InitialCondition(raw, float(np.abs(r).sum()))

    h = raw.h
    sigma = h / 16.0
    extra = np.linspace(-h / 4.0, 0.0, bump_knots)
    w_seg = _refine_near_zero(raw.w_seg, extra)
    v_seg = _refine_near_zero(raw.v_seg, extra)
    theta = w_seg.knots
    mask = theta > -h / 4.0
    th = theta[mask]
    ex = np.exp(th / sigma)
    u = th / (h / 4.0) + 1.0
    chi = u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)
    dchi = 30.0 * u * u * (1.0 - u) ** 2 / (h / 4.0)
    shape_v = th * ex * chi
    shape_d = (1.0 + th / sigma) * ex * chi + th * ex * dchi

    def corrected(alpha):
        segs = []
        for seg, a in zip((w_seg, v_seg), alpha):
            vals = seg.values.copy()
            ders = seg.derivs.copy()
            vals[mask] += a * shape_v
            ders[mask] += a * shape_d
            segs.append(seg.with_data(vals, ders))
        return StatePair(*segs)

    alpha = r.copy()
    for it in range(max_iter):
        state = corrected(alpha)
        f = np.array(F_eval(state.w_seg, state.v_seg, iset, kcfg))
        r = f - (d0 + alpha)
        res = float(np.abs(r).sum())
        if res <= tol:
            break
        alpha = alpha + damping * r
    else:
        raise NoConvergence(f"make_admissible: residual {res:.3e} after {max_iter} iterations")
    for new, old in ((state.w_seg, w_seg), (state.v_seg, v_seg)):
        if new.min_value() < min(0.0, old.min_value()):
            raise NegativityIntroduced(
                f"bump correction produced minimum {new.min_value():.3e}")
    logger.debug("make_admissible converged in %d iterations, alpha=%s", it + 1, alpha)
    return InitialCondition(state, res)


@dataclass(eq=False)
class Trajectory:
    """Grid samples of a solution together with its dense history.

    ``w, v, dw, dv`` are the solution and its derivative at ``times``;
    ``tau`` and ``j`` the delay and recruitment recorded there, ``j_mid`` the
    recruitment at step midpoints.  ``corrector_delta`` is the largest change
    of a step value made by the last corrector pass.  The dense
    solution on ``[-h, T_end]`` is the initial history followed by the cubic
    Hermite interpolant of the grid data.
    """

    ic: InitialCondition
    dt: float
    times: np.ndarray
    w: np.ndarray
    v: np.ndarray
    dw: np.ndarray
    dv: np.ndarray
    tau: np.ndarray
    j: np.ndarray
    j_mid: np.ndarray
    mu: float
    corrector_delta: float = 0.0
    stopped_early: bool = False

    @property
    def h(self) -> float:
        return self.ic.state.h

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def dense(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(w, v, w', v')`` at times ``t`` in ``[-h, T_end]``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = [np.empty_like(t) for _ in range(4)]
        neg = t < 0
        if neg.any():
            out[0][neg], out[2][neg] = self.ic.phi.eval_many(t[neg])
            out[1][neg], out[3][neg] = self.ic.psi.eval_many(t[neg])
        pos = ~neg
        if pos.any():
            tp = t[pos]
            n = self.times.size - 1
            k = np.clip(np.floor(tp / self.dt).astype(int), 0, n - 1)
            u = tp / self.dt - k
            for (val, der), (oi, od) in (((self.w, self.dw), (0, 2)), ((self.v, self.dv), (1, 3))):
                a, b_ = hermite_pair(u, self.dt, val[k], der[k], val[k + 1], der[k + 1])
                out[oi][pos] = a
                out[od][pos] = b_
        return tuple(out)

    def segment_at(self, t: float, n_knots: Optional[int] = None) -> StatePair:
        """The state ``x_t`` as a :class:`StatePair` (grid times give exact knots)."""
        h = self.h
        if n_knots is None:
            n_knots = max(2, int(round(h / self.dt)) + 1)
        theta = np.linspace(-h, 0.0, n_knots)
        w, v, dw, dv = self.dense(t + theta)
        return StatePair(HistorySegment(theta, w, dw), HistorySegment(theta, v, dv))

    def segment_norms(self, n_ref: int = 8) -> np.ndarray:
        """``||w_t||_1 + ||v_t||_1`` at every grid time.

        Sup norms are taken over ``n_ref`` refinement points per step.
        """
        step = n_ref + 1
        fine_dt = self.dt / step
        m = int(math.floor(self.h / fine_dt))
        k = np.arange(-m, (self.times.size - 1) * step + 1)
        tf = np.maximum(k * fine_dt, -self.h)
        out = np.zeros(self.times.size)
        for arr in self.dense(tf):
            win = sliding_window_view(np.abs(arr), m + 1).max(axis=1)
            out += win[::step][: self.times.size]
        return out


class _History:
    """Dense mature-cell history used while stepping."""

    def __init__(self, ic: InitialCondition, dt: float, W, V, DW, DV):
        self.phi = ic.phi
        self.psi = ic.psi
        self.dt = dt
        self.W, self.V, self.DW, self.DV = W, V, DW, DV
        kn = ic.psi.knots
        self.ic_last = (float(kn[-2]), float(kn[-1] - kn[-2]))

    def v_samples(self, t_star, s, n, prov):
        """``v(t_star - s)`` for ascending offsets ``s``; ``prov`` covers ``(t_n, t_n + dt]``."""
        t = t_star - s
        out = np.empty_like(t)
        dt = self.dt
        t_n = n * dt
        i_prov = int(np.searchsorted(-t, -t_n, side="left"))
        i_ic = int(np.searchsorted(-t, 0.0, side="right"))
        if i_prov:
            t0, span, y0, m0, y1, m1 = prov
            out[:i_prov] = hermite_value((t[:i_prov] - t0) / span, span, y0, m0, y1, m1)
        if i_ic > i_prov:
            tg = t[i_prov:i_ic]
            k = np.minimum((tg / dt).astype(int), max(n - 1, 0))
            if n == 0:
                out[i_prov:i_ic] = self.V[0]
            else:
                V, DV = self.V, self.DV
                out[i_prov:i_ic] = hermite_value(tg / dt - k, dt, V[k], DV[k], V[k + 1], DV[k + 1])
        if i_ic < t.size:
            out[i_ic:] = self.psi.eval_many(t[i_ic:])[0]
        return out

    def point(self, t, n):
        """``(w(t), v(t))`` for ``t <= t_n``."""
        if t < 0.0:
            return self.phi.eval(t)[0], self.psi.eval(t)[0]
        dt = self.dt
        k = min(int(t / dt), n - 1)
        u = t / dt - k
        W, V, DW, DV = self.W, self.V, self.DW, self.DV
        return (hermite_value(u, dt, W[k], DW[k], W[k + 1], DW[k + 1]),
                hermite_value(u, dt, V[k], DV[k], V[k + 1], DV[k + 1]))

    def last_piece(self, n):
        """Cubic piece ending at ``t_n`` (for extrapolation), as ``(t0, span, y0, m0, y1, m1)``."""
        if n == 0:
            t0, span = self.ic_last
            i = -2
            return (t0, span, self.psi.values[i], self.psi.derivs[i],
                    self.psi.values[-1], self.psi.derivs[-1])
        dt = self.dt
        return ((n - 1) * dt, dt, self.V[n - 1], self.DV[n - 1], self.V[n], self.DV[n])


def integrate(ic: InitialCondition, iset: IngredientSet, cfg: SolverConfig, *,
              stop_above: Optional[float] = None) -> Trajectory:
    """Integrate from an admissible initial condition up to ``cfg.horizon``.

    Parameters
    ----------
    stop_above:
        Stop early (and flag the trajectory) once ``w + v`` exceeds this.

    Raises
    ------
    NonFiniteState
        A step produced NaN or infinity.
    NoCrossing, PathEscape, DomainError
        Propagated from the maturation kernel.
    """
    cfg.check(iset)
    geom = iset.geom
    if abs(ic.state.h - geom.h) > 1e-12 * geom.h:
        raise ValueError(f"initial history length {ic.state.h} does not match h = {geom.h}")
    dt = cfg.dt
    n_steps = int(math.ceil(cfg.horizon / dt - 1e-9))
    kcfg = cfg.kernel
    q, gamma, _, _, _ = iset.raw
    g, e = _kernel_funcs(iset)
    g_raw = iset.raw[2]
    mu = iset.params.mu
    x1, x2, b, r_minus = geom.x1, geom.x2, geom.b, geom.R_minus
    tol = kcfg.threshold_tol
    n_sub = kcfg.substeps_per_h
    ds = geom.h / n_sub
    s_off = sample_offsets(geom.h, kcfg)
    # the path never reads beyond the delay upper bound plus one substep
    s_cap = min(geom.h, geom.tau_bounds[1] * (1 + 1e-9) + ds)
    n_samples = min(s_off.size, 2 * int(math.ceil(s_cap / ds)) + 1)
    s_off = s_off[:n_samples]
    n_max = (n_samples - 1) // 2

    W = np.zeros(n_steps + 1)
    V = np.zeros(n_steps + 1)
    DW = np.zeros(n_steps + 1)
    DV = np.zeros(n_steps + 1)
    TAU = np.zeros(n_steps + 1)
    JJ = np.zeros(n_steps + 1)
    JM = np.zeros(n_steps)
    hist = _History(ic, dt, W, V, DW, DV)

    def recruit(t_star, n, prov):
        z = hist.v_samples(t_star, s_off, n, prov)
        if z.min() <= r_minus:
            raise DomainError(f"history value {z.min()} not in I at t={t_star}")
        zl = z.tolist()
        tau, E, _, _ = _march(zl, ds, n_max, g, e, x1, x2, b, tol)
        w_tau, v_tau = hist.point(t_star - tau, n)
        if v_tau <= r_minus:
            raise DomainError(f"delayed value {v_tau} not in I at t={t_star}")
        c = gamma(v_tau) * g_raw(x2, zl[0]) / g_raw(x1, v_tau) * math.exp(E)
        return c * w_tau, tau

    w0 = float(ic.phi.values[-1])
    v0 = float(ic.psi.values[-1])
    W[0], V[0] = w0, v0
    j0, tau0 = recruit(0.0, 0, None)
    if v0 <= r_minus:
        raise DomainError(f"initial value {v0} not in I")
    DW[0] = q(v0) * w0
    DV[0] = j0 - mu * v0
    TAU[0], JJ[0] = tau0, j0

    passes = cfg.corrector_passes
    half = 0.5 * dt
    delta_max = 0.0
    stopped = False
    n_done = n_steps
    for n in range(n_steps):
        t_n = n * dt
        wn, vn, fw, fv = W[n], V[n], DW[n], DV[n]
        prov = hist.last_piece(n)
        prev = None
        for _ in range(passes):
            j_half, _ = recruit(t_n + half, n, prov)
            j_full, tau_full = recruit(t_n + dt, n, prov)
            w2 = wn + half * fw
            v2 = vn + half * fv
            if v2 <= r_minus:
                raise DomainError(f"stage value v={v2} not in I at t={t_n}")
            kw2 = q(v2) * w2
            kv2 = j_half - mu * v2
            w3 = wn + half * kw2
            v3 = vn + half * kv2
            if v3 <= r_minus:
                raise DomainError(f"stage value v={v3} not in I at t={t_n}")
            kw3 = q(v3) * w3
            kv3 = j_half - mu * v3
            w4 = wn + dt * kw3
            v4 = vn + dt * kv3
            if v4 <= r_minus:
                raise DomainError(f"stage value v={v4} not in I at t={t_n}")
            kw4 = q(v4) * w4
            kv4 = j_full - mu * v4
            w_new = wn + dt / 6.0 * (fw + 2.0 * (kw2 + kw3) + kw4)
            v_new = vn + dt / 6.0 * (fv + 2.0 * (kv2 + kv3) + kv4)
            if not (math.isfinite(w_new) and math.isfinite(v_new)):
                raise NonFiniteState(f"non-finite state at t={t_n + dt}")
            if v_new <= r_minus:
                raise DomainError(f"state v={v_new} not in I at t={t_n + dt}")
            dw_new = q(v_new) * w_new
            dv_new = j_full - mu * v_new
            delta = 0.0 if prev is None else max(abs(w_new - prev[0]), abs(v_new - prev[1]))
            prev = (w_new, v_new)
            prov = (t_n, dt, vn, fv, v_new, dv_new)
        delta_max = max(delta_max, delta)
        W[n + 1], V[n + 1], DW[n + 1], DV[n + 1] = w_new, v_new, dw_new, dv_new
        TAU[n + 1], JJ[n + 1] = tau_full, j_full
        JM[n] = j_half
        if stop_above is not None and w_new + v_new > stop_above:
            stopped = True
            n_done = n + 1
            break

    m = n_done + 1
    times = np.arange(m) * dt
    return Trajectory(ic, dt, times, W[:m].copy(), V[:m].copy(), DW[:m].copy(), DV[:m].copy(),
                      TAU[:m].copy(), JJ[:m].copy(), JM[: m - 1].copy(), mu, delta_max, stopped)


def _cumulative_simpson(f: np.ndarray, dt: float) -> np.ndarray:
    """Integral of grid samples from 0 to every grid time.

    Composite Simpson on pairs of intervals; an odd endpoint adds its last
    interval with the three-point rule ``(-1, 8, 5) dt / 12``.
    """
    n = f.size
    out = np.zeros(n)
    if n == 2:
        out[1] = 0.5 * dt * (f[0] + f[1])
    if n < 3:
        return out
    out[2::2] = np.cumsum(dt / 3.0 * (f[0:-2:2] + 4.0 * f[1:-1:2] + f[2::2]))
    out[1] = dt / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2])
    idx = np.arange(3, n, 2)
    out[idx] = out[idx - 1] + dt / 12.0 * (-f[idx - 2] + 8.0 * f[idx - 1] + 5.0 * f[idx])
    return out


def verify_w_closed_form(traj: Trajectory, iset: IngredientSet) -> float:
    """Max over the grid of ``|w(t) - exp(int_0^t q(v)) w(0)| / (1 + |w(t)|)``."""
    q = iset.raw[0]
    qv = np.array([q(x) for x in traj.v])
    integral = _cumulative_simpson(qv, traj.dt)
    ref = np.exp(integral) * traj.w[0]
    return float(np.max(np.abs(traj.w - ref) / (1.0 + np.abs(traj.w))))


def verify_voc(traj: Trajectory, iset: IngredientSet) -> float:
    """Max relative residual of the variation-of-constants form for ``v``.

    ``v(t) = v(0) exp(-mu t) + int_0^t exp(-mu (t - s)) j(s) ds``; the
    convolution is accumulated step by step with Simpson's rule on the
    recorded ``j`` at grid points and step midpoints.
    """
    mu = iset.params.mu
    dt = traj.dt
    e_full = math.exp(-mu * dt)
    e_half = math.exp(-0.5 * mu * dt)
    inc = dt / 6.0 * (e_full * traj.j[:-1] + 4.0 * e_half * traj.j_mid + traj.j[1:])
    conv = np.zeros(traj.times.size)
    acc = 0.0
    for i, x in enumerate(inc, start=1):
        acc = e_full * acc + x
        conv[i] = acc
    ref = traj.v[0] * np.exp(-mu * traj.times) + conv
    return float(np.max(np.abs(traj.v - ref) / (1.0 + np.abs(traj.v))))


@dataclass(frozen=True)
class ConvergenceStudy:
    """Errors at the horizon for ``dt, dt/2, dt/4`` against a ``dt/8`` reference."""

    dts: tuple[float, ...]
    errors: tuple[float, ...]

    @property
    def orders(self) -> tuple[float, ...]:
        e = self.errors
        return tuple(math.log2(e[i] / e[i + 1]) for i in range(len(e) - 1))

    @property
    def order(self) -> float:
        return min(self.orders)


def convergence_study(ic: InitialCondition, iset: IngredientSet, horizon: float,
                      dt: Optional[float] = None, levels: int = 3,
                      kcfg: Optional[KernelConfig] = None) -> ConvergenceStudy:
    """Step-halving study; the error is ``max(|w(T) - w_ref(T)|, |v(T) - v_ref(T)|)``."""
    kcfg = kcfg or KernelConfig()
    dt = iset.geom.tau_min / 4.0 if dt is None else dt
    dts = tuple(dt / 2 ** i for i in range(levels))

    def final(step):
        tr = integrate(ic, iset, SolverConfig(step, horizon, kernel=kcfg))
        return tr.w[-1], tr.v[-1]

    w_ref, v_ref = final(dt / 2 ** levels)
    errors = []
    for step in dts:
        w_T, v_T = final(step)
        errors.append(max(abs(w_T - w_ref), abs(v_T - v_ref)))
    return ConvergenceStudy(dts, tuple(errors))


def write_trajectory_csv(traj: Trajectory, path, header: Optional[str] = None) -> None:
    """Write ``t,w,v,dw,dv,tau,j`` with 17 significant digits and LF endings.

    ``header`` is written verbatim first (it should end with a newline).
    """
    with open(path, "w", newline="\n") as fh:
        if header:
            fh.write(header)
        fh.write("t,w,v,dw,dv,tau,j\n")
        cols = (traj.times, traj.w, traj.v, traj.dw, traj.dv, traj.tau, traj.j)
        for row in zip(*cols):
            fh.write(",".join(fmt17(x) for x in row) + "\n")
