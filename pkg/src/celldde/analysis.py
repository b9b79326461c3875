"""Equilibria, regime classification and ensemble diagnostics.

The ensemble estimators are empirical: a finite set of trajectories over a
finite horizon gives evidence for global stability, persistence or
ultimate boundedness, never a proof.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .delay_kernel import KernelConfig, F_eval, recruitment_coefficient, solve_maturation
from .errors import DegenerateCoefficient, NegativityIntroduced, NonFiniteState
from .ingredients import (FAILS, HOLDS, HypothesisReport, IngredientSet, default_z_hi,
                          _bisect)
from .integrator import (InitialCondition, SolverConfig, Trajectory, integrate,
                         make_admissible)
from .segments import StatePair, constant, from_function

__all__ = [
    "ZERO_GAS",
    "PERSISTENT_STRONG",
    "PERSISTENT_WEAK_ONLY",
    "OPEN_CASE",
    "INDETERMINATE",
    "RegimeClassification",
    "Equilibrium",
    "EquilibriumSet",
    "EnsembleMember",
    "GasReport",
    "PersistenceReport",
    "PersistenceCheck",
    "BoundReport",
    "NakataReport",
    "find_q_zeros",
    "positive_equilibrium",
    "find_equilibria",
    "classify_regime",
    "shaped_history",
    "make_ensemble",
    "run_ensemble",
    "estimate_gas",
    "estimate_persistence",
    "persistence_self_consistency",
    "dissipation_time",
    "dissipativity_constants",
    "DissipativityConstants",
    "detect_ultimate_bound",
    "nakata_limit_compare",
]

logger = logging.getLogger(__name__)

ZERO_GAS = "ZeroGAS"
PERSISTENT_STRONG = "PersistentStrong"
PERSISTENT_WEAK_ONLY = "PersistentWeakOnly"
OPEN_CASE = "OpenCase"
INDETERMINATE = "Indeterminate"

ROOT_TOL = 1e-12
Q0_ZERO_TOL = 1e-12
UNBOUNDED_THRESHOLD = 1e6


# ---------------------------------------------------------------------------
# equilibria


def find_q_zeros(iset: IngredientSet, z_hi: Optional[float] = None,
                 n_grid: int = 2048, refine: int = 8) -> list[float]:
    """Zeros of ``q`` on ``(0, z_hi]`` by bracketing and bisection.

    Bisection runs to machine precision, well inside the ``1e-12`` target.

    Cells where ``|q|`` has a local minimum without a sign change are
    re-sampled ``refine`` times finer, so a close pair of roots is not lost.
    """
    q = iset.raw[0]
    if z_hi is None:
        z_hi = default_z_hi(iset.params, iset.spec)
    zs = np.linspace(0.0, z_hi, n_grid + 1)[1:]
    qs = np.array([q(z) for z in zs])
    brackets = []
    for i in range(zs.size - 1):
        if qs[i] == 0.0:
            brackets.append((zs[i], zs[i]))
        elif qs[i] * qs[i + 1] < 0:
            brackets.append((zs[i], zs[i + 1]))
        elif 0 < i and abs(qs[i]) < abs(qs[i - 1]) and abs(qs[i]) < abs(qs[i + 1]):
            fine = np.linspace(zs[i - 1], zs[i + 1], 2 * refine + 1)
            qf = np.array([q(z) for z in fine])
            for k in range(fine.size - 1):
                if qf[k] * qf[k + 1] < 0:
                    brackets.append((fine[k], fine[k + 1]))
    if qs[-1] == 0.0:
        brackets.append((zs[-1], zs[-1]))
    roots = []
    for lo, hi in brackets:
        r = lo if lo == hi else _bisect(q, float(lo), float(hi), 0.0)
        if not roots or abs(r - roots[-1]) > ROOT_TOL:
            roots.append(float(r))
    return sorted(roots)


@dataclass(frozen=True)
class Equilibrium:
    w: float
    v: float
    tau: float
    residual: float


@dataclass(frozen=True)
class EquilibriumSet:
    """The zero state and every positive equilibrium found."""

    positives: tuple[Equilibrium, ...] = ()
    zero: tuple[float, float] = (0.0, 0.0)


def positive_equilibrium(z_bar: float, iset: IngredientSet,
                         kcfg: Optional[KernelConfig] = None) -> Equilibrium:
    """Positive equilibrium with mature concentration ``z_bar`` (a zero of ``q``).

    With constant histories ``j`` is linear in the constant ``w``, so
    ``w = mu v / c(v)`` where ``c`` is the recruitment coefficient.
    """
    kcfg = kcfg or KernelConfig()
    h = iset.geom.h
    psi = constant(z_bar, h)
    sol = solve_maturation(psi, iset, kcfg)
    c = recruitment_coefficient(z_bar, z_bar, sol.exponent, iset)
    if not c > 0:
        raise DegenerateCoefficient(f"recruitment coefficient {c} at v={z_bar} is not positive")
    w_bar = iset.params.mu * z_bar / c
    f1, f2 = F_eval(constant(w_bar, h), psi, iset, kcfg)
    return Equilibrium(w_bar, z_bar, sol.tau, abs(f1) + abs(f2))


def find_equilibria(iset: IngredientSet, kcfg: Optional[KernelConfig] = None,
                    z_hi: Optional[float] = None) -> EquilibriumSet:
    roots = find_q_zeros(iset, z_hi)
    return EquilibriumSet(tuple(positive_equilibrium(z, iset, kcfg) for z in roots))


# ---------------------------------------------------------------------------
# regimes


@dataclass(frozen=True)
class RegimeClassification:
    regime: str
    justification: tuple[tuple[str, str], ...]

    def summary(self) -> str:
        return f"regime={self.regime}"


def classify_regime(iset: IngredientSet, report: HypothesisReport) -> RegimeClassification:
    """Map hypothesis verdicts to a long-term regime.

    * ``ZeroGAS``: H15, and ``q(0) < 0`` or ``gamma(0) > 0``; ``|q(0)| <= 1e-12``
      counts as ``q(0) = 0``.
    * ``PersistentStrong``: H16, H17 and Eq66.
    * ``OpenCase``: built-in family with ``kappa > 0``, ``k = 0`` and Eq66 failing.
    * ``PersistentWeakOnly``: H16 and some ``z > 0`` with ``q(z) <= 0``.
    * ``Indeterminate``: anything else, including contradictory verdicts.
    """
    h15, h16, h17, e66 = (report.holds(i) for i in ("H15", "H16", "H17", "Eq66"))
    q0 = iset.q(0.0)
    gamma0 = iset.gamma(0.0)
    ids = ("H15", "H16", "H17", "Eq66")
    just = [(i, report.verdict(i)) for i in ids]
    p = iset.params

    # rounding can leave q(0) = 1e-16 where it is exactly zero
    q0_zero = abs(q0) <= Q0_ZERO_TOL
    if h15 and h16 and not q0_zero:
        regime = INDETERMINATE
    elif h15 and (q0 < 0 or gamma0 > 0):
        regime = ZERO_GAS
    elif h16 and h17 and e66:
        regime = PERSISTENT_STRONG
    elif iset.builtin_q and p.kappa > 0 and p.k == 0 and not e66:
        regime = OPEN_CASE
        just.append(("kappa>0,k=0", HOLDS))
    else:
        q = iset.raw[0]
        z_hi = default_z_hi(p, iset.spec)
        q_inf = iset.q_limit()
        nonpos = any(q(z) <= 0 for z in np.linspace(0.0, z_hi, 2049)[1:])
        nonpos = nonpos or (q_inf is not None and q_inf < 0)
        just.append(("exists z+ with q<=0", HOLDS if nonpos else FAILS))
        regime = PERSISTENT_WEAK_ONLY if (h16 and nonpos) else INDETERMINATE
    return RegimeClassification(regime, tuple(just))


# ---------------------------------------------------------------------------
# ensembles

SHAPES = ("constant", "exp", "sine")


@dataclass(frozen=True, eq=False)
class EnsembleMember:
    index: int
    seed: tuple[int, int]
    shape: str
    w0: float
    v0: float
    ic: InitialCondition
    attempts: int = 1


def shaped_history(shape: str, c: float, h: float, n_knots: int = 33,
                   rng: Optional[np.random.Generator] = None):
    """History on ``[-h, 0]`` with value ``c`` at ``0`` and one of :data:`SHAPES`.

    ``exp`` is ``c exp(-lam theta)``, ``sine`` is
    ``c (1 + amp exp(lam theta) sin(om theta))``; both stay positive for
    ``c > 0``.  Shape parameters are drawn from ``rng``, or fixed
    mid-range values when ``rng`` is ``None``.
    """
    if shape not in SHAPES:
        raise ValueError(f"unknown history shape {shape!r}")
    if shape == "constant" or c == 0.0:
        return constant(c, h, n_knots)
    lam = rng.uniform(0.5, 3.0) if rng is not None else 1.5
    if shape == "exp":
        # larger in the past, decaying towards theta = 0
        return from_function(lambda t: c * math.exp(-lam * t),
                             lambda t: -lam * c * math.exp(-lam * t), h, n_knots)
    if shape == "sine":
        amp = rng.uniform(0.2, 0.5) if rng is not None else 0.3
        om = (rng.uniform(2.0, 4.0) if rng is not None else 3.0) * math.pi / h
        return from_function(
            lambda t: c * (1.0 + amp * math.exp(lam * t) * math.sin(om * t)),
            lambda t: c * amp * math.exp(lam * t) * (lam * math.sin(om * t) + om * math.cos(om * t)),
            h, n_knots)


def make_ensemble(iset: IngredientSet, n: int, seed: int, *, lo: float = 0.01,
                  hi: float = 10.0, shapes: Sequence[str] = SHAPES, n_knots: int = 33,
                  kcfg: Optional[KernelConfig] = None, max_attempts: int = 20,
                  ratio: float = 2.0) -> list[EnsembleMember]:
    """Seeded admissible initial conditions with magnitudes spanning ``[lo, hi]``.

    Member ``i`` draws a magnitude ``M`` log-uniformly from the ``i``-th of
    ``n`` equal log-strata, then ``phi(0), psi(0) = M r`` with independent
    log-uniform ``r`` in ``[1/ratio, ratio]`` (clipped to ``[lo, hi]``) and the
    history shape ``shapes[i % len(shapes)]``.  Pairs whose admissibility
    correction turns negative are redrawn from the same stream.
    """
    if n < 1:
        raise ValueError("ensemble size must be positive")
    if not 0 < lo <= hi:
        raise ValueError("need 0 < lo <= hi")
    h = iset.geom.h
    llo, lhi = math.log(lo), math.log(hi)
    members = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        shape = shapes[i % len(shapes)]
        u = (i + rng.uniform()) / n
        mag = math.exp(llo + u * (lhi - llo))
        for attempt in range(1, max_attempts + 1):
            r = np.exp(rng.uniform(-math.log(ratio), math.log(ratio), 2))
            w0, v0 = (float(np.clip(mag * x, lo, hi)) for x in r)
            raw = StatePair(shaped_history(shape, w0, h, n_knots, rng),
                            shaped_history(shape, v0, h, n_knots, rng))
            try:
                ic = make_admissible(raw, iset, kcfg)
            except NegativityIntroduced:
                continue
            members.append(EnsembleMember(i, (seed, i), shape, w0, v0, ic, attempt))
            break
        else:
            raise NegativityIntroduced(f"member {i}: no admissible draw in {max_attempts} attempts")
    return members


def run_ensemble(members: Sequence[EnsembleMember], iset: IngredientSet, cfg: SolverConfig,
                 *, stop_above: Optional[float] = None) -> list[Trajectory]:
    return [integrate(m.ic, iset, cfg, stop_above=stop_above) for m in members]


def _final_norm(traj: Trajectory) -> float:
    return traj.segment_at(traj.t_end).c1_norm()


@dataclass(frozen=True)
class GasReport:
    tails: tuple[float, ...]
    horizon: float

    @property
    def tail_max(self) -> float:
        return max(self.tails) if self.tails else 0.0


def estimate_gas(members: Sequence[EnsembleMember], iset: IngredientSet, cfg: SolverConfig,
                 trajectories: Optional[Sequence[Trajectory]] = None) -> GasReport:
    """``||(w, v)_T||_1`` on the final segment of every ensemble member."""
    trajs = trajectories if trajectories is not None else run_ensemble(members, iset, cfg)
    return GasReport(tuple(_final_norm(t) for t in trajs), cfg.horizon)


RHO1 = "rho1"
RHO_M = "rho_m"


@dataclass(frozen=True)
class PersistenceReport:
    """Tail-window infimum of a persistence function per trajectory.

    ``rho1`` is ``phi(0)``, ``rho_m`` is ``min(phi(0), psi(0))``.
    """

    rho: str
    window: float
    tails: tuple[float, ...]
    seeds: tuple[tuple[int, int], ...]
    dt: float

    @property
    def eps_hat(self) -> float:
        return min(self.tails) if self.tails else 0.0


def _rho_values(traj: Trajectory, rho: str) -> np.ndarray:
    if rho == RHO1:
        return traj.w
    if rho == RHO_M:
        return np.minimum(traj.w, traj.v)
    raise ValueError(f"unknown persistence function {rho!r}")


def estimate_persistence(members: Sequence[EnsembleMember], iset: IngredientSet,
                         cfg: SolverConfig, rho: str = RHO_M, window: float = 50.0,
                         trajectories: Optional[Sequence[Trajectory]] = None) -> PersistenceReport:
    """Infimum of ``rho`` at grid states over ``[T - window, T]``."""
    if window > cfg.horizon:
        raise ValueError("window exceeds the horizon")
    trajs = trajectories if trajectories is not None else run_ensemble(members, iset, cfg)
    tails = []
    for tr in trajs:
        vals = _rho_values(tr, rho)
        mask = tr.times >= tr.t_end - window * (1 + 1e-12)
        tails.append(max(0.0, float(vals[mask].min())))
    return PersistenceReport(rho, window, tuple(tails), tuple(m.seed for m in members), cfg.dt)


@dataclass(frozen=True)
class PersistenceCheck:
    """Base estimate against a rerun with halved step and doubled window."""

    base: PersistenceReport
    rerun: PersistenceReport

    @property
    def rel_change(self) -> float:
        a, b = self.base.eps_hat, self.rerun.eps_hat
        return abs(a - b) / max(abs(a), abs(b)) if max(a, b) > 0 else 0.0

    def stable(self, rtol: float = 0.1) -> bool:
        return self.base.eps_hat > 0 and self.rel_change <= rtol


def persistence_self_consistency(members: Sequence[EnsembleMember], iset: IngredientSet,
                                 cfg: SolverConfig, window: float = 50.0,
                                 rhos: Sequence[str] = (RHO1, RHO_M)) -> dict[str, PersistenceCheck]:
    """Estimate for each ``rho``, then again with ``dt / 2`` and ``2 window``."""
    if 2 * window > cfg.horizon:
        raise ValueError("the doubled window must fit in the horizon")
    base_tr = run_ensemble(members, iset, cfg)
    half = SolverConfig(cfg.dt / 2, cfg.horizon, cfg.corrector_passes, cfg.kernel)
    half_tr = run_ensemble(members, iset, half)
    return {rho: PersistenceCheck(
        estimate_persistence(members, iset, cfg, rho, window, base_tr),
        estimate_persistence(members, iset, half, rho, 2 * window, half_tr))
        for rho in rhos}


# ---------------------------------------------------------------------------
# dissipativity


@dataclass(frozen=True)
class DissipativityConstants:
    """Candidate constants of the dissipativity argument for the concrete ``j``.

    ``K1 = (z* + 1) mu / c_low`` uses the lower bound ``c_low`` of the
    recruitment coefficient; ``K2 = K1 exp(q0 (t_d + h))`` with
    ``q0 = max(1, sup_{[0, z*]} q)``; ``eps_w = K1 delta``.
    """

    t_d: float
    c_low: float
    K1: float
    K2: float
    eps_w: float
    z_star: float
    delta: float


def dissipation_time(z_star: float, mu: float) -> float:
    """``t_d = ln(z* + 1) / mu``: after this long under recruitment at rate
    ``(z* + 1) mu`` the mature population exceeds ``z*``."""
    return math.log(z_star + 1.0) / mu


def dissipativity_constants(iset: IngredientSet, report: HypothesisReport
                            ) -> Optional[DissipativityConstants]:
    """``None`` unless H17, Eq66, H18i, Eq8 and H18ii all hold."""
    if not all(report.holds(i) for i in ("H17", "Eq66", "H18i", "Eq8", "H18ii")):
        return None
    c17 = report["H17"].constants
    z_star, delta = c17["z_star"], c17["delta"]
    mu = iset.params.mu
    geom = iset.geom
    t_d = dissipation_time(z_star, mu)
    e_sup = report["H18ii"].constants["sup_abs_d"] + report["Eq8"].constants["sup_abs_D1g"]
    c_low = (report["Eq66"].constants["eps_gamma"] * geom.eps_g / geom.K_g
             * math.exp(-geom.h * e_sup))
    K1 = (z_star + 1.0) * mu / c_low
    q = iset.raw[0]
    q0 = max([1.0] + [q(z) for z in np.linspace(0.0, z_star, 257)])
    K2 = K1 * math.exp(q0 * (t_d + geom.h))
    return DissipativityConstants(t_d, c_low, K1, K2, K1 * delta, z_star, delta)


BOUNDED = "bounded"
UNBOUNDED = "unbounded"
NOT_ASSERTED = "not-asserted"


@dataclass(frozen=True)
class BoundReport:
    """Empirical ultimate bound of ``||x_t||_1`` over an ensemble.

    ``K_hat`` is ``(1 + margin)`` times the largest tail supremum; the entry
    time of a trajectory is the first grid time after which its norm stays
    below ``K_hat``.  ``verdict`` is ``not-asserted`` when the hypotheses
    behind ultimate boundedness are not certified.
    """

    verdict: str
    K_hat: float
    entry_times: tuple[float, ...]
    tail_sups: tuple[float, ...]
    peak_norms: tuple[float, ...]
    constants: Optional[DissipativityConstants]
    threshold: float = UNBOUNDED_THRESHOLD


def detect_ultimate_bound(members: Sequence[EnsembleMember], iset: IngredientSet,
                          cfg: SolverConfig, report: HypothesisReport, *,
                          window: Optional[float] = None, margin: float = 0.1,
                          threshold: float = UNBOUNDED_THRESHOLD) -> BoundReport:
    """Run the ensemble and measure re-entry into a common ball.

    A trajectory whose ``w + v`` passes ``threshold``, or which produces a
    non-finite state, makes the verdict ``unbounded``.
    """
    window = cfg.horizon / 2 if window is None else window
    consts = dissipativity_constants(iset, report)
    norms, peaks, tails = [], [], []
    unbounded = False
    for m in members:
        try:
            tr = integrate(m.ic, iset, cfg, stop_above=threshold)
        except NonFiniteState:
            unbounded = True
            continue
        if tr.stopped_early:
            unbounded = True
            continue
        nm = tr.segment_norms()
        norms.append((tr.times, nm))
        peaks.append(float(nm.max()))
        tails.append(float(nm[tr.times >= tr.t_end - window * (1 + 1e-12)].max()))
    K_hat = (1.0 + margin) * max(tails) if tails else 0.0
    entries = []
    for times, nm in norms:
        above = np.nonzero(nm > K_hat)[0]
        entries.append(0.0 if above.size == 0 else float(times[above[-1] + 1]))
    if consts is None:
        verdict = NOT_ASSERTED
    else:
        verdict = UNBOUNDED if unbounded else BOUNDED
    return BoundReport(verdict, K_hat if not unbounded else math.inf, tuple(entries),
                       tuple(tails), tuple(peaks), consts, threshold)


# ---------------------------------------------------------------------------
# ODE limit


@dataclass(frozen=True)
class NakataReport:
    """Divergence between the delay system and its zero-delay ODE limit."""

    eps: tuple[float, ...]
    divergence: tuple[float, ...]
    dt: float
    horizon: float
    ode_final: tuple[float, float]
    ode_horizon: float

    @property
    def ratios(self) -> tuple[float, ...]:
        d = self.divergence
        return tuple(d[i + 1] / d[i] for i in range(len(d) - 1))


def _ode_limit(iset: IngredientSet, w0: float, v0: float, dt: float, n_steps: int):
    """RK4 for ``w' = q(v) w``, ``v' = gamma(v) w - mu v``."""
    q, gamma = iset.raw[0], iset.raw[1]
    mu = iset.params.mu

    def f(w, v):
        return q(v) * w, gamma(v) * w - mu * v

    W = np.empty(n_steps + 1)
    V = np.empty(n_steps + 1)
    w, v = W[0], V[0] = w0, v0
    for n in range(n_steps):
        k1 = f(w, v)
        k2 = f(w + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1])
        k3 = f(w + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1])
        k4 = f(w + dt * k3[0], v + dt * k3[1])
        w = w + dt / 6.0 * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
        v = v + dt / 6.0 * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
        W[n + 1], V[n + 1] = w, v
    return W, V


def nakata_limit_compare(iset: IngredientSet, eps_seq: Sequence[float] = (0.04, 0.02, 0.01), *,
                         w0: float = 0.5, v0: float = 0.5, dt: float = 0.0025,
                         horizon: float = 20.0, ode_horizon: float = 200.0,
                         kcfg: Optional[KernelConfig] = None) -> NakataReport:
    """Sup-norm divergence over ``[0, horizon]`` for ``x1 = x2 - eps``.

    Both systems start from the constants ``(w0, v0)``; the delay system's
    history is made admissible first.  All runs share the step ``dt``.
    """
    kcfg = kcfg or KernelConfig()
    n = int(round(horizon / dt))
    W, V = _ode_limit(iset, w0, v0, dt, int(round(ode_horizon / dt)))
    div = []
    for eps in eps_seq:
        sub = iset.with_geometry(iset.geom.with_x1(iset.geom.x2 - eps))
        h = sub.geom.h
        ic = make_admissible(StatePair(constant(w0, h), constant(v0, h)), sub, kcfg)
        tr = integrate(ic, sub, SolverConfig(dt, horizon, kernel=kcfg))
        div.append(float(max(np.abs(tr.w - W[: n + 1]).max(), np.abs(tr.v - V[: n + 1]).max())))
    return NakataReport(tuple(eps_seq), tuple(div), dt, horizon,
                        (float(W[-1]), float(V[-1])), ode_horizon)
