"""Threshold-defined delay: the auxiliary maturation problem.

For a mature-cell history ``psi`` on ``[-h, 0]`` the maturation path solves

    y'(s) = -g(y(s), psi(-s)),   y(0) = x2,

and the delay ``tau(psi)`` is the first ``s`` with ``y(s) = x1``.  Along the
path we also integrate the survival exponent
``E(s) = int_0^s (d - D1g)(y(r), psi(-r)) dr``.  Both are advanced together
with classical RK4 on a fixed substep ``ds = h / substeps_per_h``; the
crossing is located by bisection on the cubic Hermite dense output of the
crossing substep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, NoCrossing, PathEscape
from .ingredients import IngredientSet
from .segments import HistorySegment, hermite_pair, hermite_value

__all__ = [
    "KernelConfig",
    "DelaySolution",
    "solve_maturation",
    "j_eval",
    "F_eval",
    "sample_offsets",
]


@dataclass(frozen=True)
class KernelConfig:
    substeps_per_h: int = 64
    threshold_tol: float = 1e-12

    def __post_init__(self):
        if self.substeps_per_h < 4:
            raise ValueError("substeps_per_h must be at least 4")
        if not self.threshold_tol > 0:
            raise ValueError("threshold_tol must be positive")


@dataclass(frozen=True, eq=False)
class DelaySolution:
    """Result of one maturation solve.

    ``s_knots``, ``y_knots`` and ``dy_knots`` hold the Hermite data of the
    path truncated at ``tau``; they are empty when the path was not kept.
    """

    tau: float
    exponent: float
    substeps_used: int
    s_knots: np.ndarray
    y_knots: np.ndarray
    dy_knots: np.ndarray

    def y_at(self, s: float) -> float:
        """Dense maturation path ``y(s)`` for ``s`` in ``[0, tau]``."""
        if not 0.0 <= s <= self.tau:
            raise ValueError(f"s={s!r} outside [0, tau]")
        i = int(np.clip(np.searchsorted(self.s_knots, s, side="right") - 1,
                        0, self.s_knots.size - 2))
        s0, s1 = self.s_knots[i], self.s_knots[i + 1]
        return float(hermite_value((s - s0) / (s1 - s0), s1 - s0, self.y_knots[i],
                                   self.dy_knots[i], self.y_knots[i + 1], self.dy_knots[i + 1]))


def sample_offsets(h: float, cfg: KernelConfig) -> np.ndarray:
    """Offsets ``s`` (half-substep resolution) at which the kernel reads ``psi(-s)``."""
    return np.linspace(0.0, h, 2 * cfg.substeps_per_h + 1)


def _march(psi, ds, n_max, g, e, x1, x2, b, tol, keep_path=False):
    """RK4 march of ``(y, E)`` over the sampled history ``psi``.

    ``psi[i]`` is ``psi(-i * ds / 2)``.  Returns ``(tau, E, n_used, path)``.
    """
    y_lo = x2 - b
    y_hi = x2 + b
    y = x2
    E = 0.0
    z = psi[0]
    f = -g(y, z)
    l = e(y, z)
    half = 0.5 * ds
    sixth = ds / 6.0
    if keep_path:
        ss, ys, fs = [0.0], [y], [f]
    for i in range(n_max):
        zm = psi[2 * i + 1]
        z1 = psi[2 * i + 2]
        ya = y + half * f
        k2 = -g(ya, zm)
        l2 = e(ya, zm)
        yb = y + half * k2
        k3 = -g(yb, zm)
        l3 = e(yb, zm)
        yc = y + ds * k3
        k4 = -g(yc, z1)
        l4 = e(yc, z1)
        yn = y + sixth * (f + 2.0 * (k2 + k3) + k4)
        En = E + sixth * (l + 2.0 * (l2 + l3) + l4)
        if not (y_lo <= yn <= y_hi) or yn != yn:
            raise PathEscape(f"maturation path left [{y_lo}, {y_hi}] at s={(i + 1) * ds}: y={yn}")
        fn = -g(yn, z1)
        ln = e(yn, z1)
        if yn <= x1:
            # bisection on the cubic Hermite dense output of this substep
            lo, hi = 0.0, 1.0
            u = 1.0
            r = yn - x1
            if r < -tol:
                while True:
                    u = 0.5 * (lo + hi)
                    r = hermite_value(u, ds, y, f, yn, fn) - x1
                    if -tol <= r <= tol or hi - lo < 1e-15:
                        break
                    if r > 0.0:
                        lo = u
                    else:
                        hi = u
            tau = (i + u) * ds
            E_tau = hermite_value(u, ds, E, l, En, ln)
            path = None
            if keep_path:
                y_tau, f_tau = hermite_pair(u, ds, y, f, yn, fn)
                if u > 0.0:
                    ss.append(tau)
                    ys.append(y_tau)
                    fs.append(f_tau)
                path = (ss, ys, fs)
            return tau, E_tau, i + 1, path
        if keep_path:
            ss.append((i + 1) * ds)
            ys.append(yn)
            fs.append(fn)
        y, E, f, l = yn, En, fn, ln
    raise NoCrossing(f"y(h) = {y} > x1 = {x1}: no threshold crossing on [0, h]")


def _kernel_funcs(iset: IngredientSet):
    _, _, g, D1g, d = iset.raw
    return g, (lambda y, z: d(y, z) - D1g(y, z))


def solve_maturation(psi: HistorySegment, iset: IngredientSet,
                     cfg: Optional[KernelConfig] = None) -> DelaySolution:
    """Solve the maturation problem for the history ``psi``.

    Raises
    ------
    NoCrossing
        ``y`` stays above ``x1`` on ``[0, h]``.
    PathEscape
        ``y`` leaves ``[x2 - b, x2 + b]``.
    DomainError
        ``psi`` takes values outside ``I``.
    """
    cfg = cfg or KernelConfig()
    geom = iset.geom
    if abs(psi.h - geom.h) > 1e-12 * geom.h:
        raise ValueError(f"history length {psi.h} does not match h = {geom.h}")
    s = sample_offsets(geom.h, cfg)
    s[-1] = psi.h
    z, _ = psi.eval_many(-s)
    if z.min() <= geom.R_minus:
        raise DomainError(f"history value {z.min()} not in I=({geom.R_minus}, inf)")
    g, e = _kernel_funcs(iset)
    ds = geom.h / cfg.substeps_per_h
    tau, E, n, path = _march(z.tolist(), ds, cfg.substeps_per_h, g, e,
                             geom.x1, geom.x2, geom.b, cfg.threshold_tol, keep_path=True)
    ss, ys, fs = (np.asarray(a, dtype=float) for a in path)
    return DelaySolution(tau, E, n, ss, ys, fs)


def recruitment_coefficient(psi0: float, psi_tau: float, exponent: float,
                            iset: IngredientSet) -> float:
    """``gamma(psi(-tau)) g(x2, psi(0)) / g(x1, psi(-tau)) exp(E)``."""
    geom = iset.geom
    return (iset.gamma(psi_tau) * iset.g(geom.x2, psi0) / iset.g(geom.x1, psi_tau)
            * math.exp(exponent))


def j_eval(phi: HistorySegment, psi: HistorySegment, sol: DelaySolution,
           iset: IngredientSet) -> float:
    """Recruitment into the mature compartment; linear in ``phi(-tau)``."""
    tau = sol.tau
    psi0 = psi.eval(0.0)[0]
    psi_tau = psi.eval(-tau)[0]
    phi_tau = phi.eval(-tau)[0]
    return recruitment_coefficient(psi0, psi_tau, sol.exponent, iset) * phi_tau


def F_eval(phi: HistorySegment, psi: HistorySegment, iset: IngredientSet,
           cfg: Optional[KernelConfig] = None) -> tuple[float, float]:
    """Right-hand side functional ``(q(psi(0)) phi(0), j(phi, psi) - mu psi(0))``."""
    sol = solve_maturation(psi, iset, cfg)
    psi0 = psi.eval(0.0)[0]
    phi0 = phi.eval(0.0)[0]
    return iset.q(psi0) * phi0, j_eval(phi, psi, sol, iset) - iset.params.mu * psi0
