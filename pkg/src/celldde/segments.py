"""C^1 history segments on ``[-h, 0]`` stored as cubic Hermite knots.

A :class:`HistorySegment` is the numerical stand-in for a state component
``x_t`` of the delay equation.  The function it represents is *defined* as
the piecewise cubic Hermite interpolant of its (value, derivative) knots, so
it is C^1 by construction and evaluation at a knot returns the stored data
exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "HistorySegment",
    "StatePair",
    "hermite_value",
    "hermite_pair",
    "from_function",
    "constant",
]

DEFAULT_N_REF = 8


def hermite_pair(u, dt, y0, m0, y1, m1):
    """Value and derivative of the cubic Hermite piece at local coordinate ``u``.

    ``u`` is the normalised position ``(t - t0) / dt`` in ``[0, 1]``; works on
    scalars and numpy arrays alike.
    """
    u2 = u * u
    u3 = u2 * u
    value = ((2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * dt * m0
             + (3 * u2 - 2 * u3) * y1 + (u3 - u2) * dt * m1)
    deriv = ((6 * u2 - 6 * u) * (y0 - y1) / dt
             + (3 * u2 - 4 * u + 1) * m0 + (3 * u2 - 2 * u) * m1)
    return value, deriv


def hermite_value(u, dt, y0, m0, y1, m1):
    u2 = u * u
    u3 = u2 * u
    return ((2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * dt * m0
            + (3 * u2 - 2 * u3) * y1 + (u3 - u2) * dt * m1)


@dataclass(frozen=True, eq=False)
class HistorySegment:
    """Piecewise cubic Hermite function on ``[-h, 0]``.

    Parameters
    ----------
    knots:
        Strictly increasing times, first ``-h`` and last exactly ``0``.
    values, derivs:
        Function value and derivative at each knot.
    """

    knots: np.ndarray
    values: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        values = np.array(self.values, dtype=float)
        derivs = np.array(self.derivs, dtype=float)
        if knots.ndim != 1 or knots.size < 2:
            raise ValueError("a history segment needs at least two knots")
        if values.shape != knots.shape or derivs.shape != knots.shape:
            raise ValueError("knots, values and derivs must have the same length")
        if knots[-1] != 0.0 or knots[0] >= 0.0:
            raise ValueError("knots must span [-h, 0] with the last knot at 0")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        for arr in (knots, values, derivs):
            arr.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivs", derivs)

    @property
    def h(self) -> float:
        return -float(self.knots[0])

    def _locate(self, theta):
        idx = np.searchsorted(self.knots, theta, side="right") - 1
        return np.clip(idx, 0, self.knots.size - 2)

    def eval(self, theta: float) -> tuple[float, float]:
        """Return ``(value, derivative)`` at ``theta`` in ``[-h, 0]``."""
        theta = float(theta)
        if not (self.knots[0] <= theta <= 0.0):
            raise ValueError(f"theta={theta!r} outside [{self.knots[0]}, 0]")
        i = int(self._locate(theta))
        t0, t1 = self.knots[i], self.knots[i + 1]
        dt = t1 - t0
        v, d = hermite_pair((theta - t0) / dt, dt, self.values[i], self.derivs[i],
                            self.values[i + 1], self.derivs[i + 1])
        return float(v), float(d)

    def eval_many(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised :meth:`eval`."""
        theta = np.asarray(theta, dtype=float)
        if theta.size and (theta.min() < self.knots[0] or theta.max() > 0.0):
            raise ValueError("theta outside the segment interval")
        i = self._locate(theta)
        t0 = self.knots[i]
        dt = self.knots[i + 1] - t0
        return hermite_pair((theta - t0) / dt, dt, self.values[i], self.derivs[i],
                            self.values[i + 1], self.derivs[i + 1])

    def refined(self, n_ref: int = DEFAULT_N_REF) -> tuple[np.ndarray, np.ndarray]:
        """Values and derivatives on the knots plus ``n_ref`` points per interval."""
        u = np.arange(n_ref + 1) / (n_ref + 1)
        dt = np.diff(self.knots)[:, None]
        v, d = hermite_pair(u[None, :], dt,
                            self.values[:-1, None], self.derivs[:-1, None],
                            self.values[1:, None], self.derivs[1:, None])
        v = np.append(v.ravel(), self.values[-1])
        d = np.append(d.ravel(), self.derivs[-1])
        return v, d

    def c_norm(self, n_ref: int = DEFAULT_N_REF) -> float:
        v, _ = self.refined(n_ref)
        return float(np.max(np.abs(v)))

    def c1_norm(self, n_ref: int = DEFAULT_N_REF) -> float:
        v, d = self.refined(n_ref)
        return float(np.max(np.abs(v)) + np.max(np.abs(d)))

    def min_value(self, n_ref: int = DEFAULT_N_REF) -> float:
        v, _ = self.refined(n_ref)
        return float(np.min(v))

    def with_data(self, values, derivs) -> "HistorySegment":
        return HistorySegment(self.knots, values, derivs)


@dataclass(frozen=True, eq=False)
class StatePair:
    """The state ``(phi, psi)`` of the cell equation: stem and mature histories."""

    w_seg: HistorySegment
    v_seg: HistorySegment

    def __post_init__(self):
        if not np.array_equal(self.w_seg.knots, self.v_seg.knots):
            raise ValueError("w and v segments must share the same knot grid")

    @property
    def h(self) -> float:
        return self.w_seg.h

    def c1_norm(self, n_ref: int = DEFAULT_N_REF) -> float:
        return self.w_seg.c1_norm(n_ref) + self.v_seg.c1_norm(n_ref)


def from_function(f: Callable, df: Callable, h: float, n_knots: int) -> HistorySegment:
    """Sample ``f`` and its derivative ``df`` on a uniform grid over ``[-h, 0]``."""
    if n_knots < 2:
        raise ValueError("n_knots must be at least 2")
    knots = np.linspace(-h, 0.0, n_knots)
    values = np.array([f(t) for t in knots], dtype=float)
    derivs = np.array([df(t) for t in knots], dtype=float)
    return HistorySegment(knots, values, derivs)


def constant(c: float, h: float, n_knots: int = 2) -> HistorySegment:
    knots = np.linspace(-h, 0.0, n_knots)
    return HistorySegment(knots, np.full(n_knots, float(c)), np.zeros(n_knots))
