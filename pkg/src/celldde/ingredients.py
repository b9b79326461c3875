"""Model ingredients of the cell equation and grid-based hypothesis checks.

The built-in families are

* stem-cell net growth ``q(z) = (2 s(z) - 1) d_w(z) - m`` and recruitment
  rate ``gamma(z) = 2 (1 - s(z)) d_w(z)`` with ``s(z) = a / (1 + k z)`` and
  ``d_w(z) = p / (1 + kappa z)``;
* maturation speeds ``g``: :class:`HillG`, :class:`ExpDecayG`, :class:`UnitG`;
* maturation-stage death ``d(y, z) = a_d(y) / (1 + k_d z) - mu_d(y)``.

Concentrations ``z`` live in ``I = (R_minus, inf)``, maturities ``y`` in the
open interval ``J``.  Evaluating outside these domains raises
:class:`~celldde.errors.DomainError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, GeometryInfeasible

__all__ = [
    "StemParams",
    "HillG",
    "ExpDecayG",
    "UnitG",
    "DeathSpec",
    "MaturationSpec",
    "Geometry",
    "IngredientSet",
    "SamplingPlan",
    "HypothesisEntry",
    "HypothesisReport",
    "q_eval",
    "gamma_eval",
    "g_eval",
    "D1g_eval",
    "d_eval",
    "compute_R_minus",
    "default_z_hi",
    "derive_geometry",
    "check_hypotheses",
    "constant_fn",
    "affine_fn",
]

ScalarFn = Callable[[float], float]

HOLDS = "holds-on-grid"
FAILS = "fails"
NOT_APPLICABLE = "not-applicable"


def constant_fn(c: float) -> tuple[ScalarFn, ScalarFn]:
    """A constant function of maturity and its (zero) derivative."""
    c = float(c)
    return (lambda y: c), (lambda y: 0.0)


def affine_fn(c0: float, slope: float, y0: float = 0.0) -> tuple[ScalarFn, ScalarFn]:
    """``y -> c0 + slope * (y - y0)`` and its derivative."""
    c0, slope, y0 = float(c0), float(slope), float(y0)
    return (lambda y: c0 + slope * (y - y0)), (lambda y: slope)


@dataclass(frozen=True)
class StemParams:
    """Parameters of the stem-cell compartment and of mature-cell clearance."""

    a: float
    p: float
    m: float
    k: float = 0.0
    kappa: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.a < 1.0:
            raise ValueError(f"a must lie in [0, 1), got {self.a}")
        for name in ("p", "m", "k", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.mu > 0:
            raise ValueError("mu must be positive")


@dataclass(frozen=True)
class HillG:
    """``g(y, z) = 2 (1 - a_g(y) / (1 + k_g z)) p_g(y)``."""

    a_g: ScalarFn
    da_g: ScalarFn
    p_g: ScalarFn
    dp_g: ScalarFn
    k_g: float = 0.0

    name = "hill"

    @classmethod
    def constant(cls, a_g: float, p_g: float, k_g: float = 0.0) -> "HillG":
        a, da = constant_fn(a_g)
        p, dp = constant_fn(p_g)
        return cls(a, da, p, dp, k_g)


@dataclass(frozen=True)
class ExpDecayG:
    """``g(y, z) = eps_g + exp(-z) gamma_g(y)``."""

    eps_g: float
    gamma_g: ScalarFn
    dgamma_g: ScalarFn

    name = "expdecay"

    def __post_init__(self):
        if not self.eps_g > 0:
            raise ValueError("eps_g must be positive")


@dataclass(frozen=True)
class UnitG:
    """``g == 1``: maturity is age."""

    name = "unit"


@dataclass(frozen=True)
class DeathSpec:
    """``d(y, z) = a_d(y) / (1 + k_d z) - mu_d(y)``."""

    a_d: ScalarFn
    mu_d: ScalarFn
    k_d: float = 0.0

    @classmethod
    def constant(cls, a_d: float = 0.0, mu_d: float = 0.0, k_d: float = 0.0) -> "DeathSpec":
        return cls(constant_fn(a_d)[0], constant_fn(mu_d)[0], k_d)


@dataclass(frozen=True)
class MaturationSpec:
    """Choice of maturation speed ``g`` and death rate ``d`` (``None`` means ``d == 0``)."""

    variant: Union[HillG, ExpDecayG, UnitG] = field(default_factory=UnitG)
    death: Optional[DeathSpec] = None

    @property
    def k_g(self) -> float:
        return self.variant.k_g if isinstance(self.variant, HillG) else 0.0

    @property
    def k_d(self) -> float:
        return self.death.k_d if self.death is not None else 0.0


def compute_R_minus(params: StemParams, spec: Optional[MaturationSpec] = None) -> float:
    """Left end of the concentration interval ``I = (R_minus, inf)``."""
    rates = [params.k, params.kappa]
    if spec is not None:
        rates += [spec.k_g, spec.k_d]
    positive = [alpha for alpha in rates if alpha > 0]
    if not positive:
        return -0.5
    return max(-1.0 / (2.0 * alpha) for alpha in positive)


def default_z_hi(params: StemParams, spec: Optional[MaturationSpec] = None) -> float:
    rates = [params.k, params.kappa]
    if spec is not None:
        rates += [spec.k_g, spec.k_d]
    positive = [alpha for alpha in rates if alpha > 0]
    if not positive:
        return 10.0
    return 10.0 * max(1.0 / alpha for alpha in positive)


def _check_z(z: float, r_minus: float) -> None:
    if not z > r_minus:
        raise DomainError(f"concentration z={z!r} not in I=({r_minus}, inf)")


def q_eval(params: StemParams, z: float, r_minus: Optional[float] = None) -> float:
    """Net stem-cell growth rate ``(2 s(z) - 1) d_w(z) - m``."""
    _check_z(z, compute_R_minus(params) if r_minus is None else r_minus)
    s = params.a / (1.0 + params.k * z)
    dw = params.p / (1.0 + params.kappa * z)
    return (2.0 * s - 1.0) * dw - params.m


def gamma_eval(params: StemParams, z: float, r_minus: Optional[float] = None) -> float:
    """Commitment rate ``2 (1 - s(z)) d_w(z)``."""
    _check_z(z, compute_R_minus(params) if r_minus is None else r_minus)
    s = params.a / (1.0 + params.k * z)
    dw = params.p / (1.0 + params.kappa * z)
    return 2.0 * (1.0 - s) * dw


def _q_limit(params: StemParams) -> float:
    s_inf = params.a if params.k == 0 else 0.0
    dw_inf = params.p if params.kappa == 0 else 0.0
    return (2.0 * s_inf - 1.0) * dw_inf - params.m


def _gamma_limit(params: StemParams) -> float:
    s_inf = params.a if params.k == 0 else 0.0
    dw_inf = params.p if params.kappa == 0 else 0.0
    return 2.0 * (1.0 - s_inf) * dw_inf


def _g_raw(variant) -> Callable[[float, float], float]:
    if isinstance(variant, UnitG):
        return lambda y, z: 1.0
    if isinstance(variant, HillG):
        a_g, p_g, k_g = variant.a_g, variant.p_g, variant.k_g
        return lambda y, z: 2.0 * (1.0 - a_g(y) / (1.0 + k_g * z)) * p_g(y)
    if isinstance(variant, ExpDecayG):
        eps, gam = variant.eps_g, variant.gamma_g
        return lambda y, z: eps + math.exp(-z) * gam(y)
    raise TypeError(f"unknown maturation variant {variant!r}")


def _D1g_raw(variant) -> Callable[[float, float], float]:
    if isinstance(variant, UnitG):
        return lambda y, z: 0.0
    if isinstance(variant, HillG):
        a_g, da_g, p_g, dp_g, k_g = (variant.a_g, variant.da_g, variant.p_g,
                                     variant.dp_g, variant.k_g)

        def D1g(y, z):
            r = 1.0 / (1.0 + k_g * z)
            return 2.0 * (-da_g(y) * r * p_g(y) + (1.0 - a_g(y) * r) * dp_g(y))
        return D1g
    if isinstance(variant, ExpDecayG):
        dgam = variant.dgamma_g
        return lambda y, z: math.exp(-z) * dgam(y)
    raise TypeError(f"unknown maturation variant {variant!r}")


def _d_raw(death: Optional[DeathSpec]) -> Callable[[float, float], float]:
    if death is None:
        return lambda y, z: 0.0
    a_d, mu_d, k_d = death.a_d, death.mu_d, death.k_d
    return lambda y, z: a_d(y) / (1.0 + k_d * z) - mu_d(y)


def _check_yz(y: float, z: float, j_lo: float, j_hi: float, r_minus: float) -> None:
    if not j_lo < y < j_hi:
        raise DomainError(f"maturity y={y!r} not in J=({j_lo}, {j_hi})")
    _check_z(z, r_minus)


def g_eval(spec: MaturationSpec, y: float, z: float, j_bounds=(-math.inf, math.inf),
           r_minus: float = -0.5) -> float:
    _check_yz(y, z, j_bounds[0], j_bounds[1], r_minus)
    return _g_raw(spec.variant)(y, z)


def D1g_eval(spec: MaturationSpec, y: float, z: float, j_bounds=(-math.inf, math.inf),
             r_minus: float = -0.5) -> float:
    _check_yz(y, z, j_bounds[0], j_bounds[1], r_minus)
    return _D1g_raw(spec.variant)(y, z)


def d_eval(spec: MaturationSpec, y: float, z: float, j_bounds=(-math.inf, math.inf),
           r_minus: float = -0.5) -> float:
    _check_yz(y, z, j_bounds[0], j_bounds[1], r_minus)
    return _d_raw(spec.death)(y, z)


@dataclass(frozen=True)
class Geometry:
    """Maturity box, bounds on ``g`` and the derived history length ``h``."""

    x1: float
    x2: float
    b: float
    eps_g: float
    K_g: float
    J_lo: float
    J_hi: float
    R_minus: float
    h: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h", self.b / self.K_g)
        if not 0 < self.eps_g < self.K_g:
            raise GeometryInfeasible(
                f"need 0 < eps_g < K_g, got eps_g={self.eps_g}, K_g={self.K_g}")
        if not (self.J_lo < self.x2 - self.b and self.x2 + self.b < self.J_hi):
            raise GeometryInfeasible("[x2 - b, x2 + b] must lie inside J")
        lo, hi = self.x1_interval
        if not lo < self.x1 < hi:
            raise GeometryInfeasible(
                f"x1 not in (x2 - b*eps_g/K_g, x2) = ({lo}, {hi}); got x1={self.x1}")
        if not self.R_minus < 0:
            raise GeometryInfeasible("R_minus must be negative")

    @property
    def x1_interval(self) -> tuple[float, float]:
        return self.x2 - self.b * self.eps_g / self.K_g, self.x2

    @property
    def tau_bounds(self) -> tuple[float, float]:
        """Bounds ``[(x2-x1)/K_g, (x2-x1)/eps_g]`` on every delay."""
        gap = self.x2 - self.x1
        return gap / self.K_g, gap / self.eps_g

    @property
    def tau_min(self) -> float:
        return self.tau_bounds[0]

    def with_x1(self, x1: float) -> "Geometry":
        return Geometry(x1, self.x2, self.b, self.eps_g, self.K_g,
                        self.J_lo, self.J_hi, self.R_minus)


def _box_grid(x2: float, b: float, n: int) -> np.ndarray:
    return np.linspace(x2 - b, x2 + b, n)


def derive_geometry(
    spec: MaturationSpec,
    x2: float,
    b: float,
    J_bounds: tuple[float, float] = (-math.inf, math.inf),
    *,
    params: Optional[StemParams] = None,
    x1: Optional[float] = None,
    z_hi: Optional[float] = None,
    n_y: int = 65,
    n_z: int = 257,
    band: Optional[tuple[float, float]] = None,
    floor_fraction: float = 0.5,
) -> Geometry:
    """Bound ``g`` on the maturity box and build a consistent :class:`Geometry`.

    Parameters
    ----------
    spec:
        Maturation specification.
    x2, b:
        Initial maturity and half-width of the box ``[x2 - b, x2 + b]``.
    J_bounds:
        Open interval ``J`` on which the maturity functions are defined.
    params:
        Stem parameters, used only for ``R_minus`` and the default ``z_hi``.
    x1:
        Maturity threshold; ``None`` picks the midpoint of the admissible
        interval ``(x2 - b eps_g / K_g, x2)``.
    band:
        Declared ``(eps_g, K_g)`` for a constant ``g``.  Must contain the
        range of ``g`` found on the grid.
    floor_fraction:
        When ``g`` is constant and no band is declared, ``eps_g`` is set to
        ``floor_fraction * K_g`` so that ``eps_g < K_g`` holds strictly.
    """
    j_lo, j_hi = J_bounds
    if not (j_lo < x2 - b and x2 + b < j_hi):
        raise GeometryInfeasible("[x2 - b, x2 + b] must lie inside J")
    if params is None:
        params = StemParams(a=0.0, p=0.0, m=0.0)
    r_minus = compute_R_minus(params, spec)
    if z_hi is None:
        z_hi = default_z_hi(params, spec)

    ys = _box_grid(x2, b, n_y)
    zs = np.linspace(0.0, z_hi, n_z)
    variant = spec.variant
    g = _g_raw(variant)
    D1g = _D1g_raw(variant)
    gvals = np.array([[g(y, z) for z in zs] for y in ys])
    dvals = np.array([[D1g(y, z) for z in zs] for y in ys])

    if isinstance(variant, HillG):
        a_bar = max(variant.a_g(y) for y in ys)
        p_low = min(variant.p_g(y) for y in ys)
        lo = 2.0 * (1.0 - 2.0 * a_bar) * p_low
        hi = gvals.max()
        d_sup = np.abs(dvals).max()
        if variant.k_g > 0:
            # z -> inf removes the self-renewal term: g -> 2 p_g(y)
            hi = max(hi, max(2.0 * variant.p_g(y) for y in ys))
            d_sup = max(d_sup, max(abs(2.0 * variant.dp_g(y)) for y in ys))
    elif isinstance(variant, ExpDecayG):
        tail = np.full(ys.shape, variant.eps_g)
        lo = min(gvals.min(), tail.min())
        hi = gvals.max()
        d_sup = np.abs(dvals).max()
    else:
        lo = hi = 1.0
        d_sup = 0.0

    if not lo > 0:
        raise GeometryInfeasible(f"g is not bounded away from zero on the box (eps_g={lo})")
    if band is not None:
        eps_g, K_g = map(float, band)
        if eps_g > lo or K_g < hi:
            raise GeometryInfeasible(
                f"declared band [{eps_g}, {K_g}] does not contain g range [{lo}, {hi}]")
    elif hi - lo <= 1e-12 * hi:
        eps_g, K_g = floor_fraction * hi, hi
    else:
        eps_g, K_g = float(lo), float(hi)
    if not d_sup < K_g / b:
        raise GeometryInfeasible(
            f"sup |D1g| = {d_sup} violates |D1g| < K_g/b = {K_g / b}")
    if x1 is None:
        x1 = x2 - 0.5 * b * eps_g / K_g
    return Geometry(x1, x2, b, eps_g, K_g, j_lo, j_hi, r_minus)


class IngredientSet:
    """Immutable bundle of ``q, gamma, g, D1g, d`` with domain checks.

    ``q`` and ``gamma`` default to the built-in stem family evaluated with
    ``params``; passing ``q_fn`` / ``gamma_fn`` replaces them with arbitrary
    callables, in which case hypothesis checks degrade to grid evidence.
    """

    __slots__ = ("params", "spec", "geom", "_q", "_gamma", "_g", "_D1g", "_d",
                 "builtin_q", "__weakref__")

    def __init__(self, params: StemParams, spec: MaturationSpec, geom: Geometry,
                 q_fn: Optional[ScalarFn] = None, gamma_fn: Optional[ScalarFn] = None):
        self.params = params
        self.spec = spec
        self.geom = geom
        self.builtin_q = q_fn is None and gamma_fn is None
        p = params
        if q_fn is None:
            a, pp, m, k, kap = p.a, p.p, p.m, p.k, p.kappa
            q_fn = lambda z: (2.0 * a / (1.0 + k * z) - 1.0) * pp / (1.0 + kap * z) - m
        if gamma_fn is None:
            a, pp, k, kap = p.a, p.p, p.k, p.kappa
            gamma_fn = lambda z: 2.0 * (1.0 - a / (1.0 + k * z)) * pp / (1.0 + kap * z)
        self._q = q_fn
        self._gamma = gamma_fn
        self._g = _g_raw(spec.variant)
        self._D1g = _D1g_raw(spec.variant)
        self._d = _d_raw(spec.death)

    def __setattr__(self, name, value):
        if hasattr(self, "_d"):
            raise AttributeError("IngredientSet is immutable")
        object.__setattr__(self, name, value)

    @classmethod
    def build(cls, params: StemParams, spec: Optional[MaturationSpec] = None, *,
              x2: float = 1.0, b: float = 0.5, x1: Optional[float] = None,
              J_bounds=(-math.inf, math.inf), **geometry_kw) -> "IngredientSet":
        """Construct the built-in set, deriving the geometry from ``spec``."""
        spec = spec or MaturationSpec()
        geom = derive_geometry(spec, x2, b, J_bounds, params=params, x1=x1, **geometry_kw)
        return cls(params, spec, geom)

    def with_geometry(self, geom: Geometry) -> "IngredientSet":
        if self.builtin_q:
            return IngredientSet(self.params, self.spec, geom)
        return IngredientSet(self.params, self.spec, geom, self._q, self._gamma)

    # -- checked evaluation -------------------------------------------------
    def _z(self, z):
        if not z > self.geom.R_minus:
            raise DomainError(f"concentration z={z!r} not in I=({self.geom.R_minus}, inf)")

    def _yz(self, y, z):
        if not self.geom.J_lo < y < self.geom.J_hi:
            raise DomainError(f"maturity y={y!r} not in J=({self.geom.J_lo}, {self.geom.J_hi})")
        self._z(z)

    def q(self, z: float) -> float:
        self._z(z)
        return self._q(z)

    def gamma(self, z: float) -> float:
        self._z(z)
        return self._gamma(z)

    def g(self, y: float, z: float) -> float:
        self._yz(y, z)
        return self._g(y, z)

    def D1g(self, y: float, z: float) -> float:
        self._yz(y, z)
        return self._D1g(y, z)

    def d(self, y: float, z: float) -> float:
        self._yz(y, z)
        return self._d(y, z)

    # -- unchecked fast paths for inner loops --------------------------------
    @property
    def raw(self):
        """``(q, gamma, g, D1g, d)`` without domain checks; callers check ranges."""
        return self._q, self._gamma, self._g, self._D1g, self._d

    def q_limit(self) -> Optional[float]:
        return _q_limit(self.params) if self.builtin_q else None

    def gamma_limit(self) -> Optional[float]:
        return _gamma_limit(self.params) if self.builtin_q else None


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass(frozen=True)
class SamplingPlan:
    """Grid on which hypotheses are checked: ``n_z`` points on ``[0, z_hi]``."""

    z_hi: float
    n_z: int = 2049
    n_y: int = 33

    @classmethod
    def default(cls, iset: IngredientSet, **kw) -> "SamplingPlan":
        return cls(default_z_hi(iset.params, iset.spec), **kw)

    def zs(self) -> np.ndarray:
        return np.linspace(0.0, self.z_hi, self.n_z)


@dataclass(frozen=True)
class HypothesisEntry:
    ident: str
    verdict: str
    witness: Optional[tuple[float, ...]] = None
    constants: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS


@dataclass(frozen=True)
class HypothesisReport:
    entries: dict

    def __getitem__(self, ident: str) -> HypothesisEntry:
        return self.entries[ident]

    def verdict(self, ident: str) -> str:
        return self.entries[ident].verdict

    def holds(self, ident: str) -> bool:
        return self.entries[ident].holds

    def lines(self) -> list[str]:
        out = []
        for ident, e in self.entries.items():
            line = f"{ident:7s} {e.verdict}"
            if e.witness is not None:
                line += " witness=(" + ", ".join(f"{x:.6g}" for x in e.witness) + ")"
            if e.constants:
                line += " " + " ".join(f"{k}={v:.6g}" for k, v in e.constants.items())
            out.append(line)
        return out


def _bisect(f, lo, hi, tol=1e-12, maxit=200):
    """Root of ``f`` in ``[lo, hi]`` given a sign change.

    Stops once the bracket is shorter than ``tol`` or cannot shrink further,
    so ``tol=0`` bisects to machine precision.
    """
    flo = f(lo)
    for _ in range(maxit):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def _entry(ident, ok, witness=None, constants=None):
    if ok:
        return HypothesisEntry(ident, HOLDS, witness, constants or {})
    return HypothesisEntry(ident, FAILS, witness, {})


def check_hypotheses(iset: IngredientSet, plan: Optional[SamplingPlan] = None) -> HypothesisReport:
    """Evaluate every hypothesis predicate on a grid, with analytic tails.

    Failures are verdicts carrying a witness point; nothing is raised.
    """
    plan = plan or SamplingPlan.default(iset)
    geom = iset.geom
    q, gamma, g, D1g, d = iset.raw
    zs = plan.zs()
    qs = np.array([q(z) for z in zs])
    gs_ = np.array([gamma(z) for z in zs])
    q_inf = iset.q_limit()
    gamma_inf = iset.gamma_limit()
    entries = {}

    # H14: q bounded (and C^1 for the built-in family)
    q_sup = float(np.abs(qs).max())
    entries["H14"] = _entry("H14", np.isfinite(q_sup),
                            (float(zs[np.argmax(np.abs(qs))]), q_sup),
                            {"sup_abs_q": q_sup})

    # H15: q(s) < 0 for all s > 0
    bad = np.nonzero(qs[1:] >= 0)[0]
    if bad.size:
        i = bad[0] + 1
        entries["H15"] = _entry("H15", False, (float(zs[i]), float(qs[i])))
    elif q_inf is not None and q_inf > 0:
        entries["H15"] = _entry("H15", False, (math.inf, q_inf))
    else:
        entries["H15"] = _entry("H15", True, constants={"max_q_positive_z": float(qs[1:].max())})

    # H16: q(0) > 0
    entries["H16"] = _entry("H16", qs[0] > 0, (0.0, float(qs[0])), {"q0": float(qs[0])})

    # H17: q(z) <= -delta for z >= z*
    tail = q_inf if q_inf is not None else float(qs[-1])
    if not tail < 0:
        entries["H17"] = _entry("H17", False, (math.inf if q_inf is not None else float(zs[-1]), tail))
    else:
        m = iset.params.m if iset.builtin_q else 0.0
        delta = 0.5 * min(m, -tail) if m > 0 else -0.5 * tail
        above = np.nonzero(qs > -delta)[0]
        if above.size == 0:
            z_star = 0.0
            ok = True
        elif above[-1] == zs.size - 1:
            ok = False
        else:
            i = above[-1]
            z_star = _bisect(lambda z: q(z) + delta, float(zs[i]), float(zs[i + 1]))
            ok = True
        if ok:
            entries["H17"] = _entry("H17", True, constants={"delta": delta, "z_star": z_star})
        else:
            entries["H17"] = _entry("H17", False, (float(zs[-1]), float(qs[-1])))

    # H18i and Eq8: g in [eps_g, K_g] on the box, |D1g| < K_g / b
    ys = _box_grid(geom.x2, geom.b, plan.n_y)
    zs_box = zs[:: max(1, zs.size // 256)]
    gv = np.array([[g(y, z) for z in zs_box] for y in ys])
    dv = np.array([[D1g(y, z) for z in zs_box] for y in ys])
    lo_i = np.unravel_index(np.argmin(gv), gv.shape)
    hi_i = np.unravel_index(np.argmax(gv), gv.shape)
    if gv[lo_i] < geom.eps_g:
        entries["H18i"] = _entry("H18i", False, (float(ys[lo_i[0]]), float(zs_box[lo_i[1]]), float(gv[lo_i])))
    elif gv[hi_i] > geom.K_g:
        entries["H18i"] = _entry("H18i", False, (float(ys[hi_i[0]]), float(zs_box[hi_i[1]]), float(gv[hi_i])))
    else:
        entries["H18i"] = _entry("H18i", True, constants={"eps_g": geom.eps_g, "K_g": geom.K_g})
    d_i = np.unravel_index(np.argmax(np.abs(dv)), dv.shape)
    d_sup = float(abs(dv[d_i]))
    entries["Eq8"] = _entry("Eq8", d_sup < geom.K_g / geom.b,
                            (float(ys[d_i[0]]), float(zs_box[d_i[1]]), d_sup),
                            {"sup_abs_D1g": d_sup})

    # H18(ii): d bounded on the box
    dd = np.array([[d(y, z) for z in zs_box] for y in ys])
    dd_sup = float(np.abs(dd).max())
    entries["H18ii"] = _entry("H18ii", np.isfinite(dd_sup), (math.nan, dd_sup), {"sup_abs_d": dd_sup})

    # H18(iii): gamma bounded and nonnegative
    neg = np.nonzero(gs_ < 0)[0]
    if neg.size:
        entries["H18iii"] = _entry("H18iii", False, (float(zs[neg[0]]), float(gs_[neg[0]])))
    else:
        g_sup = float(gs_.max())
        entries["H18iii"] = _entry("H18iii", np.isfinite(g_sup), (math.nan, g_sup), {"sup_gamma": g_sup})

    # Eq9: x1 in (x2 - b eps_g / K_g, x2)
    lo, hi = geom.x1_interval
    entries["Eq9"] = _entry("Eq9", lo < geom.x1 < hi, (geom.x1,), {"x1_lo": lo, "x1_hi": hi})

    # Eq66: gamma(z) >= eps_gamma > 0 for z >= 0
    i_min = int(np.argmin(gs_))
    eps_gamma = float(gs_[i_min])
    if gamma_inf is not None:
        eps_gamma = min(eps_gamma, gamma_inf)
    if eps_gamma > 0:
        entries["Eq66"] = _entry("Eq66", True, constants={"eps_gamma": eps_gamma})
    elif gamma_inf is not None and gamma_inf <= 0 and gs_[i_min] > 0:
        entries["Eq66"] = _entry("Eq66", False, (float(zs[-1]), float(gs_[-1])))
    else:
        entries["Eq66"] = _entry("Eq66", False, (float(zs[i_min]), float(gs_[i_min])))

    # Eq19: j is linear in phi(-tau); attach the coefficient bound
    e_sup = float(np.abs(dd - dv).max())
    coeff = float(gs_.max()) * geom.K_g / geom.eps_g * math.exp(geom.h * e_sup)
    entries["Eq19"] = _entry("Eq19", np.isfinite(coeff), (math.nan, coeff), {"j_coeff_bound": coeff})

    return HypothesisReport(entries)
