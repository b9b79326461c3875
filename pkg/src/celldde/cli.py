"""Command-line front end: configuration parsing, scenarios and file output.

Configuration files are line oriented::

    # comment
    [stem]
    a = 0.8          # trailing comments are allowed
    p = 1
    m = 3e-1

Sections are ``[stem] [maturation] [geometry] [solver] [analysis] [output]``;
unknown sections or keys are errors.  ``--set section.key=value`` overrides a
value after the file is read.
"""
from __future__ import annotations

import argparse
import decimal
import itertools
import logging
import math
import re
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analysis import (PERSISTENT_STRONG, PERSISTENT_WEAK_ONLY, classify_regime,
                       estimate_persistence, find_equilibria, make_ensemble, shaped_history)
from .delay_kernel import KernelConfig, solve_maturation
from .errors import CellDDEError, ConfigError, GeometryInfeasible, ParseError, ValidationError
from .ingredients import (DeathSpec, ExpDecayG, HillG, IngredientSet, MaturationSpec,
                          StemParams, UnitG, check_hypotheses, constant_fn, derive_geometry)
from .integrator import (SolverConfig, convergence_study, integrate, make_admissible,
                         verify_voc, verify_w_closed_form, write_trajectory_csv)
from .segments import StatePair, constant
from .textio import config_hash, fmt17, header_line

__all__ = ["ScenarioConfig", "parse_config", "parse_text", "main", "fmt17", "fmt_short"]

logger = logging.getLogger(__name__)

# kinds: num, auto (number or "auto"), ext (number or +-inf), int, str, choice:<a|b>,
# param (a numeric "section.key"), range (start:step:stop)
SCHEMA: dict[str, dict[str, tuple[str, Optional[str]]]] = {
    "stem": {
        "a": ("num", None), "p": ("num", None), "m": ("num", None),
        "k": ("num", "0"), "kappa": ("num", "0"), "mu": ("num", "1"),
    },
    "maturation": {
        "variant": ("choice:unit|hill|expdecay", "unit"),
        "eps_floor": ("num", "0.5"),
        "a_g": ("num", "0"), "p_g": ("num", "1"), "k_g": ("num", "0"),
        "eps_g": ("num", "0.5"), "gamma_g": ("num", "1"),
        "a_d": ("num", "0"), "mu_d": ("num", "0"), "k_d": ("num", "0"),
    },
    "geometry": {
        "x2": ("num", "1"), "b": ("num", "0.5"), "x1": ("auto", "auto"),
        "J_lo": ("ext", "-inf"), "J_hi": ("ext", "inf"), "z_hi": ("auto", "auto"),
    },
    "solver": {
        "dt": ("auto", "auto"), "horizon": ("num", "50"), "corrector_passes": ("int", "2"),
        "substeps_per_h": ("int", "64"), "threshold_tol": ("num", "1e-12"),
        "w0": ("num", "1"), "v0": ("num", "0.5"),
        "ic_shape": ("choice:constant|exp|sine", "constant"), "n_knots": ("int", "33"),
    },
    "analysis": {
        "ensemble_size": ("int", "20"), "seed": ("int", None), "window": ("num", "50"),
        "tol": ("num", "1e-6"), "mag_lo": ("num", "0.01"), "mag_hi": ("num", "10"),
        "rho": ("choice:rho_m|rho1", "rho_m"),
        "sweep.param": ("param", None), "sweep.values": ("range", None),
        "sweep.param2": ("param", None), "sweep.values2": ("range", None),
    },
    "output": {
        "dir": ("str", "out"),
    },
}

# keys that do not influence any computed number
_UNHASHED = {"output.dir"}

_NUM_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_SECTION_RE = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)\]$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


def fmt_short(x: float) -> str:
    """Two significant digits, unpadded exponent: ``-2.0e-1``."""
    mant, exp = f"{float(x):.1e}".split("e")
    return f"{mant}e{int(exp)}"


# ---------------------------------------------------------------------------
# parsing

Entries = dict[str, tuple[str, Optional[int]]]


def parse_text(text: str) -> Entries:
    """Raw ``section.key -> (value text, line number)`` from configuration text."""
    entries: Entries = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                raise ParseError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ParseError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ParseError(f"malformed key {key!r}", lineno)
        if key not in SCHEMA[section]:
            raise ParseError(f"unknown key {key!r} in [{section}]", lineno)
        if not value:
            raise ParseError(f"empty value for {key!r}", lineno)
        full = f"{section}.{key}"
        if full in entries:
            raise ParseError(f"duplicate key {key!r} in [{section}]", lineno)
        entries[full] = (value, lineno)
    return entries


def _split_full(full: str) -> tuple[str, str]:
    section, _, key = full.partition(".")
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ParseError(f"unknown setting {full!r}")
    return section, key


def apply_overrides(entries: Entries, overrides: Sequence[str]) -> Entries:
    """Apply ``section.key=value`` strings."""
    out = dict(entries)
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override {item!r} is not of the form section.key=value")
        full, value = (part.strip() for part in item.split("=", 1))
        _split_full(full)
        if not value:
            raise ParseError(f"empty value in override {item!r}")
        out[full] = (value, None)
    return out


def _where(lineno: Optional[int]) -> str:
    return f" (line {lineno})" if lineno is not None else ""


def _number(text: str, full: str, lineno: Optional[int]) -> float:
    if not _NUM_RE.match(text):
        raise ParseError(f"{full}: {text!r} is not a number", lineno)
    return float(text)


def _range_values(text: str, full: str, lineno: Optional[int]) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(":")]
    if len(parts) != 3:
        raise ParseError(f"{full}: expected start:step:stop, got {text!r}", lineno)
    for p in parts:
        _number(p, full, lineno)
    start, step, stop = (decimal.Decimal(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValidationError(f"{full}: need step > 0 and stop >= start{_where(lineno)}")
    n = (stop - start) / step
    if n != n.to_integral_value():
        raise ValidationError(f"{full}: (stop - start) is not a multiple of step{_where(lineno)}")
    return tuple(float(start + i * step) for i in range(int(n) + 1))


def _convert(full: str, kind: str, text: str, lineno: Optional[int]):
    if kind == "num":
        return _number(text, full, lineno)
    if kind == "auto":
        return None if text == "auto" else _number(text, full, lineno)
    if kind == "ext":
        if text in ("inf", "+inf"):
            return math.inf
        if text == "-inf":
            return -math.inf
        return _number(text, full, lineno)
    if kind == "int":
        if not _INT_RE.match(text):
            raise ParseError(f"{full}: {text!r} is not an integer", lineno)
        return int(text)
    if kind.startswith("choice:"):
        options = kind.split(":", 1)[1].split("|")
        if text not in options:
            raise ValidationError(f"{full}: {text!r} not one of {options}{_where(lineno)}")
        return text
    if kind == "param":
        try:
            section, key = _split_full(text)
        except ParseError:
            raise ParseError(f"{full}: unknown setting {text!r}", lineno) from None
        if SCHEMA[section][key][0] not in ("num", "auto", "ext") or section == "analysis":
            raise ValidationError(f"{full}: {text!r} is not a sweepable number{_where(lineno)}")
        return text
    if kind == "range":
        return _range_values(text, full, lineno)
    return text


@dataclass(frozen=True)
class ScenarioConfig:
    """Typed scenario: model, geometry, solver and analysis settings.

    ``entries`` holds the effective text of every setting (defaults filled
    in); it is the source of the configuration hash and of sweeps.
    """

    params: StemParams
    spec: MaturationSpec
    x2: float
    b: float
    x1: Optional[float]
    J_bounds: tuple[float, float]
    z_hi: Optional[float]
    eps_floor: float
    dt: Optional[float]
    horizon: float
    corrector_passes: int
    kernel: KernelConfig
    w0: float
    v0: float
    ic_shape: str
    n_knots: int
    ensemble_size: int
    seed: Optional[int]
    window: float
    tol: float
    mag_range: tuple[float, float]
    rho: str
    sweeps: tuple[tuple[str, tuple[float, ...]], ...]
    out_dir: Path
    entries: tuple[tuple[str, str], ...]

    @property
    def chash(self) -> str:
        text = "".join(f"{k}={v}\n" for k, v in self.entries if k not in _UNHASHED)
        return config_hash(text)

    def header(self) -> str:
        return header_line(__version__, self.chash)

    def with_values(self, updates: dict[str, str]) -> "ScenarioConfig":
        entries = {k: (v, None) for k, v in self.entries}
        entries.update({k: (v, None) for k, v in updates.items()})
        return build_config(entries)

    def build_set(self) -> IngredientSet:
        try:
            geom = derive_geometry(self.spec, self.x2, self.b, self.J_bounds, params=self.params,
                                   x1=self.x1, z_hi=self.z_hi, floor_fraction=self.eps_floor)
        except GeometryInfeasible as exc:
            raise ValidationError(str(exc)) from None
        return IngredientSet(self.params, self.spec, geom)

    def solver_config(self, iset: IngredientSet, horizon: Optional[float] = None) -> SolverConfig:
        try:
            return SolverConfig.for_set(iset, self.horizon if horizon is None else horizon,
                                        self.dt, corrector_passes=self.corrector_passes,
                                        kernel=self.kernel)
        except ValueError as exc:
            raise ValidationError(f"solver: {exc}") from None

    def require_seed(self) -> int:
        if self.seed is None:
            raise ValidationError("analysis.seed is required for ensembles")
        return self.seed


def build_config(entries: Entries) -> ScenarioConfig:
    """Typed configuration from raw entries; missing keys take their defaults."""
    vals = {}
    effective = []
    for section, keys in SCHEMA.items():
        for key, (kind, default) in keys.items():
            full = f"{section}.{key}"
            if full in entries:
                text, lineno = entries[full]
            elif default is not None:
                text, lineno = default, None
            elif kind in ("param", "range") or full == "analysis.seed":
                vals[full] = None
                continue
            else:
                raise ValidationError(f"missing required setting {full}")
            vals[full] = _convert(full, kind, text, lineno)
            effective.append((full, text))

    def v(full):
        return vals[full]

    try:
        params = StemParams(v("stem.a"), v("stem.p"), v("stem.m"), v("stem.k"),
                            v("stem.kappa"), v("stem.mu"))
    except ValueError as exc:
        raise ValidationError(f"stem: {exc}") from None

    variant_name = v("maturation.variant")
    try:
        if variant_name == "unit":
            variant = UnitG()
        elif variant_name == "hill":
            variant = HillG.constant(v("maturation.a_g"), v("maturation.p_g"), v("maturation.k_g"))
        else:
            gam, dgam = constant_fn(v("maturation.gamma_g"))
            variant = ExpDecayG(v("maturation.eps_g"), gam, dgam)
    except ValueError as exc:
        raise ValidationError(f"maturation: {exc}") from None
    if v("maturation.k_g") < 0 or v("maturation.k_d") < 0:
        raise ValidationError("maturation: k_g and k_d must be nonnegative")
    a_d, mu_d, k_d = v("maturation.a_d"), v("maturation.mu_d"), v("maturation.k_d")
    death = None if a_d == mu_d == k_d == 0 else DeathSpec.constant(a_d, mu_d, k_d)
    if not 0 < v("maturation.eps_floor") < 1:
        raise ValidationError("maturation.eps_floor must lie in (0, 1)")

    if not v("geometry.b") > 0:
        raise ValidationError("geometry.b must be positive")
    if not v("solver.horizon") > 0:
        raise ValidationError("solver.horizon must be positive")
    if v("solver.dt") is not None and not v("solver.dt") > 0:
        raise ValidationError("solver.dt must be positive")
    try:
        kernel = KernelConfig(v("solver.substeps_per_h"), v("solver.threshold_tol"))
    except ValueError as exc:
        raise ValidationError(f"solver: {exc}") from None
    if v("solver.corrector_passes") < 1:
        raise ValidationError("solver.corrector_passes must be at least 1")
    if v("solver.n_knots") < 2:
        raise ValidationError("solver.n_knots must be at least 2")
    if v("solver.w0") < 0 or v("solver.v0") < 0:
        raise ValidationError("solver.w0 and solver.v0 must be nonnegative")
    if v("analysis.ensemble_size") < 1:
        raise ValidationError("analysis.ensemble_size must be positive")
    if not 0 < v("analysis.mag_lo") <= v("analysis.mag_hi"):
        raise ValidationError("need 0 < analysis.mag_lo <= analysis.mag_hi")
    if not v("analysis.window") > 0:
        raise ValidationError("analysis.window must be positive")

    sweeps = []
    for pk, vk in (("analysis.sweep.param", "analysis.sweep.values"),
                   ("analysis.sweep.param2", "analysis.sweep.values2")):
        if (v(pk) is None) != (v(vk) is None):
            raise ValidationError(f"{pk} and {vk} must be given together")
        if v(pk) is not None:
            sweeps.append((v(pk), v(vk)))

    return ScenarioConfig(
        params=params, spec=MaturationSpec(variant, death),
        x2=v("geometry.x2"), b=v("geometry.b"), x1=v("geometry.x1"),
        J_bounds=(v("geometry.J_lo"), v("geometry.J_hi")), z_hi=v("geometry.z_hi"),
        eps_floor=v("maturation.eps_floor"),
        dt=v("solver.dt"), horizon=v("solver.horizon"),
        corrector_passes=v("solver.corrector_passes"), kernel=kernel,
        w0=v("solver.w0"), v0=v("solver.v0"), ic_shape=v("solver.ic_shape"),
        n_knots=v("solver.n_knots"),
        ensemble_size=v("analysis.ensemble_size"), seed=v("analysis.seed"),
        window=v("analysis.window"), tol=v("analysis.tol"),
        mag_range=(v("analysis.mag_lo"), v("analysis.mag_hi")), rho=v("analysis.rho"),
        sweeps=tuple(sweeps), out_dir=Path(v("output.dir")), entries=tuple(effective),
    )


def parse_config(path, overrides: Sequence[str] = ()) -> ScenarioConfig:
    """Read, override and validate a configuration file.

    Raises
    ------
    ParseError
        Syntax errors, unknown sections or keys, malformed numbers.
    ValidationError
        Values violating a model or solver invariant.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return build_config(apply_overrides(parse_text(text), overrides))


# ---------------------------------------------------------------------------
# commands


def _write(cfg: ScenarioConfig, name: str, body: str) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / name
    with open(path, "w", newline="\n") as fh:
        fh.write(cfg.header())
        fh.write(body)
    return path


def _baseline_ic(cfg: ScenarioConfig, iset: IngredientSet):
    h = iset.geom.h
    raw = StatePair(shaped_history(cfg.ic_shape, cfg.w0, h, cfg.n_knots),
                    shaped_history(cfg.ic_shape, cfg.v0, h, cfg.n_knots))
    return make_admissible(raw, iset, cfg.kernel)


def cmd_classify(cfg: ScenarioConfig) -> int:
    iset = cfg.build_set()
    report = check_hypotheses(iset)
    cls = classify_regime(iset, report)
    lines = report.lines()
    lines += [f"justification {i} {v}" for i, v in cls.justification]
    summary = f"regime={cls.regime} q0={fmt_short(iset.q(0.0))}"
    lines.append(summary)
    _write(cfg, "classify.txt", "\n".join(lines) + "\n")
    print(summary)
    return 0


def cmd_equilibria(cfg: ScenarioConfig) -> int:
    iset = cfg.build_set()
    eqs = find_equilibria(iset, cfg.kernel, cfg.z_hi)
    tau0 = solve_maturation(constant(0.0, iset.geom.h), iset, cfg.kernel).tau
    rows = ["kind,w,v,tau,residual", f"zero,{fmt17(0.0)},{fmt17(0.0)},{fmt17(tau0)},{fmt17(0.0)}"]
    for e in eqs.positives:
        rows.append(f"positive,{fmt17(e.w)},{fmt17(e.v)},{fmt17(e.tau)},{fmt17(e.residual)}")
        print(f"v={fmt17(e.v)}, w={fmt17(e.w)}")
    if not eqs.positives:
        print("no positive equilibrium")
    _write(cfg, "equilibria.csv", "\n".join(rows) + "\n")
    return 0


def cmd_run(cfg: ScenarioConfig) -> int:
    iset = cfg.build_set()
    scfg = cfg.solver_config(iset)
    ic = _baseline_ic(cfg, iset)
    traj = integrate(ic, iset, scfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, cfg.out_dir / "trajectory.csv", cfg.header())
    cls = classify_regime(iset, check_hypotheses(iset))
    lines = [
        f"regime={cls.regime}",
        f"dt={fmt17(scfg.dt)}",
        f"steps={traj.times.size - 1}",
        f"compat_residual={fmt17(ic.compat_residual)}",
        f"w_end={fmt17(traj.w[-1])}",
        f"v_end={fmt17(traj.v[-1])}",
        f"tau_min={fmt17(traj.tau.min())}",
        f"tau_max={fmt17(traj.tau.max())}",
        f"w_closed_form_residual={fmt17(verify_w_closed_form(traj, iset))}",
        f"voc_residual={fmt17(verify_voc(traj, iset))}",
    ]
    _write(cfg, "summary.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


VERIFY_TOLS = {
    "compat_residual": 1e-9,
    "w_closed_form": 1e-6,
    "voc": 1e-5,
    "convergence_order": 3.0,
    "tau_bounds": 0.0,
    "corrector_stability": 1e-10,
}


def cmd_verify(cfg: ScenarioConfig) -> int:
    """Residual table for the baseline trajectory; exit 1 if any check fails."""
    iset = cfg.build_set()
    scfg = cfg.solver_config(iset)
    ic = _baseline_ic(cfg, iset)
    traj = integrate(ic, iset, replace(scfg, corrector_passes=max(3, scfg.corrector_passes)))
    lo, hi = iset.geom.tau_bounds
    slack = 1e-12 * hi
    tau_excess = max(0.0, lo - slack - traj.tau.min(), traj.tau.max() - hi - slack,
                     traj.tau.max() - iset.geom.h)
    study = convergence_study(ic, iset, min(10.0, cfg.horizon), scfg.dt, kcfg=cfg.kernel)
    checks = [
        ("compat_residual", ic.compat_residual, "<="),
        ("w_closed_form", verify_w_closed_form(traj, iset), "<="),
        ("voc", verify_voc(traj, iset), "<="),
        ("convergence_order", study.order, ">="),
        ("tau_bounds", tau_excess, "<="),
        ("corrector_stability", traj.corrector_delta, "<="),
    ]
    rows = ["check,value,tolerance,status"]
    failed = False
    for name, value, op in checks:
        tol = VERIFY_TOLS[name]
        ok = value <= tol if op == "<=" else value >= tol
        failed |= not ok
        status = "PASS" if ok else "FAIL"
        rows.append(f"{name},{fmt17(value)},{fmt17(tol)},{status}")
        print(f"{status} {name} {fmt17(value)} {op} {fmt17(tol)}")
    _write(cfg, "verify.csv", "\n".join(rows) + "\n")
    return 1 if failed else 0


def _sweep_cell(cfg: ScenarioConfig) -> list[str]:
    try:
        iset = cfg.build_set()
    except ValidationError as exc:
        logger.warning("sweep cell skipped: %s", exc)
        return ["Invalid"] + ["nan"] * 4
    cls = classify_regime(iset, check_hypotheses(iset))
    eqs = find_equilibria(iset, cfg.kernel, cfg.z_hi)
    z_bar = eqs.positives[0].v if eqs.positives else math.nan
    w_bar = eqs.positives[0].w if eqs.positives else math.nan
    eps_hat = math.nan
    if cls.regime in (PERSISTENT_STRONG, PERSISTENT_WEAK_ONLY):
        scfg = cfg.solver_config(iset)
        if cfg.window > scfg.horizon:
            raise ValidationError("analysis.window exceeds solver.horizon")
        members = make_ensemble(iset, cfg.ensemble_size, cfg.require_seed(),
                                lo=cfg.mag_range[0], hi=cfg.mag_range[1], kcfg=cfg.kernel)
        eps_hat = estimate_persistence(members, iset, scfg, cfg.rho, cfg.window).eps_hat
    return [cls.regime, fmt17(iset.q(0.0)), fmt17(z_bar), fmt17(w_bar), fmt17(eps_hat)]


def cmd_sweep(cfg: ScenarioConfig) -> int:
    if not cfg.sweeps:
        raise ValidationError("sweep needs analysis.sweep.param and analysis.sweep.values")
    cfg.require_seed()
    names = [p for p, _ in cfg.sweeps]
    rows = [",".join(names + ["regime", "q0", "z_bar", "w_bar", "eps_hat"])]
    for combo in itertools.product(*(vals for _, vals in cfg.sweeps)):
        cell = cfg.with_values({n: repr(x) for n, x in zip(names, combo)})
        row = [fmt17(x) for x in combo] + _sweep_cell(cell)
        rows.append(",".join(row))
        print(",".join(row))
    _write(cfg, "sweep.csv", "\n".join(rows) + "\n")
    return 0


COMMANDS = {
    "run": cmd_run,
    "classify": cmd_classify,
    "equilibria": cmd_equilibria,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}

HELP = {
    "run": "integrate the baseline initial condition and write trajectory.csv",
    "classify": "check hypotheses on a grid and report the long-term regime",
    "equilibria": "list the zero and positive equilibria",
    "verify": "residual and convergence checks; exit 1 if any fails",
    "sweep": "classify and estimate persistence over a parameter grid",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="scenario file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a configuration value (repeatable)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="ensemble seed")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser = argparse.ArgumentParser(prog="celldde", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"celldde {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = list(args.set)
    if args.out is not None:
        overrides.append(f"output.dir={args.out}")
    if args.seed is not None:
        overrides.append(f"analysis.seed={args.seed}")
    try:
        cfg = parse_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CellDDEError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
