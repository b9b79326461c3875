import math

import pytest
from hypothesis import assume, given, settings, strategies as st
from numpy.testing import assert_allclose

from celldde.analysis import (
    BOUNDED, INDETERMINATE, NOT_ASSERTED, OPEN_CASE, PERSISTENT_STRONG, PERSISTENT_WEAK_ONLY,
    RHO1, RHO_M, SHAPES, ZERO_GAS, EnsembleMember, classify_regime, detect_ultimate_bound,
    dissipation_time, dissipativity_constants, estimate_gas, estimate_persistence,
    find_equilibria, find_q_zeros, make_ensemble, positive_equilibrium, shaped_history,
)
from celldde.errors import DegenerateCoefficient
from celldde.ingredients import IngredientSet, StemParams, check_hypotheses
from celldde.integrator import SolverConfig, make_admissible
from celldde.segments import StatePair, constant

import frozen
import oracles


def member(iset, w0, v0, index=0):
    h = iset.geom.h
    ic = make_admissible(StatePair(constant(w0, h), constant(v0, h)), iset)
    return EnsembleMember(index, (0, index), "constant", w0, v0, ic)


def custom_set(q_fn, gamma_fn):
    base = IngredientSet.build(StemParams(0.5, 1.0, 0.1))
    return IngredientSet(base.params, base.spec, base.geom, q_fn=q_fn, gamma_fn=gamma_fn)


# -- equilibria ---------------------------------------------------------------

def test_q_zero_persistence(persist_set, gas_set):
    roots = find_q_zeros(persist_set)
    assert len(roots) == 1
    assert abs(roots[0] - frozen.Z_BAR) <= 1e-12
    assert find_q_zeros(gas_set) == []


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 0.99), st.floats(0.1, 3.0), st.floats(0.01, 2.0), st.floats(0.2, 5.0))
def test_q_zero_matches_closed_form(a, p, m, k):
    z = oracles.q_zero_closed_form(a, p, m, k)
    assume(1e-3 < z < 9.0 / k)
    iset = IngredientSet.build(StemParams(a, p, m, k=k))
    roots = find_q_zeros(iset)
    assert len(roots) == 1
    assert abs(roots[0] - z) <= 1e-12 * max(1.0, z)


def test_close_root_pair_found_by_refinement():
    iset = custom_set(lambda z: (z - 1.0) ** 2 - 1e-6, lambda z: 1.0)
    roots = find_q_zeros(iset, z_hi=10.0, n_grid=1000)
    assert_allclose(roots, [0.999, 1.001], atol=1e-12)


def test_positive_equilibrium(persist_set):
    eq = positive_equilibrium(frozen.Z_BAR, persist_set)
    assert abs(eq.v - frozen.Z_BAR) == 0.0
    assert abs(eq.w - frozen.W_BAR) <= 1e-8
    assert eq.residual <= 1e-12
    assert eq.tau == pytest.approx(0.125, abs=1e-10)
    eqs = find_equilibria(persist_set)
    assert len(eqs.positives) == 1 and eqs.zero == (0.0, 0.0)


def test_degenerate_coefficient():
    iset = custom_set(lambda z: 0.5 - z, lambda z: 0.0)
    with pytest.raises(DegenerateCoefficient):
        positive_equilibrium(0.5, iset)


# -- regimes ------------------------------------------------------------------

def test_classify_fixtures(gas_set, persist_set, open_set):
    for iset, expected in ((gas_set, ZERO_GAS), (persist_set, PERSISTENT_STRONG),
                           (open_set, OPEN_CASE)):
        cls = classify_regime(iset, check_hypotheses(iset))
        assert cls.regime == expected
        assert cls.summary() == f"regime={expected}"
        assert ("H16", check_hypotheses(iset).verdict("H16")) in cls.justification


def test_classify_boundary_q0_zero():
    # 2 a p / (p + m) = 1 puts q(0) at zero up to rounding
    iset = IngredientSet.build(StemParams(0.8, 1.0, 0.6, k=1.0))
    assert abs(iset.q(0.0)) < 1e-15
    assert classify_regime(iset, check_hypotheses(iset)).regime == ZERO_GAS


def test_classify_weak_and_indeterminate():
    weak = custom_set(lambda z: 0.1 - 0.01 * z, lambda z: 1.0)
    assert classify_regime(weak, check_hypotheses(weak)).regime == PERSISTENT_WEAK_ONLY
    always_up = custom_set(lambda z: 0.1, lambda z: 1.0)
    assert classify_regime(always_up, check_hypotheses(always_up)).regime == INDETERMINATE


# -- ensembles ----------------------------------------------------------------

def test_shaped_history_values():
    for shape in SHAPES:
        seg = shaped_history(shape, 2.0, 0.5)
        assert seg.values[-1] == pytest.approx(2.0, abs=1e-15)
        assert seg.min_value() > 0
    with pytest.raises(ValueError):
        shaped_history("square", 1.0, 0.5)


def test_make_ensemble_deterministic_and_spread(persist_set):
    a = make_ensemble(persist_set, 12, seed=7, lo=0.05, hi=5.0)
    b = make_ensemble(persist_set, 12, seed=7, lo=0.05, hi=5.0)
    assert [(m.w0, m.v0) for m in a] == [(m.w0, m.v0) for m in b]
    c = make_ensemble(persist_set, 12, seed=8, lo=0.05, hi=5.0)
    assert [(m.w0, m.v0) for m in a] != [(m.w0, m.v0) for m in c]
    for m in a:
        assert 0.05 <= m.w0 <= 5.0 and 0.05 <= m.v0 <= 5.0
        assert m.ic.compat_residual <= 1e-9
        assert m.shape == SHAPES[m.index % len(SHAPES)]
    mags = sorted(max(m.w0, m.v0) for m in a)
    assert mags[0] < 0.2 and mags[-1] > 1.5
    with pytest.raises(ValueError):
        make_ensemble(persist_set, 0, seed=1)


# -- GAS and persistence estimates --------------------------------------------

def test_gas_zero_initial_condition(gas_set):
    cfg = SolverConfig.for_set(gas_set, 5.0)
    rep = estimate_gas([member(gas_set, 0.0, 0.0)], gas_set, cfg)
    assert rep.tail_max == 0.0


def test_gas_decays(gas_set):
    cfg = SolverConfig.for_set(gas_set, 40.0)
    rep = estimate_gas([member(gas_set, 1.0, 1.0), member(gas_set, 0.1, 0.2, 1)], gas_set, cfg)
    assert 0 < rep.tail_max < 1e-2


def test_persistence_at_equilibrium(persist_set):
    cfg = SolverConfig.for_set(persist_set, 10.0)
    eq = [member(persist_set, frozen.W_BAR, frozen.Z_BAR)]
    rm = estimate_persistence(eq, persist_set, cfg, RHO_M, window=5.0)
    r1 = estimate_persistence(eq, persist_set, cfg, RHO1, window=5.0)
    assert abs(rm.eps_hat - frozen.Z_BAR) <= 1e-10
    assert abs(r1.eps_hat - frozen.W_BAR) <= 1e-8
    assert rm.eps_hat <= r1.eps_hat


def test_persistence_zero_stem_cells(persist_set):
    cfg = SolverConfig.for_set(persist_set, 10.0)
    rep = estimate_persistence([member(persist_set, 0.0, 1.0)], persist_set, cfg, RHO1, 5.0)
    assert rep.eps_hat == 0.0
    with pytest.raises(ValueError):
        estimate_persistence([], persist_set, cfg, RHO1, window=20.0)


# -- dissipativity ------------------------------------------------------------

def test_dissipation_time():
    assert dissipation_time(2.0, 1.0) == pytest.approx(frozen.T_D_Z2, abs=1e-15)


def test_dissipativity_constants(persist_set, gas_set, open_set):
    c = dissipativity_constants(persist_set, check_hypotheses(persist_set))
    assert c.z_star == pytest.approx(frozen.Z_STAR_PERSIST, abs=1e-12)
    assert c.c_low == pytest.approx(frozen.EPS_GAMMA_PERSIST * 0.5)
    assert c.K1 == pytest.approx((c.z_star + 1) / c.c_low)
    assert c.K2 >= c.K1
    assert c.eps_w == pytest.approx(c.K1 * frozen.DELTA_PERSIST)
    assert dissipativity_constants(open_set, check_hypotheses(open_set)) is None


def test_ultimate_bound_zero_and_equilibrium(persist_set):
    rep = check_hypotheses(persist_set)
    cfg = SolverConfig.for_set(persist_set, 4.0)
    b = detect_ultimate_bound([member(persist_set, 0.0, 0.0)], persist_set, cfg, rep)
    assert b.verdict == BOUNDED and b.K_hat == 0.0 and b.entry_times == (0.0,)
    b = detect_ultimate_bound([member(persist_set, frozen.W_BAR, frozen.Z_BAR)],
                              persist_set, cfg, rep)
    assert b.K_hat == pytest.approx(1.1 * (frozen.W_BAR + frozen.Z_BAR))


def test_ultimate_bound_open_case_not_asserted(open_set):
    cfg = SolverConfig.for_set(open_set, 4.0)
    b = detect_ultimate_bound([member(open_set, 1.0, 1.0)], open_set, cfg,
                              check_hypotheses(open_set))
    assert b.verdict == NOT_ASSERTED
    assert b.constants is None
    assert math.isfinite(b.K_hat)
