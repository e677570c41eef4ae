import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from cfl.equivalence import compare_almost_sure, law_distance
from cfl.errors import NotEnumerable, ParseError, PositivityViolation, UnknownReference
from cfl.inference import law
from cfl.laws import ExactTable
from cfl.noise import Bernoulli, Discrete, Gaussian, NoiseSpace, NoiseSpec, enumerate_noise, sample_noise
from cfl.random_models import random_acyclic_model, random_finite_rcm
from cfl.rcm import (
    CheckReport,
    check_consistency,
    check_ignorability,
    check_positivity,
    entailed_rcm,
    identify_single_outcome,
    noise_independence,
    outcome_equation_rcm,
    propensity,
    structural_representation,
    user_rcm,
)
from cfl.scm import make_model
from cfl.worlds import world_ref

G = lambda n: NoiseSpec(n, Gaussian(0.0, 1.0))
NS = NoiseSpace((NoiseSpec("U_T", Bernoulli(0.5)), G("U_X"), G("U_Y")))

CHAIN = make_model(NS, ["T = U_T", "X = T + U_X", "Y = T + X + U_Y"])
MIRRORED = ["Y0 = (1-T)*(X+U_Y) + T*(X-U_Y)", "Y1 = (1-T)*(1+X-U_Y) + T*(1+X+U_Y)"]
HALF_MIRRORED = ["Y0 = X + U_Y", "Y1 = (1-T)*(1+X-U_Y) + T*(1+X+U_Y)"]


def motivating(alpha=1.0, beta=2.0):
    return make_model(NS, ["T = U_T", "X = alpha*T + U_X", "Y = X + beta*T + U_Y"],
                      params={"alpha": alpha, "beta": beta})


def coin_model():
    ns = NoiseSpace((NoiseSpec("U_T", Bernoulli(0.4)), NoiseSpec("U_X", Bernoulli(0.7)),
                     NoiseSpec("U_Y", Discrete(((-1.0, 0.25), (0.0, 0.25), (2.0, 0.5))))))
    return make_model(ns, ["T = U_T", "X = U_X", "Y = 2*T - X + T*U_Y"])


def test_entailed_motivating_formula():
    m = motivating(alpha=0.5, beta=-1.5)
    r = entailed_rcm(m)
    u = sample_noise(m.noise, 3, 1000).values
    d = r.evaluate(u)
    for t in (0, 1):
        assert np.allclose(d["pot"][t][:, 0], (0.5 - 1.5) * t + u[:, 1] + u[:, 2])


def test_entailed_chain_formula():
    u = sample_noise(NS, 4, 1000).values
    d = entailed_rcm(CHAIN).evaluate(u)
    assert np.allclose(d["pot"][0][:, 0], u[:, 1] + u[:, 2])
    assert np.allclose(d["pot"][1][:, 0], 2 + u[:, 1] + u[:, 2])


def test_entailed_constant_in_t():
    m = make_model(NS, ["T = U_T", "X = T + U_X", "Y = U_X * U_Y"])
    d = entailed_rcm(m).evaluate(sample_noise(NS, 5, 500).values)
    assert np.array_equal(d["pot"][0], d["pot"][1])


def test_user_rcm_chain_consistent():
    assert check_consistency(user_rcm(CHAIN, MIRRORED)).holds


def test_user_rcm_shifted_consistent():
    r = user_rcm(CHAIN, {t: f"{world_ref('Y', {'T': t})} + 1.5*indicator(T != {t})" for t in (0, 1)})
    assert check_consistency(r).holds


def test_user_rcm_broken_consistency_has_witness():
    r = user_rcm(CHAIN, ["Y0 = Y + 1", "Y1 = Y"])
    rep = check_consistency(r, budget=2000)
    assert not rep.holds and rep.statistic == pytest.approx(1.0)
    assert rep.witnesses and all(w["T"] == 0 for w in rep.witnesses)


def test_user_rcm_unknown_name():
    with pytest.raises(UnknownReference):
        user_rcm(CHAIN, ["Y0 = X + V", "Y1 = X"])


def test_user_rcm_missing_level():
    with pytest.raises(ParseError):
        user_rcm(CHAIN, ["Y0 = X"])


def test_check_report_invariant():
    with pytest.raises(AssertionError):
        CheckReport(True, 2.0, 1.0, "mc")


def test_exact_consistency_on_atoms():
    m = coin_model()
    rep = check_consistency(entailed_rcm(m))
    assert rep.holds and rep.method.value == "exact"


@pytest.mark.parametrize("x", [-1.0, 0.3, 2.0])
def test_chain_propensity_closed_form(x):
    p = propensity(CHAIN, {"X": x}, engine="gaussian")
    for t in (0, 1):
        assert p[t] == pytest.approx(norm.pdf(x - t) / (norm.pdf(x) + norm.pdf(x - 1)), abs=1e-12)


def test_chain_positivity_holds():
    assert check_positivity(CHAIN, engine="gaussian").holds
    assert check_positivity(CHAIN, engine="mc", budget=100_000).holds


def test_deterministic_treatment_breaks_positivity():
    m = make_model(NS, ["T = indicator(X > 0)", "X = U_X", "Y = T + X + U_Y"])
    rep = check_positivity(m, engine="mc", budget=50_000)
    assert not rep.holds and rep.witnesses


def test_indep_x_propensity_half():
    m = make_model(NS, ["T = U_T", "X = U_X", "Y = T + X + U_Y"])
    assert check_positivity(m, engine="gaussian").holds
    assert propensity(m, {"X": 1.7}, engine="gaussian") == pytest.approx({0: 0.5, 1: 0.5})


def test_exact_positivity_gap():
    ns2 = NoiseSpace((NoiseSpec("U_T", Bernoulli(0.5)), NoiseSpec("U_X", Bernoulli(0.5)),
                      NoiseSpec("U_Y", Bernoulli(0.5))))
    m2 = make_model(ns2, ["T = U_T * U_X", "X = U_X", "Y = T + U_Y"])
    rep = check_positivity(m2)
    assert not rep.holds and rep.method.value == "exact"
    with pytest.raises(PositivityViolation):
        identify_single_outcome(m2, 1)


@pytest.mark.parametrize("engine", ["gaussian", "mc"])
def test_chain_first_cross_holds(engine):
    rep = check_ignorability(user_rcm(CHAIN, MIRRORED), "cross", engine=engine, budget=50_000)
    assert rep.holds


def test_chain_modified_single_vs_cross():
    r = user_rcm(CHAIN, HALF_MIRRORED)
    assert check_ignorability(r, "single", engine="gaussian").holds
    assert not check_ignorability(r, "cross", engine="gaussian").holds


def test_motivating_entailed_single_fails():
    rep = check_ignorability(entailed_rcm(motivating()), "single", engine="gaussian")
    assert not rep.holds and rep.witnesses


def test_exact_ignorability():
    m = coin_model()
    assert check_ignorability(entailed_rcm(m), "cross").holds
    dep = user_rcm(m, ["Y0 = 2*T - X + T*U_Y + T", "Y1 = 2 - X + U_Y"])
    assert not check_ignorability(dep, "single").holds


def test_ignorability_deterministic_under_seed():
    r = user_rcm(CHAIN, HALF_MIRRORED)
    a = check_ignorability(r, "cross", engine="mc", budget=20_000, seed=9)
    b = check_ignorability(r, "cross", engine="mc", budget=20_000, seed=9)
    assert a.statistic == b.statistic


@pytest.mark.parametrize("t,expected", [(0, 0.5), (1, 1.5)])
def test_identify_chain_means(t, expected):
    a = identify_single_outcome(CHAIN, t, engine="gaussian")
    assert a.mean()[-1] == pytest.approx(expected, abs=1e-12)
    b = identify_single_outcome(CHAIN, t, engine="mc", n=200_000, seed=1)
    se = b.samples[:, -1].std() / np.sqrt(b.n)
    assert abs(b.mean()[-1] - expected) <= 4 * se


def test_identify_exact_against_reweighting():
    # oracle: mix P(Y | X=x, T=t) over P(T, X) by hand on the enumerated atoms
    m = coin_model()
    tab = enumerate_noise(m.noise)
    u = tab.atoms
    T, X = u[:, 0], u[:, 1]
    Y = 2 * T - X + T * u[:, 2]
    for t in (0, 1):
        rows, probs = [], []
        for tt in (0, 1):
            for xx in (0, 1):
                p_tx = tab.probs[(T == tt) & (X == xx)].sum()
                sel = (T == t) & (X == xx)
                w = tab.probs[sel] / tab.probs[sel].sum()
                for y, q in zip(Y[sel], w):
                    rows.append((tt, xx, y))
                    probs.append(p_tx * q)
        oracle = ExactTable.from_rows(rows, probs)
        assert law_distance(identify_single_outcome(m, t), oracle)[0] == 0


def test_identify_ignores_unrelated_outcome():
    m = make_model(NoiseSpace((NoiseSpec("U_T", Bernoulli(0.3)), NoiseSpec("U_X", Bernoulli(0.6)),
                               NoiseSpec("U_Y", Bernoulli(0.2)))), ["T = U_T", "X = U_X", "Y = U_Y"])
    for t in (0, 1):
        got = identify_single_outcome(m, t)
        assert law_distance(got, law(m, ["T", "X", "Y"]))[0] == 0


def test_identify_function_of_obs_only():
    # two different RCMs over the same observational model give the same identified law
    a = identify_single_outcome(user_rcm(CHAIN, MIRRORED), 1, engine="gaussian")
    b = identify_single_outcome(entailed_rcm(CHAIN), 1, engine="gaussian")
    assert law_distance(a, b)[0] == 0


def test_structural_representation_gaussian_refused():
    with pytest.raises(NotEnumerable):
        structural_representation(entailed_rcm(CHAIN))


def test_structural_representation_four_atoms():
    ns = NoiseSpace((NoiseSpec("A", Bernoulli(0.3)), NoiseSpec("B", Bernoulli(0.6))))
    base = make_model(ns, ["T = A", "X = B", "Y = A + 2*B"])
    r = user_rcm(base, ["Y0 = 2*B", "Y1 = 1 + 2*B - A*B"])
    rep = structural_representation(r)
    back = entailed_rcm(rep)
    atoms = enumerate_noise(rep.noise).atoms
    assert np.array_equal(back.matrix(atoms), r.matrix(enumerate_noise(ns).atoms))


def test_structural_representation_counterfactuals():
    m = coin_model()
    rep = structural_representation(entailed_rcm(m))
    for t in (0, 1):
        q = [world_ref("Y", {"T": t})]
        a = law(m, ["T", "X", *q])
        b = law(rep, ["T", "X", *q])
        assert law_distance(a, b)[0] == 0
    both = [world_ref("Y", {"T": 0}), world_ref("Y", {"T": 1})]
    assert law_distance(law(m, both), law(rep, both))[0] == 0


def test_outcome_equation_rcm_chain():
    r = outcome_equation_rcm(CHAIN)
    u = sample_noise(NS, 6, 1000).values
    d = r.evaluate(u)
    x = u[:, 0] + u[:, 1]
    assert np.allclose(d["pot"][0][:, 0], x + u[:, 2])
    assert np.allclose(d["pot"][1][:, 0], 1 + x + u[:, 2])


def test_noise_independence_chain():
    assert not noise_independence(CHAIN, n=20_000, seed=3).significant


def test_noise_independence_detects_shared_noise():
    m = make_model(NS, ["T = U_T", "X = T + U_X", "Y = X + U_X"])
    assert noise_independence(m, n=20_000, seed=3).significant


# invariants ---------------------------------------------------------------------------

seeds = st.integers(0, 10_000)


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_entailed_always_consistent(seed):
    m = random_acyclic_model(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert check_consistency(entailed_rcm(m), engine="mc", budget=2000, seed=seed).holds


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_structural_round_trip(seed):
    r = random_finite_rcm(seed)
    rep = structural_representation(r)
    back = entailed_rcm(rep)
    assert np.array_equal(back.matrix(enumerate_noise(rep.noise).atoms),
                          r.matrix(enumerate_noise(r.noise).atoms))
    assert compare_almost_sure(back, back).equal


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_cross_implies_single(seed):
    r = random_finite_rcm(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cross = check_ignorability(r, "cross", engine="exact")
        single = check_ignorability(r, "single", engine="exact")
    if cross.holds:
        assert single.holds
    assert single.statistic <= cross.statistic + 1e-12
