import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfl.energy import energy_distance, holm, two_sample_test
from cfl.equivalence import (
    Verdict,
    compare,
    compare_almost_sure,
    compare_cross_outcome,
    compare_single_outcome,
    contrast_test,
    law_distance,
)
from cfl.errors import DimensionMismatch, SpaceMismatch
from cfl.laws import Empirical, ExactTable, GaussianMixture
from cfl.noise import Bernoulli, Gaussian, NoiseSpace, NoiseSpec
from cfl.random_models import random_finite_rcm
from cfl.rcm import entailed_rcm, outcome_equation_rcm, user_rcm
from cfl.scm import make_model

G = lambda n: NoiseSpec(n, Gaussian(0.0, 1.0))
NS = NoiseSpace((NoiseSpec("U_T", Bernoulli(0.5)), G("U_X"), G("U_Y")))
CHAIN = make_model(NS, ["T = U_T", "X = T + U_X", "Y = T + X + U_Y"])
INDEP_X = make_model(NS, ["T = U_T", "X = U_X", "Y = T + X + U_Y"])
MIRRORED = ["Y0 = (1-T)*(X+U_Y) + T*(X-U_Y)", "Y1 = (1-T)*(1+X-U_Y) + T*(1+X+U_Y)"]


def shifted(y):
    return user_rcm(CHAIN, [f"Y{t} = Y[T={t}] + {y}*indicator(T != {t})" for t in (0, 1)])


def test_as_self_equal():
    r = entailed_rcm(CHAIN)
    v = compare_almost_sure(r, r)
    assert v.equal and v.statistic == 0 and v.witness is None


@pytest.mark.parametrize("y", [1.0, -1.0, 0.5])
def test_as_shifted_witness(y):
    v = compare_almost_sure(shifted(y), entailed_rcm(CHAIN))
    assert v.verdict is Verdict.NOT_EQUAL
    w = v.witness
    t_other = 1 - int(w["T"])
    assert w["a"][t_other][0] - w["b"][t_other][0] == pytest.approx(y)


def test_as_indep_x_gap_is_two_t_uy():
    v = compare_almost_sure(user_rcm(INDEP_X, MIRRORED), entailed_rcm(INDEP_X))
    assert v.verdict is Verdict.NOT_EQUAL
    w = v.witness
    gap0 = w["a"][0][0] - w["b"][0][0]
    assert gap0 == pytest.approx(-2 * w["T"] * w["noise"]["U_Y"])


def test_as_refuses_across_spaces():
    other = make_model(NoiseSpace((NoiseSpec("U_T", Bernoulli(0.4)), G("U_X"), G("U_Y"))),
                       ["T = U_T", "X = T + U_X", "Y = T + X + U_Y"])
    with pytest.raises(SpaceMismatch):
        compare_almost_sure(entailed_rcm(CHAIN), entailed_rcm(other))


def test_dimension_mismatch():
    ns = NoiseSpace((NoiseSpec("U_T", Bernoulli(0.5)), G("U_X"), G("U_Z"), G("U_Y")))
    two = make_model(ns, ["T = U_T", "X = U_X", "Z = U_Z", "Y = T + U_Y"], covariates=("X", "Z"))
    with pytest.raises(DimensionMismatch):
        compare_cross_outcome(entailed_rcm(CHAIN), entailed_rcm(two))


@pytest.mark.parametrize("engine", ["gaussian", "mc"])
def test_indep_x_single_equal_cross_not(engine):
    a, b = user_rcm(INDEP_X, MIRRORED), entailed_rcm(INDEP_X)
    assert compare_single_outcome(a, b, engine=engine, seed=1).verdict is not Verdict.NOT_EQUAL
    assert compare_cross_outcome(a, b, engine=engine, seed=1).verdict is Verdict.NOT_EQUAL


def test_indep_x_single_equal_exactly_under_gaussian():
    v = compare_single_outcome(user_rcm(INDEP_X, MIRRORED), entailed_rcm(INDEP_X), engine="gaussian")
    assert v.equal and v.statistic <= 1e-9


def test_outcome_equation_pair():
    a, b = user_rcm(CHAIN, MIRRORED), outcome_equation_rcm(CHAIN)
    assert compare_single_outcome(a, b, engine="gaussian").equal
    assert compare_cross_outcome(a, b, engine="gaussian").verdict is Verdict.NOT_EQUAL


def test_contrast_outcome_equation_pair():
    res = contrast_test(user_rcm(CHAIN, MIRRORED), outcome_equation_rcm(CHAIN), n=20_000, seed=2)
    assert res.significant and res.statistic > res.threshold


def test_independent_copy_equal():
    a = entailed_rcm(CHAIN)
    other = make_model(NoiseSpace((NoiseSpec("U_T", Bernoulli(0.5)), G("U_X"), G("U_Y"))),
                       ["T = U_T", "X = T + U_X", "Y = T + X + U_Y"])
    v = compare_cross_outcome(a, entailed_rcm(other), engine="mc", seed=5)
    assert v.verdict is Verdict.EQUAL


def test_motivating_ignorable_rcm_vs_entailed():
    m = make_model(NS, ["T = U_T", "X = T + U_X", "Y = X + 2*T + U_Y"])
    # Y_t = 2t + X + U_Y satisfies positivity and single-outcome ignorability
    r = user_rcm(m, ["Y0 = X + U_Y", "Y1 = 2 + X + U_Y"])
    v = compare_single_outcome(r, entailed_rcm(m), engine="gaussian")
    assert v.verdict is Verdict.NOT_EQUAL
    assert set(v.per_t_detail) == {0, 1}


def test_single_self_equal():
    r = user_rcm(CHAIN, MIRRORED)
    assert compare_single_outcome(r, r, engine="gaussian").equal


@pytest.mark.parametrize("y", [1.0, -1.0, 0.5])
def test_shifted_all_levels(y):
    a, b = shifted(y), entailed_rcm(CHAIN)
    for level in ("as", "cross", "single"):
        v = compare(a, b, level)
        assert v.verdict is Verdict.NOT_EQUAL
        assert v.witness is not None


def test_law_distance_tables():
    a = ExactTable.from_rows([[0.0], [1.0]], [0.5, 0.5])
    assert law_distance(a, a) == (0.0, None)
    d0 = ExactTable.from_rows([[0.0]], [1.0])
    d1 = ExactTable.from_rows([[1.0]], [1.0])
    assert law_distance(d0, d1) == (1.0, None)


def test_law_distance_dims():
    with pytest.raises(DimensionMismatch):
        law_distance(ExactTable.from_rows([[0.0]], [1.0]), ExactTable.from_rows([[0.0, 1.0]], [1.0]))


def test_law_distance_gaussian_shift():
    g = np.random.default_rng(0)
    a = Empirical(g.standard_normal((10_000, 1)))
    b = Empirical(g.standard_normal((10_000, 1)) + 0.5)
    stat, p = law_distance(a, b)
    assert p < 0.01


def test_law_distance_mixture_relabeling():
    a = GaussianMixture(np.array([0.3, 0.7]), np.array([[0.0], [1.0]]), np.array([[[1.0]], [[2.0]]]))
    b = GaussianMixture(np.array([0.7, 0.3]), np.array([[1.0], [0.0]]), np.array([[[2.0]], [[1.0]]]))
    assert law_distance(a, b)[0] == 0


def test_energy_distance_against_numpy():
    g = np.random.default_rng(1)
    a, b = g.standard_normal((60, 2)), g.standard_normal((50, 2)) + 0.3
    d = lambda x, y: np.linalg.norm(x[:, None] - y[None], axis=-1).mean()
    assert energy_distance(a, b) == pytest.approx(2 * d(a, b) - d(a, a) - d(b, b))


def test_holm_against_manual():
    p = np.array([0.01, 0.04, 0.03])
    # sorted 0.01, 0.03, 0.04 -> 0.03, 0.06, 0.06 (monotone)
    assert holm(p) == pytest.approx([0.03, 0.06, 0.06])


def test_two_sample_null_calibrated():
    g = np.random.default_rng(2)
    hits = sum(two_sample_test(g.standard_normal((300, 1)), g.standard_normal((300, 1)), n_perm=99,
                               seed=s).significant for s in range(100))
    assert hits <= 6


# invariants on random finite RCMs --------------------------------------------------------------

pairs = st.tuples(st.integers(0, 10_000), st.integers(0, 10_000))


def _same_space_pair(seed, other):
    a = random_finite_rcm(seed)
    g = np.random.default_rng(other)
    flip = int(g.integers(0, 2))
    sign = float(g.choice([1.0, -1.0]))
    ys = a.base.outcomes
    pots = {t: {y: e * sign if t == flip else e for y, e in zip(ys, a.potentials[t])}
            for t in a.treatment_support}
    return a, user_rcm(a.base, pots)


@given(pairs)
@settings(max_examples=40, deadline=None)
def test_implication_chain(pair):
    a, b = _same_space_pair(*pair)
    as_ = compare_almost_sure(a, b)
    cross = compare_cross_outcome(a, b)
    single = compare_single_outcome(a, b)
    if as_.equal:
        assert cross.equal
    if cross.equal:
        assert single.equal


@given(pairs)
@settings(max_examples=40, deadline=None)
def test_exact_symmetry(pair):
    a, b = _same_space_pair(*pair)
    for level in ("as", "cross", "single"):
        ab, ba = compare(a, b, level), compare(b, a, level)
        assert ab.verdict == ba.verdict
        assert ab.statistic == pytest.approx(ba.statistic)


@given(st.integers(0, 10_000))
@settings(max_examples=5, deadline=None)
def test_mc_symmetry_same_seeds(seed):
    a, b = user_rcm(INDEP_X, MIRRORED), entailed_rcm(INDEP_X)
    ab = compare_cross_outcome(a, b, engine="mc", seed=seed, budget=2000)
    ba = compare_cross_outcome(b, a, engine="mc", seed=seed, budget=2000)
    assert ab.verdict == ba.verdict
