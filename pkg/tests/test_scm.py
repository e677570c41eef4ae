import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfl.errors import CyclicGraph, EngineInapplicable, InvalidIntervention, ParseError, UnknownReference
from cfl.expr import Const, children, evaluate, parse, rebuild, to_str
from cfl.inference import counterfactual_law, law
from cfl.laws import ExactTable
from cfl.equivalence import law_distance
from cfl.noise import Bernoulli, Discrete, Gaussian, NoiseBatch, NoiseSpace, NoiseSpec, enumerate_noise, sample_noise
from cfl.random_models import random_acyclic_model
from cfl.scm import (
    apply_do,
    check_assumptions,
    make_model,
    outcome_equation_intervention,
    solve,
    solve_env,
    validate,
    vectorize,
)

G = lambda n: NoiseSpec(n, Gaussian(0.0, 1.0))
NS = NoiseSpace((NoiseSpec("U_T", Bernoulli(0.5)), G("U_X"), G("U_Y")))


def motivating(alpha=1.0, beta=2.0):
    return make_model(NS, ["T = U_T", "X = alpha*T + U_X", "Y = X + beta*T + U_Y"],
                      params={"alpha": alpha, "beta": beta})


def chain():
    return make_model(NS, ["T = U_T", "X = T + U_X", "Y = T + X + U_Y"])


def batch(model, rows):
    v = np.atleast_2d(np.asarray(rows, dtype=float))
    return NoiseBatch(v, 0, model.noise.space_id)


def test_validate_chain_order():
    m = make_model(NS, ["Y = X + U_Y", "X = T + U_X", "T = U_T"])
    assert validate(m) == ["T", "X", "Y"]


def test_validate_motivating():
    assert validate(motivating()) == ["T", "X", "Y"]


def test_cycle_witness():
    m = make_model(NS, ["T = U_T", "X = Y + U_X", "Y = X + U_Y"])
    with pytest.raises(CyclicGraph) as ei:
        validate(m)
    assert set(ei.value.cycle) == {"X", "Y"}


def test_unknown_reference():
    m = make_model(NS, ["T = U_T", "X = Z + U_X", "Y = X + U_Y"])
    with pytest.raises(UnknownReference):
        validate(m)


def test_solve_motivating_draw():
    # X = 1*1 + 0.2 = 1.2; Y = 1.2 + 2*1 + 0 = 3.2
    out = solve(motivating(), batch(motivating(), [1.0, 0.2, 0.0]))
    assert out[0].tolist() == pytest.approx([1.0, 1.2, 3.2])


def test_solve_chain_draw():
    out = solve(chain(), batch(chain(), [0.0, 0.5, -0.1]))
    assert out[0].tolist() == pytest.approx([0.0, 0.5, 0.4])


def test_point_mass_solution_constant():
    ns = NoiseSpace((NoiseSpec("U_T", Discrete(((1.0, 1.0),))), NoiseSpec("U_X", Gaussian(2.0, 0.0)),
                     NoiseSpec("U_Y", Gaussian(-1.0, 0.0))))
    m = make_model(ns, ["T = U_T", "X = T + U_X", "Y = X * U_Y"])
    out = solve(m, sample_noise(ns, 4, 50))
    assert np.all(out == out[0])


@pytest.mark.parametrize("t", [0, 1])
def test_do_treatment_motivating(t):
    m = motivating(alpha=0.7, beta=-1.3)
    b = sample_noise(m.noise, 1, 1000)
    out = solve(apply_do(m, {"T": t}), b)
    u = b.values
    assert np.allclose(out[:, 2], (0.7 - 1.3) * t + u[:, 1] + u[:, 2])


def test_joint_do_motivating():
    m = motivating(beta=2.0)
    b = sample_noise(m.noise, 2, 1000)
    out = solve(apply_do(m, {"T": 1, "X": 0.3}), b)
    assert np.allclose(out[:, 2], 0.3 + 2.0 + b.values[:, 2])


def test_do_keeps_noise_object():
    m = motivating()
    assert apply_do(m, {"T": 1}).noise is m.noise


def test_do_outside_support():
    with pytest.raises(InvalidIntervention):
        apply_do(motivating(), {"T": 2})


def test_vectorize_treatment_block():
    m = motivating(alpha=1.5, beta=0.5)
    f = vectorize(m, {"T"})
    assert f.inputs == ("T",) and f.outputs == ("X", "Y")
    u = sample_noise(m.noise, 3, 200)
    out = f({"T": 1.0}, u)
    assert np.allclose(out["X"], 1.5 + u.values[:, 1])
    assert np.allclose(out["Y"], 2.0 + u.values[:, 1] + u.values[:, 2])


def test_vectorize_everything_fixed():
    f = vectorize(motivating(), {"T", "X", "Y"})
    assert f.outputs == ()


def test_flags_indep_x():
    m = make_model(NS, ["T = U_T", "X = U_X", "Y = T + X + U_Y"])
    f = check_assumptions(m)
    assert f.outcome_a5 and f.indep_noises_a6
    assert f.no_posttreatment_a7_parent and f.no_posttreatment_a7_descendant


def test_flags_motivating():
    f = check_assumptions(motivating())
    assert f.outcome_a5 and f.indep_noises_a6
    assert not f.no_posttreatment_a7_parent and not f.no_posttreatment_a7_descendant


def test_flags_smoking():
    ns = NoiseSpace(tuple(G(n) for n in ["U_T", "U1", "U2", "U_Y"]))
    m = make_model(ns, ["T = indicator(X1 + U_T > 0)", "X1 = U1", "X2 = alpha*T + U2",
                        "Y = gamma*X1 - X2 + beta*T + U_Y"],
                   covariates=("X1", "X2"), params={"alpha": 1, "beta": -1, "gamma": -1})
    f = check_assumptions(m)
    assert f.outcome_a5 and not f.no_posttreatment_a7_parent


def test_a7_forms_differ():
    # T -> X1 -> X2: X2 is a descendant of T without T as a parent
    ns = NoiseSpace((NoiseSpec("U_T", Bernoulli(0.5)), G("U1"), G("U2"), G("U_Y")))
    m = make_model(ns, ["T = U_T", "X1 = T + U1", "X2 = X1 + U2", "Y = X2 + U_Y"], covariates=("X1", "X2"))
    f = check_assumptions(m)
    assert not f.no_posttreatment_a7_parent
    m2 = make_model(ns, ["T = U_T", "X1 = U1", "X2 = X1 + U2", "Y = T + X2 + U_Y"], covariates=("X1", "X2"))
    assert check_assumptions(m2).no_posttreatment_a7_descendant


@pytest.mark.parametrize("x", [-1.0, 0.0, 0.8])
def test_counterfactual_chain_gaussian(x):
    out = counterfactual_law(chain(), {"T": 0, "X": x}, {"T": 1}, ["Y"], engine="gaussian")
    assert out.mean()[0] == pytest.approx(2 + x, abs=1e-12)


def test_counterfactual_chain_mc_against_numpy():
    # independent oracle: plain numpy rejection on the closed-form model
    x, h, n = 0.4, 0.05, 2_000_000
    g = np.random.default_rng(123)
    ut, ux, uy = g.random(n) < 0.5, g.standard_normal(n), g.standard_normal(n)
    X = ut + ux
    keep = (~ut) & (np.abs(X - x) < h)
    oracle = np.mean(2 + ux[keep] + uy[keep])
    assert oracle == pytest.approx(2 + x, abs=0.02)
    out = counterfactual_law(chain(), {"T": 0, "X": x}, {"T": 1}, ["Y"], engine="mc", budget=1_000_000, seed=4)
    assert out.mean()[0] == pytest.approx(2 + x, abs=4 * out.se()[0] + 0.01)


def test_counterfactual_no_evidence():
    out = counterfactual_law(chain(), None, {"T": 1}, ["Y"], engine="gaussian")
    assert out.mean()[0] == pytest.approx(2.0, abs=1e-12)


def test_counterfactual_empty_is_observational():
    m = chain()
    a = counterfactual_law(m, None, {}, ["T", "X", "Y"], engine="gaussian")
    b = law(m, ["T", "X", "Y"], engine="gaussian")
    assert law_distance(a, b)[0] == 0


def test_exact_engine_on_gaussian_refused():
    with pytest.raises(EngineInapplicable):
        law(chain(), ["Y"], engine="exact")


def test_outcome_equation_motivating():
    m = motivating(alpha=1.0, beta=2.0)
    mod = outcome_equation_intervention(m, 1)
    b = sample_noise(m.noise, 9, 5000)
    y0, y1 = solve(m, b)[:, 2], solve(mod, b)[:, 2]
    t = b.values[:, 0]
    assert np.allclose(y1 - y0, 2.0 * (1 - t))
    assert np.mean((y1 - y0)[t == 0]) == pytest.approx(2.0)


def test_outcome_equation_no_t_in_y():
    m = make_model(NS, ["T = U_T", "X = T + U_X", "Y = X + U_Y"])
    assert outcome_equation_intervention(m, 1).equations == m.equations


# invariants over random acyclic models -------------------------------------------------

seeds = st.integers(0, 10_000)


def map_consts(e, f):
    if isinstance(e, Const):
        return Const(f(e.value))
    return rebuild(e, (map_consts(k, f) for k in children(e))) if children(e) else e


@given(seeds, st.data())
@settings(max_examples=40, deadline=None)
def test_solve_vectorize_agree(seed, data):
    m = random_acyclic_model(seed)
    I = set(data.draw(st.sets(st.sampled_from(m.variables))))
    b = sample_noise(m.noise, seed, 2000)
    full = dict(zip(m.variables, solve(m, b).T))
    f = vectorize(m, I)
    out = f({v: full[v] for v in f.inputs}, b)
    for v in f.outputs:
        assert np.array_equal(out[v], full[v])


@given(seeds, st.data())
@settings(max_examples=40, deadline=None)
def test_do_idempotent_and_order_free(seed, data):
    m = random_acyclic_model(seed)
    t = data.draw(st.sampled_from(m.treatment_support))
    once = apply_do(m, {"T": t})
    assert apply_do(once, {"T": t}).equations == once.equations
    if m.covariates:
        x = data.draw(st.sampled_from(m.covariates))
        val = data.draw(st.floats(-2, 2))
        assert apply_do(once, {x: val}).equations == apply_do(m, {"T": t, x: val}).equations


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_coupled_worlds_consistency(seed):
    m = random_acyclic_model(seed)
    b = sample_noise(m.noise, seed, 2000)
    base = solve(m, b)
    ti = m.variables.index("T")
    for t in m.treatment_support:
        alt = solve(apply_do(m, {"T": t}), b)
        hit = base[:, ti] == t
        assert np.array_equal(alt[hit], base[hit])


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_flags_ignore_constants(seed):
    m = random_acyclic_model(seed)
    eqs = {v: map_consts(e, lambda c: c * 1.7 + 0.3) for v, e in m.equations.items()}
    m2 = dataclasses.replace(m, equations=eqs)
    assert check_assumptions(m) == check_assumptions(m2)


def discrete_model(seed):
    g = np.random.default_rng(seed)
    ns = NoiseSpace((NoiseSpec("U_T", Bernoulli(float(g.uniform(0.2, 0.8)))),
                     NoiseSpec("U_X", Discrete(((0.0, 0.3), (1.0, 0.3), (2.0, 0.4)))),
                     NoiseSpec("U_Y", Bernoulli(float(g.uniform(0.2, 0.8))))))
    a, b = (float(np.round(v, 2)) for v in g.uniform(-2, 2, 2))
    return make_model(ns, ["T = indicator(U_T + U_X*0.3 > 0.5)", f"X = {a}*T + U_X",
                           f"Y = max(X, {b}) + T*U_Y"])


@given(seeds, st.sampled_from([0, 1]))
@settings(max_examples=30, deadline=None)
def test_exact_abduction_matches_enumeration(seed, xv):
    m = discrete_model(seed)
    atoms = enumerate_noise(m.noise)
    vals = solve(m, NoiseBatch(atoms.atoms, 0, m.noise.space_id))
    x = float(vals[0, 1]) if xv == 0 else float(vals[-1, 1])
    keep = vals[:, 1] == x
    oracle = ExactTable.from_rows(vals[keep][:, [0, 2]], atoms.probs[keep] / atoms.probs[keep].sum())
    out = counterfactual_law(m, {"X": x}, {}, ["T", "Y"], engine="exact")
    assert law_distance(out, oracle)[0] == 0


# expressions ------------------------------------------------------------------------------

@pytest.mark.parametrize("src", ["alpha*T + U_X", "indicator(X1 + U_T > 0)", "Y[T=1] - Y[T=0]",
                                 "min(X, 2) / 4", "X**2", "indicator(T != 1)"])
def test_expression_string_round_trip(src):
    e = parse(src, {"alpha": 1.5})
    assert to_str(parse(to_str(e))) == to_str(e)


@pytest.mark.parametrize("bad", ["X / Y", "X ** -1", "foo(X)", "X +", "X[T=1"])
def test_expression_rejects(bad):
    with pytest.raises(ParseError):
        parse(bad)


def test_indicator_not_equal():
    e = parse("indicator(T != 1)")
    assert evaluate(e, {"T": np.array([0.0, 1.0, 2.0])}, 3).tolist() == [1.0, 0.0, 1.0]


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_equations_print_and_reparse(seed):
    m = random_acyclic_model(seed)
    b = sample_noise(m.noise, seed, 500)
    env = solve_env(m, b)
    for v, e in m.equations.items():
        again = parse(to_str(e))
        assert np.array_equal(evaluate(again, env, 500), evaluate(e, env, 500))
