"""Seeded generators of random models for property checks."""

from __future__ import annotations

import numpy as np

from .expr import Add, Const, Expr, Indicator, Max, Min, Mul, Ref, Table, cf_name
from .noise import Bernoulli, Discrete, Gaussian, NoiseSpace, NoiseSpec, Uniform, rng
from .rcm import FunctionalRcm, Provenance
from .scm import ScmModel


def _coef(gen, lo=0.3, hi=1.5) -> float:
    return float(np.round(gen.choice([-1, 1]) * gen.uniform(lo, hi), 3))


def _lin(gen, terms, const=0.0) -> Expr:
    parts = [Mul((Const(_coef(gen)), Ref(t))) for t in terms]
    if const:
        parts.append(Const(const))
    if not parts:
        return Const(0.0)
    return parts[0] if len(parts) == 1 else Add(tuple(parts))


def random_linear_model(seed: int, a7: bool = True, n_cov: int | None = None) -> ScmModel:
    """Random affine model meeting positivity, a5 and a6 (and a7 when asked).

    The treatment is an indicator of discrete covariates plus a discrete
    noise, so it is constant within each atom and every level keeps positive
    probability at every covariate value. Covariates mix Bernoulli-driven
    and Gaussian coordinates. Without a7, at least one covariate depends on
    T and the outcome depends on it.
    """
    gen = rng(seed, 9001)
    k = int(n_cov or gen.integers(1, 3))
    specs, eqs, covs = [], {}, []
    disc = [f"X{i + 1}" for i in range(k) if i == 0 or gen.random() < 0.4]
    post = set()
    if not a7:
        post = {f"X{k + 1}"}
        k += 1
    specs.append(NoiseSpec("U_T", Discrete(((0.0, 0.3), (0.45, 0.3), (1.0, 0.4)))))
    for i in range(k):
        x = f"X{i + 1}"
        covs.append(x)
        u = f"U_{x}"
        if x in disc:
            specs.append(NoiseSpec(u, Bernoulli(float(np.round(gen.uniform(0.3, 0.7), 2)))))
            eqs[x] = Ref(u)
            continue
        specs.append(NoiseSpec(u, Gaussian(float(np.round(gen.normal(0, 0.5), 2)),
                                           float(np.round(gen.uniform(0.5, 1.5), 2)))))
        parents = [c for c in covs[:-1] if c not in post and gen.random() < 0.5]
        if x in post:
            parents = parents + ["T"]
        eqs[x] = Add((_lin(gen, parents), Ref(u))) if parents else Ref(u)
    # Total weight below 0.5 keeps U_T=0 -> T=0 and U_T=1 -> T=1 at every X.
    w = {x: float(np.round(gen.uniform(0.05, 0.45 / len(disc)), 3)) for x in disc}
    eqs["T"] = Indicator(Add((*(Mul((Const(w[x]), Ref(x))) for x in disc), Ref("U_T"), Const(-0.5))), ">")
    specs.append(NoiseSpec("U_Y", Gaussian(0.0, float(np.round(gen.uniform(0.5, 2.0), 2)))))
    y_terms = [Mul((Const(_coef(gen)), Ref("T")))]
    for x in covs:
        if x in post or gen.random() < 0.8:
            y_terms.append(Mul((Const(_coef(gen)), Ref(x))))
    if gen.random() < 0.3:
        y_terms.append(Mul((Const(_coef(gen)), Ref("T"), Ref(covs[0]))))
    eqs["Y"] = Add((*y_terms, Ref("U_Y")))
    variables = ["T", *covs, "Y"] if a7 else [*[c for c in covs if c not in post], "T",
                                              *[c for c in covs if c in post], "Y"]
    return ScmModel(tuple(variables), {v: eqs[v] for v in variables}, NoiseSpace(tuple(specs)), "T",
                    tuple(covs), ("Y",), (0, 1))


def _rand_expr(gen, parents, noises, depth=2) -> Expr:
    """Random expression over ``parents`` and ``noises`` (nonlinear nodes included)."""
    pool = list(parents) + list(noises)
    if depth == 0 or not pool or gen.random() < 0.3:
        if pool and gen.random() < 0.85:
            return Ref(str(gen.choice(pool)))
        return Const(float(np.round(gen.normal(), 2)))
    kind = gen.integers(0, 6)
    a = _rand_expr(gen, parents, noises, depth - 1)
    b = _rand_expr(gen, parents, noises, depth - 1)
    if kind == 0:
        return Add((a, b))
    if kind == 1:
        return Mul((Const(_coef(gen)), a))
    if kind == 2:
        return Mul((a, b))
    if kind == 3:
        return Min((a, b))
    if kind == 4:
        return Max((a, Mul((Const(-1.0), b))))
    return Indicator(Add((a, Const(float(np.round(gen.normal(0, 0.5), 2))))), str(gen.choice([">", ">="])))


def _rand_noise(gen, name) -> NoiseSpec:
    kind = gen.integers(0, 4)
    if kind == 0:
        return NoiseSpec(name, Bernoulli(float(np.round(gen.uniform(0.2, 0.8), 2))))
    if kind == 1:
        return NoiseSpec(name, Discrete(((-1.0, 0.25), (0.0, 0.5), (2.0, 0.25))))
    if kind == 2:
        return NoiseSpec(name, Uniform(-1.0, 1.0))
    return NoiseSpec(name, Gaussian(0.0, 1.0))


def random_acyclic_model(seed: int, max_vars: int = 8) -> ScmModel:
    """Random acyclic model with nonlinear equations and shared noises.

    Variable order is random, so covariates may sit downstream of the
    treatment or of outcomes. The treatment takes values in {0, 1} or
    {0, 1, 2} as a sum of indicators.
    """
    gen = rng(seed, 9002)
    n_vars = int(gen.integers(3, max_vars + 1))
    n_out = int(gen.integers(1, max(2, n_vars - 2)))
    n_cov = n_vars - 1 - n_out
    names = ["T", *[f"X{i + 1}" for i in range(n_cov)], *[f"Y{i + 1}" for i in range(n_out)]]
    order = [names[i] for i in gen.permutation(n_vars)]
    noises = [_rand_noise(gen, f"U{i + 1}") for i in range(int(gen.integers(2, n_vars + 2)))]
    noise_names = [s.name for s in noises]
    levels = 2 if gen.random() < 0.7 else 3
    eqs = {}
    for i, v in enumerate(order):
        parents = [p for p in order[:i] if gen.random() < 0.6]
        own = [str(u) for u in gen.choice(noise_names, size=int(gen.integers(1, 3)), replace=False)]
        if v == "T":
            terms = [Indicator(Add((_rand_expr(gen, parents, own), Const(float(np.round(gen.normal(0, 0.3), 2))))), ">")
                     for _ in range(levels - 1)]
            eqs[v] = terms[0] if len(terms) == 1 else Add(tuple(terms))
        else:
            eqs[v] = Add((_rand_expr(gen, parents, own), Ref(own[0])))
    covs = tuple(n for n in names if n.startswith("X"))
    outs = tuple(n for n in names if n.startswith("Y"))
    return ScmModel(tuple(order), eqs, NoiseSpace(tuple(noises)), "T", covs, outs, tuple(range(levels)))


def random_finite_rcm(seed: int, max_atoms: int = 64) -> FunctionalRcm:
    """Random RCM on a finite noise space with at most ``max_atoms`` atoms.

    Potential outcomes are arbitrary functions of the noises and factual
    variables; about half are consistent by construction.
    """
    gen = rng(seed, 9003)
    specs, size = [], 1
    while True:
        kind = gen.integers(0, 3)
        if kind == 0:
            spec = NoiseSpec(f"U{len(specs) + 1}", Bernoulli(float(np.round(gen.uniform(0.2, 0.8), 2))))
            k = 2
        elif kind == 1:
            spec = NoiseSpec(f"U{len(specs) + 1}", Discrete(((0.0, 0.2), (1.0, 0.3), (2.0, 0.5))))
            k = 3
        else:
            spec = NoiseSpec(f"U{len(specs) + 1}", Discrete(((-1.5, 0.25), (0.5, 0.25), (1.0, 0.25), (3.0, 0.25))))
            k = 4
        if size * k > max_atoms:
            break
        specs.append(spec)
        size *= k
        if len(specs) >= 2 and gen.random() < 0.4:
            break
    space = NoiseSpace(tuple(specs))
    un = list(space.names)
    n_cov = int(gen.integers(1, 3))
    covs = [f"X{i + 1}" for i in range(n_cov)]
    eqs = {"T": Indicator(Add((_rand_expr(gen, [], un), Const(-0.2))), ">")}
    for i, x in enumerate(covs):
        if gen.random() < 0.5:
            u = space[str(gen.choice(un))]
            entries = tuple(((float(v),), float(np.round(gen.normal(), 2))) for v, _ in u.dist.support())
            eqs[x] = Add((Table((Ref(u.name),), entries), Mul((Const(_coef(gen)), Ref("T")))))
        else:
            eqs[x] = Add((_rand_expr(gen, ["T", *covs[:i]], un), Ref(str(gen.choice(un)))))
    eqs["Y"] = _rand_expr(gen, ["T", *covs], un, depth=3)
    base = ScmModel(("T", *covs, "Y"), eqs, space, "T", tuple(covs), ("Y",), (0, 1))
    consistent = gen.random() < 0.5
    pots = {}
    for t in (0, 1):
        other = _rand_expr(gen, ["T", *covs, cf_name("Y", "T", t)], un, depth=3)
        if consistent:
            same = Indicator(Add((Ref("T"), Const(-float(t)))), "==")
            diff = Indicator(Add((Ref("T"), Const(-float(t)))), "!=")
            pots[t] = (Add((Mul((same, Ref("Y"))), Mul((diff, other)))),)
        else:
            pots[t] = (other,)
    return FunctionalRcm(base, pots, Provenance.USER, f"random-{seed}")

