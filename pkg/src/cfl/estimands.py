"""Treatment-effect estimands on models and RCMs.

Every estimand returns an EstimandReport. Exact and Gaussian-mixture engines
give closed-form values without standard errors; Monte Carlo values carry one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DimensionMismatch, PositivityViolation, ZeroProbabilityEvidence
from .expr import Const, Expr, Ref, fold, substitute
from .inference import conditional_mean, law, resolve_engine
from .laws import Empirical, Engine, GaussianMixture
from .noise import sample_noise
from .rcm import FunctionalRcm, observational, potential_label, warn_theorem_hypotheses
from .scm import ScmModel, outcome_equation_intervention
from .worlds import WorldEval, Worlds, world_ref

GRID_QUANTILES = np.linspace(0.1, 0.9, 9)
PILOT = 100_000


@dataclass
class EstimandReport:
    """Value of an estimand at one covariate point (or unconditional)."""

    name: str
    value: float
    engine: Engine
    standard_error: float | None = None
    x: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "estimand": self.name,
            "x": ";".join(f"{k}={v:.6g}" for k, v in self.x.items()),
            "value": self.value,
            "se": self.standard_error,
            "engine": self.engine.value,
        }


def _model(obj) -> ScmModel:
    if isinstance(obj, ScmModel):
        return obj
    return observational(obj).model


def _as_x(model: ScmModel, x) -> dict:
    if x is None:
        return {}
    if isinstance(x, Mapping):
        return {k: float(v) for k, v in x.items()}
    vals = np.atleast_1d(np.asarray(x, dtype=float))
    if vals.size != len(model.covariates):
        raise DimensionMismatch(f"{vals.size} covariate values for {list(model.covariates)}")
    return dict(zip(model.covariates, vals.tolist()))


def x_grid(model, n_points: int = 9, seed: int = 0, pilot: int = PILOT) -> list:
    """Covariate points at equispaced quantiles (10% to 90%) of each coordinate."""
    model = _model(model)
    if not model.covariates:
        return [{}]
    ev = WorldEval(Worlds(model), sample_noise(model.noise, seed, pilot).values)
    qs = np.linspace(0.1, 0.9, n_points)
    cols = {x: np.quantile(ev.ref(x), qs) for x in model.covariates}
    return [{x: float(cols[x][i]) for x in model.covariates} for i in range(n_points)]


def _diff_report(name, model, x, engine, m1, s1, m0, s0, j=0, **inputs) -> EstimandReport:
    value = float(m1[j] - m0[j])
    se = None if s1 is None else float(np.hypot(s1[j], s0[j]))
    return EstimandReport(name, value, engine, se, dict(x), inputs)


def _single(name, model, x, engine, mean, se, j=0, **inputs) -> EstimandReport:
    return EstimandReport(name, float(mean[j]), engine, None if se is None else float(se[j]), dict(x), inputs)


def cate_rcm(obs, x=None, engine=None, n: int = 1_000_000, seed: int = 0, bandwidth=None,
             levels=(1, 0), outcome: int = 0) -> EstimandReport:
    """``E[Y | X=x, T=t1] - E[Y | X=x, T=t0]``.

    This is the identified CATE of any RCM meeting positivity and
    single-outcome ignorability.

    The Gaussian engine conditions ``Y[T=t, X=x]`` on the evidence, which is
    the same quantity for factual evidence and lets non-affine treatment
    assignments (e.g. an indicator) pass through exactly.

    Raises:
        PositivityViolation: zero mass at (x, t).
    """
    model = _model(obs)
    x = _as_x(model, x)
    engine = resolve_engine(model, engine)
    y = model.outcomes[outcome]
    means = []
    for t in levels:
        ev = {model.treatment: float(t), **x}
        q = Ref(world_ref(y, ev)) if engine is Engine.GAUSSIAN else Ref(y)
        try:
            means.append(conditional_mean(model, [q], ev, engine, n, seed, bandwidth))
        except ZeroProbabilityEvidence as exc:
            raise PositivityViolation(str(exc)) from None
    (m1, s1), (m0, s0) = means
    return _diff_report("cate_rcm", model, x, engine, m1, s1, m0, s0, levels=levels)


def _contrast(model: ScmModel, y: str, extra: Mapping[str, float], levels) -> Expr:
    t1, t0 = levels
    a = Ref(world_ref(y, {model.treatment: t1, **extra}))
    b = Ref(world_ref(y, {model.treatment: t0, **extra}))
    return a - b


def cate_scm(model: ScmModel, x=None, engine=None, n: int = 1_000_000, seed: int = 0, bandwidth=None,
             levels=(1, 0), outcome: int = 0) -> EstimandReport:
    """``E[Y_{T=t1} - Y_{T=t0} | X=x]``: coupled do-interventions, abduction on factual X."""
    x = _as_x(model, x)
    engine = resolve_engine(model, engine)
    q = _contrast(model, model.outcomes[outcome], {}, levels)
    mean, se = conditional_mean(model, [q], x, engine, n, seed, bandwidth)
    return _single("cate_scm", model, x, engine, mean, se, levels=levels)


def direct_effect_scm(model: ScmModel, x=None, engine=None, n: int = 1_000_000, seed: int = 0,
                      levels=(1, 0), outcome: int = 0) -> EstimandReport:
    """``E[Y_{T=t1, X=x} - Y_{T=t0, X=x}]`` under joint interventions on T and X."""
    x = _as_x(model, x)
    engine = resolve_engine(model, engine)
    q = _contrast(model, model.outcomes[outcome], x, levels)
    mean, se = conditional_mean(model, [q], {}, engine, n, seed)
    return _single("direct_effect_scm", model, x, engine, mean, se, levels=levels)


def interventional_cate(model: ScmModel, x=None, engine=None, n: int = 1_000_000, seed: int = 0,
                        bandwidth=None, levels=(1, 0), outcome: int = 0) -> EstimandReport:
    """``E[Y_{T=t1} | X_{T=t1}=x] - E[Y_{T=t0} | X_{T=t0}=x]``: conditioning inside each world."""
    x = _as_x(model, x)
    engine = resolve_engine(model, engine)
    y = model.outcomes[outcome]
    means = []
    for t in levels:
        w = {model.treatment: t}
        ev = {world_ref(k, w): v for k, v in x.items()}
        means.append(conditional_mean(model, [Ref(world_ref(y, w))], ev, engine, n, seed, bandwidth))
    (m1, s1), (m0, s0) = means
    return _diff_report("interventional_cate", model, x, engine, m1, s1, m0, s0, levels=levels)


def theorem1_law(model: ScmModel, t, engine=None, n: int = 100_000, seed: int = 0):
    """Law of ``(T, X, f_Y(t, X, U_Y))`` from the outcome-equation intervention.

    Warns (AssumptionWarning) when a5 or a6 fails, since the law then need
    not match the identified single-outcome law.
    """
    warn_theorem_hypotheses(model)
    mod = outcome_equation_intervention(model, t)
    names = [model.treatment, *model.covariates, *model.outcomes]
    out = law(mod, names, engine=engine, n=n, seed=seed)
    out.labels = (model.treatment, *model.covariates, *(potential_label(y, t) for y in model.outcomes))
    return out


def noise_term(model: ScmModel, outcome: int = 0) -> Expr:
    """The outcome equation with every endogenous reference set to 0."""
    y = model.outcomes[outcome]
    return fold(substitute(model.equations[y], {v: Const(0.0) for v in model.variables}))


def relaxed_noise_cate_gap(model: ScmModel, x=None, engine=None, n: int = 1_000_000, seed: int = 0,
                           bandwidth=None, levels=(1, 0), outcome: int = 0) -> EstimandReport:
    """``E[N_Y | X=x, T=t1] - E[N_Y | X=x, T=t0]`` for the noise term ``N_Y`` of the outcome.

    With an additive noise term the identified CATE is the direct coefficient
    plus this gap; it vanishes when the outcome noise is independent of (T, X).
    """
    x = _as_x(model, x)
    engine = resolve_engine(model, engine)
    term = noise_term(model, outcome)
    means = []
    for t in levels:
        ev = {model.treatment: float(t), **x}
        try:
            means.append(conditional_mean(model, [term], ev, engine, n, seed, bandwidth))
        except ZeroProbabilityEvidence as exc:
            raise PositivityViolation(str(exc)) from None
    (m1, s1), (m0, s0) = means
    return _diff_report("relaxed_noise_cate_gap", model, x, engine, m1, s1, m0, s0, levels=levels)


def potential_law(rcm: FunctionalRcm, t, engine=None, n: int = 100_000, seed: int = 0):
    """Marginal law of ``Y_t`` (all outcomes) of an RCM."""
    out = law(rcm.base, list(rcm.potentials[int(t)]), engine=engine, n=n, seed=seed)
    out.labels = tuple(potential_label(y, t) for y in rcm.base.outcomes)
    return out


def ate(law1, law0, name: str = "ate") -> EstimandReport:
    """Difference of means of two potential-outcome laws (no coupling needed).

    The outcome is the last coordinate, so identified laws over (T, X, Y_t)
    and marginal laws of Y_t are both accepted.
    """
    if law1.dim != law0.dim:
        raise DimensionMismatch(f"dimension {law1.dim} vs {law0.dim}")
    value = float(np.asarray(law1.mean())[-1] - np.asarray(law0.mean())[-1])
    se = None
    if isinstance(law1, Empirical) or isinstance(law0, Empirical):
        s = [float(np.asarray(l.se())[-1]) if isinstance(l, Empirical) else 0.0 for l in (law1, law0)]
        se = float(np.hypot(*s))
    if se is not None:
        engine = Engine.MONTE_CARLO
    else:
        engine = Engine.GAUSSIAN if isinstance(law1, GaussianMixture) else Engine.EXACT
    return EstimandReport(name, value, engine, se)
