"""Rubin causal models realized as maps on a shared noise space.

A FunctionalRcm keeps the factual (T, X, Y) equations of a base model and adds
one expression per treatment level and outcome for the potential outcomes.
Potential-outcome expressions may use noises, factual variables and world
references such as ``Y[T=1]``, all evaluated on the same noise draw.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np

from . import linear
from .energy import holm, permutation_test
from .errors import (
    EngineInapplicable,
    ParseError,
    PositivityViolation,
    ZeroProbabilityEvidence,
)
from .expr import Ref, Table, cf_name, parse, parse_equation
from .inference import law, resolve_engine
from .laws import Empirical, Engine, ExactTable, GaussianMixture, gm_discrepancy, tv_distance
from .noise import Discrete, NoiseSpace, NoiseSpec, enumerate_noise, sample_noise
from .scm import (
    ScmModel,
    check_assumptions,
    outcome_equation_intervention,
    vectorize,
    warn_unless,
)
from .strata import Binning, cells, default_bins
from .worlds import WorldEval, Worlds

log = logging.getLogger(__name__)

EXACT_EPS = 1e-12
MC_EPS = 1e-3
LEVEL = 0.01


class Provenance(str, Enum):
    ENTAILED = "entailed"
    OUTCOME_EQUATION = "outcome_equation"
    USER = "user"


def potential_label(outcome: str, t) -> str:
    """Column name of the potential outcome ``outcome`` at level ``t``."""
    t = int(t)
    return f"{outcome}_{t}" if outcome[-1].isdigit() else f"{outcome}{t}"


@dataclass(frozen=True, eq=False)
class FunctionalRcm:
    """(T, X, (Y_t)) as functions of one noise draw.

    Attributes:
        base: model supplying the noise space and the factual T, X, Y.
        potentials: level -> tuple of expressions, one per outcome.
        provenance: how the potential outcomes were built.
    """

    base: ScmModel
    potentials: Mapping[int, tuple]
    provenance: Provenance = Provenance.USER
    name: str = ""

    def __post_init__(self):
        pots = {int(t): tuple(v) for t, v in dict(self.potentials).items()}
        if sorted(pots) != list(self.base.treatment_support):
            raise ParseError(f"potential outcomes needed for levels {list(self.base.treatment_support)}")
        for t, es in pots.items():
            if len(es) != len(self.base.outcomes):
                raise ParseError(f"level {t}: {len(es)} expressions for {len(self.base.outcomes)} outcomes")
        object.__setattr__(self, "potentials", pots)
        worlds = Worlds(self.base)
        for es in pots.values():
            for e in es:
                worlds.check(e)

    @property
    def noise(self) -> NoiseSpace:
        return self.base.noise

    @property
    def treatment_support(self) -> tuple:
        return self.base.treatment_support

    @property
    def potential_labels(self) -> list:
        return [potential_label(y, t) for t in self.treatment_support for y in self.base.outcomes]

    @property
    def columns(self) -> list:
        """Labels of the full vector (T, X, (Y_t))."""
        return [self.base.treatment, *self.base.covariates, *self.potential_labels]

    def exprs(self, t=None) -> list:
        """Expressions for (T, X, Y_t) or, with ``t=None``, for (T, X, all Y_t)."""
        head = [Ref(self.base.treatment), *(Ref(x) for x in self.base.covariates)]
        levels = self.treatment_support if t is None else (int(t),)
        return head + [e for s in levels for e in self.potentials[s]]

    def evaluate(self, values) -> dict:
        """Arrays ``T``, ``X`` (n, p), ``Y`` (n, d) and ``pot`` (level -> (n, d))."""
        if hasattr(values, "values"):
            values = values.values
        ev = WorldEval(Worlds(self.base), values)
        b = self.base
        out = {
            "T": ev.ref(b.treatment),
            "X": np.column_stack([ev.ref(x) for x in b.covariates]) if b.covariates else np.empty((ev.n, 0)),
            "Y": np.column_stack([ev.ref(y) for y in b.outcomes]),
            "pot": {t: np.column_stack([ev.expr(e) for e in es]) for t, es in self.potentials.items()},
        }
        return out

    def matrix(self, values) -> np.ndarray:
        """Rows of (T, X, (Y_t)) in ``columns`` order."""
        d = self.evaluate(values)
        return np.column_stack([d["T"], d["X"], *(d["pot"][t] for t in self.treatment_support)])


@dataclass(frozen=True)
class ObservationalView:
    """The factual (T, X, Y) vector of a model or RCM."""

    model: ScmModel

    @property
    def noise(self) -> NoiseSpace:
        return self.model.noise


def observational(obj) -> ObservationalView:
    if isinstance(obj, ObservationalView):
        return obj
    if isinstance(obj, FunctionalRcm):
        return ObservationalView(obj.base)
    if isinstance(obj, ScmModel):
        return ObservationalView(obj)
    raise TypeError(f"cannot take the observational view of {type(obj).__name__}")


@dataclass
class CheckReport:
    """Result of an assumption check; ``holds`` iff ``statistic <= threshold``."""

    holds: bool
    statistic: float
    threshold: float
    method: Engine
    witnesses: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.holds != (self.statistic <= self.threshold):
            raise AssertionError("CheckReport.holds must equal statistic <= threshold")


def _report(statistic, threshold, method, witnesses=(), **detail) -> CheckReport:
    statistic, threshold = float(statistic), float(threshold)
    return CheckReport(statistic <= threshold, statistic, threshold, method, list(witnesses), detail)


# construction ---------------------------------------------------------------

def entailed_rcm(model: ScmModel) -> FunctionalRcm:
    """Potential outcomes ``Y_t = Y[T=t]`` from coupled do-interventions."""
    model.order
    pots = {t: tuple(Ref(cf_name(y, model.treatment, t)) for y in model.outcomes)
            for t in model.treatment_support}
    return FunctionalRcm(model, pots, Provenance.ENTAILED, "entailed")


def outcome_equation_rcm(model: ScmModel) -> FunctionalRcm:
    """Potential outcomes ``f_Y(t, X, U_Y)``: T fixed only inside the outcome equations."""
    pre = {model.treatment, *model.covariates}
    pots = {}
    for t in model.treatment_support:
        sym = vectorize(outcome_equation_intervention(model, t), pre).symbolic()
        pots[t] = tuple(sym[y] for y in model.outcomes)
    return FunctionalRcm(model, pots, Provenance.OUTCOME_EQUATION, "outcome_equation")


def _match_potential(lhs: str, model: ScmModel):
    for y in model.outcomes:
        m = re.fullmatch(rf"{re.escape(y)}_?(\d+)", lhs)
        if m:
            return y, int(m.group(1))
    raise ParseError(f"cannot read {lhs!r} as a potential outcome of {list(model.outcomes)}")


def user_rcm(base: ScmModel, potentials, params: Mapping[str, float] | None = None,
             name: str = "user") -> FunctionalRcm:
    """RCM with user-given potential outcomes on the noise space of ``base``.

    Args:
        base: supplies the noise space and the factual T, X, Y.
        potentials: ``"Y0 = expr"`` strings, or a mapping level -> expression
            (string or Expr) or level -> {outcome: expression}.
        params: constants substituted while parsing.

    Consistency is not assumed; use :func:`check_consistency`.
    """
    table = {t: {} for t in base.treatment_support}
    if isinstance(potentials, Mapping):
        for t, v in potentials.items():
            t = int(t)
            if t not in table:
                raise ParseError(f"level {t} outside treatment support")
            if isinstance(v, Mapping):
                for y, e in v.items():
                    table[t][y] = parse(e, params) if isinstance(e, str) else e
            else:
                if len(base.outcomes) != 1:
                    raise ParseError("use level -> {outcome: expr} with several outcomes")
                table[t][base.outcomes[0]] = parse(v, params) if isinstance(v, str) else v
    else:
        for src in potentials:
            lhs, e = parse_equation(src, params)
            y, t = _match_potential(lhs, base)
            if t not in table:
                raise ParseError(f"level {t} outside treatment support")
            table[t][y] = e
    pots = {}
    for t, d in table.items():
        missing = [y for y in base.outcomes if y not in d]
        if missing:
            raise ParseError(f"missing potential outcome {potential_label(missing[0], t)}")
        pots[t] = tuple(d[y] for y in base.outcomes)
    return FunctionalRcm(base, pots, Provenance.USER, name)


# checks -----------------------------------------------------------------------

def _check_engine(space: NoiseSpace, engine) -> Engine:
    if engine is None:
        return Engine.EXACT if space.is_enumerable else Engine.MONTE_CARLO
    engine = Engine(engine) if not isinstance(engine, Engine) else engine
    if engine is Engine.EXACT and not space.is_enumerable:
        raise EngineInapplicable("exact engine needs an enumerable noise space")
    return engine


def check_consistency(rcm: FunctionalRcm, engine=None, budget: int = 10_000, seed: int = 0,
                      max_witnesses: int = 5) -> CheckReport:
    """Check ``Y == sum_t 1{T=t} Y_t`` on every atom or on ``budget`` draws."""
    engine = _check_engine(rcm.noise, engine)
    if engine is Engine.EXACT:
        values = enumerate_noise(rcm.noise).atoms
    else:
        engine = Engine.MONTE_CARLO
        values = sample_noise(rcm.noise, seed, budget).values
    d = rcm.evaluate(values)
    y_t = np.zeros_like(d["Y"])
    for t, pot in d["pot"].items():
        y_t = np.where((d["T"] == t)[:, None], pot, y_t)
    gap = np.abs(d["Y"] - y_t).max(axis=1)
    bad = np.flatnonzero(gap > 0)[:max_witnesses]
    witnesses = [{"draw": int(i), "noise": values[i].tolist(), "T": float(d["T"][i]),
                  "gap": float(gap[i])} for i in bad]
    return _report(gap.max(initial=0.0), 0.0, engine, witnesses)


def propensity(obs, x: Mapping[str, float], engine=None, budget: int = 100_000, seed: int = 0) -> dict:
    """P(T=t | X=x) per level (exact, Gaussian-mixture, or kernel-window Monte Carlo)."""
    model = observational(obs).model
    engine = resolve_engine(model, engine)
    if engine is Engine.GAUSSIAN:
        return linear.propensity(model, x)
    out = law(model, [model.treatment], x, engine, budget, seed)
    t = out.atoms[:, 0] if isinstance(out, ExactTable) else out.samples[:, 0]
    p = out.probs if isinstance(out, ExactTable) else np.full(len(t), 1.0 / len(t))
    return {s: float(p[t == s].sum()) for s in model.treatment_support}


def check_positivity(obs, engine=None, budget: int = 100_000, seed: int = 0,
                     eps: float | None = None, grid=None) -> CheckReport:
    """Every level has positive probability given every covariate value.

    Exact: all covariate atoms of positive mass. Gaussian: closed-form
    propensities on a covariate grid. Monte Carlo: empirical propensities in
    equal-mass covariate bins, against ``eps`` (default 1e-3).
    """
    model = observational(obs).model
    engine = resolve_engine(model, engine)
    levels = model.treatment_support
    if engine is Engine.EXACT:
        eps = EXACT_EPS if eps is None else eps
        tab = law(model, [model.treatment, *model.covariates], engine=engine)
        xs = tab.atoms[:, 1:]
        keys, inv = np.unique(xs, axis=0, return_inverse=True)
        inv = inv.ravel()
        mins, witnesses = [], []
        for k in range(len(keys)):
            rows = inv == k
            px = tab.probs[rows].sum()
            props = [tab.probs[rows & (tab.atoms[:, 0] == t)].sum() / px for t in levels]
            mins.append(min(props))
            if min(props) < eps:
                witnesses.append({"x": keys[k].tolist(), "propensity": props})
        return _report(-min(mins), -eps, engine, witnesses)
    if engine is Engine.GAUSSIAN:
        eps = EXACT_EPS if eps is None else eps
        if grid is None:
            from .estimands import x_grid

            grid = x_grid(model, seed=seed)
        mins, witnesses = [], []
        for x in grid:
            try:
                props = linear.propensity(model, x)
            except ZeroProbabilityEvidence:
                continue
            mins.append(min(props.values()))
            if mins[-1] < eps:
                witnesses.append({"x": dict(x), "propensity": props})
        return _report(-min(mins), -eps, engine, witnesses)
    eps = MC_EPS if eps is None else eps
    d = _sample_obs(model, budget, seed)
    ids = cells(d["X"])
    mins, witnesses = [], []
    for c in np.unique(ids):
        rows = ids == c
        props = [float(np.mean(d["T"][rows] == t)) for t in levels]
        mins.append(min(props))
        if mins[-1] < eps:
            witnesses.append({"cell": int(c), "x_mean": d["X"][rows].mean(axis=0).tolist(),
                              "propensity": props, "count": int(rows.sum())})
    return _report(-min(mins), -eps, engine, witnesses, cells=int(ids.max() + 1))


def _sample_obs(model: ScmModel, n: int, seed: int) -> dict:
    ev = WorldEval(Worlds(model), sample_noise(model.noise, seed, n).values)
    return {
        "T": ev.ref(model.treatment),
        "X": np.column_stack([ev.ref(x) for x in model.covariates]) if model.covariates else np.empty((n, 0)),
        "Y": np.column_stack([ev.ref(y) for y in model.outcomes]),
    }


def _targets(rcm: FunctionalRcm, mode: str) -> list:
    """Groups of potential-outcome expressions whose conditional law is compared."""
    if mode == "single":
        return [(t, list(rcm.potentials[t])) for t in rcm.treatment_support]
    if mode == "cross":
        return [("all", [e for t in rcm.treatment_support for e in rcm.potentials[t]])]
    raise ValueError(f"mode must be 'single' or 'cross', got {mode!r}")


def check_ignorability(rcm: FunctionalRcm, mode: str = "single", engine=None, budget: int = 100_000,
                       seed: int = 0, level: float = LEVEL, n_perm: int = 200, grid=None) -> CheckReport:
    """Potential outcomes independent of T given X (per level, or jointly).

    Exact: conditional laws per covariate atom compared in total variation.
    Gaussian: conditional mixtures compared on a covariate grid.
    Monte Carlo: stratified energy permutation test, labels permuted inside
    equal-mass covariate bins; in single mode the per-level p-values are
    Holm-adjusted.
    """
    base = rcm.base
    engine = resolve_engine(base, engine)
    try:
        pos = check_positivity(rcm, engine, min(budget, 100_000), seed, grid=grid)
    except EngineInapplicable:
        pos = None
    if pos is not None:
        warn_unless(pos.holds, "positivity fails; ignorability checks may be meaningless")
    targets = _targets(rcm, mode)
    levels = base.treatment_support
    if engine is Engine.EXACT:
        worst, witnesses = 0.0, []
        for key, exprs in targets:
            tab = law(base, [Ref(base.treatment), *(Ref(x) for x in base.covariates), *exprs], engine=engine)
            p = len(base.covariates)
            xs = tab.atoms[:, 1:1 + p]
            keys, inv = np.unique(xs, axis=0, return_inverse=True)
            inv = inv.ravel()
            for k in range(len(keys)):
                conds = []
                for t in levels:
                    rows = (inv == k) & (tab.atoms[:, 0] == t)
                    if tab.probs[rows].sum() > 0:
                        conds.append(ExactTable.from_rows(tab.atoms[rows, 1 + p:],
                                                          tab.probs[rows] / tab.probs[rows].sum()))
                for i in range(len(conds)):
                    for j in range(i + 1, len(conds)):
                        tv = tv_distance(conds[i], conds[j])
                        worst = max(worst, tv)
                        if tv > EXACT_EPS:
                            witnesses.append({"target": key, "x": keys[k].tolist(), "tv": tv})
        return _report(worst, EXACT_EPS, engine, witnesses, mode=mode)
    if engine is Engine.GAUSSIAN:
        if grid is None:
            from .estimands import x_grid

            grid = x_grid(base, seed=seed)
        worlds = Worlds(base)
        worst, witnesses = 0.0, []
        for key, exprs in targets:
            for x in grid:
                conds = []
                for t in levels:
                    try:
                        conds.append(linear.conditional_law(base, {base.treatment: t, **x}, exprs,
                                                            worlds=worlds))
                    except ZeroProbabilityEvidence:
                        continue
                for i in range(len(conds)):
                    for j in range(i + 1, len(conds)):
                        s = gm_discrepancy(conds[i], conds[j])
                        worst = max(worst, s)
                        if s > 1e-9:
                            witnesses.append({"target": key, "x": dict(x), "discrepancy": s})
        return _report(worst, 1e-9, engine, witnesses, mode=mode)
    values = sample_noise(base.noise, seed, budget).values
    d = rcm.evaluate(values)
    ev = WorldEval(Worlds(base), values)
    ids = cells(d["X"])
    pvals, stats, results = [], [], {}
    for i, (key, exprs) in enumerate(targets):
        y = np.column_stack([ev.expr(e) for e in exprs])
        res = permutation_test(y, d["T"], ids, n_perm=n_perm, seed=seed + 1000 * i, level=level)
        pvals.append(res.p_value)
        results[key] = res
    adj = holm(pvals)
    p_min = float(adj.min())
    witnesses = []
    for (key, _), res, pa in zip(targets, results.values(), adj):
        if pa < level:
            worst = np.argsort(res.strata_p)[:3]
            witnesses.append({"target": key, "p_adjusted": float(pa),
                              "cells": [int(res.strata_ids[w]) for w in worst],
                              "cell_p": [res.strata_p[w] for w in worst]})
    return _report(1.0 - p_min, 1.0 - level, engine, witnesses, mode=mode,
                   p_values=dict(zip([k for k, _ in targets], [float(p) for p in adj])),
                   positivity=None if pos is None else pos.holds)


# identification -----------------------------------------------------------------

def identify_single_outcome(obs, t, engine=None, n: int = 100_000, seed: int = 0, n_bins=None):
    """Law of (T, X, Y_t) forced by positivity and single-outcome ignorability.

    Mixes ``L(Y | X=x, T=t)`` over ``L(T, X)``. Exact: reweighting of the
    joint table. Gaussian: affine conditional of Y given X within the T=t
    class. Monte Carlo: Y resampled from the (covariate bin, T=t) stratum and
    shifted along the within-cell linear trend in X.

    Raises:
        PositivityViolation: some covariate value has no T=t mass.
    """
    model = observational(obs).model
    t = int(t)
    engine = resolve_engine(model, engine)
    p = len(model.covariates)
    labels = [model.treatment, *model.covariates, *(potential_label(y, t) for y in model.outcomes)]
    names = [model.treatment, *model.covariates, *model.outcomes]
    if engine is Engine.EXACT:
        tab = law(model, names, engine=engine)
        keys, inv = np.unique(tab.atoms[:, 1:1 + p], axis=0, return_inverse=True)
        inv = inv.ravel()
        rows, probs = [], []
        for k in range(len(keys)):
            sel = inv == k
            cond = sel & (tab.atoms[:, 0] == t)
            if tab.probs[cond].sum() <= 0:
                raise PositivityViolation(f"no mass at T={t} for X={keys[k].tolist()}")
            py = tab.probs[cond] / tab.probs[cond].sum()
            ys = tab.atoms[cond, 1 + p:]
            for s in levels_present(tab, sel):
                pts = tab.probs[sel & (tab.atoms[:, 0] == s)].sum()
                for yv, pv in zip(ys, py):
                    rows.append(np.r_[s, keys[k], yv])
                    probs.append(pts * pv)
        return ExactTable.from_rows(np.array(rows), np.array(probs), labels)
    if engine is Engine.GAUSSIAN:
        return _identify_gaussian(model, t, labels)
    d = _sample_obs(model, n, seed)
    binning = _donor_binning(d, t, n_bins)
    ids = binning.ids(d["X"])
    pool = _donor_pool(model, binning, ids, t, n, seed)
    gen = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7102,)))
    yt = np.empty_like(d["Y"])
    for c in np.unique(ids):
        members = np.flatnonzero(ids == c)
        xd, yd = pool.get(c, (np.empty((0, p)), np.empty((0, yt.shape[1]))))
        if yd.shape[0] == 0:
            raise PositivityViolation(f"covariate bin {int(c)} has no draw with T={t}")
        if yd.shape[0] < members.size:
            log.debug("bin %d: %d donors for %d receivers, reusing donors", c, yd.shape[0], members.size)
            pick = gen.integers(0, yd.shape[0], members.size)
            xd, yd = xd[pick], yd[pick]
        xd, yd = xd[:members.size], yd[:members.size]
        yt[members] = yd
        if p and members.size > p + 1:
            # shift each donor along the within-cell linear trend to the receiver's x
            B = np.linalg.lstsq(np.c_[np.ones(members.size), xd - xd.mean(axis=0)], yd, rcond=None)[0][1:]
            yt[members] += (d["X"][members] - xd) @ B
    samples = np.column_stack([d["T"], d["X"], yt])
    return Empirical(samples, labels, seed, f"stratum donors (within-cell linear shift) n={n}")


POOL_ROUNDS = 64


def _donor_binning(d, t, n_bins=None) -> Binning:
    """Bins in which every cell has a T=t draw, coarsening continuous bins as needed.

    Discrete coordinates stay binned by value, so a covariate value with no
    T=t draw is reported rather than merged away.
    """
    n, p = d["X"].shape
    k0 = n_bins or default_bins(n, max(p, 1))
    for k in range(k0, 0, -1):
        binning = Binning(d["X"], k, value_cap=k0)
        ids = binning.ids(d["X"])
        has = np.isin(ids, ids[d["T"] == t])
        if has.all():
            if k < k0:
                log.debug("coarsened covariate bins from %d to %d for T=%s", k0, k, t)
            return binning
    raise PositivityViolation(f"covariate value {d['X'][~has][0].tolist()} has no draw with T={t}")


def _donor_pool(model, binning, ids, t, n, seed) -> dict:
    """Fresh T=t draws per cell, at least as many as the cell has receivers.

    Donors come from independent noise draws, so every receiver gets a
    distinct donor and the identified sample stays i.i.d.
    """
    need = dict(zip(*np.unique(ids, return_counts=True)))
    got: dict = {}
    streams = np.random.SeedSequence(seed, spawn_key=(7101,)).spawn(POOL_ROUNDS)
    for r, ss in enumerate(streams):
        d = _sample_obs(model, n, int(ss.generate_state(1)[0]))
        keep = d["T"] == t
        cid = binning.ids(d["X"][keep])
        for c in need:
            sel = cid == c
            if sel.any():
                xs, ys = got.get(c, (np.empty((0, d["X"].shape[1])), np.empty((0, d["Y"].shape[1]))))
                got[c] = (np.r_[xs, d["X"][keep][sel]], np.r_[ys, d["Y"][keep][sel]])
        if all(c in got and got[c][1].shape[0] >= k for c, k in need.items()):
            break
    return got


def levels_present(tab: ExactTable, sel) -> list:
    return sorted({float(v) for v in tab.atoms[sel & (tab.probs > 0), 0]})


def _identify_gaussian(model: ScmModel, t: int, labels) -> GaussianMixture:
    system = linear.LinearSystem(model.noise)
    worlds = Worlds(model)
    p = len(model.covariates)
    names = [*model.covariates, *model.outcomes]
    by_level = {s: [] for s in model.treatment_support}
    for atom, prob in system.atoms():
        E = linear.FormEvaluator(system, worlds, atom)
        try:
            tf = E.var(model.treatment)
            forms = [E.var(v) for v in names]
        except linear.NonLinear as exc:
            raise EngineInapplicable(f"identification needs an atom-wise affine model: {exc}") from None
        if not tf.is_const:
            raise EngineInapplicable("treatment varies within an atom of the discrete noises")
        A = np.array([f.coef for f in forms]).reshape(len(forms), system.m)
        if np.any(A[:, ~system.gaussian] != 0):
            raise EngineInapplicable("covariates or outcomes depend on a non-Gaussian continuous noise")
        mean = np.array([f.const for f in forms]) + A @ system.mu
        cov = (A * system.var) @ A.T
        by_level[int(round(tf.const))].append((prob, mean, cov))
    if not by_level[t]:
        raise PositivityViolation(f"P(T={t}) = 0")
    # Covariate coordinates with zero variance are discrete; group by their values.
    disc = None
    for comps in by_level.values():
        for _, _, cov in comps:
            z = np.diag(cov)[:p] <= 1e-14
            if disc is not None and np.any(z != disc):
                raise EngineInapplicable("covariates mix discrete and continuous parts across atoms")
            disc = z
    cont = np.flatnonzero(~disc)
    key = lambda mean: tuple(np.round(mean[:p][disc], 12).tolist())
    groups = {}
    for prob, mean, cov in by_level[t]:
        groups.setdefault(key(mean), []).append((prob, mean, cov))
    fits = {}
    for k, comps in groups.items():
        g = GaussianMixture(*map(np.array, zip(*comps))).canonical()
        if len(g.weights) != 1:
            raise EngineInapplicable("Y given X within the treated class is a mixture; use the exact or mc engine")
        m, S = g.means[0], g.covs[0]
        Sxx, Sxy = S[np.ix_(cont, cont)], S[cont, p:]
        if cont.size and np.linalg.matrix_rank(Sxx) < cont.size:
            raise EngineInapplicable("singular covariate covariance within the treated class")
        B = np.linalg.solve(Sxx, Sxy).T if cont.size else np.zeros((len(model.outcomes), 0))
        fits[k] = (m, B, S[p:, p:] - B @ Sxy)
    k_dim = 1 + p + len(model.outcomes)
    weights, means, covs = [], [], []
    for s, comps in by_level.items():
        for prob, mean, cov in comps:
            if key(mean) not in fits:
                raise PositivityViolation(f"no mass at T={t} for discrete covariates {key(mean)}")
            m, B, resid = fits[key(mean)]
            mx, Cxx = mean[:p], cov[:p, :p]
            Cxy = Cxx[:, cont] @ B.T
            C = np.zeros((k_dim, k_dim))
            C[1:1 + p, 1:1 + p] = Cxx
            C[1:1 + p, 1 + p:] = Cxy
            C[1 + p:, 1:1 + p] = Cxy.T
            C[1 + p:, 1 + p:] = B @ Cxx[np.ix_(cont, cont)] @ B.T + resid
            weights.append(prob)
            means.append(np.r_[s, mx, m[p:] + B @ (mx[cont] - m[cont])])
            covs.append(C)
    return GaussianMixture(np.array(weights), np.array(means), np.array(covs), labels).canonical()


# structural representation ----------------------------------------------------------

def structural_representation(rcm: FunctionalRcm, noise_name: str = "U") -> ScmModel:
    """SCM on one finite noise whose entailed RCM reproduces ``rcm`` atom by atom.

    Atom ``k`` of the new noise carries the probability of atom ``k`` of the
    enumerated input space; T and X read coordinates off ``k`` and each
    outcome is the table ``(t, k) -> Y_t``.

    Raises:
        NotEnumerable: the noise space of ``rcm`` is not finite.
    """
    table = enumerate_noise(rcm.noise)
    d = rcm.evaluate(table.atoms)
    base = rcm.base
    K = len(table.probs)
    u = Ref(noise_name)
    atoms = tuple((float(k), float(p)) for k, p in enumerate(table.probs))
    space = NoiseSpace((NoiseSpec(noise_name, Discrete(atoms)),))
    eqs = {base.treatment: Table((u,), tuple(((float(k),), float(d["T"][k])) for k in range(K)))}
    for j, x in enumerate(base.covariates):
        eqs[x] = Table((u,), tuple(((float(k),), float(d["X"][k, j])) for k in range(K)))
    for j, y in enumerate(base.outcomes):
        entries = tuple(((float(t), float(k)), float(d["pot"][t][k, j]))
                        for t in base.treatment_support for k in range(K))
        eqs[y] = Table((Ref(base.treatment), u), entries)
    return ScmModel(base.variables, eqs, space, base.treatment, base.covariates, base.outcomes,
                    base.treatment_support)


def noise_independence(model: ScmModel, n: int = 100_000, seed: int = 0, n_perm: int = 200,
                       level: float = LEVEL):
    """Energy test of ``Exo(Y)`` against (T, X): joint draws vs draws with Exo(Y) decoupled.

    The sample is split in halves; in the second half the outcome noises are
    shuffled, which realizes the product of marginals. Halves are independent,
    so the two-sample permutation test has exact level.
    """
    from .energy import two_sample_test

    exo = sorted({u for y in model.outcomes for u in model.exo_parents(y)}, key=model.noise.index)
    d = _sample_obs(model, n, seed)
    values = sample_noise(model.noise, seed, n).values
    u = values[:, [model.noise.index(e) for e in exo]]
    tx = np.column_stack([d["T"], d["X"]])
    h = n // 2
    gen = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7102,)))
    joint = np.column_stack([tx[:h], u[:h]])
    prod = np.column_stack([tx[h:2 * h], u[h:2 * h][gen.permutation(h)]])
    return two_sample_test(joint, prod, n_perm=n_perm, seed=seed, level=level)


def warn_theorem_hypotheses(model: ScmModel):
    flags = check_assumptions(model)
    warn_unless(flags.outcome_a5 and flags.indep_noises_a6,
                "outcome-equation law is guaranteed only when a5 and a6 hold")


__all__ = [
    "CheckReport",
    "FunctionalRcm",
    "ObservationalView",
    "Provenance",
    "check_consistency",
    "check_ignorability",
    "check_positivity",
    "entailed_rcm",
    "identify_single_outcome",
    "noise_independence",
    "observational",
    "outcome_equation_rcm",
    "potential_label",
    "propensity",
    "structural_representation",
    "user_rcm",
]
