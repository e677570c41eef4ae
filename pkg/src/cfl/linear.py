"""Exact linear-Gaussian engine.

For every atom of the discrete noises, each variable is an affine function of
the continuous noises. Indicators, tables, minima and maxima are allowed only
when their arguments are constant within the atom (e.g. ``T = U_T`` with a
Bernoulli ``U_T``). Conditioning on continuous evidence is Gaussian
conditioning per atom; atoms are reweighted by the evidence density, which
turns discrete evidence into exact matching.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import EngineInapplicable, ZeroProbabilityEvidence
from .expr import (
    Add,
    Const,
    Expr,
    Indicator,
    Max,
    Min,
    Mul,
    Neg,
    Ref,
    Table,
    children,
    evaluate,
    rebuild,
)
from .laws import GaussianMixture
from .noise import Gaussian, NoiseSpace
from .scm import ScmModel
from .worlds import Worlds, split_ref

MAX_ATOMS = 1 << 16


class NonLinear(Exception):
    """An expression is not affine within an atom."""


@dataclass(frozen=True, eq=False)
class Affine:
    const: float
    coef: np.ndarray

    @property
    def is_const(self) -> bool:
        return not np.any(self.coef)


class LinearSystem:
    """Atoms of the discrete noises and the continuous-noise basis."""

    def __init__(self, noise: NoiseSpace, max_atoms: int = MAX_ATOMS):
        self.noise = noise
        self.disc = [s for s in noise.specs if s.is_discrete]
        self.cont = [s for s in noise.specs if not s.is_discrete]
        self.cont_index = {s.name: i for i, s in enumerate(self.cont)}
        self.mu = np.array([s.dist.mean for s in self.cont], dtype=float)
        self.var = np.array([s.dist.variance for s in self.cont], dtype=float)
        self.gaussian = np.array([isinstance(s.dist, Gaussian) for s in self.cont], dtype=bool)
        size = math.prod(len(s.dist.support()) for s in self.disc)
        if size > max_atoms:
            raise EngineInapplicable(f"{size} discrete atoms exceed the limit {max_atoms}")

    @property
    def m(self) -> int:
        return len(self.cont)

    def atoms(self):
        supports = [s.dist.support() for s in self.disc]
        for combo in itertools.product(*supports):
            yield {s.name: v for s, (v, _) in zip(self.disc, combo)}, math.prod(p for _, p in combo)

    def const(self, c: float) -> Affine:
        return Affine(float(c), np.zeros(self.m))


class FormEvaluator:
    """Affine forms of expressions for one atom, across worlds."""

    def __init__(self, system: LinearSystem, worlds: Worlds, atom: Mapping[str, float]):
        self.s = system
        self.worlds = worlds
        self.atom = atom
        self._memo = {}

    def var(self, name: str, label=None) -> Affine:
        key = (label, name)
        if key not in self._memo:
            model = self.worlds.model(label)
            self._memo[key] = self.expr(model.equations[name], label)
        return self._memo[key]

    def ref(self, name: str, label=None) -> Affine:
        if name in self.s.cont_index:
            coef = np.zeros(self.s.m)
            coef[self.s.cont_index[name]] = 1.0
            return Affine(0.0, coef)
        if name in self.atom:
            return self.s.const(self.atom[name])
        base, world = split_ref(name)
        if world is not None:
            return self.var(base, world)
        return self.var(name, label)

    def expr(self, e: Expr, label=None) -> Affine:
        if isinstance(e, Const):
            return self.s.const(e.value)
        if isinstance(e, Ref):
            return self.ref(e.name, label)
        if isinstance(e, Add):
            parts = [self.expr(a, label) for a in e.args]
            const = parts[0].const
            coef = parts[0].coef.copy()
            for p in parts[1:]:
                const = const + p.const
                coef = coef + p.coef
            return Affine(const, coef)
        if isinstance(e, Neg):
            p = self.expr(e.arg, label)
            return Affine(-p.const, -p.coef)
        if isinstance(e, Mul):
            parts = [self.expr(a, label) for a in e.args]
            acc = parts[0]
            for p in parts[1:]:
                if acc.is_const:
                    acc = Affine(acc.const * p.const, acc.const * p.coef)
                elif p.is_const:
                    acc = Affine(acc.const * p.const, acc.coef * p.const)
                else:
                    raise NonLinear(f"product of two noise-dependent factors in {e!r}")
            return acc
        if isinstance(e, (Min, Max, Indicator, Table)):
            parts = [self.expr(a, label) for a in children(e)]
            if not all(p.is_const for p in parts):
                raise NonLinear(f"{type(e).__name__.lower()} of a noise-dependent argument")
            node = rebuild(e, [Const(p.const) for p in parts])
            return self.s.const(float(evaluate(node, {}, 1)[0]))
        raise TypeError(f"not an expression: {e!r}")


def exo_ancestors(worlds: Worlds, names) -> set:
    """Noises with a directed path into any of ``names`` (possibly world references)."""
    out = set()
    for name in names:
        var, label = split_ref(name)
        model = worlds.model(label)
        g = nx.DiGraph()
        g.add_nodes_from(model.variables)
        for v in model.variables:
            g.add_edges_from((u, v) for u in model.endo_parents(v))
        for v in {var} | nx.ancestors(g, var):
            out.update(model.exo_parents(v))
    return out


def _logpdf(x, mean, cov):
    d = len(x)
    sign, logdet = np.linalg.slogdet(cov)
    diff = x - mean
    return -0.5 * (d * math.log(2 * math.pi) + logdet + diff @ np.linalg.solve(cov, diff))


def _ev_components(s: LinearSystem, ev, x, tol):
    """Split evidence into exact (zero-variance) and Gaussian parts for one atom."""
    pos = np.array([np.any(f.coef) for f in ev], dtype=bool)
    for f, xv, p in zip(ev, x, pos):
        if not p and abs(f.const - xv) > tol * max(1.0, abs(xv)):
            return pos, False
    return pos, True


def condition(
    system: LinearSystem,
    worlds: Worlds,
    evidence: Mapping[str, float],
    query: Sequence[Expr],
    labels=(),
    need_law: bool = True,
    tol: float = 1e-12,
) -> GaussianMixture:
    """Law of the query forms given factual evidence, as a Gaussian mixture.

    Raises:
        NonLinear: when evidence or query forms are not affine in some atom.
        ZeroProbabilityEvidence: no atom is compatible with the discrete evidence.
        EngineInapplicable: singular or non-Gaussian continuous evidence.
    """
    s = system
    names = list(evidence)
    x = np.array([evidence[k] for k in names], dtype=float)
    D = s.var
    logw, means, covs, pattern = [], [], [], None
    for atom, prob in s.atoms():
        E = FormEvaluator(s, worlds, atom)
        q = [E.expr(e) for e in query]
        ev = [E.ref(k) for k in names]
        pos, ok = _ev_components(s, ev, x, tol)
        if not ok:
            continue
        if pattern is None:
            pattern = pos
        elif not np.array_equal(pattern, pos):
            raise EngineInapplicable("evidence mixes discrete and continuous behaviour across atoms")
        Aq = np.array([f.coef for f in q]).reshape(len(q), s.m)
        cq = np.array([f.const for f in q])
        mq = cq + Aq @ s.mu
        Sqq = (Aq * D) @ Aq.T
        lw = math.log(prob)
        if pos.any():
            Ae = np.array([ev[i].coef for i in np.flatnonzero(pos)])
            if np.any(Ae[:, ~s.gaussian] != 0):
                raise EngineInapplicable("continuous evidence depends on a non-Gaussian noise")
            ce = np.array([ev[i].const for i in np.flatnonzero(pos)])
            me = ce + Ae @ s.mu
            See = (Ae * D) @ Ae.T
            if np.linalg.matrix_rank(See) < See.shape[0]:
                raise EngineInapplicable("singular covariance of continuous evidence")
            Sqe = (Aq * D) @ Ae.T
            xe = x[pos]
            K = np.linalg.solve(See, Sqe.T).T
            mq = mq + K @ (xe - me)
            Sqq = Sqq - K @ Sqe.T
            lw += _logpdf(xe, me, See)
        if need_law and np.any(Aq[:, ~s.gaussian] != 0):
            raise EngineInapplicable("query depends on a non-Gaussian continuous noise")
        logw.append(lw)
        means.append(mq)
        covs.append(0.5 * (Sqq + Sqq.T))
    if not logw:
        raise ZeroProbabilityEvidence(f"no atom is compatible with evidence {dict(evidence)}")
    logw = np.array(logw)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return GaussianMixture(w, np.array(means), np.array(covs), labels)


def prior_if_independent(
    system: LinearSystem,
    worlds: Worlds,
    evidence_vars,
    query: Sequence[Expr],
    labels=(),
    need_law: bool = True,
    tol: float = 1e-12,
) -> GaussianMixture:
    """Prior law of the query when its forms ignore every noise upstream of the evidence.

    Raises:
        EngineInapplicable: if the query forms involve such a noise.
    """
    s = system
    anc = exo_ancestors(worlds, evidence_vars)
    anc_cont = [s.cont_index[u] for u in anc if u in s.cont_index]
    anc_disc = {u for u in anc if u not in s.cont_index}
    groups = {}
    weights, means, covs = [], [], []
    for atom, prob in s.atoms():
        E = FormEvaluator(s, worlds, atom)
        try:
            q = [E.expr(e) for e in query]
        except NonLinear as exc:
            raise EngineInapplicable(f"query is not affine: {exc}") from None
        Aq = np.array([f.coef for f in q]).reshape(len(q), s.m)
        cq = np.array([f.const for f in q])
        if anc_cont and np.any(Aq[:, anc_cont] != 0):
            raise EngineInapplicable("query depends on noises upstream of the evidence")
        key = tuple(sorted((k, v) for k, v in atom.items() if k not in anc_disc))
        sig = (cq, Aq)
        if key in groups:
            c0, A0 = groups[key]
            if np.max(np.abs(c0 - cq), initial=0) > tol or np.max(np.abs(A0 - Aq), initial=0) > tol:
                raise EngineInapplicable("query depends on discrete noises upstream of the evidence")
        else:
            groups[key] = sig
        if need_law and np.any(Aq[:, ~s.gaussian] != 0):
            raise EngineInapplicable("query depends on a non-Gaussian continuous noise")
        weights.append(prob)
        means.append(cq + Aq @ s.mu)
        covs.append((Aq * s.var) @ Aq.T)
    return GaussianMixture(np.array(weights), np.array(means), np.array(covs), labels)


def conditional_law(
    model: ScmModel,
    evidence: Mapping[str, float],
    query: Sequence[Expr],
    labels=(),
    worlds: Worlds | None = None,
    need_law: bool = True,
) -> GaussianMixture:
    """Full Gaussian conditioning, falling back to the independence shortcut."""
    system = LinearSystem(model.noise)
    worlds = worlds or Worlds(model)
    try:
        return condition(system, worlds, evidence, query, labels, need_law)
    except NonLinear as exc:
        reason = str(exc)
    try:
        return prior_if_independent(system, worlds, list(evidence), query, labels, need_law)
    except EngineInapplicable as exc:
        raise EngineInapplicable(f"linear engine cannot condition ({reason}); {exc}") from None


def propensity(model: ScmModel, x: Mapping[str, float]) -> dict:
    """P(T=t | X=x) for each level, from per-atom Gaussian densities.

    Raises:
        EngineInapplicable: if the treatment is not constant within atoms or X is not affine.
    """
    system = LinearSystem(model.noise)
    worlds = Worlds(model)
    names = list(x)
    xv = np.array([x[k] for k in names], dtype=float)
    logs = {t: [] for t in model.treatment_support}
    for atom, prob in system.atoms():
        E = FormEvaluator(system, worlds, atom)
        try:
            tf = E.var(model.treatment)
            ev = [E.ref(k) for k in names]
        except NonLinear as exc:
            raise EngineInapplicable(f"propensity needs an atom-wise affine model: {exc}") from None
        if not tf.is_const:
            raise EngineInapplicable("treatment varies within an atom of the discrete noises")
        pos, ok = _ev_components(system, ev, xv, 1e-12)
        if not ok:
            continue
        lw = math.log(prob)
        if pos.any():
            Ae = np.array([ev[i].coef for i in np.flatnonzero(pos)])
            me = np.array([ev[i].const for i in np.flatnonzero(pos)]) + Ae @ system.mu
            See = (Ae * system.var) @ Ae.T
            if np.linalg.matrix_rank(See) < See.shape[0]:
                raise EngineInapplicable("singular covariate covariance")
            lw += _logpdf(xv[pos], me, See)
        logs[int(round(tf.const))].append(lw)
    allw = [v for vs in logs.values() for v in vs]
    if not allw:
        raise ZeroProbabilityEvidence(f"covariate value {dict(x)} has zero density")
    top = max(allw)
    total = sum(math.exp(v - top) for v in allw)
    return {t: sum(math.exp(v - top) for v in vs) / total for t, vs in logs.items()}
