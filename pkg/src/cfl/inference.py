"""Counterfactual laws: abduction, action, prediction.

Queries are expressions over world references (``Y[T=1]``), so one call can
return the joint law of coupled counterfactuals. Evidence is on factual
variables, or on world references for post-intervention conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import linear
from .errors import (
    EmptyAcceptance,
    EngineInapplicable,
    NotEnumerable,
    UnknownReference,
    ZeroProbabilityEvidence,
)
from .expr import Expr, Ref, parse
from .laws import Empirical, Engine, ExactTable, as_engine
from .noise import enumerate_noise, sample_noise
from .scm import ScmModel, as_intervention, discrete_names
from .worlds import WorldEval, Worlds, split_ref, world_ref

BANDWIDTH_FACTOR = 0.1
EXACT_TOL = 1e-12


def _as_exprs(query) -> list:
    if isinstance(query, (str, Expr)):
        query = [query]
    return [parse(q) if isinstance(q, str) else q for q in query]


def _labels(query, exprs):
    if isinstance(query, (str, Expr)):
        query = [query]
    return tuple(q if isinstance(q, str) else str(e) for q, e in zip(query, exprs))


def resolve_engine(model: ScmModel, engine=None) -> Engine:
    """Requested engine, or the first applicable one (exact, gaussian, mc)."""
    if engine is not None:
        return as_engine(engine)
    if model.noise.is_enumerable:
        return Engine.EXACT
    return Engine.GAUSSIAN


def _matches(v: np.ndarray, x: float) -> np.ndarray:
    return np.abs(v - x) <= EXACT_TOL * max(1.0, abs(x))


def _exact_rows(model, worlds, evidence, exprs):
    try:
        table = enumerate_noise(model.noise)
    except NotEnumerable as exc:
        raise EngineInapplicable(f"exact engine needs finite noise: {exc}") from None
    ev = WorldEval(worlds, table.atoms)
    mask = np.ones(ev.n, dtype=bool)
    for k, x in evidence.items():
        mask &= _matches(ev.ref(k), float(x))
    if not mask.any() or table.probs[mask].sum() <= 0:
        raise ZeroProbabilityEvidence(f"evidence {dict(evidence)} has probability zero")
    rows = np.column_stack([ev.expr(e) for e in exprs]) if exprs else np.empty((ev.n, 0))
    return rows[mask], table.probs[mask] / table.probs[mask].sum()


def _discrete_refs(worlds: Worlds, names) -> set:
    out = set()
    for name in names:
        var, label = split_ref(name)
        if var in discrete_names(worlds.model(label)):
            out.add(name)
    return out


@dataclass
class Acceptance:
    """Kernel-rejection result: accepted draws and their evidence offsets."""

    eval: WorldEval
    mask: np.ndarray
    offsets: np.ndarray  # accepted rows x continuous evidence coordinates
    bandwidth: dict


def accept(model: ScmModel, worlds: Worlds, evidence: Mapping[str, float], n: int, seed: int,
           bandwidth=None) -> Acceptance:
    """Draw ``n`` noise values and keep those within the evidence window.

    Discrete evidence coordinates must match exactly; continuous ones within
    ``h`` (default ``0.1 * sd`` of the coordinate in the sample).

    Raises:
        EmptyAcceptance: no draw is accepted.
    """
    batch = sample_noise(model.noise, seed, n)
    ev = WorldEval(worlds, batch.values)
    disc = _discrete_refs(worlds, evidence)
    mask = np.ones(n, dtype=bool)
    cont, hs = [], {}
    for k, x in evidence.items():
        v = ev.ref(k)
        if k in disc:
            mask &= _matches(v, float(x))
            continue
        if isinstance(bandwidth, Mapping):
            h = float(bandwidth.get(k, BANDWIDTH_FACTOR * v.std()))
        elif bandwidth is not None:
            h = float(bandwidth)
        else:
            h = BANDWIDTH_FACTOR * float(v.std())
        hs[k] = h
        mask &= np.abs(v - float(x)) <= h
        cont.append((k, float(x)))
    if not mask.any():
        raise EmptyAcceptance(f"no draw out of {n} accepted for evidence {dict(evidence)}")
    offsets = np.column_stack([ev.ref(k)[mask] - x for k, x in cont]) if cont else np.empty((mask.sum(), 0))
    return Acceptance(ev, mask, offsets, hs)


def local_mean(y: np.ndarray, offsets: np.ndarray):
    """Local-linear estimate at offset 0 with heteroskedasticity-robust (HC1) SE.

    Returns:
        (estimate, se), each of shape ``(q,)``.
    """
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    m = y.shape[0]
    if offsets.shape[1] == 0:
        if m < 2:
            raise EmptyAcceptance("fewer than two accepted draws")
        return y.mean(axis=0), y.std(axis=0, ddof=1) / np.sqrt(m)
    Z = np.column_stack([np.ones(m), offsets])
    p = Z.shape[1]
    if m <= p + 1:
        raise EmptyAcceptance(f"only {m} accepted draws for a local fit with {p} terms")
    ZtZ_inv = np.linalg.pinv(Z.T @ Z)
    beta = ZtZ_inv @ Z.T @ y
    resid = y - Z @ beta
    est, se = beta[0], np.empty(y.shape[1])
    for j in range(y.shape[1]):
        meat = (Z * resid[:, j:j + 1] ** 2).T @ Z
        cov = ZtZ_inv @ meat @ ZtZ_inv * m / (m - p)
        se[j] = np.sqrt(max(cov[0, 0], 0.0))
    return est, se


def law(
    model: ScmModel,
    query,
    evidence: Mapping[str, float] | None = None,
    engine=None,
    n: int = 100_000,
    seed: int = 0,
    bandwidth=None,
    need_law: bool = True,
):
    """Law of expressions ``query`` given ``evidence``.

    Raises:
        EngineInapplicable, ZeroProbabilityEvidence, EmptyAcceptance.
    """
    evidence = dict(evidence or {})
    exprs = _as_exprs(query)
    labels = _labels(query, exprs)
    worlds = Worlds(model)
    for e in exprs:
        worlds.check(e)
    for k in evidence:
        worlds.check(Ref(k))
    engine = resolve_engine(model, engine)
    if engine is Engine.EXACT:
        rows, probs = _exact_rows(model, worlds, evidence, exprs)
        return ExactTable.from_rows(rows, probs, labels)
    if engine is Engine.GAUSSIAN:
        return linear.conditional_law(model, evidence, exprs, labels, worlds, need_law)
    acc = accept(model, worlds, evidence, n, seed, bandwidth)
    rows = np.column_stack([acc.eval.expr(e)[acc.mask] for e in exprs])
    return Empirical(rows, labels, seed, f"kernel-rejection n={n}")


def conditional_mean(
    model: ScmModel,
    query,
    evidence: Mapping[str, float] | None = None,
    engine=None,
    n: int = 100_000,
    seed: int = 0,
    bandwidth=None,
):
    """E[query | evidence] as ``(mean, se)``; ``se`` is None for exact engines."""
    engine = resolve_engine(model, engine)
    if engine is not Engine.MONTE_CARLO:
        out = law(model, query, evidence, engine, need_law=False)
        return out.mean(), None
    evidence = dict(evidence or {})
    exprs = _as_exprs(query)
    worlds = Worlds(model)
    for e in exprs:
        worlds.check(e)
    acc = accept(model, worlds, evidence, n, seed, bandwidth)
    y = np.column_stack([acc.eval.expr(e)[acc.mask] for e in exprs])
    return local_mean(y, acc.offsets)


def counterfactual_law(
    model: ScmModel,
    evidence: Mapping[str, float] | None,
    iv,
    query: Sequence[str],
    engine=None,
    budget: int = 100_000,
    seed: int = 0,
    bandwidth=None,
):
    """Law of ``query`` in the intervened model given factual ``evidence``.

    Abduction conditions the noise on the evidence, action applies ``iv`` and
    prediction solves the intervened equations on the posterior noise.

    Args:
        model: the factual model.
        evidence: factual values of endogenous variables.
        iv: intervention (mapping or Intervention); empty for the factual world.
        query: endogenous variable names, evaluated in the intervened world.
        engine: "exact", "gaussian" or "mc"; None picks exact, then gaussian.
        budget: Monte Carlo draws before rejection.

    Raises:
        EngineInapplicable: the engine cannot represent this model.
        ZeroProbabilityEvidence: exact posterior undefined.
        EmptyAcceptance: rejection accepted no draw.
    """
    iv = as_intervention(iv)
    if isinstance(query, str):
        query = [query]
    exprs = [Ref(world_ref(v, iv.assignments)) for v in query]
    for v in query:
        if v not in model.variables:
            raise UnknownReference(v, "query")
    out = law(model, exprs, evidence, engine, budget, seed, bandwidth)
    out.labels = tuple(query)
    return out
