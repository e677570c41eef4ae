"""Almost-sure, cross-outcome and single-outcome equivalence of RCMs.

Exact backends decide equality of finite tables or Gaussian mixtures. The
Monte Carlo backend runs an energy-distance permutation test and reports
Inconclusive for p-values in [level, 0.05].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .energy import TestResult, two_sample_test
from .errors import DimensionMismatch, EngineInapplicable, SpaceMismatch
from .inference import law
from .laws import Empirical, Engine, ExactTable, GaussianMixture, as_engine, gm_discrepancy, tv_distance
from .noise import enumerate_noise, rng, sample_noise, split_stream
from .rcm import FunctionalRcm

LEVEL = 0.01
INCONCLUSIVE_UPPER = 0.05
EXACT_TOL = 1e-12
GAUSSIAN_TOL = 1e-9


class Level(str, Enum):
    ALMOST_SURE = "as"
    CROSS_OUTCOME = "cross"
    SINGLE_OUTCOME = "single"


class Verdict(str, Enum):
    EQUAL = "Equal"
    NOT_EQUAL = "NotEqual"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class EquivalenceVerdict:
    """Outcome of an equivalence comparison.

    ``witness`` holds a coupled draw where the two RCMs differ, when they live
    on one noise space and such a draw was found.
    """

    level: Level
    verdict: Verdict
    statistic: float
    threshold: float
    method: Engine
    p_value: float | None = None
    per_t_detail: dict = field(default_factory=dict)
    witness: dict | None = None
    seeds: tuple = ()

    @property
    def equal(self) -> bool:
        return self.verdict is Verdict.EQUAL


def law_distance(a, b, n_perm: int = 200, seed: int = 0, level: float = LEVEL):
    """``(statistic, p_value)`` between two laws.

    Tables: total variation, no p-value. Gaussian mixtures: unmatched weight
    between canonical component multisets, no p-value. Otherwise: energy
    distance with a permutation p-value, drawing from any non-sample law.

    Raises:
        DimensionMismatch: the laws have different dimensions.
    """
    res = _law_test(a, b, n_perm, seed, level)
    return res[0], res[1]


def _law_test(a, b, n_perm, seed, level):
    """``(statistic, p_value, threshold)``."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"laws of dimension {a.dim} and {b.dim}")
    if isinstance(a, ExactTable) and isinstance(b, ExactTable):
        return tv_distance(a, b, EXACT_TOL), None, EXACT_TOL
    if isinstance(a, GaussianMixture) and isinstance(b, GaussianMixture):
        return gm_discrepancy(a, b, GAUSSIAN_TOL), None, GAUSSIAN_TOL
    n = max(x.n for x in (a, b) if isinstance(x, Empirical)) if any(
        isinstance(x, Empirical) for x in (a, b)) else 20_000
    sa = a.samples if isinstance(a, Empirical) else a.sample(rng(seed, 7201), n)
    sb = b.samples if isinstance(b, Empirical) else b.sample(rng(seed, 7202), n)
    res: TestResult = two_sample_test(sa, sb, n_perm=n_perm, seed=seed, level=level)
    return res.statistic, res.p_value, res.threshold


def _verdict_from(stat, p, threshold, level) -> Verdict:
    if p is None:
        return Verdict.EQUAL if stat <= threshold else Verdict.NOT_EQUAL
    if p < level:
        return Verdict.NOT_EQUAL
    if p <= INCONCLUSIVE_UPPER:
        return Verdict.INCONCLUSIVE
    return Verdict.EQUAL


def _check_dims(a: FunctionalRcm, b: FunctionalRcm):
    ba, bb = a.base, b.base
    if ba.treatment_support != bb.treatment_support:
        raise DimensionMismatch(f"treatment supports {ba.treatment_support} vs {bb.treatment_support}")
    if len(ba.covariates) != len(bb.covariates) or len(ba.outcomes) != len(bb.outcomes):
        raise DimensionMismatch("covariate or outcome dimensions differ")


def _same_space(a: FunctionalRcm, b: FunctionalRcm) -> bool:
    return a.noise is b.noise or a.noise.space_id == b.noise.space_id


def _pick_engine(a: FunctionalRcm, b: FunctionalRcm, engine) -> Engine:
    if engine is not None:
        return as_engine(engine)
    if a.noise.is_enumerable and b.noise.is_enumerable:
        return Engine.EXACT
    return Engine.GAUSSIAN


def _coupled_values(a: FunctionalRcm, budget: int, seed: int):
    if a.noise.is_enumerable:
        return enumerate_noise(a.noise).atoms, Engine.EXACT
    return sample_noise(a.noise, seed, budget).values, Engine.MONTE_CARLO


def _coupled_witness(a, b, levels, budget, seed, tol=0.0):
    """First coupled draw where some ``Y_t`` (t in ``levels``) differs, with the max gap."""
    values, method = _coupled_values(a, budget, seed)
    da, db = a.evaluate(values), b.evaluate(values)
    gap = np.zeros(values.shape[0])
    for t in levels:
        gap = np.maximum(gap, np.abs(da["pot"][t] - db["pot"][t]).max(axis=1))
    stat = float(gap.max(initial=0.0))
    witness = None
    hits = np.flatnonzero(gap > tol)
    if hits.size:
        i = int(hits[0])
        witness = {
            "draw": i,
            "noise": dict(zip(a.noise.names, values[i].tolist())),
            "T": float(da["T"][i]),
            "a": {int(t): da["pot"][t][i].tolist() for t in levels},
            "b": {int(t): db["pot"][t][i].tolist() for t in levels},
            "gap": float(gap[i]),
        }
    return stat, witness, method


def compare_almost_sure(a: FunctionalRcm, b: FunctionalRcm, budget: int = 10_000, tol: float = 0.0,
                        seed: int = 0) -> EquivalenceVerdict:
    """Equal iff ``Y_t`` of both RCMs coincide on every atom (or every coupled draw).

    Raises:
        SpaceMismatch: the RCMs live on different noise spaces.
    """
    if not _same_space(a, b):
        raise SpaceMismatch("almost-sure comparison needs one shared noise space")
    _check_dims(a, b)
    stat, witness, method = _coupled_witness(a, b, a.treatment_support, budget, seed, tol)
    verdict = Verdict.EQUAL if stat <= tol else Verdict.NOT_EQUAL
    return EquivalenceVerdict(Level.ALMOST_SURE, verdict, stat, tol, method, witness=witness,
                              seeds=() if method is Engine.EXACT else (seed,))


def _compare_laws(a, b, exprs_a, exprs_b, engine, budget, seed, level, n_perm):
    """Statistic, p-value, threshold and engine used for one law comparison."""
    engine = _pick_engine(a, b, engine)
    if engine is Engine.GAUSSIAN:
        try:
            la = law(a.base, exprs_a, engine=engine)
            lb = law(b.base, exprs_b, engine=engine)
            return (*_law_test(la, lb, n_perm, seed, level), engine, ())
        except EngineInapplicable:
            engine = Engine.MONTE_CARLO
    if engine is Engine.EXACT:
        la = law(a.base, exprs_a, engine=engine)
        lb = law(b.base, exprs_b, engine=engine)
        return (*_law_test(la, lb, n_perm, seed, level), engine, ())
    sa, sb = split_stream(seed, 2)
    la = law(a.base, exprs_a, engine=Engine.MONTE_CARLO, n=budget, seed=sa)
    lb = law(b.base, exprs_b, engine=Engine.MONTE_CARLO, n=budget, seed=sb)
    return (*_law_test(la, lb, n_perm, seed, level), Engine.MONTE_CARLO, (sa, sb))


def compare_cross_outcome(a: FunctionalRcm, b: FunctionalRcm, engine=None, budget: int = 20_000,
                          seed: int = 0, level: float = LEVEL, n_perm: int = 200) -> EquivalenceVerdict:
    """Compare the joint laws of ``(T, X, (Y_t)_t)``.

    Raises:
        DimensionMismatch: different treatment supports or dimensions.
    """
    _check_dims(a, b)
    stat, p, thr, method, seeds = _compare_laws(a, b, a.exprs(), b.exprs(), engine, budget, seed,
                                                level, n_perm)
    verdict = _verdict_from(stat, p, thr, level)
    witness = None
    if verdict is Verdict.NOT_EQUAL and _same_space(a, b):
        witness = _coupled_witness(a, b, a.treatment_support, min(budget, 10_000), seed)[1]
    return EquivalenceVerdict(Level.CROSS_OUTCOME, verdict, stat, thr, method, p, witness=witness,
                              seeds=seeds)


def compare_single_outcome(a: FunctionalRcm, b: FunctionalRcm, engine=None, budget: int = 20_000,
                           seed: int = 0, level: float = LEVEL, n_perm: int = 200) -> EquivalenceVerdict:
    """Compare ``L(T, X, Y_t)`` for each level; Equal iff every level is Equal."""
    _check_dims(a, b)
    detail, worst, verdicts, methods, seeds = {}, None, [], set(), ()
    for i, t in enumerate(a.treatment_support):
        stat, p, thr, method, s = _compare_laws(a, b, a.exprs(t), b.exprs(t), engine, budget,
                                                seed + i, level, n_perm)
        v = _verdict_from(stat, p, thr, level)
        detail[t] = {"statistic": stat, "p_value": p, "threshold": thr, "verdict": v.value}
        verdicts.append(v)
        methods.add(method)
        seeds += s
        score = (v is Verdict.NOT_EQUAL, v is Verdict.INCONCLUSIVE, stat - thr)
        if worst is None or score > worst[0]:
            worst = (score, stat, p, thr)
    if Verdict.NOT_EQUAL in verdicts:
        verdict = Verdict.NOT_EQUAL
    elif Verdict.INCONCLUSIVE in verdicts:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.EQUAL
    witness = None
    if verdict is Verdict.NOT_EQUAL and _same_space(a, b):
        bad = [t for t in a.treatment_support if detail[t]["verdict"] == Verdict.NOT_EQUAL.value]
        witness = _coupled_witness(a, b, bad, min(budget, 10_000), seed)[1]
    method = Engine.MONTE_CARLO if Engine.MONTE_CARLO in methods else methods.pop()
    _, stat, p, thr = worst
    return EquivalenceVerdict(Level.SINGLE_OUTCOME, verdict, stat, thr, method, p, detail, witness, seeds)


def compare(a: FunctionalRcm, b: FunctionalRcm, level, **kw) -> EquivalenceVerdict:
    """Dispatch on ``level`` ("as", "cross" or "single")."""
    level = Level(level)
    if level is Level.ALMOST_SURE:
        kw.pop("engine", None)
        kw.pop("level", None)
        kw.pop("n_perm", None)
        return compare_almost_sure(a, b, **kw)
    if level is Level.CROSS_OUTCOME:
        return compare_cross_outcome(a, b, **kw)
    return compare_single_outcome(a, b, **kw)


def contrast_test(a: FunctionalRcm, b: FunctionalRcm, levels=(1, 0), n: int = 100_000, seed: int = 0,
                  level: float = LEVEL, n_perm: int = 200, outcome: int = 0) -> TestResult:
    """Energy test of ``L(Y_t1 - Y_t0)`` under ``a`` against ``b`` (a cross-outcome witness)."""
    t1, t0 = levels
    sa, sb = split_stream(seed, 2)
    xa = law(a.base, [a.potentials[t1][outcome] - a.potentials[t0][outcome]], engine=Engine.MONTE_CARLO,
             n=n, seed=sa).samples
    xb = law(b.base, [b.potentials[t1][outcome] - b.potentials[t0][outcome]], engine=Engine.MONTE_CARLO,
             n=n, seed=sb).samples
    return two_sample_test(xa, xb, n_perm=n_perm, seed=seed, level=level)
