"""Structural causal models: validation, solving, interventions and graph checks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import (
    CyclicGraph,
    InvalidIntervention,
    NotEnumerable,
    SpecError,
    TreatmentOutOfSupport,
    UnknownReference,
)
from .expr import (
    Const,
    Expr,
    Indicator,
    Ref,
    Table,
    children,
    evaluate,
    parse_equation,
    refs,
    substitute,
    to_str,
)
from .noise import NoiseBatch, NoiseSpace, enumerate_noise, sample_noise


@dataclass(frozen=True)
class Intervention:
    """Perfect intervention ``do(var = value, ...)``."""

    assignments: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(
            self, "assignments", {str(k): float(v) for k, v in dict(self.assignments).items()}
        )

    def __hash__(self):
        return hash(tuple(sorted(self.assignments.items())))


def as_intervention(iv) -> Intervention:
    if iv is None:
        return Intervention({})
    if isinstance(iv, Intervention):
        return iv
    return Intervention(dict(iv))


@dataclass(frozen=True)
class CausalGraph:
    nodes: tuple
    edges: tuple

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g


@dataclass(frozen=True)
class AssumptionFlags:
    acyclic: bool
    outcome_a5: bool
    indep_noises_a6: bool
    no_posttreatment_a7_parent: bool
    no_posttreatment_a7_descendant: bool


@dataclass(frozen=True, eq=True)
class ScmModel:
    """Acyclic structural model over treatment ``T``, covariates ``X`` and outcomes ``Y``.

    Args:
        variables: endogenous names in declaration order.
        equations: mapping from each variable to its expression.
        noise: the exogenous noise space (shared by every intervened copy).
        treatment: name of the treatment variable.
        covariates: names of the covariates, in order.
        outcomes: names of the outcomes, in order.
        treatment_support: integer treatment levels ``0..N``.
    """

    variables: tuple
    equations: Mapping[str, Expr]
    noise: NoiseSpace
    treatment: str
    covariates: tuple
    outcomes: tuple
    treatment_support: tuple = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "treatment_support", tuple(int(t) for t in self.treatment_support))
        object.__setattr__(self, "equations", dict(self.equations))
        if len(set(self.variables)) != len(self.variables):
            raise SpecError("duplicate variable names")
        roles = [self.treatment, *self.covariates, *self.outcomes]
        if sorted(roles) != sorted(self.variables):
            raise SpecError(
                "variables must be exactly the treatment, covariates and outcomes; "
                f"got variables {list(self.variables)} and roles {roles}"
            )
        if not self.outcomes:
            raise SpecError("at least one outcome is required")
        if set(self.equations) != set(self.variables):
            missing = set(self.variables) - set(self.equations)
            extra = set(self.equations) - set(self.variables)
            raise SpecError(f"equations mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        if set(self.variables) & set(self.noise.names):
            raise SpecError("variable and noise names must be disjoint")
        if sorted(self.treatment_support) != list(range(len(self.treatment_support))):
            raise SpecError("treatment support must be {0, ..., N}")
        if len(self.treatment_support) < 2:
            raise SpecError("treatment support needs at least two levels")

    __hash__ = None

    def index(self, name: str) -> int:
        return self.variables.index(name)

    def endo_parents(self, v: str) -> list:
        r = refs(self.equations[v])
        return [u for u in self.variables if u in r]

    def exo_parents(self, v: str) -> list:
        r = refs(self.equations[v])
        return [u for u in self.noise.names if u in r]

    @cached_property
    def order(self) -> tuple:
        return tuple(validate(self))

    def describe(self) -> str:
        return "\n".join(f"{v} = {to_str(self.equations[v])}" for v in self.variables)


def make_model(
    noise: NoiseSpace,
    equations: Sequence[str] | Mapping[str, Expr],
    treatment: str = "T",
    covariates: Sequence[str] = ("X",),
    outcomes: Sequence[str] = ("Y",),
    treatment_support: Sequence[int] = (0, 1),
    params: Mapping[str, float] | None = None,
) -> ScmModel:
    """Build a model from ``"NAME = expr"`` strings (or a name→Expr mapping)."""
    if isinstance(equations, Mapping):
        eqs = dict(equations)
        names = list(eqs)
    else:
        eqs, names = {}, []
        for src in equations:
            name, e = parse_equation(src, params)
            if name in eqs:
                raise SpecError(f"duplicate equation for {name!r}")
            eqs[name] = e
            names.append(name)
    return ScmModel(tuple(names), eqs, noise, treatment, tuple(covariates), tuple(outcomes),
                    tuple(treatment_support))


# graph ---------------------------------------------------------------------

def graph(model: ScmModel) -> CausalGraph:
    """Directed graph whose edges mirror expression references (noises included)."""
    edges = []
    for v in model.variables:
        for u in model.noise.names + model.variables:
            if u in refs(model.equations[v]):
                edges.append((u, v))
    return CausalGraph(tuple(model.noise.names + model.variables), tuple(edges))


def _endo_graph(model: ScmModel) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(model.variables)
    for v in model.variables:
        for u in model.endo_parents(v):
            g.add_edge(u, v)
    return g


def _check_references(model: ScmModel):
    known = set(model.variables) | set(model.noise.names)
    for v in model.variables:
        for name in sorted(refs(model.equations[v])):
            if name not in known:
                raise UnknownReference(name, f"equation of {v}")


def validate(model: ScmModel) -> list:
    """Topological order with declaration-order tie-breaking.

    Raises:
        UnknownReference: an equation names an undefined variable or noise.
        CyclicGraph: the endogenous graph has a cycle (``err.cycle`` is a witness).
    """
    _check_references(model)
    g = _endo_graph(model)
    rank = {v: i for i, v in enumerate(model.variables)}
    try:
        order = list(nx.lexicographical_topological_sort(g, key=rank.__getitem__))
    except nx.NetworkXUnfeasible:
        raise CyclicGraph(_witness_cycle(g, model.variables)) from None
    _check_tables(model)
    _check_treatment(model, order)
    return order


def _witness_cycle(g: nx.DiGraph, declared) -> list:
    for v in declared:
        try:
            edges = nx.find_cycle(g, source=v)
        except nx.NetworkXNoCycle:
            continue
        cyc = [u for u, _ in edges]
        k = min(range(len(cyc)), key=lambda i: declared.index(cyc[i]))
        return cyc[k:] + cyc[:k]
    return []


def discrete_names(model: ScmModel) -> set:
    """Noises and variables whose values range over a finite set (structural check)."""
    out = {s.name for s in model.noise.specs if s.is_discrete}
    pending = list(model.variables)
    changed = True
    while changed:
        changed = False
        for v in list(pending):
            if _is_discrete(model.equations[v], out):
                out.add(v)
                pending.remove(v)
                changed = True
    return out


def _is_discrete(e: Expr, known: set) -> bool:
    if isinstance(e, (Const, Indicator, Table)):
        return True
    if isinstance(e, Ref):
        return e.name in known
    return all(_is_discrete(k, known) for k in children(e))


def _check_tables(model: ScmModel):
    disc = discrete_names(model)
    for v in model.variables:
        stack = [model.equations[v]]
        while stack:
            node = stack.pop()
            if isinstance(node, Table):
                for inp in node.inputs:
                    if not _is_discrete(inp, disc):
                        raise SpecError(f"table input {to_str(inp)!r} in {v} is not discrete-valued")
            stack.extend(children(node))


def _check_treatment(model: ScmModel, order):
    """Treatment values must lie in the declared support on reachable inputs."""
    try:
        table = enumerate_noise(model.noise)
        values = table.atoms
    except NotEnumerable:
        values = sample_noise(model.noise, 0, 4096).values
    env = _solve_env(model, values, order)
    t = env[model.treatment]
    ok = np.isin(t, np.array(model.treatment_support, dtype=float))
    if not ok.all():
        bad = float(t[~ok][0])
        raise TreatmentOutOfSupport(
            f"treatment {model.treatment} takes value {bad} outside {list(model.treatment_support)}"
        )


# solving -------------------------------------------------------------------

def _noise_env(model: ScmModel, values: np.ndarray) -> dict:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(model.noise):
        raise ValueError(f"noise values must be (n, {len(model.noise)}), got {values.shape}")
    return {name: values[:, j] for j, name in enumerate(model.noise.names)}


def _solve_env(model: ScmModel, values: np.ndarray, order=None) -> dict:
    env = _noise_env(model, values)
    n = values.shape[0]
    for v in order if order is not None else model.order:
        env[v] = evaluate(model.equations[v], env, n)
    return env


def solve_env(model: ScmModel, values) -> dict:
    """Noise and variable values by name, for raw noise values ``(n, k)`` or a batch."""
    if isinstance(values, NoiseBatch):
        values = values.values
    return _solve_env(model, np.asarray(values, dtype=float))


def solve(model: ScmModel, batch) -> np.ndarray:
    """Solve every draw; columns follow ``model.variables``.

    Raises:
        MissingTableEntry: a table lookup was evaluated outside its keys.
    """
    env = solve_env(model, batch)
    return np.column_stack([env[v] for v in model.variables])


# interventions --------------------------------------------------------------

def apply_do(model: ScmModel, iv) -> ScmModel:
    """Replace intervened equations by constants; the noise space object is kept."""
    iv = as_intervention(iv)
    eqs = dict(model.equations)
    for v, val in iv.assignments.items():
        if v not in eqs:
            raise UnknownReference(v, "intervention")
        if v == model.treatment and val not in model.treatment_support:
            raise InvalidIntervention(
                f"do({v}={val}) outside treatment support {list(model.treatment_support)}"
            )
        eqs[v] = Const(val)
    return ScmModel(model.variables, eqs, model.noise, model.treatment, model.covariates,
                    model.outcomes, model.treatment_support)


def outcome_equation_intervention(model: ScmModel, t) -> ScmModel:
    """Set the treatment to ``t`` only inside the outcome equations."""
    if t not in model.treatment_support:
        raise InvalidIntervention(f"t={t} outside treatment support")
    eqs = dict(model.equations)
    for y in model.outcomes:
        eqs[y] = substitute(eqs[y], {model.treatment: Const(float(t))})
    return ScmModel(model.variables, eqs, model.noise, model.treatment, model.covariates,
                    model.outcomes, model.treatment_support)


@dataclass(frozen=True, eq=False)
class VectorizedMap:
    """Deterministic map from (outside inputs, noises) to the values of ``outputs``.

    ``inputs`` are the endogenous parents of the output block that lie outside
    it, ``noises`` its exogenous parents, ``outputs`` the block in solve order.
    """

    model: ScmModel
    inputs: tuple
    noises: tuple
    outputs: tuple

    def __call__(self, inputs: Mapping[str, object], noise) -> dict:
        if isinstance(noise, NoiseBatch):
            noise = noise.values
        if isinstance(noise, np.ndarray):
            env = _noise_env(self.model, noise)
            n = noise.shape[0]
        else:
            env = {k: np.asarray(v, dtype=float) for k, v in noise.items()}
            n = max((np.size(v) for v in env.values()), default=1)
        for name in self.inputs:
            if name not in inputs:
                raise UnknownReference(name, "vectorized inputs")
            env[name] = np.broadcast_to(np.asarray(inputs[name], dtype=float), (n,))
            n = max(n, env[name].shape[0])
        out = {}
        for v in self.outputs:
            env[v] = evaluate(self.model.equations[v], env, n)
            out[v] = env[v]
        return out

    def symbolic(self) -> dict:
        """Output expressions after recursive substitution along the solve order."""
        done = {}
        for v in self.outputs:
            done[v] = substitute(self.model.equations[v], done)
        return done


def vectorize(model: ScmModel, I) -> VectorizedMap:
    """The map computing the complement of ``I`` from its outside parents and noises."""
    I = set(I)
    for v in I:
        if v not in model.variables:
            raise UnknownReference(v, "vectorize")
    outputs = tuple(v for v in model.order if v not in I)
    inputs = {u for v in outputs for u in model.endo_parents(v) if u not in outputs}
    noises = {u for v in outputs for u in model.exo_parents(v)}
    return VectorizedMap(
        model,
        tuple(v for v in model.variables if v in inputs),
        tuple(u for u in model.noise.names if u in noises),
        outputs,
    )


# assumptions ----------------------------------------------------------------

def check_assumptions(model: ScmModel) -> AssumptionFlags:
    """Structural checks on the graph; numeric constants never matter."""
    _check_references(model)
    g = _endo_graph(model)
    acyclic = nx.is_directed_acyclic_graph(g)
    pre = [model.treatment, *model.covariates]
    a5 = not any(y in model.endo_parents(v) for v in pre for y in model.outcomes)
    exo_y = {u for y in model.outcomes for u in model.exo_parents(y)}
    exo_tx = {u for v in pre for u in model.exo_parents(v)}
    a6 = not (exo_y & exo_tx)
    a7p = not any(model.treatment in model.endo_parents(x) for x in model.covariates)
    reach = nx.descendants(g, model.treatment) if model.treatment in g else set()
    a7d = not any(x in reach for x in model.covariates)
    return AssumptionFlags(acyclic, a5, a6, a7p, a7d)


def warn_unless(cond: bool, message: str):
    if not cond:
        from .errors import AssumptionWarning

        warnings.warn(message, AssumptionWarning, stacklevel=3)
