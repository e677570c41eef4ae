"""Coupled worlds: a factual model and its intervened copies on one noise draw.

A reference ``V[T=1]`` (or ``V[T=1,X=0.5]``) names variable ``V`` in the world
where the bracketed assignments are imposed by a do-intervention. All worlds
share the factual noise values.
"""

from __future__ import annotations

import re
from typing import Mapping

import numpy as np

from .errors import UnknownReference
from .expr import Expr, _num, evaluate, refs
from .scm import ScmModel, _noise_env, apply_do

_CF = re.compile(r"^(\w+)\[([^\]]+)\]$")


def split_ref(name: str):
    """``"Y[T=1]"`` -> ``("Y", "T=1")``; plain names -> ``(name, None)``."""
    m = _CF.match(name)
    if not m:
        return name, None
    return m.group(1), m.group(2)


def parse_label(label: str) -> dict:
    out = {}
    for part in label.split(","):
        k, v = part.split("=")
        out[k.strip()] = float(v)
    return out


def world_label(assignments: Mapping[str, float]) -> str | None:
    if not assignments:
        return None
    return ",".join(f"{k}={_num(float(v))}" for k, v in assignments.items())


def world_ref(var: str, assignments: Mapping[str, float]) -> str:
    label = world_label(assignments)
    return var if label is None else f"{var}[{label}]"


class Worlds:
    """The factual model plus lazily built intervened copies keyed by label."""

    def __init__(self, base: ScmModel):
        self.base = base
        self._cache = {None: base}

    def model(self, label) -> ScmModel:
        if label not in self._cache:
            self._cache[label] = apply_do(self.base, parse_label(label))
        return self._cache[label]

    def check(self, e: Expr, extra=()):
        """Raise UnknownReference unless every name in ``e`` resolves."""
        known = set(self.base.variables) | set(self.base.noise.names) | set(extra)
        for name in refs(e):
            var, label = split_ref(name)
            if label is None and name in known:
                continue
            if label is not None and var in self.base.variables:
                self.model(label)
                continue
            raise UnknownReference(name, "expression")


class WorldEval:
    """Numeric values of names and expressions across worlds, for fixed noise values."""

    def __init__(self, worlds: Worlds, values: np.ndarray):
        self.worlds = worlds
        self.values = np.asarray(values, dtype=float)
        self.n = self.values.shape[0]
        self._noise = _noise_env(worlds.base, self.values)
        self._solved = {}

    def world(self, label) -> dict:
        if label not in self._solved:
            model = self.worlds.model(label)
            env = dict(self._noise)
            for v in model.order:
                env[v] = evaluate(model.equations[v], env, self.n)
            self._solved[label] = env
        return self._solved[label]

    def ref(self, name: str) -> np.ndarray:
        if name in self._noise:
            return self._noise[name]
        var, label = split_ref(name)
        env = self.world(label)
        if var not in env:
            raise UnknownReference(name, "world evaluation")
        return env[var]

    def expr(self, e: Expr, extra: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
        env = {name: self.ref(name) for name in refs(e) if not (extra and name in extra)}
        if extra:
            env.update(extra)
        return evaluate(e, env, self.n)
