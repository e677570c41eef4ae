"""Exogenous noise specifications, seeded sampling and exact enumeration.

Every noise coordinate is sampled from its own generator. The generator for
coordinate ``j`` under seed ``s`` is ``PCG64(SeedSequence(s, spawn_key=(j,)))``,
so ``(seed, index)`` alone fixes the stream and adding draws never perturbs
other coordinates. Fixed sampling algorithms (numpy ``Generator``):

* Gaussian: ``Generator.standard_normal`` (ziggurat), then ``mean + sd * z``.
* Uniform: ``a + (b - a) * Generator.random``.
* Bernoulli and Discrete: inverse CDF on ``Generator.random``.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import NotEnumerable, SpecError

PROB_TOL = 1e-12


@dataclass(frozen=True)
class PointMass:
    value: float

    def support(self):
        return [(float(self.value), 1.0)]

    @property
    def mean(self):
        return float(self.value)

    @property
    def variance(self):
        return 0.0


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 or math.isnan(self.p):
            raise SpecError(f"Bernoulli p must lie in [0, 1], got {self.p}")

    def support(self):
        return [(v, q) for v, q in ((0.0, 1.0 - self.p), (1.0, float(self.p))) if q > 0]

    @property
    def mean(self):
        return float(self.p)

    @property
    def variance(self):
        return float(self.p * (1 - self.p))


@dataclass(frozen=True)
class Discrete:
    """Finite law given as ``((value, prob), ...)`` with distinct values."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(v), float(p)) for v, p in self.atoms)
        if not atoms:
            raise SpecError("Discrete law needs at least one atom")
        values = [v for v, _ in atoms]
        if len(set(values)) != len(values):
            raise SpecError("Discrete atoms must have distinct values")
        probs = np.array([p for _, p in atoms])
        if np.any(probs < 0) or np.any(~np.isfinite(probs)):
            raise SpecError("Discrete probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise SpecError(f"Discrete probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)

    def support(self):
        return [(v, p) for v, p in self.atoms if p > 0]

    @property
    def mean(self):
        return float(sum(v * p for v, p in self.atoms))

    @property
    def variance(self):
        m = self.mean
        return float(sum(p * (v - m) ** 2 for v, p in self.atoms))


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise SpecError(f"Uniform requires a < b, got a={self.a}, b={self.b}")

    @property
    def mean(self):
        return 0.5 * (self.a + self.b)

    @property
    def variance(self):
        return (self.b - self.a) ** 2 / 12.0


@dataclass(frozen=True)
class Gaussian:
    mean: float
    var: float

    def __post_init__(self):
        if not self.var >= 0:
            raise SpecError(f"Gaussian variance must be >= 0, got {self.var}")

    @property
    def variance(self):
        return float(self.var)


Distribution = Union[PointMass, Bernoulli, Discrete, Uniform, Gaussian]
DISCRETE_TYPES = (PointMass, Bernoulli, Discrete)


@dataclass(frozen=True)
class NoiseSpec:
    """A named exogenous noise. ``Gaussian`` with zero variance becomes a point mass."""

    name: str
    dist: Distribution

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.isidentifier():
            raise SpecError(f"noise name must be an identifier, got {self.name!r}")
        if isinstance(self.dist, Gaussian) and self.dist.var == 0:
            object.__setattr__(self, "dist", PointMass(float(self.dist.mean)))

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.dist, DISCRETE_TYPES)


@dataclass(frozen=True)
class NoiseSpace:
    """Ordered collection of mutually independent noises with unique names."""

    specs: tuple

    def __post_init__(self):
        specs = tuple(self.specs)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SpecError(f"duplicate noise names: {dup}")
        object.__setattr__(self, "specs", specs)

    @property
    def names(self) -> tuple:
        return tuple(s.name for s in self.specs)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __getitem__(self, name: str) -> NoiseSpec:
        return self.specs[self.index(name)]

    def __len__(self):
        return len(self.specs)

    @property
    def is_enumerable(self) -> bool:
        return all(s.is_discrete for s in self.specs)

    @property
    def space_id(self) -> str:
        return hashlib.sha1(repr(self.specs).encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class NoiseBatch:
    values: np.ndarray
    seed: int
    space_id: str

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class AtomTable:
    """Exact finite law: row ``i`` of ``atoms`` has probability ``probs[i]``."""

    atoms: np.ndarray
    probs: np.ndarray
    names: tuple = field(default=())

    def __len__(self):
        return len(self.probs)


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def rng(seed: int, *key: int) -> np.random.Generator:
    """Generator keyed by ``seed`` and an integer path ``key``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def split_stream(seed: int, k: int) -> list[int]:
    """Derive ``k`` child seeds; child ``i`` depends only on ``(seed, i)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = []
    for i in range(k):
        words = np.random.SeedSequence(seed, spawn_key=(i,)).generate_state(2, np.uint64)
        out.append(int(words[0]) << 64 | int(words[1]))
    return out


def _sample_dist(dist, gen: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(dist, PointMass):
        return np.full(n, float(dist.value))
    if isinstance(dist, Gaussian):
        return dist.mean + math.sqrt(dist.var) * gen.standard_normal(n)
    if isinstance(dist, Uniform):
        return dist.a + (dist.b - dist.a) * gen.random(n)
    if isinstance(dist, Bernoulli):
        return (gen.random(n) < dist.p).astype(float)
    if isinstance(dist, Discrete):
        values = np.array([v for v, _ in dist.atoms])
        cdf = np.cumsum([p for _, p in dist.atoms])
        idx = np.searchsorted(cdf, gen.random(n) * cdf[-1], side="right")
        return values[np.minimum(idx, len(values) - 1)]
    raise SpecError(f"unsupported distribution {dist!r}")


def sample_noise(space: NoiseSpace, seed: int, n: int) -> NoiseBatch:
    """Draw ``n`` joint realizations of every noise coordinate."""
    if n < 1:
        raise ValueError("n must be >= 1")
    values = np.empty((n, len(space)))
    for j, spec in enumerate(space.specs):
        values[:, j] = _sample_dist(spec.dist, _stream(seed, j), n)
    return NoiseBatch(values, int(seed), space.space_id)


def enumerate_noise(space: NoiseSpace) -> AtomTable:
    """Exact product measure over all-discrete noises.

    Raises:
        NotEnumerable: if any coordinate is Uniform or Gaussian with positive variance.
    """
    supports = []
    for spec in space.specs:
        if not spec.is_discrete:
            raise NotEnumerable(f"noise {spec.name!r} has continuous law {spec.dist!r}")
        supports.append(spec.dist.support())
    rows, probs = [], []
    for combo in itertools.product(*supports):
        rows.append([v for v, _ in combo])
        probs.append(math.prod(p for _, p in combo))
    atoms = np.array(rows, dtype=float).reshape(len(rows), len(space))
    return AtomTable(atoms, np.array(probs), space.names)


_DIST_KEYS = {
    "point": ("value",),
    "bernoulli": ("p",),
    "discrete": ("atoms",),
    "uniform": ("a", "b"),
    "gaussian": ("mean", "var"),
}


def spec_from_dict(d: dict, where: str = "noise") -> NoiseSpec:
    """Build a NoiseSpec from its file form, e.g. ``{"name": "U", "dist": "gaussian", ...}``."""
    from .errors import ParseError

    if not isinstance(d, dict):
        raise ParseError("noise entry must be an object", field=where)
    for key in ("name", "dist"):
        if key not in d:
            raise ParseError(f"missing {key!r}", field=f"{where}.{key}")
    kind = d["dist"]
    if kind not in _DIST_KEYS:
        raise ParseError(f"unknown distribution {kind!r}", field=f"{where}.dist")
    for key in _DIST_KEYS[kind]:
        if key not in d:
            raise ParseError(f"missing {key!r} for {kind} noise", field=f"{where}.{key}")
    extra = set(d) - {"name", "dist", *_DIST_KEYS[kind]}
    if extra:
        raise ParseError(f"unexpected keys {sorted(extra)}", field=where)
    try:
        if kind == "point":
            dist = PointMass(float(d["value"]))
        elif kind == "bernoulli":
            dist = Bernoulli(float(d["p"]))
        elif kind == "discrete":
            dist = Discrete(tuple((float(v), float(p)) for v, p in d["atoms"]))
        elif kind == "uniform":
            dist = Uniform(float(d["a"]), float(d["b"]))
        else:
            dist = Gaussian(float(d["mean"]), float(d["var"]))
        return NoiseSpec(str(d["name"]), dist)
    except SpecError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), field=where) from exc


def spec_to_dict(spec: NoiseSpec) -> dict:
    dist = spec.dist
    if isinstance(dist, PointMass):
        return {"name": spec.name, "dist": "point", "value": dist.value}
    if isinstance(dist, Bernoulli):
        return {"name": spec.name, "dist": "bernoulli", "p": dist.p}
    if isinstance(dist, Discrete):
        return {"name": spec.name, "dist": "discrete", "atoms": [list(a) for a in dist.atoms]}
    if isinstance(dist, Uniform):
        return {"name": spec.name, "dist": "uniform", "a": dist.a, "b": dist.b}
    return {"name": spec.name, "dist": "gaussian", "mean": dist.mean, "var": dist.var}
