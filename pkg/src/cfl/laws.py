"""Represented probability laws and the engine selector."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Engine(str, Enum):
    """Evaluation backend: exact enumeration, Gaussian-mixture algebra, or Monte Carlo."""

    EXACT = "exact"
    GAUSSIAN = "gaussian"
    MONTE_CARLO = "mc"


_ALIASES = {
    "exact": Engine.EXACT,
    "exactdiscrete": Engine.EXACT,
    "gaussian": Engine.GAUSSIAN,
    "lineargaussian": Engine.GAUSSIAN,
    "linear": Engine.GAUSSIAN,
    "mc": Engine.MONTE_CARLO,
    "montecarlo": Engine.MONTE_CARLO,
}


def as_engine(x) -> Engine:
    if isinstance(x, Engine):
        return x
    key = str(x).replace("_", "").replace("-", "").lower()
    if key not in _ALIASES:
        raise ValueError(f"unknown engine {x!r}; choose exact, gaussian or mc")
    return _ALIASES[key]


def _labels(labels, d):
    labels = tuple(labels) if labels else tuple(f"v{i}" for i in range(d))
    if len(labels) != d:
        raise ValueError(f"{len(labels)} labels for dimension {d}")
    return labels


@dataclass(eq=False)
class ExactTable:
    """Finite-support law: ``atoms[i]`` has probability ``probs[i]``; rows are distinct."""

    atoms: np.ndarray
    probs: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float).reshape(len(self.probs), -1)
        self.probs = np.asarray(self.probs, dtype=float)
        self.labels = _labels(self.labels, self.atoms.shape[1])

    @classmethod
    def from_rows(cls, rows, probs, labels=()) -> "ExactTable":
        """Merge identical rows and drop zero-probability ones."""
        rows = np.asarray(rows, dtype=float)
        probs = np.asarray(probs, dtype=float)
        keep = probs > 0
        rows, probs = rows[keep], probs[keep]
        if rows.shape[0] == 0:
            return cls(np.empty((0, rows.shape[1] if rows.ndim == 2 else 0)), np.empty(0), labels)
        uniq, inv = np.unique(rows, axis=0, return_inverse=True)
        merged = np.bincount(inv.ravel(), weights=probs, minlength=uniq.shape[0])
        return cls(uniq, merged, labels)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def mean(self) -> np.ndarray:
        return self.probs @ self.atoms

    def cov(self) -> np.ndarray:
        c = self.atoms - self.mean()
        return (c * self.probs[:, None]).T @ c

    def marginal(self, cols) -> "ExactTable":
        cols = list(cols)
        return ExactTable.from_rows(self.atoms[:, cols], self.probs, [self.labels[c] for c in cols])

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        idx = gen.choice(len(self.probs), size=n, p=self.probs / self.probs.sum())
        return self.atoms[idx]


@dataclass(eq=False)
class GaussianMixture:
    """Finite mixture of (possibly degenerate) Gaussians."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        c = len(self.weights)
        self.means = np.asarray(self.means, dtype=float).reshape(c, -1)
        d = self.means.shape[1]
        self.covs = np.asarray(self.covs, dtype=float).reshape(c, d, d)
        self.covs = 0.5 * (self.covs + np.swapaxes(self.covs, 1, 2))
        self.labels = _labels(self.labels, d)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def cov(self) -> np.ndarray:
        m = self.mean()
        dev = self.means - m
        within = np.einsum("c,cij->ij", self.weights, self.covs)
        return within + (dev * self.weights[:, None]).T @ dev

    def marginal(self, cols) -> "GaussianMixture":
        cols = list(cols)
        return GaussianMixture(
            self.weights,
            self.means[:, cols],
            self.covs[:, cols][:, :, cols],
            [self.labels[c] for c in cols],
        )

    def canonical(self, tol: float = 1e-9) -> "GaussianMixture":
        """Merge components with equal mean and covariance; drop zero weights."""
        w, mu, cv = [], [], []
        for k in np.flatnonzero(self.weights > 0):
            for j in range(len(w)):
                if _close(mu[j], self.means[k], tol) and _close(cv[j], self.covs[k], tol):
                    w[j] += self.weights[k]
                    break
            else:
                w.append(float(self.weights[k]))
                mu.append(self.means[k])
                cv.append(self.covs[k])
        return GaussianMixture(np.array(w), np.array(mu), np.array(cv), self.labels)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        comp = gen.choice(len(self.weights), size=n, p=self.weights / self.weights.sum())
        out = np.empty((n, self.dim))
        for k in range(len(self.weights)):
            idx = np.flatnonzero(comp == k)
            if idx.size == 0:
                continue
            vals, vecs = np.linalg.eigh(self.covs[k])
            root = vecs * np.sqrt(np.clip(vals, 0, None))
            z = gen.standard_normal((idx.size, self.dim))
            out[idx] = self.means[k] + z @ root.T
        return out


def _close(a, b, tol):
    return np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0) <= tol


@dataclass(eq=False)
class Empirical:
    """Sample-based law with provenance.

    Attributes:
        mean_se: optional override of the standard error of the mean, used when
            samples are not independent draws (e.g. stratum resampling).
    """

    samples: np.ndarray
    labels: tuple = ()
    seed: int | None = None
    generator: str = ""
    mean_se: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]
        self.labels = _labels(self.labels, self.samples.shape[1])

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def se(self) -> np.ndarray:
        if self.mean_se is not None:
            return np.asarray(self.mean_se, dtype=float)
        return self.samples.std(axis=0, ddof=1) / np.sqrt(self.n)

    def marginal(self, cols) -> "Empirical":
        cols = list(cols)
        se = None if self.mean_se is None else np.asarray(self.mean_se)[cols]
        return Empirical(self.samples[:, cols], [self.labels[c] for c in cols], self.seed,
                         self.generator, se)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        if n == self.n:
            return self.samples
        return self.samples[gen.choice(self.n, size=n, replace=True)]


Law = ExactTable | GaussianMixture | Empirical


def gm_discrepancy(a: GaussianMixture, b: GaussianMixture, tol: float = 1e-9) -> float:
    """Half the weight mass left unmatched between canonical component multisets.

    Finite Gaussian mixtures are identifiable, so the laws coincide exactly
    when this is zero. Components match when means and covariances agree
    within ``tol`` (relative to their scale).
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension {a.dim} vs {b.dim}")
    ca, cb = a.canonical(tol), b.canonical(tol)
    used = np.zeros(len(cb.weights), dtype=bool)
    total = 0.0
    for k in range(len(ca.weights)):
        hit = None
        for j in np.flatnonzero(~used):
            scale = max(1.0, np.abs(ca.means[k]).max(initial=0), np.abs(ca.covs[k]).max(initial=0))
            if _close(ca.means[k], cb.means[j], tol * scale) and _close(ca.covs[k], cb.covs[j], tol * scale):
                hit = j
                break
        if hit is None:
            total += ca.weights[k]
        else:
            used[hit] = True
            total += abs(ca.weights[k] - cb.weights[hit])
    total += cb.weights[~used].sum()
    return 0.5 * float(total)


def tv_distance(a: ExactTable, b: ExactTable, tol: float = 1e-12) -> float:
    """Total variation between finite laws; atoms closer than ``tol`` are identified."""
    if a.dim != b.dim:
        raise ValueError(f"dimension {a.dim} vs {b.dim}")
    rows = np.vstack([a.atoms, b.atoms])
    w = np.r_[a.probs, -b.probs]
    if rows.shape[0] == 0:
        return 0.0
    key = np.round(rows / tol) if tol > 0 else rows
    _, inv = np.unique(key, axis=0, return_inverse=True)
    diff = np.bincount(inv.ravel(), weights=w)
    return 0.5 * float(np.abs(diff).sum())
