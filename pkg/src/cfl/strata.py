"""Equal-mass covariate binning for Monte Carlo conditional procedures."""

from __future__ import annotations

import math

import numpy as np


def default_bins(n: int, d: int) -> int:
    """``ceil(n^(1/(d+2)))`` bins per covariate; ``ceil(n^(1/3))`` for one covariate."""
    return max(1, math.ceil(n ** (1.0 / (d + 2)) - 1e-9))


class Binning:
    """Per-coordinate bins fitted on one sample and applicable to others.

    Coordinates with at most ``value_cap`` (default ``n_bins``) distinct
    values are binned by value; the rest get equal-mass quantile bins.
    """

    def __init__(self, x: np.ndarray, n_bins: int | None = None, value_cap: int | None = None):
        x = _as_2d(x)
        n, d = x.shape
        k = n_bins or default_bins(n, max(d, 1))
        cap = max(k, value_cap or 0)
        self.parts = []
        for j in range(d):
            uniq = np.unique(x[:, j])
            if uniq.size <= cap:
                self.parts.append(("value", uniq))
            else:
                self.parts.append(("edges", np.quantile(x[:, j], np.linspace(0, 1, k + 1)[1:-1])))
        self.sizes = [p.size if kind == "value" else p.size + 1 for kind, p in self.parts]

    def ids(self, x: np.ndarray) -> np.ndarray:
        """Cell id per row; -1 for rows whose discrete value was never seen."""
        x = _as_2d(x)
        out = np.zeros(x.shape[0], dtype=np.int64)
        bad = np.zeros(x.shape[0], dtype=bool)
        for j, ((kind, p), size) in enumerate(zip(self.parts, self.sizes)):
            col = x[:, j]
            if kind == "value":
                code = np.clip(np.searchsorted(p, col), 0, p.size - 1)
                bad |= p[code] != col
            else:
                code = np.searchsorted(p, col, side="right")
            out = out * size + code
        out[bad] = -1
        return out


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def cells(x: np.ndarray, n_bins: int | None = None, value_cap: int | None = None) -> np.ndarray:
    """Compact integer cell id per row (0, 1, ...) from a Binning fitted on ``x``."""
    x = _as_2d(x)
    if x.shape[1] == 0:
        return np.zeros(x.shape[0], dtype=np.int64)
    _, ids = np.unique(Binning(x, n_bins, value_cap).ids(x), return_inverse=True)
    return ids.ravel()
