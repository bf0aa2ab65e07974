"""Segmentation scores, Monte Carlo summaries and chain diagnostics."""

import itertools
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from src.errors import LabelRangeError, ParameterDomainError, ShapeMismatchError

CUBIC_FORMS = ("none", "printed", "corrected")
MIN_PSRF_LENGTH = 10


@dataclass
class SegScore:
    dsc: List[float]
    error: float
    confusion: List[Dict[str, int]]
    permutation: Tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.dsc)

    def to_record(self) -> Dict[str, object]:
        """Plain dict with 1-based class keys, for JSON records."""
        return {
            "confusion": {str(c + 1): self.confusion[c] for c in range(self.k)},
            "dsc": {str(c + 1): round(float(d), 6) for c, d in enumerate(self.dsc)},
            "error_percent": round(float(self.error), 6),
            "k": self.k,
            "permutation": [p + 1 for p in self.permutation],
        }


def confusion_matrix(pred: np.ndarray, truth: np.ndarray, k: int) -> np.ndarray:
    """C[t, p] = number of pixels with true label t predicted as p (0-based)."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ShapeMismatchError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    for name, mask in (("prediction", pred), ("ground truth", truth)):
        if mask.size and (mask.min() < 0 or mask.max() >= k):
            raise LabelRangeError(f"{name} has labels outside 1..{k}")
    flat = truth.astype(np.int64).ravel() * k + pred.astype(np.int64).ravel()
    return np.bincount(flat, minlength=k * k).reshape(k, k)


def best_permutation(conf: np.ndarray, max_k: int = 8) -> Tuple[int, ...]:
    """perm[p] = true class assigned to predicted class p, maximising agreement.

    Exhaustive up to `max_k` classes (first maximiser in lexicographic order),
    Hungarian assignment beyond.
    """
    k = conf.shape[0]
    if k > max_k:
        rows, cols = linear_sum_assignment(-conf)
        perm = [0] * k
        for t, p in zip(rows, cols):
            perm[p] = int(t)
        return tuple(perm)
    best, best_hits = None, -1
    for perm in itertools.permutations(range(k)):
        hits = sum(conf[perm[p], p] for p in range(k))
        if hits > best_hits:
            best, best_hits = perm, hits
    return tuple(best)


def score_segmentation(pred: np.ndarray, truth: np.ndarray, k: int, max_k: int = 8) -> SegScore:
    """Per-class DSC and overall error (%) under the best label permutation."""
    conf = confusion_matrix(pred, truth, k)
    perm = best_permutation(conf, max_k)
    aligned = np.zeros_like(conf)
    for p in range(k):
        aligned[:, perm[p]] += conf[:, p]
    total = int(conf.sum())
    dsc, confusion = [], []
    for c in range(k):
        tp = int(aligned[c, c])
        fp = int(aligned[:, c].sum()) - tp
        fn = int(aligned[c, :].sum()) - tp
        tn = total - tp - fp - fn
        denom = 2 * tp + fp + fn
        dsc.append(2.0 * tp / denom if denom else 1.0)
        confusion.append({"fn": fn, "fp": fp, "tn": tn, "tp": tp})
    error = 100.0 * (total - int(np.trace(aligned))) / total if total else 0.0
    return SegScore(dsc=dsc, error=error, confusion=confusion, permutation=perm)


def apply_permutation(pred: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    return np.asarray(perm)[pred]


class MonteCarloStats(NamedTuple):
    mean: float
    std: float
    rmse: float


def monte_carlo_stats(estimates: Sequence[float], truth: float) -> MonteCarloStats:
    """Mean, sample STD (n - 1) and RMSE against `truth`."""
    values = np.asarray(estimates, dtype=float)
    if values.size == 0:
        raise ValueError("no estimates to summarise")
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    rmse = float(np.sqrt(np.mean((values - truth) ** 2)))
    return MonteCarloStats(mean=float(values.mean()), std=std, rmse=rmse)


def psrf(chains: Sequence[Sequence[float]]) -> float:
    """Gelman-Rubin potential scale reduction factor of M chains."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2:
        raise ValueError("PSRF needs at least two chains")
    m, n = chains.shape
    if n < MIN_PSRF_LENGTH:
        raise ValueError(f"PSRF needs chains of length >= {MIN_PSRF_LENGTH}, got {n}")
    within = np.mean(np.var(chains, axis=1, ddof=1))
    between = n * np.var(chains.mean(axis=1), ddof=1)
    if within == 0:
        return 1.0 if between == 0 else float("inf")
    pooled = (n - 1) / n * within + between / n
    return float(np.sqrt(pooled / within))


@dataclass
class ChainDiag:
    psrf: Dict[str, float]
    n_chains: int
    length: int

    def converged(self, threshold: float = 1.2) -> bool:
        return all(v < threshold for v in self.psrf.values())


def chain_diagnostics(traces: Dict[str, np.ndarray]) -> ChainDiag:
    """PSRF per named trace; each trace is (chains, iterations)."""
    shapes = {np.shape(t) for t in traces.values()}
    if len(shapes) != 1:
        raise ShapeMismatchError("all traces must share one (chains, iterations) shape")
    n_chains, length = shapes.pop()
    return ChainDiag(psrf={name: psrf(t) for name, t in traces.items()}, n_chains=n_chains, length=length)


def spectrum_curve(c1: float, c2: float, c3: Optional[float] = None, form: str = "none", h: Optional[np.ndarray] = None, n_points: int = 201) -> Tuple[np.ndarray, np.ndarray]:
    """Log-cumulant expansion of D(h), sampled where the parabola is >= 0.

    `form` adds the cubic term: `printed` uses (h - c2) / c2, `corrected`
    uses (h - c1) / c2. Display only.
    """
    if c2 >= 0:
        raise ParameterDomainError(f"spectrum expansion needs c2 < 0, got {c2}")
    if form not in CUBIC_FORMS:
        raise ValueError(f"cubic form must be one of {CUBIC_FORMS}")
    if h is None:
        half = 2.0 * np.sqrt(-c2)
        h = np.linspace(c1 - half, c1 + half, n_points)
    h = np.asarray(h, dtype=float)
    d = 2.0 + c2 / 2.0 * ((h - c1) / c2) ** 2
    if form != "none" and c3:
        centre = c2 if form == "printed" else c1
        d = d + c3 / 6.0 * ((h - centre) / c2) ** 3
    return h, d
