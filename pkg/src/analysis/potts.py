"""Multiscale Potts prior over a label pyramid.

Labels are 0-based class indices. Scale j + 1 is the coarser parent of scale
j, and every grid wraps periodically. Only conditionals are evaluated; the
joint normalising constant never is.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from src.errors import LabelRangeError, NumericError, ScaleRangeError

DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass
class LabelPyramid:
    grids: Dict[int, np.ndarray]
    k: int

    def __post_init__(self):
        scales = sorted(self.grids)
        for j in scales:
            grid = self.grids[j]
            if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
                raise ScaleRangeError(f"label grid at j={j} is not square")
            if grid.size and (grid.min() < 0 or grid.max() >= self.k):
                raise LabelRangeError(f"labels at j={j} outside 0..{self.k - 1}")
        for lo, hi in zip(scales, scales[1:]):
            if self.grids[lo].shape[0] != 2 * self.grids[hi].shape[0]:
                raise ScaleRangeError(f"grid at j={hi} must be half the side of j={lo}")

    @property
    def scales(self) -> List[int]:
        return sorted(self.grids)

    @property
    def j1(self) -> int:
        return self.scales[0]

    @property
    def j2(self) -> int:
        return self.scales[-1]

    def copy(self) -> "LabelPyramid":
        return LabelPyramid({j: g.copy() for j, g in self.grids.items()}, self.k)

    def n_sites(self) -> int:
        return sum(g.size for g in self.grids.values())

    def one_based(self, j: int) -> np.ndarray:
        return self.grids[j] + 1


@dataclass
class GranularityVector:
    beta_s: float
    beta_xy: Dict[int, float]
    q: float = 10.0

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("Q must be positive")
        self.clip()

    @classmethod
    def constant(cls, scales: Iterable[int], value: float, q: float = 10.0) -> "GranularityVector":
        return cls(beta_s=value, beta_xy={j: value for j in scales}, q=q)

    def clip(self) -> None:
        self.beta_s = float(np.clip(self.beta_s, 0.0, self.q))
        self.beta_xy = {j: float(np.clip(b, 0.0, self.q)) for j, b in self.beta_xy.items()}

    def copy(self) -> "GranularityVector":
        return GranularityVector(self.beta_s, dict(self.beta_xy), self.q)

    def as_dict(self) -> Dict[str, float]:
        out = {"beta_s": self.beta_s}
        out.update({f"beta_xy_{j}": b for j, b in sorted(self.beta_xy.items())})
        return out


@dataclass
class MultiscaleGraph:
    """Site neighbourhoods of a dyadic pyramid; sides keyed by scale."""

    sides: Dict[int, int]
    _parity: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def neighbors(self, j: int, n: Tuple[int, int]) -> List[Tuple[int, int]]:
        size = self.sides[j]
        return [((n[0] + a) % size, (n[1] + b) % size) for a, b in DIRECTIONS]

    def parent(self, j: int, n: Tuple[int, int]) -> Optional[Tuple[int, int]]:
        if j + 1 not in self.sides:
            return None
        return (n[0] // 2, n[1] // 2)

    def children(self, j: int, n: Tuple[int, int]) -> List[Tuple[int, int]]:
        if j - 1 not in self.sides:
            return []
        return [(2 * n[0] + a, 2 * n[1] + b) for a in (0, 1) for b in (0, 1)]

    def parity(self, j: int) -> np.ndarray:
        """Integer grid of site colours (0 or 1)."""
        if j not in self._parity:
            size = self.sides[j]
            rows, cols = np.indices((size, size))
            self._parity[j] = (rows + cols) % 2
        return self._parity[j]


def graph_of(z: LabelPyramid) -> MultiscaleGraph:
    return MultiscaleGraph({j: g.shape[0] for j, g in z.grids.items()})


def upsample(grid: np.ndarray) -> np.ndarray:
    """Copy every site into the 2 x 2 block of children it covers."""
    return np.repeat(np.repeat(grid, 2, axis=0), 2, axis=1)


def spatial_count(z_j: np.ndarray) -> int:
    """Ordered (site, neighbour) agreements over the 4-neighbourhood."""
    return int(sum(np.sum(z_j == np.roll(z_j, shift, axis=(0, 1))) for shift in DIRECTIONS))


def spatial_potential(z_j: np.ndarray, beta_xy: float) -> float:
    return beta_xy * spatial_count(z_j)


def scale_count(z_j: np.ndarray, z_finer: Optional[np.ndarray] = None, z_coarser: Optional[np.ndarray] = None) -> int:
    """Agreements of every site at scale j with its parent and its 4 children."""
    count = 0
    if z_coarser is not None:
        count += int(np.sum(z_j == upsample(z_coarser)))
    if z_finer is not None:
        count += int(np.sum(z_finer == upsample(z_j)))
    return count


def scale_potential(z_j: np.ndarray, z_finer: Optional[np.ndarray], z_coarser: Optional[np.ndarray], beta_s: float) -> float:
    return beta_s * scale_count(z_j, z_finer, z_coarser)


def _adjacent(z: LabelPyramid, j: int) -> Tuple[Optional[np.ndarray], Optional[np.ndarray]]:
    return z.grids.get(j - 1), z.grids.get(j + 1)


def pyramid_counts(z: LabelPyramid) -> Tuple[Dict[int, int], int]:
    """Per-scale spatial counts and the total scale count of a pyramid."""
    spatial = {j: spatial_count(z.grids[j]) for j in z.scales}
    scale = sum(scale_count(z.grids[j], *_adjacent(z, j)) for j in z.scales)
    return spatial, scale


def prior_log_potential(z: LabelPyramid, j: int, beta: GranularityVector) -> np.ndarray:
    """Unnormalised log prior of every class at every site of scale j, (K, N_j, N_j)."""
    grid = z.grids[j]
    finer, coarser = _adjacent(z, j)
    n_j = grid.shape[0]
    out = np.zeros((z.k,) + grid.shape)
    for c in range(z.k):
        same = grid == c
        if n_j > 1:
            out[c] = beta.beta_xy[j] * sum(np.roll(same, shift, axis=(0, 1)) for shift in DIRECTIONS)
        if coarser is not None:
            out[c] += beta.beta_s * upsample(coarser == c)
        if finer is not None:
            out[c] += beta.beta_s * (finer == c).reshape(n_j, 2, n_j, 2).sum(axis=(1, 3))
    return out


def _normalise(log_terms: np.ndarray) -> np.ndarray:
    if np.any(np.isnan(log_terms)) or np.any(log_terms == np.inf):
        raise NumericError("label conditional has undefined log terms")
    norm = logsumexp(log_terms, axis=0, keepdims=True)
    if not np.all(np.isfinite(norm)):
        raise NumericError("label conditional underflowed for every class")
    return np.exp(log_terms - norm)


def conditional_probabilities(z: LabelPyramid, j: int, beta: GranularityVector, data: Optional[np.ndarray] = None) -> np.ndarray:
    """Label conditionals of all sites at scale j given the rest, (K, N_j, N_j)."""
    log_terms = prior_log_potential(z, j, beta)
    if data is not None:
        log_terms = log_terms + data
    return _normalise(log_terms)


def label_conditional(j: int, n: Tuple[int, int], z: LabelPyramid, beta: GranularityVector, data: Optional[np.ndarray] = None) -> np.ndarray:
    """Probability vector over the K classes for the single site (j, n)."""
    graph = graph_of(z)
    log_terms = np.zeros(z.k)
    # a 1 x 1 grid has no spatial neighbours
    for m in graph.neighbors(j, n) if graph.sides[j] > 1 else ():
        log_terms[z.grids[j][m]] += beta.beta_xy[j]
    parent = graph.parent(j, n)
    if parent is not None:
        log_terms[z.grids[j + 1][parent]] += beta.beta_s
    for child in graph.children(j, n):
        log_terms[z.grids[j - 1][child]] += beta.beta_s
    if data is not None:
        log_terms = log_terms + np.asarray(data, dtype=float)
    return _normalise(log_terms)


def draw_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from (K, M) probability columns."""
    cdf = np.cumsum(probs, axis=0)
    u = rng.random(probs.shape[1])
    labels = np.sum(u[None, :] >= cdf, axis=0)
    return np.minimum(labels, probs.shape[0] - 1)


def checkerboard_sweep(z: LabelPyramid, beta: GranularityVector, rng: np.random.Generator, data: Optional[Dict[int, np.ndarray]] = None) -> LabelPyramid:
    """One sweep, coarse to fine, colour 0 then colour 1 at each scale.

    Sites of one colour share no spatial edge, so each colour class is drawn
    in a single vectorised step. `data` maps scale -> (K, N_j, N_j) data
    log-densities; without it the sweep samples the prior alone.
    """
    out = z.copy()
    graph = graph_of(out)
    for j in reversed(out.scales):
        parity = graph.parity(j)
        for colour in (0, 1):
            sites = parity == colour
            probs = conditional_probabilities(out, j, beta, None if data is None else data[j])
            out.grids[j][sites] = draw_categorical(probs[:, sites], rng)
    return out
