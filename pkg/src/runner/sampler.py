"""Building blocks of the Gibbs sampler: initialization, conditionals, estimators."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.cluster import KMeans
from sklearn.preprocessing import StandardScaler

from src.analysis.potts import GranularityVector, LabelPyramid, checkerboard_sweep, pyramid_counts
from src.analysis.transform import LogLeaderPyramid
from src.errors import DegenerateClusteringError, NumericError, ParameterDomainError, ScaleRangeError
from src.utils.config import Hyper

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


@dataclass(frozen=True)
class RegressionEstimate:
    """OLS fit of per-scale log-leader variance against j ln 2."""

    c2: float
    intercept: float
    r2: float
    degenerate: bool = False

    @property
    def theta1(self) -> float:
        return -self.c2


def regress_variances(variances: Sequence[float], scales: Sequence[int]) -> RegressionEstimate:
    """c2 as the least-squares slope of Var[l_j] against j ln 2."""
    y = np.asarray(variances, dtype=float)
    if y.size < 2:
        raise ScaleRangeError("regression needs at least two scales")
    if not np.all(np.isfinite(y)):
        raise NumericError("non-finite log-leader variance")
    x = np.asarray(scales, dtype=float) * LN2
    if np.ptp(y) == 0:
        logger.warning("log-leader variances are constant across scales; c2 set to 0")
        return RegressionEstimate(c2=0.0, intercept=float(y[0]), r2=0.0, degenerate=True)
    xc = x - x.mean()
    slope = float(np.sum(xc * (y - y.mean())) / np.sum(xc ** 2))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    r2 = 1.0 - float(np.sum(resid ** 2) / np.sum((y - y.mean()) ** 2))
    return RegressionEstimate(c2=slope, intercept=intercept, r2=r2)


def regression_estimate_c2(ll: LogLeaderPyramid, j1: Optional[int] = None, j2: Optional[int] = None) -> RegressionEstimate:
    j1 = ll.j1 if j1 is None else j1
    j2 = ll.j2 if j2 is None else j2
    scales = list(range(j1, j2 + 1))
    return regress_variances([np.var(ll.grids[j], ddof=1) for j in scales], scales)


def patch_starts(side: int, size: int, overlap: float) -> np.ndarray:
    """Window origins along one axis; the last window always ends at the border."""
    if side < size:
        raise ScaleRangeError(f"finest analysed grid ({side}) is smaller than a {size}-site patch")
    stride = max(1, int(round(size * (1.0 - overlap))))
    starts = list(range(0, side - size + 1, stride))
    if starts[-1] != side - size:
        starts.append(side - size)
    return np.asarray(starts)


def patch_estimates(ll: LogLeaderPyramid, size: int = 16, overlap: float = 0.75) -> Tuple[np.ndarray, np.ndarray]:
    """theta1 estimate of every patch of the finest analysed grid.

    A patch of `size` sites at scale j1 covers `size >> d` sites at scale j1 + d.
    Returns (estimates of shape (P, P), patch starts).
    """
    starts = patch_starts(ll.side(ll.j1), size, overlap)
    depth = ll.j2 - ll.j1
    if size >> depth < 2:
        raise ScaleRangeError(f"{size}-site patches are too small for {depth + 1} scales")
    variances = []
    for d, j in enumerate(ll.scales):
        w = size >> d
        views = sliding_window_view(ll.grids[j], (w, w))
        sel = views[np.ix_(starts >> d, starts >> d)]
        variances.append(sel.var(axis=(-2, -1), ddof=1))
    v = np.stack(variances, axis=-1)
    x = np.asarray(list(ll.scales), dtype=float) * LN2
    xc = x - x.mean()
    slope = np.sum(xc * (v - v.mean(axis=-1, keepdims=True)), axis=-1) / np.sum(xc ** 2)
    return -slope, starts


def cover_counts(indicator: np.ndarray, size: int) -> np.ndarray:
    """Number of `size` x `size` windows, with origins marked in `indicator`, covering each site."""
    n = indicator.shape[0]
    prefix = np.zeros((n + 1, n + 1))
    prefix[1:, 1:] = indicator.cumsum(axis=0).cumsum(axis=1)
    hi = np.arange(1, n + 1)
    lo = np.maximum(hi - size, 0)
    return prefix[np.ix_(hi, hi)] - prefix[np.ix_(lo, hi)] - prefix[np.ix_(hi, lo)] + prefix[np.ix_(lo, lo)]


def patch_vote(patch_labels: np.ndarray, starts: np.ndarray, size: int, side: int, k: int) -> np.ndarray:
    """Majority label over the patches covering each site (ties to the smallest)."""
    votes = np.zeros((k, side, side))
    for c in range(k):
        marks = np.zeros((side, side))
        marks[np.ix_(starts, starts)] = patch_labels == c
        votes[c] = cover_counts(marks, size)
    return np.argmax(votes, axis=0)


def coarsen_majority(grid: np.ndarray, k: int) -> np.ndarray:
    """Majority over the 4 children of every coarser site (ties to the smallest)."""
    n = grid.shape[0] // 2
    counts = np.stack([(grid == c).reshape(n, 2, n, 2).sum(axis=(1, 3)) for c in range(k)])
    return np.argmax(counts, axis=0)


def pyramid_from_finest(finest: np.ndarray, j1: int, j2: int, k: int) -> LabelPyramid:
    grids = {j1: finest.astype(np.int64)}
    for j in range(j1 + 1, j2 + 1):
        grids[j] = coarsen_majority(grids[j - 1], k)
    return LabelPyramid(grids, k)


def pyramid_from_mask(mask: np.ndarray, j1: int, j2: int, k: int) -> LabelPyramid:
    """Label pyramid of a full-resolution 0-based mask."""
    grid = np.asarray(mask, dtype=np.int64)
    for _ in range(j1):
        grid = coarsen_majority(grid, k)
    return pyramid_from_finest(grid, j1, j2, k)


def _kmeans_1d(values: np.ndarray, k: int, restarts: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """K-means labels ordered by ascending cluster centre."""
    flat = values.reshape(-1, 1)
    if len(np.unique(flat)) < k:
        raise DegenerateClusteringError(f"only {len(np.unique(flat))} distinct patch estimates for K={k}")
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, random_state=seed).fit(flat)
    centers = km.cluster_centers_.ravel()
    rank = np.argsort(np.argsort(centers))
    return rank[km.labels_].reshape(values.shape), np.sort(centers)


@dataclass
class InitResult:
    labels: LabelPyramid
    estimates: np.ndarray
    centers: np.ndarray


def init_labels(ll: LogLeaderPyramid, k: int, size: int = 16, overlap: float = 0.75, restarts: int = 20, seed: int = 0) -> InitResult:
    """Cluster patch-wise theta1 estimates and vote them onto the pyramid."""
    estimates, starts = patch_estimates(ll, size, overlap)
    side = ll.side(ll.j1)
    if k == 1:
        finest = np.zeros((side, side), dtype=np.int64)
        centers = np.array([float(estimates.mean())])
    else:
        patch_labels, centers = _kmeans_1d(estimates, k, restarts, seed)
        finest = patch_vote(patch_labels, starts, size, side, k)
    return InitResult(labels=pyramid_from_finest(finest, ll.j1, ll.j2, k), estimates=estimates, centers=centers)


def baseline_kmeans_mf(init: InitResult, j1: int) -> np.ndarray:
    """Initialization-only segmentation at full resolution."""
    return upsample_labels(init.labels.grids[j1], j1)


def baseline_kmeans_feat(image: np.ndarray, k: int, size: int = 10, overlap: float = 0.8, restarts: int = 20, seed: int = 0) -> np.ndarray:
    """K-means on standardised patch features (mean, STD, min, max) of raw pixels."""
    image = np.asarray(image, dtype=float)
    side = image.shape[0]
    starts = patch_starts(side, size, overlap)
    windows = sliding_window_view(image, (size, size))[np.ix_(starts, starts)]
    feats = np.stack([windows.mean(axis=(-2, -1)), windows.std(axis=(-2, -1)), windows.min(axis=(-2, -1)), windows.max(axis=(-2, -1))], axis=-1)
    flat = StandardScaler().fit_transform(feats.reshape(-1, 4))
    km = KMeans(n_clusters=k, init="k-means++", n_init=restarts, random_state=seed).fit(flat)
    patch_labels = km.labels_.reshape(len(starts), len(starts))
    return patch_vote(patch_labels, starts, size, side, k)


@dataclass
class RegionParams:
    theta1: np.ndarray
    theta2: np.ndarray
    hyper: Hyper = field(default_factory=Hyper)

    def __post_init__(self):
        self.theta1 = np.asarray(self.theta1, dtype=float)
        self.theta2 = np.asarray(self.theta2, dtype=float)
        if np.any(self.theta1 <= 0) or np.any(self.theta2 <= 0):
            raise ParameterDomainError("theta1 and theta2 must be positive")

    @property
    def k(self) -> int:
        return self.theta1.size

    def copy(self) -> "RegionParams":
        return RegionParams(self.theta1.copy(), self.theta2.copy(), self.hyper)


def init_theta(ll: LogLeaderPyramid, labels: LabelPyramid, floor: float = 1e-4, hyper: Optional[Hyper] = None) -> RegionParams:
    """Per-class regression theta1 and intercept theta2, clamped to >= floor."""
    overall = regression_estimate_c2(ll)
    theta1, theta2 = [], []
    for c in range(labels.k):
        scales, variances = [], []
        for j in ll.scales:
            inside = labels.grids[j] == c
            if inside.sum() >= 2:
                scales.append(j)
                variances.append(np.var(ll.grids[j][inside], ddof=1))
        est = regress_variances(variances, scales) if len(scales) >= 2 else overall
        theta1.append(max(est.theta1, floor))
        theta2.append(max(est.intercept, floor))
    return RegionParams(np.array(theta1), np.array(theta2), hyper or Hyper())


def _inverse_gamma(shape: float, scale: float, rng: np.random.Generator) -> float:
    if not np.isfinite(scale) or scale <= 0:
        raise NumericError(f"inverse-gamma scale must be positive, got {scale}")
    return float(scale / rng.gamma(shape))


def sample_theta(x: np.ndarray, mu: np.ndarray, W: np.ndarray, G1: np.ndarray, G2: np.ndarray, hyper: Hyper, rng: np.random.Generator) -> Tuple[float, float]:
    """(theta1, theta2) from their inverse-gamma conditionals."""
    S = x.size
    if S < 1:
        raise NumericError("no retained frequencies")
    q1 = float(np.sum(W / G1 * np.abs(x - mu) ** 2))
    q2 = float(np.sum(W / G2 * np.abs(mu) ** 2))
    theta1 = _inverse_gamma(hyper.alpha1 + S, hyper.gamma1 + q1, rng)
    theta2 = _inverse_gamma(hyper.alpha2 + S, hyper.gamma2 + q2, rng)
    return theta1, theta2


def latent_moments(x: np.ndarray, theta1: float, theta2: float, W: np.ndarray, G1: np.ndarray, G2: np.ndarray, form: str = "conjugate") -> Tuple[np.ndarray, np.ndarray]:
    """Per-frequency mean and variance of the complex-normal conditional of mu."""
    t1 = W / G1
    t2 = W / G2
    if form == "conjugate":
        precision = t1 / theta1 + t2 / theta2
        if np.any(precision <= 0) or not np.all(np.isfinite(precision)):
            raise NumericError("latent conditional has a nonpositive precision")
        var = 1.0 / precision
        return var * (t1 / theta1) * x, var
    if form == "printed":
        var = 1.0 / (theta1 * t1) + 1.0 / (theta2 * t2)
        return theta1 * t1 * x, var
    raise ValueError(f"unknown latent form {form!r}")


def sample_latent(x: np.ndarray, theta1: float, theta2: float, W: np.ndarray, G1: np.ndarray, G2: np.ndarray, rng: np.random.Generator, form: str = "conjugate") -> np.ndarray:
    mean, var = latent_moments(x, theta1, theta2, W, G1, G2, form)
    noise = rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)
    return mean + np.sqrt(var / 2.0) * noise


def granularity_step_size(t: int, r: int, sides: Sequence[int]) -> float:
    return 10.0 * (t + r - 1) ** -0.75 / float(sum(sides))


def granularity_step(beta: GranularityVector, eta: float, z_stats: Tuple[Dict[int, int], int], w_stats: Tuple[Dict[int, int], int]) -> GranularityVector:
    """One truncated gradient move from agreement counts of z and of w."""
    z_spatial, z_scale = z_stats
    w_spatial, w_scale = w_stats
    grad_s = (sum(z_spatial.values()) + z_scale) - (sum(w_spatial.values()) + w_scale)
    out = beta.copy()
    out.beta_s = beta.beta_s + eta * grad_s
    out.beta_xy = {j: b + eta * (z_spatial[j] - w_spatial[j]) for j, b in beta.beta_xy.items()}
    out.clip()
    return out


def sample_granularity(z: LabelPyramid, beta: GranularityVector, rng: np.random.Generator, t: int, v: int = 2) -> GranularityVector:
    """V moves, each against an auxiliary pyramid drawn by one prior sweep from z."""
    sides = [z.grids[j].shape[0] for j in z.scales]
    z_stats = pyramid_counts(z)
    for r in range(1, v + 1):
        w = checkerboard_sweep(z, beta, rng)
        beta = granularity_step(beta, granularity_step_size(t, r, sides), z_stats, pyramid_counts(w))
    return beta


@dataclass(frozen=True)
class PosteriorSummary:
    mean: np.ndarray
    std: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class ThetaEstimate:
    theta1: PosteriorSummary
    theta2: PosteriorSummary
    n_samples: int

    @property
    def c2(self) -> np.ndarray:
        return -self.theta1.mean

    def to_records(self) -> List[Dict[str, float]]:
        """One record per class, 1-based."""
        rows = []
        for c in range(self.theta1.mean.size):
            rows.append({
                "class": c + 1,
                "c2": float(-self.theta1.mean[c]),
                "theta1": float(self.theta1.mean[c]),
                "theta1_ci95": [float(self.theta1.lower[c]), float(self.theta1.upper[c])],
                "theta1_std": float(self.theta1.std[c]),
                "theta2": float(self.theta2.mean[c]),
                "theta2_ci95": [float(self.theta2.lower[c]), float(self.theta2.upper[c])],
                "theta2_std": float(self.theta2.std[c]),
            })
        return rows


def summarize(samples: np.ndarray) -> PosteriorSummary:
    samples = np.asarray(samples, dtype=float)
    std = samples.std(axis=0, ddof=1) if samples.shape[0] > 1 else np.zeros(samples.shape[1:])
    lower, upper = np.quantile(samples, [0.025, 0.975], axis=0)
    return PosteriorSummary(mean=samples.mean(axis=0), std=std, lower=lower, upper=upper)


def estimate_mmse(theta1_history: Sequence[np.ndarray], theta2_history: Sequence[np.ndarray]) -> ThetaEstimate:
    """Posterior means (with STD and 95% intervals) of retained samples."""
    if len(theta1_history) == 0:
        raise ValueError("no retained samples; increase iterations past burn-in")
    t1 = np.asarray(theta1_history, dtype=float)
    t2 = np.asarray(theta2_history, dtype=float)
    return ThetaEstimate(theta1=summarize(t1), theta2=summarize(t2), n_samples=t1.shape[0])


def upsample_labels(grid: np.ndarray, j1: int) -> np.ndarray:
    """Nearest-neighbour replication by 2**j1 along both axes."""
    return np.kron(grid, np.ones((2 ** j1, 2 ** j1), dtype=grid.dtype))


def estimate_map_labels(votes: np.ndarray, j1: int) -> np.ndarray:
    """Per-site most voted label (ties to the smallest) at full resolution."""
    return upsample_labels(np.argmax(votes, axis=0), j1)


def label_probabilities(votes: np.ndarray, j1: int) -> np.ndarray:
    """Vote fraction of the MAP label at full resolution."""
    total = votes.sum(axis=0)
    share = votes.max(axis=0) / np.where(total > 0, total, 1)
    return upsample_labels(share, j1)
