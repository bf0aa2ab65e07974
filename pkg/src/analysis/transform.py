"""2D orthonormal DWT, wavelet leaders and centered log-leaders.

Scales follow the multifractal convention: j = 1 is the finest scale and a
grid at scale j has side N_j = N / 2**j. Boundaries are periodic throughout.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import pywt
from scipy import ndimage

from src.errors import ConfigError, DimensionError, NumericError, ScaleRangeError

logger = logging.getLogger(__name__)

MIN_SIDE = 32
SUBBANDS = ("horizontal", "vertical", "diagonal")


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def check_image(image: np.ndarray) -> np.ndarray:
    """Validate an N x N image (N a power of two, N >= 32, finite values)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise DimensionError(f"image must be a square 2D grid, got shape {image.shape}")
    n = image.shape[0]
    if not _is_power_of_two(n):
        raise DimensionError(f"image side must be a power of two, got {n}")
    if n < MIN_SIDE:
        raise DimensionError(f"image side must be at least {MIN_SIDE}, got {n}")
    if not np.all(np.isfinite(image)):
        raise DimensionError("image contains non-finite pixel values")
    return image


def max_scale(n: int) -> int:
    """Largest DWT scale J allowed for an N x N image."""
    return int(np.log2(n)) - 2


@dataclass(frozen=True)
class DwtPyramid:
    """Detail subbands d(j) = 2**-j D(j), stacked as (3, N_j, N_j) per scale."""

    details: Dict[int, np.ndarray]
    approx: Dict[int, np.ndarray]
    wavelet: str
    n: int

    @property
    def n_scales(self) -> int:
        return len(self.details)

    def raw_details(self, j: int) -> np.ndarray:
        """Orthonormal (unnormalized) coefficients D(j)."""
        return self.details[j] * 2.0 ** j

    def reconstruct(self) -> np.ndarray:
        """Inverse transform of the unnormalized pyramid."""
        a = self.approx[self.n_scales]
        for j in range(self.n_scales, 0, -1):
            h, v, d = self.raw_details(j)
            a = pywt.idwt2((a, (h, v, d)), self.wavelet, mode="periodization")
        return a


def dwt2d(image: np.ndarray, n_vanishing: int = 1, n_scales: Optional[int] = None) -> DwtPyramid:
    """Periodic 2D DWT with a Daubechies wavelet of `n_vanishing` moments."""
    image = check_image(image)
    n = image.shape[0]
    top = max_scale(n)
    n_scales = top if n_scales is None else int(n_scales)
    if not 1 <= n_scales <= top:
        raise ScaleRangeError(f"J must lie in [1, {top}] for N={n}, got {n_scales}")
    if n_vanishing < 1:
        raise ConfigError("n_vanishing must be >= 1")
    wavelet = f"db{n_vanishing}"

    details: Dict[int, np.ndarray] = {}
    approx: Dict[int, np.ndarray] = {}
    a = image
    for j in range(1, n_scales + 1):
        a, (h, v, d) = pywt.dwt2(a, wavelet, mode="periodization")
        details[j] = np.stack([h, v, d]) * 2.0 ** (-j)
        approx[j] = a
    return DwtPyramid(details=details, approx=approx, wavelet=wavelet, n=n)


@dataclass(frozen=True)
class LeaderPyramid:
    leaders: Dict[int, np.ndarray]
    j1: int
    j2: int
    n_floored: int = 0


def _check_range(pyr: DwtPyramid, j1: int, j2: int) -> None:
    if j1 < 1 or j2 < j1:
        raise ScaleRangeError(f"empty scale range j1={j1}, j2={j2}")
    if j2 > pyr.n_scales:
        raise ScaleRangeError(f"j2={j2} exceeds the {pyr.n_scales} scales of the pyramid")


def _coarsen_max(grid: np.ndarray) -> np.ndarray:
    """Max over the 2 x 2 children covered by each coarser site."""
    n = grid.shape[0] // 2
    return grid.reshape(n, 2, n, 2).max(axis=(1, 3))


def wavelet_leaders(pyr: DwtPyramid, j1: int, j2: int, floor: float = 1e-12) -> LeaderPyramid:
    """Sup of |d| over the 3 x 3 neighbourhood and every finer scale.

    Zero leaders are replaced by `floor` times the largest leader and counted.
    """
    _check_range(pyr, j1, j2)

    leaders: Dict[int, np.ndarray] = {}
    # sup over the dyadic cube itself and all its finer sub-cubes
    own = None
    for j in range(1, j2 + 1):
        current = np.abs(pyr.details[j]).max(axis=0)
        own = current if own is None else np.maximum(current, _coarsen_max(own))
        if j >= j1:
            leaders[j] = ndimage.maximum_filter(own, size=3, mode="wrap")

    top = max(float(grid.max()) for grid in leaders.values())
    threshold = floor * top if top > 0 else floor
    n_floored = 0
    for j, grid in leaders.items():
        low = grid <= 0
        count = int(low.sum())
        if count:
            leaders[j] = np.where(low, threshold, grid)
            n_floored += count
    if n_floored:
        logger.warning("floored %d zero wavelet leaders at %.3g", n_floored, threshold)
    return LeaderPyramid(leaders=leaders, j1=j1, j2=j2, n_floored=n_floored)


@dataclass(frozen=True)
class LogLeaderPyramid:
    """Centered log-leaders per scale plus the subtracted per-scale means."""

    grids: Dict[int, np.ndarray]
    offsets: Dict[int, float]
    j1: int
    j2: int
    n_floored: int = 0
    n: Optional[int] = field(default=None)

    @property
    def scales(self) -> range:
        return range(self.j1, self.j2 + 1)

    def side(self, j: int) -> int:
        return self.grids[j].shape[0]

    def sides(self) -> Dict[int, int]:
        return {j: self.side(j) for j in self.scales}


def log_leaders(leaders: LeaderPyramid, j1: Optional[int] = None, j2: Optional[int] = None) -> LogLeaderPyramid:
    """ln L minus its per-scale empirical mean."""
    j1 = leaders.j1 if j1 is None else j1
    j2 = leaders.j2 if j2 is None else j2
    if j1 < leaders.j1 or j2 > leaders.j2 or j2 < j1:
        raise ScaleRangeError(f"scales [{j1}, {j2}] not available in [{leaders.j1}, {leaders.j2}]")

    grids: Dict[int, np.ndarray] = {}
    offsets: Dict[int, float] = {}
    for j in range(j1, j2 + 1):
        grid = leaders.leaders[j]
        if np.any(grid <= 0) or not np.all(np.isfinite(grid)):
            raise NumericError(f"nonpositive or non-finite leader at scale j={j}")
        logs = np.log(grid)
        offsets[j] = float(logs.mean())
        grids[j] = logs - offsets[j]
    n = leaders.leaders[j1].shape[0] * 2 ** j1
    return LogLeaderPyramid(grids=grids, offsets=offsets, j1=j1, j2=j2, n_floored=leaders.n_floored, n=n)


def log_leader_pyramid(image: np.ndarray, j1: int, j2: int, n_vanishing: int = 1, floor: float = 1e-12) -> LogLeaderPyramid:
    """Image -> DWT -> leaders -> centered log-leaders over [j1, j2]."""
    pyr = dwt2d(image, n_vanishing=n_vanishing, n_scales=j2)
    return log_leaders(wavelet_leaders(pyr, j1, j2, floor=floor))
