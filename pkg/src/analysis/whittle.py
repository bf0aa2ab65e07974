"""Fourier-domain data-augmented Whittle likelihood on label regions.

Spectral operators are diagonal: G_{i,s}, W_{s,k} are positive scalars per
retained frequency, and a class's coefficients from all scales are stacked
into one vector of length S.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import fft as sfft
from scipy import stats

from src.errors import ConfigError, EmptyClassError, NumericError, ParameterDomainError, ScaleRangeError

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)
LN4 = np.log(4.0)


def scale_radius(n_j: int) -> int:
    """r_j = floor(N_j / 4), the support radius of g1."""
    return n_j // 4


def g1(r, n_j: int):
    r_j = scale_radius(n_j)
    return np.maximum(0.0, -np.log((np.asarray(r, dtype=float) + 1.0) / (r_j + 1.0)))


def g2(r, form: str = "printed"):
    """Short-range term; `printed` is max{0, -ln(r+1)/ln 4}, `nugget` adds 1."""
    r = np.asarray(r, dtype=float)
    if form == "printed":
        return np.maximum(0.0, -np.log(r + 1.0) / LN4)
    if form == "nugget":
        return np.maximum(0.0, 1.0 - np.log(r + 1.0) / LN4)
    raise ValueError(f"unknown g2 form {form!r}")


@dataclass(frozen=True)
class CovarianceModel:
    theta1: float
    theta2: float
    j: int
    n_j: int
    g2_form: str = "printed"

    def __post_init__(self):
        if self.theta1 <= 0 or self.theta2 <= 0:
            raise ParameterDomainError("covariance model needs theta1 > 0 and theta2 > 0")

    @property
    def r_j(self) -> int:
        return scale_radius(self.n_j)

    def __call__(self, r):
        return self.theta1 * g1(r, self.n_j) + self.theta2 * g2(r, self.g2_form)


def cov_model(theta1: float, theta2: float, j: int, r, n_j: int, g2_form: str = "printed"):
    """theta1 g1(j, r) + theta2 g2(j, r) for a grid of side N_j."""
    return CovarianceModel(theta1, theta2, j, n_j, g2_form)(r)


def lag_radius(n_j: int) -> np.ndarray:
    """Periodic lag norms ||n|| on an N_j x N_j grid."""
    idx = np.arange(n_j)
    d = np.minimum(idx, n_j - idx).astype(float)
    return np.hypot(d[:, None], d[None, :])


def frequency_set(n_j: int, cutoff: float = 0.25) -> np.ndarray:
    """Indices m with 0 < ||m||_inf <= floor(N_j * cutoff), as an (S_j, 2) array."""
    c = int(np.floor(n_j * cutoff))
    if c < 1:
        raise ScaleRangeError(f"no low frequencies retained for N_j={n_j} at cutoff {cutoff}")
    m1, m2 = np.meshgrid(np.arange(-c, c + 1), np.arange(-c, c + 1), indexing="ij")
    keep = (m1 != 0) | (m2 != 0)
    return np.column_stack([m1[keep], m2[keep]])


def _pick(spectrum: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    n_j = spectrum.shape[0]
    return spectrum[freqs[:, 0] % n_j, freqs[:, 1] % n_j]


def lag_spectrum(kernel: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Re sum_n kernel(n) exp(-i n.w_s) at w_s = 2 pi m / N_j."""
    return _pick(sfft.fft2(kernel).real, freqs)


def _clamp(values: np.ndarray, eps: float, what: str) -> np.ndarray:
    low = values < eps
    count = int(low.sum())
    if count:
        logger.warning("%s: clamped %d of %d values (%.2f%%) to %.1e", what, count, values.size, 100.0 * count / values.size, eps)
    return np.where(low, eps, values)


def spectral_weights(j: int, n_j: int, freqs: np.ndarray, g2_form: str = "printed", eps: float = 1e-8) -> Tuple[np.ndarray, np.ndarray]:
    """(G_1, G_2) on the retained frequencies, clamped to >= eps."""
    if len(freqs) == 0:
        raise ScaleRangeError(f"empty frequency set at scale j={j}")
    r = lag_radius(n_j)
    G1 = _clamp(lag_spectrum(g1(r, n_j), freqs), eps, f"G1 at j={j}")
    G2 = _clamp(lag_spectrum(g2(r, g2_form), freqs), eps, f"G2 at j={j}")
    return G1, G2


@dataclass(frozen=True)
class ClassMask:
    """Per-scale label grids (0-based classes) viewed as class indicators."""

    labels: Dict[int, np.ndarray]
    k: int

    def indicator(self, j: int, k: int) -> np.ndarray:
        return self.labels[j] == k

    def counts(self, j: int) -> np.ndarray:
        return np.bincount(self.labels[j].ravel(), minlength=self.k)

    def empty_classes(self):
        """(scale, class) pairs with no sites."""
        return [(j, k) for j in sorted(self.labels) for k in np.flatnonzero(self.counts(j) == 0)]


@dataclass(frozen=True)
class DebiasWeights:
    lag: np.ndarray
    xi: float
    spectral: Optional[np.ndarray] = None


def mask_autocorrelation(indicator: np.ndarray) -> np.ndarray:
    """sum_u T(u) T(u + n) with periodic wrap, as exact integers."""
    F = sfft.fft2(indicator.astype(float))
    return np.rint(sfft.ifft2(np.abs(F) ** 2).real)


def debias_weights(mask: ClassMask, j: int, k: int, freqs: Optional[np.ndarray] = None, G1: Optional[np.ndarray] = None, eps: float = 1e-8) -> DebiasWeights:
    """Lag-domain W_{j,n,k} and, given frequencies, the spectral W_{s,k}.

    W_{s,k} = G_1 / (xi * Ghat_1) with Ghat_1 the spectrum of W * g1, so that
    (W/G_i) rescales each coefficient to the debiased periodogram level.
    """
    T = mask.indicator(j, k)
    count = int(T.sum())
    if count == 0:
        raise EmptyClassError(j, k)
    xi = 1.0 / count
    lag = xi * mask_autocorrelation(T)
    if freqs is None:
        return DebiasWeights(lag=lag, xi=xi)

    n_j = T.shape[0]
    if G1 is None:
        G1 = _clamp(lag_spectrum(g1(lag_radius(n_j), n_j), freqs), eps, f"G1 at j={j}")
    ghat = np.maximum(lag_spectrum(lag * g1(lag_radius(n_j), n_j), freqs), eps)
    spectral = np.maximum(G1 / (xi * ghat), eps)
    return DebiasWeights(lag=lag, xi=xi, spectral=spectral)


def debiased_fourier(ll, mask: ClassMask, k: int, freqsets: Dict[int, np.ndarray]) -> Dict[int, np.ndarray]:
    """x_{s,k} = xi sum_n T (l - t) exp(-i n.w_s) per scale."""
    out: Dict[int, np.ndarray] = {}
    for j, freqs in freqsets.items():
        T = mask.indicator(j, k)
        count = int(T.sum())
        if count == 0:
            raise EmptyClassError(j, k)
        grid = ll.grids[j]
        t = grid[T].mean()
        out[j] = _pick(sfft.fft2(np.where(T, grid - t, 0.0)), freqs) / count
    return out


def augmented_loglik(x: np.ndarray, mu: np.ndarray, theta1: float, theta2: float, G1: np.ndarray, G2: np.ndarray, W: np.ndarray) -> float:
    """Log of the data-augmented likelihood, up to an additive constant."""
    S = x.size
    q1 = np.sum(W / G1 * np.abs(x - mu) ** 2)
    q2 = np.sum(W / G2 * np.abs(mu) ** 2)
    value = -S * np.log(theta2) - q2 / theta2 - S * np.log(theta1) - q1 / theta1
    if not np.isfinite(value):
        raise NumericError("augmented log-likelihood is not finite")
    return float(value)


def leader_variance(theta1, theta2, j: int, form: str = "printed", n_j: Optional[int] = None, g2_form: str = "nugget") -> np.ndarray:
    """sigma^2_j(theta) of a single log-leader under class parameters."""
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    if form == "printed":
        var = theta2 + theta1 * j * LN2
    elif form == "cumulant":
        var = theta2 - theta1 * j * LN2
    elif form == "covariance":
        if n_j is None:
            raise ConfigError("covariance variance form needs n_j")
        var = theta1 * g1(0.0, n_j) + theta2 * g2(0.0, g2_form)
    else:
        raise ConfigError(f"unknown variance form {form!r}")
    if np.any(var <= 0) or not np.all(np.isfinite(var)):
        raise ParameterDomainError(f"nonpositive leader variance at scale j={j}")
    return var


def marginal_leader_density(ell, theta1, theta2, j: int, form: str = "printed", n_j: Optional[int] = None, g2_form: str = "nugget") -> np.ndarray:
    """Gaussian log-density N(0, sigma^2_j) of log-leaders.

    With vector parameters of length K the result gets a leading class axis.
    """
    var = leader_variance(theta1, theta2, j, form, n_j, g2_form)
    ell = np.asarray(ell, dtype=float)
    if var.ndim:
        var = var.reshape(var.shape + (1,) * ell.ndim)
    return stats.norm.logpdf(ell, scale=np.sqrt(var))


@dataclass(frozen=True)
class ScaleSpectrum:
    """Label-independent spectral structures of one scale."""

    j: int
    n_j: int
    freqs: np.ndarray
    G1: np.ndarray
    G2: np.ndarray


def scale_spectra(sides: Dict[int, int], cutoff: float = 0.25, g2_form: str = "nugget", eps: float = 1e-8) -> Dict[int, ScaleSpectrum]:
    out = {}
    for j, n_j in sorted(sides.items()):
        freqs = frequency_set(n_j, cutoff)
        G1, G2 = spectral_weights(j, n_j, freqs, g2_form, eps)
        out[j] = ScaleSpectrum(j=j, n_j=n_j, freqs=freqs, G1=G1, G2=G2)
    return out


@dataclass(frozen=True)
class ClassSpectrum:
    """One class's coefficients and weights stacked across scales."""

    x: np.ndarray
    W: np.ndarray
    G1: np.ndarray
    G2: np.ndarray

    @property
    def S(self) -> int:
        return self.x.size

    @property
    def tilde1(self) -> np.ndarray:
        return self.W / self.G1

    @property
    def tilde2(self) -> np.ndarray:
        return self.W / self.G2


def class_spectrum(ll, mask: ClassMask, k: int, scales: Dict[int, ScaleSpectrum], eps_w: float = 1e-8) -> ClassSpectrum:
    freqsets = {j: sp.freqs for j, sp in scales.items()}
    coeffs = debiased_fourier(ll, mask, k, freqsets)
    xs, ws, g1s, g2s = [], [], [], []
    for j, sp in scales.items():
        weights = debias_weights(mask, j, k, sp.freqs, sp.G1, eps_w)
        xs.append(coeffs[j])
        ws.append(weights.spectral)
        g1s.append(sp.G1)
        g2s.append(sp.G2)
    return ClassSpectrum(x=np.concatenate(xs), W=np.concatenate(ws), G1=np.concatenate(g1s), G2=np.concatenate(g2s))


def homogeneous_spectrum(ll, scales: Dict[int, ScaleSpectrum]) -> ClassSpectrum:
    """Plain 1/N_j DFT coefficients of the full grids with unit weights."""
    xs = [_pick(sfft.fft2(ll.grids[j]), sp.freqs) / sp.n_j for j, sp in scales.items()]
    x = np.concatenate(xs)
    G1 = np.concatenate([sp.G1 for sp in scales.values()])
    G2 = np.concatenate([sp.G2 for sp in scales.values()])
    return ClassSpectrum(x=x, W=np.ones_like(G1), G1=G1, G2=G2)
