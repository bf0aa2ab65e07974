"""Image -> log-leaders -> initialization -> Gibbs chains -> estimators."""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from joblib import Parallel, delayed

from src.analysis.metrics import MIN_PSRF_LENGTH, ChainDiag, chain_diagnostics
from src.analysis.transform import LogLeaderPyramid, check_image, log_leader_pyramid
from src.errors import ConfigError, ScaleRangeError
from src.runner.gibbs import SamplerState, run_gibbs
from src.runner.sampler import (
    InitResult,
    RegressionEstimate,
    ThetaEstimate,
    baseline_kmeans_feat,
    baseline_kmeans_mf,
    estimate_map_labels,
    estimate_mmse,
    init_labels,
    label_probabilities,
    pyramid_from_mask,
    regression_estimate_c2,
)
from src.utils.config import SamplerConfig, default_threads

logger = logging.getLogger(__name__)

MIN_FINEST_SIDE = 16
DISPERSION = np.log(3.0)


class Timer:
    """Wall-clock seconds per named phase."""

    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start
            logger.info("%s done in %.2fs", name, self.timings[name])


def check_scales(n: int, j1: int, j2: int) -> None:
    """Usable range: coarsest grid >= 8 x 8, finest analysed grid >= 16 x 16."""
    top = int(np.log2(n)) - 3
    if j2 > top:
        raise ScaleRangeError(f"j2={j2} exceeds the usable scales of a {n}x{n} image (j2 <= {top})")
    if n >> j1 < MIN_FINEST_SIDE:
        raise ScaleRangeError(f"j1={j1} leaves a {n >> j1}x{n >> j1} grid; at least {MIN_FINEST_SIDE} needed")


def analyse(image: np.ndarray, conf: SamplerConfig) -> LogLeaderPyramid:
    image = check_image(image)
    check_scales(image.shape[0], conf.j1, conf.j2)
    return log_leader_pyramid(image, conf.j1, conf.j2, conf.wavelet_order, conf.leader_floor)


def chain_seeds(seed: int, n_chains: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n_chains)


def _one_chain(ll, conf, seq, labels, fixed, chain, progress, dump_path):
    rng = np.random.default_rng(seq)
    return run_gibbs(
        ll, conf, rng=rng, labels=labels, fixed_labels=fixed,
        disperse=DISPERSION if chain > 0 else 0.0,
        progress=progress and chain == 0,
        dump_path=None if dump_path is None else Path(dump_path).with_suffix(f".chain{chain}.json"),
    )


def run_chains(ll: LogLeaderPyramid, conf: SamplerConfig, labels=None, fixed_labels: bool = False, n_jobs: Optional[int] = None,
               progress: bool = False, dump_path=None) -> List[SamplerState]:
    """conf.chains independent chains; chain c uses the c-th spawned seed, so output does not depend on n_jobs."""
    seeds = chain_seeds(conf.seed, conf.chains)
    n_jobs = n_jobs or default_threads()
    if conf.chains == 1 or n_jobs == 1:
        return [_one_chain(ll, conf, s, labels, fixed_labels, c, progress, dump_path) for c, s in enumerate(seeds)]
    return Parallel(n_jobs=min(n_jobs, conf.chains))(
        delayed(_one_chain)(ll, conf, s, labels, fixed_labels, c, progress, dump_path) for c, s in enumerate(seeds)
    )


def pooled_estimate(states: List[SamplerState]) -> ThetaEstimate:
    theta1 = [t for s in states for t in s.theta1_history]
    theta2 = [t for s in states for t in s.theta2_history]
    return estimate_mmse(theta1, theta2)


def diagnostics(states: List[SamplerState]) -> Optional[ChainDiag]:
    if len(states) < 2:
        return None
    if len(states[0].theta1_history) < MIN_PSRF_LENGTH:
        logger.warning("chains too short for PSRF (%d samples)", len(states[0].theta1_history))
        return None
    traces = {}
    k = states[0].params.k
    for name, attr in (("theta1", "theta1_history"), ("theta2", "theta2_history")):
        stacked = np.stack([np.asarray(getattr(s, attr)) for s in states])
        for c in range(k):
            traces[f"{name}_{c + 1}"] = stacked[:, :, c]
    return chain_diagnostics(traces)


@dataclass
class SegmentResult:
    labels: np.ndarray
    probability: np.ndarray
    estimate: ThetaEstimate
    states: List[SamplerState]
    init: InitResult
    diag: Optional[ChainDiag] = None
    baselines: Dict[str, np.ndarray] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def beta(self) -> Dict[str, float]:
        return self.states[0].beta.as_dict()


def segment(image: np.ndarray, conf: SamplerConfig, progress: bool = False, baselines: bool = False,
            n_jobs: Optional[int] = None, dump_path=None) -> SegmentResult:
    """Joint segmentation and estimation; labels returned 0-based at full resolution."""
    if conf.k < 2:
        raise ConfigError(f"segmentation needs K >= 2, got {conf.k}")
    timer = Timer()
    with timer.phase("transform"):
        ll = analyse(image, conf)
    with timer.phase("init"):
        init = init_labels(ll, conf.k, conf.patch_size, conf.patch_overlap, conf.kmeans_restarts, conf.seed)
    with timer.phase("sampling"):
        states = run_chains(ll, conf, labels=init.labels, n_jobs=n_jobs, progress=progress, dump_path=dump_path)
    with timer.phase("estimation"):
        votes = sum(s.votes for s in states)
        result = SegmentResult(
            labels=estimate_map_labels(votes, conf.j1),
            probability=label_probabilities(votes, conf.j1),
            estimate=pooled_estimate(states),
            states=states,
            init=init,
            diag=diagnostics(states),
        )
    if baselines:
        with timer.phase("baselines"):
            result.baselines["kmeans-mf"] = baseline_kmeans_mf(init, conf.j1)
            result.baselines["kmeans-feat"] = baseline_kmeans_feat(image, conf.k, restarts=conf.kmeans_restarts, seed=conf.seed)
    result.timings = timer.timings
    return result


def segment_fixed(image: np.ndarray, mask: np.ndarray, conf: SamplerConfig, n_jobs: Optional[int] = None) -> ThetaEstimate:
    """Parameter estimation with labels fixed to a known 0-based mask."""
    ll = analyse(image, conf)
    labels = pyramid_from_mask(mask, conf.j1, conf.j2, conf.k)
    return pooled_estimate(run_chains(ll, conf, labels=labels, fixed_labels=True, n_jobs=n_jobs))


@dataclass
class EstimateResult:
    estimate: ThetaEstimate
    regression: RegressionEstimate
    states: List[SamplerState]
    diag: Optional[ChainDiag] = None
    timings: Dict[str, float] = field(default_factory=dict)


def estimate_homogeneous(image: np.ndarray, conf: SamplerConfig, progress: bool = False, n_jobs: Optional[int] = None,
                         dump_path=None) -> EstimateResult:
    """Single-class (full mask) estimation plus the regression estimate."""
    conf = conf.with_overrides(k=1)
    timer = Timer()
    with timer.phase("transform"):
        ll = analyse(image, conf)
        regression = regression_estimate_c2(ll)
    with timer.phase("sampling"):
        labels = pyramid_from_mask(np.zeros(image.shape, dtype=np.int64), conf.j1, conf.j2, 1)
        states = run_chains(ll, conf, labels=labels, fixed_labels=True, n_jobs=n_jobs, progress=progress, dump_path=dump_path)
    return EstimateResult(
        estimate=pooled_estimate(states), regression=regression, states=states,
        diag=diagnostics(states), timings=timer.timings,
    )
