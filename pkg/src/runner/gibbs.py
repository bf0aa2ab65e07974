"""Joint label / parameter / granularity Gibbs sampler."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from tqdm import trange

from src.analysis.potts import GranularityVector, LabelPyramid, checkerboard_sweep
from src.analysis.transform import LogLeaderPyramid
from src.analysis.whittle import ClassMask, ClassSpectrum, class_spectrum, marginal_leader_density, scale_spectra
from src.errors import NumericError
from src.runner.sampler import (
    RegionParams,
    init_labels,
    init_theta,
    latent_moments,
    sample_granularity,
    sample_latent,
    sample_theta,
)
from src.utils.config import SamplerConfig
from src.utils.report import save_state_dump

logger = logging.getLogger(__name__)


@dataclass
class SamplerState:
    labels: LabelPyramid
    params: RegionParams
    beta: GranularityVector
    mu: List[np.ndarray]
    iteration: int = 0
    theta1_history: List[np.ndarray] = field(default_factory=list)
    theta2_history: List[np.ndarray] = field(default_factory=list)
    beta_trace: List[Dict[str, float]] = field(default_factory=list)
    votes: Optional[np.ndarray] = None
    n_repairs: int = 0

    def record(self) -> None:
        """Append the current draw to the retained history."""
        self.theta1_history.append(self.params.theta1.copy())
        self.theta2_history.append(self.params.theta2.copy())
        finest = self.labels.grids[self.labels.j1]
        if self.votes is None:
            self.votes = np.zeros((self.labels.k,) + finest.shape, dtype=np.int64)
        for c in range(self.labels.k):
            self.votes[c] += finest == c

    def snapshot(self) -> Dict[str, object]:
        return {
            "beta": self.beta.as_dict(),
            "class_counts": {str(j): (np.bincount(g.ravel(), minlength=self.labels.k)).tolist() for j, g in self.labels.grids.items()},
            "iteration": self.iteration,
            "n_repairs": self.n_repairs,
            "theta1": self.params.theta1.tolist(),
            "theta2": self.params.theta2.tolist(),
        }


def repair_empty_classes(state: SamplerState, rng: np.random.Generator, floor: float) -> int:
    """Give every class that lost all sites at a scale one random site there.

    The class's theta is redrawn from the prior, kept within [floor, 1 / floor].
    """
    mask = ClassMask(state.labels.grids, state.labels.k)
    empty = mask.empty_classes()
    hyper = state.params.hyper
    redrawn = set()
    for j, c in empty:
        grid = state.labels.grids[j]
        counts = np.bincount(grid.ravel(), minlength=state.labels.k)
        donors = np.flatnonzero(counts[grid.ravel()] > 1)
        site = donors[rng.integers(donors.size)]
        grid.flat[site] = c
        if c not in redrawn:
            t1 = hyper.gamma1 / rng.gamma(hyper.alpha1)
            t2 = hyper.gamma2 / rng.gamma(hyper.alpha2)
            state.params.theta1[c] = np.clip(t1, floor, 1.0 / floor)
            state.params.theta2[c] = np.clip(t2, floor, 1.0 / floor)
            redrawn.add(c)
        logger.warning("class %d emptied at scale j=%d; reassigned one site", c + 1, j)
    state.n_repairs += len(empty)
    return len(empty)


def _spectra(ll: LogLeaderPyramid, labels: LabelPyramid, scales, eps_w: float) -> List[ClassSpectrum]:
    mask = ClassMask(labels.grids, labels.k)
    return [class_spectrum(ll, mask, c, scales, eps_w) for c in range(labels.k)]


def _data_terms(ll: LogLeaderPyramid, params: RegionParams, conf: SamplerConfig) -> Dict[int, np.ndarray]:
    return {
        j: marginal_leader_density(ll.grids[j], params.theta1, params.theta2, j, conf.variance_form, ll.side(j), conf.g2_form)
        for j in ll.scales
    }


def run_gibbs(
    ll: LogLeaderPyramid,
    conf: SamplerConfig,
    rng: Optional[np.random.Generator] = None,
    labels: Optional[LabelPyramid] = None,
    fixed_labels: bool = False,
    params: Optional[RegionParams] = None,
    disperse: float = 0.0,
    progress: bool = False,
    dump_path: Optional[Path] = None,
) -> SamplerState:
    """Run N_m iterations and keep the draws after burn-in.

    With `fixed_labels` the given label pyramid is held fixed and only the
    region parameters are sampled. `disperse` multiplies the initial theta by
    exp(U(-disperse, disperse)) per class.
    """
    rng = rng if rng is not None else np.random.default_rng(np.random.SeedSequence(conf.seed).spawn(1)[0])
    if labels is None:
        labels = init_labels(ll, conf.k, conf.patch_size, conf.patch_overlap, conf.kmeans_restarts, conf.seed).labels
    labels = labels.copy()
    if params is None:
        params = init_theta(ll, labels, conf.theta_floor, conf.hyper)
    params = params.copy()
    if disperse > 0:
        params.theta1 *= np.exp(rng.uniform(-disperse, disperse, params.k))
        params.theta2 *= np.exp(rng.uniform(-disperse, disperse, params.k))

    scales = scale_spectra(ll.sides(), conf.freq_cutoff, conf.g2_form, conf.eps_g)
    beta = GranularityVector.constant(ll.scales, conf.beta_init, conf.beta_max)
    state = SamplerState(labels=labels, params=params, beta=beta, mu=[])
    repair_empty_classes(state, rng, conf.theta_floor)
    spectra = _spectra(ll, state.labels, scales, conf.eps_w)
    for c, sp in enumerate(spectra):
        mean, _ = latent_moments(sp.x, params.theta1[c], params.theta2[c], sp.W, sp.G1, sp.G2, conf.latent_form)
        state.mu.append(mean)

    update_labels = not fixed_labels and labels.k > 1
    logger.info("gibbs: K=%d, scales %d..%d, S=%d frequencies per class, %d iterations", labels.k, ll.j1, ll.j2, spectra[0].S, conf.n_iter)
    try:
        for t in trange(1, conf.n_iter + 1, desc="gibbs", disable=not progress):
            state.iteration = t
            spectra = _spectra(ll, state.labels, scales, conf.eps_w)
            if update_labels:
                state.labels = checkerboard_sweep(state.labels, state.beta, rng, _data_terms(ll, state.params, conf))
                repair_empty_classes(state, rng, conf.theta_floor)
            for c, sp in enumerate(spectra):
                state.mu[c] = sample_latent(sp.x, state.params.theta1[c], state.params.theta2[c], sp.W, sp.G1, sp.G2, rng, conf.latent_form)
                state.params.theta1[c], state.params.theta2[c] = sample_theta(sp.x, state.mu[c], sp.W, sp.G1, sp.G2, state.params.hyper, rng)
            if update_labels and t < conf.burn_in:
                state.beta = sample_granularity(state.labels, state.beta, rng, t, conf.beta_iter)
            state.beta_trace.append(state.beta.as_dict())
            if t > conf.burn_in:
                state.record()
            logger.debug("t=%d theta1=%s beta_s=%.3f", t, np.round(state.params.theta1, 4), state.beta.beta_s)
    except NumericError as err:
        if dump_path is not None:
            err.dump_path = save_state_dump(state.snapshot(), dump_path)
        raise
    return state
