import copy
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from src.errors import ConfigError

ROOT = Path(__file__).resolve().parents[2]
DEFAULT_CONFIG = ROOT / "config" / "config.yaml"

G2_FORMS = ("printed", "nugget")
VARIANCE_FORMS = ("printed", "cumulant", "covariance")
LATENT_FORMS = ("conjugate", "printed")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: Optional[str] = None) -> dict:
    """Load the default YAML config, merged with an optional user file."""
    with open(DEFAULT_CONFIG, "r", encoding="utf-8") as f:
        cfg = yaml.safe_load(f)
    path = path or os.environ.get("MFSEG_CONFIG")
    if path:
        user_path = Path(path)
        if not user_path.is_file():
            raise ConfigError(f"config file not found: {path}")
        with open(user_path, "r", encoding="utf-8") as f:
            cfg = _merge(cfg, yaml.safe_load(f) or {})
    # Normalize paths
    out_dir = Path(cfg.get("output", {}).get("dir", "reports"))
    if not out_dir.is_absolute():
        out_dir = Path(".") / out_dir
    cfg.setdefault("output", {})["dir"] = str(out_dir)
    return cfg


@dataclass(frozen=True)
class Hyper:
    """Inverse-gamma hyperparameters (alpha_i, gamma_i) shared by all classes."""

    alpha1: float = 1e-3
    gamma1: float = 1e-3
    alpha2: float = 1e-3
    gamma2: float = 1e-3


@dataclass(frozen=True)
class SamplerConfig:
    k: int = 2
    j1: int = 1
    j2: int = 3
    n_iter: int = 300
    burn_in: int = 30
    beta_iter: int = 2
    beta_max: float = 10.0
    beta_init: float = 1.0
    seed: int = 0
    wavelet_order: int = 1
    freq_cutoff: float = 0.25
    eps_g: float = 1e-8
    eps_w: float = 1e-8
    leader_floor: float = 1e-12
    g2_form: str = "nugget"
    variance_form: str = "printed"
    latent_form: str = "conjugate"
    theta_floor: float = 1e-4
    hyper: Hyper = field(default_factory=Hyper)
    patch_size: int = 16
    patch_overlap: float = 0.75
    kmeans_restarts: int = 20
    chains: int = 1

    @classmethod
    def from_config(cls, cfg: dict, **overrides: Any) -> "SamplerConfig":
        s = cfg.get("sampler", {})
        w = cfg.get("whittle", {})
        p = cfg.get("potts", {})
        t = cfg.get("transform", {})
        h = s.get("hyper", {})
        init = s.get("init", {})
        conf = cls(
            k=int(s.get("k", 2)),
            j1=int(s.get("j1", 1)),
            j2=int(s.get("j2", 3)),
            n_iter=int(s.get("nIter", 300)),
            burn_in=int(s.get("burnIn", 30)),
            beta_iter=int(s.get("betaIter", 2)),
            beta_max=float(p.get("betaMax", 10)),
            beta_init=float(p.get("betaInit", 1.0)),
            seed=int(s.get("seed", 0)),
            wavelet_order=int(t.get("waveletOrder", 1)),
            freq_cutoff=float(w.get("freqCutoff", 0.25)),
            eps_g=float(w.get("epsG", 1e-8)),
            eps_w=float(w.get("epsW", 1e-8)),
            leader_floor=float(t.get("leaderFloor", 1e-12)),
            g2_form=str(w.get("g2Form", "nugget")),
            variance_form=str(w.get("varianceForm", "printed")),
            latent_form=str(s.get("latentForm", "conjugate")),
            theta_floor=float(s.get("thetaFloor", 1e-4)),
            hyper=Hyper(
                alpha1=float(h.get("alpha1", 1e-3)),
                gamma1=float(h.get("gamma1", 1e-3)),
                alpha2=float(h.get("alpha2", 1e-3)),
                gamma2=float(h.get("gamma2", 1e-3)),
            ),
            patch_size=int(init.get("patchSize", 16)),
            patch_overlap=float(init.get("patchOverlap", 0.75)),
            kmeans_restarts=int(init.get("kmeansRestarts", 20)),
            chains=int(s.get("chains", 1)),
        )
        overrides = {key: value for key, value in overrides.items() if value is not None}
        return conf.with_overrides(**overrides)

    def with_overrides(self, **overrides: Any) -> "SamplerConfig":
        conf = replace(self, **overrides)
        conf.validate()
        return conf

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"K must be >= 1, got {self.k}")
        if not 1 <= self.j1 <= self.j2:
            raise ConfigError(f"need 1 <= j1 <= j2, got j1={self.j1}, j2={self.j2}")
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError(f"need 0 <= burn-in < iterations, got {self.burn_in} / {self.n_iter}")
        if self.beta_iter < 1:
            raise ConfigError("V (granularity iterations) must be >= 1")
        if self.beta_max <= 0 or not 0 <= self.beta_init <= self.beta_max:
            raise ConfigError("need Q > 0 and 0 <= initial beta <= Q")
        if self.wavelet_order < 1:
            raise ConfigError("wavelet order must be >= 1")
        if not 0 < self.freq_cutoff <= 0.5:
            raise ConfigError("frequency cutoff must lie in (0, 0.5]")
        if self.g2_form not in G2_FORMS:
            raise ConfigError(f"g2 form must be one of {G2_FORMS}")
        if self.variance_form not in VARIANCE_FORMS:
            raise ConfigError(f"variance form must be one of {VARIANCE_FORMS}")
        if self.latent_form not in LATENT_FORMS:
            raise ConfigError(f"latent form must be one of {LATENT_FORMS}")
        if self.chains < 1:
            raise ConfigError("chain count must be >= 1")
        hyper = asdict(self.hyper)
        if min(hyper.values()) <= 0:
            raise ConfigError("hyperparameters must be positive")

    @property
    def n_retained(self) -> int:
        return self.n_iter - self.burn_in

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def default_threads() -> int:
    """Worker count for chains and Monte Carlo realizations."""
    raw = os.environ.get("MFSEG_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"MFSEG_THREADS must be an integer, got {raw!r}")
