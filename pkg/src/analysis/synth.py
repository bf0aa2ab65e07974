"""2D multifractal random walk synthesis and piecewise scenes."""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

from src.errors import CompositionError, ConfigError, DimensionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MrwSpec:
    n: int
    c2: float
    c1: float = 0.5
    integral_scale: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise DimensionError(f"MRW side must be a power of two, got {self.n}")
        if self.c2 >= 0:
            raise ConfigError(f"c2 must be negative, got {self.c2}")
        if not 0 < self.scale <= self.n:
            raise ConfigError(f"integral scale must lie in (0, N], got {self.scale}")

    @property
    def scale(self) -> float:
        return self.n / 4 if self.integral_scale is None else float(self.integral_scale)

    @property
    def hurst(self) -> float:
        return self.c1 + self.c2

    @property
    def lam2(self) -> float:
        return -self.c2


def _torus_distance(size: int) -> np.ndarray:
    idx = np.arange(size)
    d = np.minimum(idx, size - idx).astype(float)
    return np.hypot(d[:, None], d[None, :])


def log_covariance_field(n: int, lam2: float, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian field with covariance lam2 * max(0, ln(L / (r + 1))).

    Circulant embedding on a 2N torus; negative eigenvalues are clipped.
    """
    size = 2 * n
    cov = lam2 * np.maximum(0.0, np.log(scale / (_torus_distance(size) + 1.0)))
    lam = sfft.fft2(cov).real
    n_neg = int(np.sum(lam < 0))
    if n_neg:
        logger.debug("circulant embedding: clipped %d negative eigenvalues", n_neg)
    white = rng.standard_normal((size, size))
    field = sfft.ifft2(np.sqrt(np.maximum(lam, 0.0)) * sfft.fft2(white)).real
    return field[:n, :n]


def fractional_noise(n: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance white noise fractionally integrated by order H - 1/2.

    Its double cumulative sum has regularity H (H = 1/2 gives the Brownian sheet).
    """
    white = rng.standard_normal((n, n))
    k = sfft.fftfreq(n)
    radius = np.hypot(k[:, None], k[None, :])
    gain = np.zeros_like(radius)
    gain[radius > 0] = radius[radius > 0] ** (0.5 - hurst)
    noise = sfft.ifft2(gain * sfft.fft2(white)).real
    return noise / noise.std()


def synth_mrw(spec: MrwSpec) -> np.ndarray:
    """N x N MRW realization X = cumsum_x cumsum_y(eps * exp(omega))."""
    rng = np.random.default_rng(spec.seed)
    omega = log_covariance_field(spec.n, spec.lam2, spec.scale, rng)
    omega = omega - omega.mean() - 0.5 * spec.lam2 * np.log(spec.scale)
    eps = fractional_noise(spec.n, spec.hurst, rng)
    return np.cumsum(np.cumsum(eps * np.exp(omega), axis=0), axis=1)


@dataclass(frozen=True)
class Disk:
    center: Tuple[float, float]
    radius: float
    c2: float


@dataclass(frozen=True)
class SceneSpec:
    """Background plus disjoint disks; region i + 1 is disk i, region 0 the background."""

    n: int
    background_c2: float
    disks: Tuple[Disk, ...] = ()
    c1: float = 0.5
    integral_scale: Optional[float] = None
    seed: int = 0
    j1: int = 1
    j2: int = 3
    name: str = "custom"

    @property
    def k(self) -> int:
        return 1 + len(self.disks)

    @property
    def c2_values(self) -> List[float]:
        return [self.background_c2] + [d.c2 for d in self.disks]

    def region_specs(self) -> List[MrwSpec]:
        """One MRW per region, seeds spawned from the scene seed."""
        children = np.random.SeedSequence(self.seed).spawn(self.k)
        return [
            MrwSpec(n=self.n, c2=c2, c1=self.c1, integral_scale=self.integral_scale, seed=int(child.generate_state(1)[0]))
            for c2, child in zip(self.c2_values, children)
        ]

    def validate(self) -> None:
        if self.n < 2 or self.n & (self.n - 1):
            raise DimensionError(f"image side must be a power of two, got {self.n}")
        for i, disk in enumerate(self.disks):
            cy, cx = disk.center
            r = disk.radius
            if r <= 0 or cy - r < 0 or cx - r < 0 or cy + r > self.n or cx + r > self.n:
                raise CompositionError(f"disk {i + 1} leaves the {self.n}x{self.n} image")
        for a in range(len(self.disks)):
            for b in range(a + 1, len(self.disks)):
                da, db = self.disks[a], self.disks[b]
                if np.hypot(da.center[0] - db.center[0], da.center[1] - db.center[1]) < da.radius + db.radius:
                    raise CompositionError(f"disks {a + 1} and {b + 1} overlap")


def disk_mask(n: int, disk: Disk) -> np.ndarray:
    rows, cols = np.indices((n, n))
    return (rows - disk.center[0]) ** 2 + (cols - disk.center[1]) ** 2 < disk.radius ** 2


def scene_mask(scene: SceneSpec) -> np.ndarray:
    """0-based ground-truth labels."""
    scene.validate()
    mask = np.zeros((scene.n, scene.n), dtype=np.int64)
    for i, disk in enumerate(scene.disks):
        mask[disk_mask(scene.n, disk)] = i + 1
    return mask


def synth_scene(scene: SceneSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Composite image (hard cut by mask) and its 0-based ground truth."""
    mask = scene_mask(scene)
    specs = scene.region_specs()
    image = synth_mrw(specs[0])
    for label, spec in enumerate(specs[1:], start=1):
        inside = mask == label
        image[inside] = synth_mrw(spec)[inside]
    return image, mask


def preset_scene(cfg: Dict[str, Any], name: str, seed: int = 0, c2_values: Optional[Sequence[float]] = None) -> SceneSpec:
    """Build a scene from `synth.presets.<name>`, optionally replacing region c2's."""
    synth = cfg.get("synth", {})
    presets = synth.get("presets", {})
    if name not in presets:
        raise ConfigError(f"unknown scene preset {name!r}; available: {', '.join(sorted(presets))}")
    p = presets[name]
    try:
        disks = tuple(
            Disk(center=tuple(float(v) for v in d["center"]), radius=float(d["radius"]), c2=float(d["c2"]))
            for d in p.get("disks") or []
        )
        background_c2 = float(p["background"]["c2"])
    except (KeyError, TypeError) as err:
        raise ConfigError(f"scene {name!r} is missing a field: {err}") from err
    scene = SceneSpec(
        n=int(p.get("n", 512)),
        background_c2=background_c2,
        disks=disks,
        c1=float(synth.get("c1", 0.5)),
        integral_scale=synth.get("integralScale"),
        seed=int(seed),
        j1=int(p.get("j1", 1)),
        j2=int(p.get("j2", 3)),
        name=name,
    )
    if c2_values is not None:
        scene = with_c2(scene, c2_values)
    scene.validate()
    return scene


def with_c2(scene: SceneSpec, c2_values: Sequence[float]) -> SceneSpec:
    if len(c2_values) != scene.k:
        raise ConfigError(f"scene {scene.name!r} has {scene.k} regions, got {len(c2_values)} c2 values")
    disks = tuple(replace(d, c2=float(c2)) for d, c2 in zip(scene.disks, c2_values[1:]))
    return replace(scene, background_c2=float(c2_values[0]), disks=disks)
