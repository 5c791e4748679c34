"""Stochastic scanpath generation from saliency volumes.

Positions are drawn from temporal slices of a volume. Sampled positions are cell centers in grid coordinates,
`(col + 0.5, row + 0.5)`, and get rescaled to the image size when scanpaths are assembled. Every scanpath owns a
random generator seeded from `(seed, scanpath index)`, so the output doesn't depend on the generation order.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from salvol.config import STRATEGIES, RunConfig, StrategyName, get_logger
from salvol.errors import ConfigError, ValidationError
from salvol.fixations import DEFAULT_IMAGE_DIMS, EmpiricalDistribution, Fixation, ScanPath, sample_distribution
from salvol.volume import SaliencyVolume, time_to_slice

__all__ = [
    "SamplingConfig",
    "Point",
    "scanpath_rng",
    "plan_scanpath",
    "slice_for_time",
    "gaussian_mask",
    "sample_naive",
    "sample_distance_limited",
    "inhibition_mask",
    "sample_inhibition_of_return",
    "generate_scanpaths",
    "generate_random_scanpaths",
]

Point = Tuple[float, float]  #: (x, y) in grid pixels


@dataclass(frozen=True)
class SamplingConfig:
    strategy: StrategyName = "naive"
    mask_sigma_px: float = 40.0
    """Gaussian mask bandwidth in grid pixels for the distance-limited and inhibition strategies"""

    num_scanpaths: int = 40
    seed: int = 0

    wrap_width: bool = False
    """Masks wrap around the left/right image border"""

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(
                f'Unknown strategy "{self.strategy}"\n\nFix: use one of {", ".join(STRATEGIES)}', key="strategy"
            )
        if not self.mask_sigma_px > 0:
            raise ConfigError(f"Mask sigma must be positive, got {self.mask_sigma_px}", key="mask_sigma_px")
        if self.num_scanpaths < 1:
            raise ConfigError(f"num_scanpaths must be at least 1, got {self.num_scanpaths}", key="num_scanpaths")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"Seed must be an unsigned 64-bit integer, got {self.seed}", key="seed")

    @classmethod
    def from_config(cls, config: RunConfig, /) -> "SamplingConfig":
        section = config["sampling"]
        return cls(
            strategy=section["strategy"],
            mask_sigma_px=float(section["mask_sigma_px"]),
            num_scanpaths=int(section["num_scanpaths"]),
            seed=int(section["seed"]),
            wrap_width=bool(config["volume"]["wrap_width"]),
        )


def scanpath_rng(seed: int, index: int, /) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def plan_scanpath(
    count_dist: EmpiricalDistribution, dur_dist: EmpiricalDistribution, rng: np.random.Generator, /
) -> List[Tuple[float, float]]:
    """Draw a fixation count, then the durations; onsets are cumulative durations.

    >>> c = EmpiricalDistribution((3.0,), (1.0,), 'discrete-count')
    >>> d = EmpiricalDistribution((0.5,), (1.0,), 'binned-duration', 0.1)
    >>> plan_scanpath(c, d, np.random.default_rng(0))
    [(0.0, 0.5), (0.5, 0.5), (1.0, 0.5)]
    """
    length = max(1, int(round(sample_distribution(count_dist, rng))))
    plan, start_s = [], 0.0
    for _ in range(length):
        duration_s = sample_distribution(dur_dist, rng)
        plan.append((start_s, duration_s))
        start_s += duration_s
    return plan


def slice_for_time(start_s: float, dt_s: float, t_bins: int, /) -> int:
    if not dt_s > 0:
        raise ValidationError(f"Slice duration must be positive, got {dt_s}")
    return time_to_slice(start_s, dt_s, t_bins)


def gaussian_mask(shape: Tuple[int, int], center: Point, sigma: float, wrap_width: bool = False) -> np.ndarray:
    """Gaussian over grid cell centers with peak value 1 at `center`."""
    height, width = shape
    dy = np.arange(height) + 0.5 - center[1]
    dx = np.arange(width) + 0.5 - center[0]
    if wrap_width:
        dx = (dx + width / 2) % width - width / 2
    return np.outer(np.exp(-0.5 * (dy / sigma) ** 2), np.exp(-0.5 * (dx / sigma) ** 2))


def _draw_cell(cdf: np.ndarray, weights: np.ndarray, width: int, rng: np.random.Generator) -> Point:
    index = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    if index >= cdf.size:
        index = int(np.flatnonzero(weights)[-1])
    row, col = divmod(index, width)
    return col + 0.5, row + 0.5


def _draw(weights: np.ndarray, rng: np.random.Generator) -> Optional[Point]:
    """Draw a cell proportionally to `weights`, None if they carry no mass."""
    flat = weights.ravel()
    cdf = np.cumsum(flat)
    if not cdf[-1] > 0 or not math.isfinite(cdf[-1]):
        return None
    return _draw_cell(cdf, flat, weights.shape[1], rng)


def sample_naive(slice_: np.ndarray, rng: np.random.Generator, /) -> Point:
    """Draw a cell with probability equal to its mass.

    >>> sample_naive(np.array([[0.0, 1.0]]), np.random.default_rng(0))
    (1.5, 0.5)
    """
    point = _draw(slice_, rng)
    if point is None:
        raise ValidationError("Can't sample from a slice without probability mass")
    return point


def _masked_or_naive(slice_: np.ndarray, mask: np.ndarray, rng: np.random.Generator, strategy: str) -> Point:
    point = _draw(slice_ * mask, rng)
    if point is None:
        get_logger("sampler").warning("Masked slice has no mass for {strategy}, falling back to naive sampling", strategy=strategy)
        return sample_naive(slice_, rng)
    return point


def sample_distance_limited(
    slice_: np.ndarray, prev: Point, mask_sigma_px: float, rng: np.random.Generator, /, wrap_width: bool = False
) -> Point:
    """Draw from the slice multiplied by a Gaussian centered at the previous fixation."""
    return _masked_or_naive(slice_, gaussian_mask(slice_.shape, prev, mask_sigma_px, wrap_width), rng, "distance-limited")


def inhibition_mask(
    shape: Tuple[int, int], prev_all: Sequence[Point], mask_sigma_px: float, wrap_width: bool = False
) -> np.ndarray:
    mask = np.ones(shape)
    for prev in prev_all:
        mask *= 1.0 - gaussian_mask(shape, prev, mask_sigma_px, wrap_width)
    return mask


def sample_inhibition_of_return(
    slice_: np.ndarray,
    prev_all: Sequence[Point],
    mask_sigma_px: float,
    rng: np.random.Generator,
    /,
    wrap_width: bool = False,
) -> Point:
    """Draw from the slice with the neighborhoods of all previous fixations suppressed."""
    return _masked_or_naive(
        slice_, inhibition_mask(slice_.shape, prev_all, mask_sigma_px, wrap_width), rng, "inhibition-of-return"
    )


class _ScanpathSampler:
    """Assembles scanpaths for one volume, the per-slice CDFs are computed once."""

    def __init__(self, volume: SaliencyVolume, cfg: SamplingConfig) -> None:
        self.volume = volume
        self.cfg = cfg
        self._cdfs: dict = {}

    def _naive(self, t: int, rng: np.random.Generator) -> Point:
        if t not in self._cdfs:
            flat = self.volume.values[t].ravel()
            self._cdfs[t] = (np.cumsum(flat), flat)
        cdf, flat = self._cdfs[t]
        if not cdf[-1] > 0:
            raise ValidationError(f"Slice {t} has no probability mass")
        return _draw_cell(cdf, flat, self.volume.width, rng)

    def positions(self, plan: Sequence[Tuple[float, float]], rng: np.random.Generator) -> List[Point]:
        volume, cfg = self.volume, self.cfg
        shape = (volume.height, volume.width)
        points: List[Point] = []
        suppression = np.ones(shape)
        for start_s, _ in plan:
            t = slice_for_time(start_s, volume.dt_s, volume.t_bins)
            if cfg.strategy == "naive" or not points:
                point = self._naive(t, rng)
            elif cfg.strategy == "distance-limited":
                point = sample_distance_limited(volume.values[t], points[-1], cfg.mask_sigma_px, rng, wrap_width=cfg.wrap_width)
            else:
                point = _masked_or_naive(volume.values[t], suppression, rng, cfg.strategy)
            if cfg.strategy == "inhibition-of-return":
                suppression *= 1.0 - gaussian_mask(shape, point, cfg.mask_sigma_px, cfg.wrap_width)
            points.append(point)
        return points


def _assemble(
    image_id: str,
    observer_id: str,
    plan: Sequence[Tuple[float, float]],
    points: Sequence[Point],
    grid: Tuple[int, int],
    image_dims: Tuple[int, int],
) -> ScanPath:
    (height, width), (image_width, image_height) = grid, image_dims
    fixations = tuple(
        Fixation(float(x * image_width / width), float(y * image_height / height), start_s, duration_s)
        for (x, y), (start_s, duration_s) in zip(points, plan)
    )
    return ScanPath(image_id, observer_id, fixations)


def generate_scanpaths(
    v: SaliencyVolume,
    count_dist: EmpiricalDistribution,
    dur_dist: EmpiricalDistribution,
    cfg: SamplingConfig,
    /,
    image_dims: Tuple[int, int] = DEFAULT_IMAGE_DIMS,
    image_id: str = "generated",
) -> List[ScanPath]:
    """Generate `cfg.num_scanpaths` scanpaths with the configured strategy, in image pixel coordinates."""
    if cfg.strategy == "random-baseline":
        return generate_random_scanpaths(image_dims, count_dist, dur_dist, cfg, grid=(v.height, v.width), image_id=image_id)
    sampler = _ScanpathSampler(v, cfg)
    scanpaths = []
    for index in range(cfg.num_scanpaths):
        rng = scanpath_rng(cfg.seed, index)
        plan = plan_scanpath(count_dist, dur_dist, rng)
        points = sampler.positions(plan, rng)
        scanpaths.append(_assemble(image_id, f"{cfg.strategy}-{index:03d}", plan, points, (v.height, v.width), image_dims))
    get_logger("sampler").debug(
        "Generated {n} scanpaths for {image_id} with strategy {strategy}",
        n=len(scanpaths),
        image_id=image_id,
        strategy=cfg.strategy,
    )
    return scanpaths


def generate_random_scanpaths(
    image_dims: Tuple[int, int],
    count_dist: EmpiricalDistribution,
    dur_dist: EmpiricalDistribution,
    cfg: SamplingConfig,
    /,
    grid: Optional[Tuple[int, int]] = None,
    image_id: str = "generated",
) -> List[ScanPath]:
    """Scanpaths with positions uniform over an (H, W) grid, the image pixel grid by default."""
    image_width, image_height = image_dims
    height, width = grid or (image_height, image_width)
    scanpaths = []
    for index in range(cfg.num_scanpaths):
        rng = scanpath_rng(cfg.seed, index)
        plan = plan_scanpath(count_dist, dur_dist, rng)
        cells = rng.integers(0, height * width, size=len(plan))
        points = [(col + 0.5, row + 0.5) for row, col in zip(*np.divmod(cells, width))]
        scanpaths.append(_assemble(image_id, f"random-{index:03d}", plan, points, (height, width), image_dims))
    return scanpaths
