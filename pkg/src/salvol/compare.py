"""Side by side evaluation of the sampling strategies and the ground truth baselines."""

from dataclasses import replace
from typing import Dict, Optional, Sequence

from salvol.config import get_logger
from salvol.errors import ConfigError, EmptyInputError
from salvol.fixations import (
    EmpiricalDistribution,
    FixationDataset,
    fit_count_distribution,
    fit_duration_distribution,
)
from salvol.metric import MetricConfig, evaluate_sets
from salvol.providers import GroundTruthProvider, SaliencyMapProvider
from salvol.sampler import SamplingConfig, generate_random_scanpaths, generate_scanpaths
from salvol.volume import VolumeSettings

__all__ = ["ROWS", "compare_strategies"]

ROWS = (
    "random",
    "naive",
    "inhibition-of-return",
    "distance-limited",
    "gt-map",
    "gt-volume",
    "gt-scanpaths",
)  #: rows of a strategy comparison
DEFAULT_SEEDS = (1, 2, 3, 4, 5)


def compare_strategies(
    dataset: FixationDataset,
    settings: Optional[VolumeSettings] = None,
    sampling: Optional[SamplingConfig] = None,
    metric: Optional[MetricConfig] = None,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    count_dist: Optional[EmpiricalDistribution] = None,
    dur_dist: Optional[EmpiricalDistribution] = None,
    rows: Sequence[str] = ROWS,
) -> Dict[str, float]:
    """Mean evaluation cost of each row over all images and seeds.

    Strategy rows sample ground truth volumes. `gt-map` and `gt-volume` sample the ground truth saliency map and
    volume with the strategy configured in `sampling`, `gt-scanpaths` matches the ground truth with itself.
    """
    unknown = [row for row in rows if row not in ROWS]
    if unknown:
        raise ConfigError(f"Unknown comparison rows {unknown}\n\nFix: use any of {', '.join(ROWS)}", key="rows")
    if not dataset.num_scanpaths or not seeds:
        raise EmptyInputError("A strategy comparison needs scanpaths and at least one seed")
    settings = settings or VolumeSettings()
    sampling = replace(sampling or SamplingConfig(), wrap_width=settings.wrap_width)
    metric = metric or MetricConfig()
    count_dist = count_dist or fit_count_distribution(dataset)
    dur_dist = dur_dist or fit_duration_distribution(dataset)
    volumes, maps = GroundTruthProvider(settings), SaliencyMapProvider(settings)
    logger = get_logger("compare")

    totals: Dict[str, float] = {row: 0.0 for row in rows}
    runs = 0
    for image_id, record in dataset.images.items():
        if not record.scanpaths:
            continue
        truth, dims = record.scanpaths, record.dims
        for seed in seeds:
            runs += 1
            for row in rows:
                if row == "gt-scanpaths":
                    generated = truth
                elif row == "random":
                    cfg = replace(sampling, strategy="random-baseline", seed=seed)
                    generated = generate_random_scanpaths(
                        dims, count_dist, dur_dist, cfg, grid=(settings.height, settings.width), image_id=image_id
                    )
                else:
                    strategy = sampling.strategy if row.startswith("gt-") else row
                    provider = maps if row == "gt-map" else volumes
                    cfg = replace(sampling, strategy=strategy, seed=seed)
                    volume = provider.volume_for(image_id, dataset)
                    generated = generate_scanpaths(volume, count_dist, dur_dist, cfg, image_dims=dims, image_id=image_id)
                totals[row] += evaluate_sets(generated, truth, dims, metric).mean_cost
        logger.debug("Compared strategies on {image_id}", image_id=image_id)

    scores = {row: total / runs for row, total in totals.items()}
    for row, score in scores.items():
        logger.info("{row:22} {score:.6f}", row=row, score=score)
    return scores
