"""Synthetic 360-degree fixation dataset with a known ground truth.

Each image shows a row of targets along the equator. Observers look at the targets in order, one target per
fixation, and never come back to one they have seen. Even images have close targets, odd images far apart ones,
and the row runs eastward or westward in turns. Fixation counts and durations follow the fixed laws below,
fixations that would end after the viewing time are dropped (the first fixation is always kept).
"""

from typing import Tuple

import numpy as np

from salvol.fixations import EmpiricalDistribution, Fixation, FixationDataset, ImageRecord, ScanPath, sample_distribution

__all__ = ["COUNT_LAW", "DURATION_LAW", "target_row", "make_synthetic_dataset"]

COUNT_LAW = EmpiricalDistribution(
    tuple(float(n) for n in range(8, 17)),
    (0.05, 0.1, 0.15, 0.2, 0.2, 0.12, 0.08, 0.06, 0.04),
    "discrete-count",
)
DURATION_LAW = EmpiricalDistribution(
    tuple(round(0.2 + 0.1 * k, 1) for k in range(11)),
    (0.04, 0.08, 0.12, 0.14, 0.14, 0.12, 0.1, 0.09, 0.07, 0.06, 0.04),
    "binned-duration",
    0.1,
)

TARGET_SPACING_DEG = (13.0, 31.0)  #: close and far rows, by image parity
ROUTE_OFFSET_DEG = 150.0  #: first target, behind the image center along the row
GAZE_NOISE_DEG = 0.5
SACCADE_S = 0.04


def target_row(index: int, image_dims: Tuple[int, int]) -> Tuple[float, float, float]:
    """First target (x, y) and the signed step between targets of image `index`, in pixels.

    >>> tuple(round(v, 6) for v in target_row(0, (1200, 600)))
    (100.0, 300.0, 43.333333)
    """
    width, height = image_dims
    px_per_deg = width / 360.0
    direction = -1.0 if (index // 2) % 2 else 1.0
    x0 = (width / 2 - direction * ROUTE_OFFSET_DEG * px_per_deg) % width
    return x0, height / 2, direction * TARGET_SPACING_DEG[index % 2] * px_per_deg


def _observer(
    rng: np.random.Generator,
    image_id: str,
    observer_id: str,
    row: Tuple[float, float, float],
    image_dims: Tuple[int, int],
    viewing_s: float,
) -> ScanPath:
    width, height = image_dims
    noise = GAZE_NOISE_DEG * width / 360.0
    x0, y0, step = row
    fixations, start_s = [], 0.0
    for target in range(int(sample_distribution(COUNT_LAW, rng))):
        duration_s = sample_distribution(DURATION_LAW, rng)
        if fixations and start_s + duration_s > viewing_s:
            break
        dx, dy = rng.normal(0.0, noise, size=2)
        x = (x0 + target * step + dx) % width
        if x >= width:  # tiny negative offsets round up to the width
            x = 0.0
        y = min(max(y0 + dy, 0.0), height - 1e-6)
        fixations.append(Fixation(float(x), float(y), round(start_s, 6), duration_s))
        start_s += duration_s + SACCADE_S
    return ScanPath(image_id, observer_id, tuple(fixations))


def make_synthetic_dataset(
    seed: int = 0,
    n_images: int = 6,
    n_observers: int = 20,
    image_dims: Tuple[int, int] = (1200, 600),
    viewing_s: float = 25.0,
) -> FixationDataset:
    """Deterministic synthetic dataset, images are named ``synth-00``, ``synth-01``...

    >>> ds = make_synthetic_dataset(n_images=1, n_observers=2)
    >>> ds.image_ids, ds.num_scanpaths
    (['synth-00'], 2)
    """
    width, height = image_dims
    images = {}
    for index in range(n_images):
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        image_id = f"synth-{index:02d}"
        row = target_row(index, image_dims)
        scanpaths = tuple(
            _observer(rng, image_id, f"obs-{k:02d}", row, image_dims, viewing_s) for k in range(n_observers)
        )
        images[image_id] = ImageRecord(width, height, scanpaths)
    return FixationDataset(images)
