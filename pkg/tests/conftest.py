import io

import numpy as np
import pytest

from salvol import Fixation, FixationDataset, ScanPath, configure_logging


@pytest.fixture
def log_stream():
    """Capture library logs at DEBUG level, the stream holds the formatted records."""
    logger = configure_logging('DEBUG')
    stream = io.BytesIO()
    for handler in logger.handlers:
        handler._stream = stream
    yield stream
    configure_logging()


def read_log(stream) -> str:
    return stream.getvalue().decode()


def make_scanpath(points, image_id='img', observer_id='obs', duration_s=0.3, start_s=0.0):
    """Scanpath through (x, y) points with evenly spaced onsets."""
    fixations = tuple(
        Fixation(float(x), float(y), start_s + k * duration_s, duration_s) for k, (x, y) in enumerate(points)
    )
    return ScanPath(image_id, observer_id, fixations)


def random_scanpath(rng, image_dims, length, observer_id='obs', image_id='img'):
    width, height = image_dims
    xs = rng.uniform(0, width, size=length)
    ys = rng.uniform(0, height, size=length)
    durations = rng.uniform(0.1, 1.0, size=length)
    starts = np.concatenate([[0.0], np.cumsum(durations[:-1])])
    fixations = tuple(Fixation(float(x), float(y), float(s), float(d)) for x, y, s, d in zip(xs, ys, starts, durations))
    return ScanPath(image_id, observer_id, fixations)


def make_dataset(scanpaths, image_dims=(200, 100)):
    return FixationDataset.from_scanpaths(scanpaths, image_dims)
