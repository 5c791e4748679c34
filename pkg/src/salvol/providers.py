"""Volume providers supply a saliency volume per image.

A provider stands where a learned predictor would be: the sampler and the evaluation only need a volume for each
image. Custom providers are registered with :py:func:`add_provider_type` and created from config dicts by their
class name.

>>> provider = create_provider({'class': 'UniformProvider', 'settings': VolumeSettings(1, 2, 2)})
>>> provider.volume_for('any').values.tolist()
[[[0.25, 0.25], [0.25, 0.25]]]
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Type, Union

import numpy as np

from salvol.config import get_logger
from salvol.errors import ConfigError, ValidationError
from salvol.fixations import FixationDataset
from salvol.formats import read_volume
from salvol.volume import (
    SaliencyVolume,
    VolumeSettings,
    build_saliency_volume,
    extract_saliency_map,
    normalize_slices,
)

__all__ = [
    "VolumeProvider",
    "GroundTruthProvider",
    "SaliencyMapProvider",
    "UniformProvider",
    "CenterBiasProvider",
    "FileProvider",
    "add_provider_type",
    "create_provider",
]

_provider_types: Dict[str, Type["VolumeProvider"]] = {}


class VolumeProvider(ABC):
    """Saliency volume source interface."""

    @abstractmethod
    def volume_for(self, image_id: str, dataset: Optional[FixationDataset] = None, /) -> SaliencyVolume:
        """Return the volume of an image, `dataset` holds the image's fixations if the provider needs them."""

    def __str__(self) -> str:
        return f"<{self.__class__.__name__}>"


def add_provider_type(typ: Type[VolumeProvider], /) -> Type[VolumeProvider]:
    _provider_types[typ.__name__] = typ
    return typ


def create_provider(params: dict, /) -> VolumeProvider:
    """Create a provider from a config dict, the "class" key selects a registered provider type."""
    params = dict(params)
    cls_name = params.pop("class", "GroundTruthProvider")
    try:
        cls = _provider_types[cls_name]
    except KeyError:
        raise ConfigError(
            f'Unknown provider class "{cls_name}"\n\nFix: register it with `salvol.add_provider_type()`'
            f' or use one of {", ".join(sorted(_provider_types))}',
            key="class",
        ) from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"Invalid parameters for {cls_name}: {exc}", key="class") from None


def _settings_dims(settings: VolumeSettings) -> tuple:
    return settings.t_bins or 1, settings.height, settings.width


def _require_dataset(dataset: Optional[FixationDataset], provider: VolumeProvider) -> FixationDataset:
    if dataset is None:
        raise ValidationError(f"{provider} needs a fixation dataset")
    return dataset


@add_provider_type
@dataclass
class GroundTruthProvider(VolumeProvider):
    """Pooled saliency volume of all observers of the image."""

    settings: VolumeSettings = field(default_factory=VolumeSettings)
    _cache: Dict[str, SaliencyVolume] = field(default_factory=dict, init=False, repr=False, compare=False)

    def volume_for(self, image_id: str, dataset: Optional[FixationDataset] = None, /) -> SaliencyVolume:
        if image_id in self._cache:
            return self._cache[image_id]
        record = _require_dataset(dataset, self).image(image_id)
        s = self.settings
        volume = build_saliency_volume(
            record.scanpaths, (s.t_bins, s.height, s.width), s.dt_s, s.bandwidths, s.wrap_width, record.dims
        )
        get_logger("providers").info(
            "Built ground truth volume {shape} for {image_id} from {n} scanpaths",
            shape=volume.shape,
            image_id=image_id,
            n=len(record.scanpaths),
        )
        self._cache[image_id] = volume
        return volume


@add_provider_type
@dataclass
class SaliencyMapProvider(VolumeProvider):
    """Ground truth saliency map repeated in every slice, the volume carries no temporal information."""

    settings: VolumeSettings = field(default_factory=VolumeSettings)
    _cache: Dict[str, SaliencyVolume] = field(default_factory=dict, init=False, repr=False, compare=False)

    def volume_for(self, image_id: str, dataset: Optional[FixationDataset] = None, /) -> SaliencyVolume:
        if image_id not in self._cache:
            volume = GroundTruthProvider(self.settings).volume_for(image_id, _require_dataset(dataset, self))
            values = np.broadcast_to(extract_saliency_map(volume).values, volume.shape)
            self._cache[image_id] = SaliencyVolume(values, volume.dt_s)
        return self._cache[image_id]


@add_provider_type
@dataclass
class UniformProvider(VolumeProvider):
    settings: VolumeSettings = field(default_factory=VolumeSettings)

    def volume_for(self, image_id: str, dataset: Optional[FixationDataset] = None, /) -> SaliencyVolume:
        return normalize_slices(SaliencyVolume(np.zeros(_settings_dims(self.settings)), self.settings.dt_s))


@add_provider_type
@dataclass
class CenterBiasProvider(VolumeProvider):
    """Gaussian centered on the image center in every slice.

    Sigmas are fractions of the grid height and width, the default favors the equator band of a 360 image.
    """

    settings: VolumeSettings = field(default_factory=VolumeSettings)
    sigma_h_frac: float = 0.15
    sigma_w_frac: float = 0.3

    def __post_init__(self) -> None:
        if self.sigma_h_frac <= 0 or self.sigma_w_frac <= 0:
            raise ConfigError("Center bias sigmas must be positive", key="sigma_frac")

    def volume_for(self, image_id: str, dataset: Optional[FixationDataset] = None, /) -> SaliencyVolume:
        t_bins, height, width = _settings_dims(self.settings)
        ys = np.arange(height) + 0.5 - height / 2
        xs = np.arange(width) + 0.5 - width / 2
        plane = np.outer(
            np.exp(-0.5 * (ys / (self.sigma_h_frac * height)) ** 2),
            np.exp(-0.5 * (xs / (self.sigma_w_frac * width)) ** 2),
        )
        values = np.broadcast_to(plane, (t_bins, height, width))
        return normalize_slices(SaliencyVolume(values, self.settings.dt_s))


@add_provider_type
@dataclass
class FileProvider(VolumeProvider):
    """Volumes stored as ``<directory>/<image_id>.salvol``."""

    directory: Union[str, Path] = "."

    def volume_for(self, image_id: str, dataset: Optional[FixationDataset] = None, /) -> SaliencyVolume:
        return read_volume(Path(self.directory) / f"{image_id}.salvol")
