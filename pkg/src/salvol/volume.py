"""Saliency volumes: construction from fixations, maps derived from them and the BCE comparison."""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import convolve1d

from salvol.config import RunConfig, get_logger
from salvol.errors import EmptyInputError, ShapeError, ValidationError
from salvol.fixations import DEFAULT_IMAGE_DIMS, ScanPath

__all__ = [
    "DEFAULT_DIMS",
    "DEFAULT_DT_S",
    "BCE_EPS",
    "GaussianBandwidths",
    "SaliencyVolume",
    "SaliencyMap",
    "VolumeSettings",
    "time_to_slice",
    "time_axis_length",
    "quantize_timestamps",
    "build_binary_volume",
    "gaussian_kernel",
    "gaussian_blur_3d",
    "normalize_slices",
    "build_saliency_volume",
    "extract_saliency_map",
    "extract_weighted_map",
    "bce_loss",
]

DEFAULT_DIMS = (12, 300, 600)  #: (T, H, W)
DEFAULT_DT_S = 25.0 / 12  #: 25 s viewing time over 12 slices
KERNEL_TRUNCATE = 4.0  #: kernel support in sigmas
BCE_EPS = 1e-7

VolumeDims = Tuple[int, int, int]
ImageDims = Tuple[int, int]


@dataclass(frozen=True)
class GaussianBandwidths:
    sigma_t: float = 4.0
    """Temporal bandwidth in slices"""

    sigma_h: float = 20.0
    """Vertical bandwidth in grid pixels"""

    sigma_w: float = 20.0
    """Horizontal bandwidth in grid pixels"""

    def __post_init__(self) -> None:
        if not all(s > 0 and math.isfinite(s) for s in self.as_tuple()):
            raise ValidationError(f"Gaussian bandwidths must be strictly positive, got {self.as_tuple()}")

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.sigma_t, self.sigma_h, self.sigma_w


def _readonly(values: np.ndarray, ndim: int, name: str) -> np.ndarray:
    values = np.array(values, dtype=np.float64)
    if values.ndim != ndim or 0 in values.shape:
        raise ShapeError(f"{name} values must be a non-empty {ndim}D array", expected=ndim, actual=values.shape)
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ValidationError(f"{name} values must be finite and non-negative")
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class SaliencyVolume:
    """Stack of per-slice fixation probability maps over time.

    `values` is a read-only (T, H, W) float64 array. Equality compares values bitwise.
    """

    values: np.ndarray
    dt_s: float = DEFAULT_DT_S

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _readonly(self.values, 3, "Saliency volume"))
        if not self.dt_s > 0:
            raise ValidationError(f"Slice duration must be positive, got {self.dt_s}")

    @property
    def t_bins(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> VolumeDims:
        return self.values.shape  # type: ignore[return-value]

    def slice_sums(self) -> np.ndarray:
        return self.values.sum(axis=(1, 2))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SaliencyVolume):
            return NotImplemented
        return self.dt_s == other.dt_s and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    """2D probability map of fixations regardless of order."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = _readonly(self.values, 2, "Saliency map")
        if abs(values.sum() - 1.0) > 1e-6:
            raise ValidationError(f"Saliency map must sum to 1, got {values.sum()}")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class VolumeSettings:
    """Construction parameters of a saliency volume.

    `t_bins = None` derives the time axis length from the data, see :py:func:`time_axis_length`.
    """

    t_bins: Optional[int] = DEFAULT_DIMS[0]
    height: int = DEFAULT_DIMS[1]
    width: int = DEFAULT_DIMS[2]
    dt_s: float = DEFAULT_DT_S
    bandwidths: GaussianBandwidths = field(default_factory=GaussianBandwidths)
    wrap_width: bool = False

    def __post_init__(self) -> None:
        if self.t_bins is not None and self.t_bins < 1 or self.height < 1 or self.width < 1:
            raise ValidationError(f"Volume dims must be positive, got {(self.t_bins, self.height, self.width)}")
        if not self.dt_s > 0:
            raise ValidationError(f"Slice duration must be positive, got {self.dt_s}")

    @classmethod
    def from_config(cls, config: RunConfig, /) -> "VolumeSettings":
        section = config["volume"]
        t_bins, height, width = (int(v) for v in section["dims"])
        return cls(
            t_bins=t_bins or None,
            height=height,
            width=width,
            dt_s=float(section["dt_s"]),
            bandwidths=GaussianBandwidths(*(float(v) for v in section["bandwidths"])),
            wrap_width=bool(section["wrap_width"]),
        )


def time_to_slice(start_s: float, dt_s: float, t_bins: int, /) -> int:
    """Map an onset to its temporal slice, clamped to the time axis.

    >>> time_to_slice(2.1, 25 / 12, 12), time_to_slice(99.0, 25 / 12, 12)
    (1, 11)
    """
    return min(max(int(math.floor(start_s / dt_s)), 0), t_bins - 1)


def quantize_timestamps(sp: ScanPath, dt_s: float, t_bins: int, /) -> np.ndarray:
    if not dt_s > 0 or t_bins < 1:
        raise ValidationError(f"Need dt_s > 0 and t_bins >= 1, got dt_s={dt_s}, t_bins={t_bins}")
    starts = np.array([f.start_s for f in sp.fixations], dtype=np.float64)
    return np.clip(np.floor(starts / dt_s), 0, t_bins - 1).astype(np.int64)


def time_axis_length(scanpaths: Sequence[ScanPath], dt_s: float, /) -> int:
    """Number of slices needed to hold the latest fixation onset."""
    if not scanpaths:
        raise EmptyInputError("Can't derive the time axis from an empty scanpath set")
    last = max(f.start_s for sp in scanpaths for f in sp.fixations)
    return int(math.floor(last / dt_s)) + 1


def build_binary_volume(
    scanpaths: Sequence[ScanPath],
    dims: VolumeDims = DEFAULT_DIMS,
    dt_s: float = DEFAULT_DT_S,
    image_dims: ImageDims = DEFAULT_IMAGE_DIMS,
) -> SaliencyVolume:
    """Place a 1 at every fixated voxel and 0 elsewhere.

    Positions are rescaled from `image_dims` (width, height) to the (H, W) grid by rounding down.
    """
    if not scanpaths:
        raise EmptyInputError("Can't build a volume from an empty scanpath set")
    image_ids = {sp.image_id for sp in scanpaths}
    if len(image_ids) > 1:
        raise ValidationError(f"Scanpaths of one volume must belong to one image, got {sorted(image_ids)}")
    t_bins, height, width = dims
    if min(dims) < 1:
        raise ValidationError(f"Volume dims must be positive, got {dims}")
    image_width, image_height = image_dims
    values = np.zeros(dims, dtype=np.float64)
    for sp in scanpaths:
        xs = np.array([f.x_px for f in sp.fixations])
        ys = np.array([f.y_px for f in sp.fixations])
        cols = np.clip(np.floor(xs * width / image_width), 0, width - 1).astype(np.int64)
        rows = np.clip(np.floor(ys * height / image_height), 0, height - 1).astype(np.int64)
        values[quantize_timestamps(sp, dt_s, t_bins), rows, cols] = 1.0
    return SaliencyVolume(values, dt_s)


def gaussian_kernel(sigma: float, truncate: float = KERNEL_TRUNCATE) -> np.ndarray:
    """1D Gaussian truncated at `truncate` sigmas and normalized to sum 1.

    >>> gaussian_kernel(1.0).size
    9
    """
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def _convolve_circular(values: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = kernel.size // 2
    pad = [(0, 0)] * values.ndim
    pad[axis] = (radius, radius)
    padded = convolve1d(np.pad(values, pad, mode="wrap"), kernel, axis=axis, mode="constant", cval=0.0)
    return np.take(padded, np.arange(radius, radius + values.shape[axis]), axis=axis)


def gaussian_blur_3d(v: SaliencyVolume, bw: GaussianBandwidths, wrap_width: bool = False) -> SaliencyVolume:
    """Separable Gaussian blur with zero padding, circular along the width when `wrap_width` is set."""
    values = convolve1d(v.values, gaussian_kernel(bw.sigma_t), axis=0, mode="constant", cval=0.0)
    values = convolve1d(values, gaussian_kernel(bw.sigma_h), axis=1, mode="constant", cval=0.0)
    if wrap_width:
        values = _convolve_circular(values, gaussian_kernel(bw.sigma_w), axis=2)
    else:
        values = convolve1d(values, gaussian_kernel(bw.sigma_w), axis=2, mode="constant", cval=0.0)
    return SaliencyVolume(np.maximum(values, 0.0), v.dt_s)


def normalize_slices(v: SaliencyVolume, /) -> SaliencyVolume:
    """Turn each slice into a probability map, empty slices become uniform."""
    sums = v.slice_sums()[:, None, None]
    uniform = 1.0 / (v.height * v.width)
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(sums > 0, v.values / sums, uniform)
    empty = int(np.count_nonzero(sums == 0))
    if empty:
        get_logger("volume").debug("{empty} empty slices set to uniform", empty=empty)
    return SaliencyVolume(values, v.dt_s)


def build_saliency_volume(
    scanpaths: Sequence[ScanPath],
    dims: Union[VolumeDims, Tuple[Optional[int], int, int]] = DEFAULT_DIMS,
    dt_s: float = DEFAULT_DT_S,
    bw: Optional[GaussianBandwidths] = None,
    wrap_width: bool = False,
    image_dims: ImageDims = DEFAULT_IMAGE_DIMS,
) -> SaliencyVolume:
    """Binary volume, blurred, with slices normalized.

    A falsy T in `dims` derives the time axis length from the latest onset. Values are rounded to float32, the
    precision of volume files, so a written volume reads back unchanged.
    """
    t_bins, height, width = dims
    if not t_bins:
        t_bins = time_axis_length(scanpaths, dt_s)
    binary = build_binary_volume(scanpaths, (t_bins, height, width), dt_s, image_dims)
    volume = normalize_slices(gaussian_blur_3d(binary, bw or GaussianBandwidths(), wrap_width))
    return SaliencyVolume(volume.values.astype(np.float32).astype(np.float64), dt_s)


def extract_weighted_map(v: SaliencyVolume, weights: Sequence[float], /) -> SaliencyMap:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (v.t_bins,):
        raise ShapeError(f"Expected {v.t_bins} slice weights, got {weights.size}", expected=v.t_bins, actual=weights.size)
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ValidationError("Slice weights must be finite and non-negative")
    if not np.any(weights > 0):
        raise ValidationError("Slice weights must not be all zero")
    combined = np.tensordot(weights, v.values, axes=(0, 0))
    total = combined.sum()
    if total <= 0:
        return SaliencyMap(np.full(combined.shape, 1.0 / combined.size))
    return SaliencyMap(combined / total)


def extract_saliency_map(v: SaliencyVolume, /) -> SaliencyMap:
    """Sum of all slices normalized to 1.

    >>> v = SaliencyVolume(np.ones((2, 1, 2)))
    >>> extract_saliency_map(v).values.tolist()
    [[0.5, 0.5]]
    """
    return extract_weighted_map(v, np.ones(v.t_bins))


def _unit_interval(x: Union[SaliencyVolume, SaliencyMap, np.ndarray], name: str) -> np.ndarray:
    if isinstance(x, (SaliencyVolume, SaliencyMap)):
        peak = x.values.max()
        return x.values / peak if peak > 0 else np.array(x.values)
    values = np.asarray(x, dtype=np.float64)
    if np.any(values < 0) or np.any(values > 1) or not np.all(np.isfinite(values)):
        raise ValidationError(f"{name} array values must lie in [0, 1]")
    return values


def bce_loss(
    pred: Union[SaliencyVolume, SaliencyMap, np.ndarray],
    gt: Union[SaliencyVolume, SaliencyMap, np.ndarray],
    eps: float = BCE_EPS,
) -> float:
    """Mean binary cross entropy between ground truth and prediction.

    Volumes and maps are rescaled to [0, 1] by their maxima, plain arrays are used as given.

    >>> round(bce_loss(np.array([0.5]), np.array([1.0])), 6)
    0.693147
    """
    predicted, target = _unit_interval(pred, "Predicted"), _unit_interval(gt, "Ground truth")
    if predicted.shape != target.shape:
        raise ShapeError(
            f"BCE operands differ in shape: {predicted.shape} vs {target.shape}",
            expected=target.shape,
            actual=predicted.shape,
        )
    predicted = np.clip(predicted, eps, 1 - eps)
    return float(-np.mean(target * np.log(predicted) + (1 - target) * np.log1p(-predicted)))
