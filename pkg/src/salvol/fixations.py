"""Fixation datasets and the empirical distributions fitted on them."""

import io
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterator, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from salvol.config import get_logger
from salvol.errors import EmptyInputError, ParseError, ValidationError

__all__ = [
    "CSV_HEADER",
    "DEFAULT_BIN_WIDTH_S",
    "DEFAULT_IMAGE_DIMS",
    "Fixation",
    "ScanPath",
    "ImageRecord",
    "FixationDataset",
    "EmpiricalDistribution",
    "DistributionKind",
    "InputFormat",
    "parse_fixations",
    "serialize_fixations",
    "fit_count_distribution",
    "fit_duration_distribution",
    "sample_distribution",
]

CSV_HEADER = ("image_id", "observer_id", "x_px", "y_px", "start_s", "duration_s")
DEFAULT_BIN_WIDTH_S = 0.1
DEFAULT_IMAGE_DIMS = (6000, 3000)  #: (width, height) of the 360-degree stimuli

InputFormat = Literal["csv", "json"]
DistributionKind = Literal["discrete-count", "binned-duration"]
ImageDims = Tuple[int, int]


@dataclass(frozen=True)
class Fixation:
    """A single fixation in image pixel coordinates."""

    __slots__ = ("x_px", "y_px", "start_s", "duration_s")

    x_px: float
    """Position along the image width"""

    y_px: float
    """Position along the image height"""

    start_s: float
    """Onset in seconds from the stimulus onset"""

    duration_s: float
    """Fixation duration in seconds"""

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x_px, self.y_px, self.start_s, self.duration_s)):
            raise ValidationError(f"Fixation fields must be finite numbers: {self}")
        if self.start_s < 0:
            raise ValidationError(f"Fixation start must be non-negative, got {self.start_s}")
        if self.duration_s <= 0:
            raise ValidationError(f"Fixation duration must be positive, got {self.duration_s}")

    def within(self, width_px: int, height_px: int, /) -> bool:
        return 0 <= self.x_px < width_px and 0 <= self.y_px < height_px


@dataclass(frozen=True)
class ScanPath:
    """Ordered fixations of one observer on one image."""

    image_id: str
    observer_id: str
    fixations: Tuple[Fixation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fixations", tuple(self.fixations))
        if not self.fixations:
            raise ValidationError(f"Scanpath {self.image_id}/{self.observer_id} has no fixations")
        starts = [f.start_s for f in self.fixations]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValidationError(
                f"Fixation onsets of scanpath {self.image_id}/{self.observer_id} must be strictly increasing"
            )

    def __len__(self) -> int:
        return len(self.fixations)

    def __iter__(self) -> Iterator[Fixation]:
        return iter(self.fixations)


@dataclass(frozen=True)
class ImageRecord:
    width_px: int
    height_px: int
    scanpaths: Tuple[ScanPath, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "scanpaths", tuple(self.scanpaths))
        if self.width_px < 1 or self.height_px < 1:
            raise ValidationError(f"Image dims must be positive, got {self.width_px}x{self.height_px}")

    @property
    def dims(self) -> ImageDims:
        return self.width_px, self.height_px


@dataclass(frozen=True)
class FixationDataset:
    """Per-image collections of observer scanpaths.

    The dataset is treated as immutable: operations never modify it in place.
    """

    images: Mapping[str, ImageRecord] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for image_id, record in self.images.items():
            for scanpath in record.scanpaths:
                if scanpath.image_id != image_id:
                    raise ValidationError(f'Scanpath of image "{scanpath.image_id}" is filed under "{image_id}"')
                for fixation in scanpath.fixations:
                    if not fixation.within(record.width_px, record.height_px):
                        raise ValidationError(
                            f"Fixation ({fixation.x_px}, {fixation.y_px}) of {image_id}/{scanpath.observer_id} "
                            f"is outside the {record.width_px}x{record.height_px} image"
                        )
            if record.width_px != 2 * record.height_px:
                get_logger("fixations").warning(
                    "Image {image_id} is {width}x{height}, not a 2:1 equirectangular frame",
                    image_id=image_id,
                    width=record.width_px,
                    height=record.height_px,
                )

    @classmethod
    def from_scanpaths(
        cls, scanpaths: Sequence[ScanPath], image_dims: Union[ImageDims, Mapping[str, ImageDims]], /
    ) -> "FixationDataset":
        grouped: Dict[str, List[ScanPath]] = {}
        for scanpath in scanpaths:
            grouped.setdefault(scanpath.image_id, []).append(scanpath)
        images = {
            image_id: ImageRecord(*_dims_for(image_id, image_dims), scanpaths=tuple(items))
            for image_id, items in grouped.items()
        }
        return cls(images)

    @property
    def image_ids(self) -> List[str]:
        return list(self.images)

    def image(self, image_id: str, /) -> ImageRecord:
        try:
            return self.images[image_id]
        except KeyError:
            raise ValidationError(
                f'Image "{image_id}" is not in the dataset\n\nFix: use one of {", ".join(self.images) or "(none)"}'
            ) from None

    def scanpaths(self) -> Iterator[ScanPath]:
        for record in self.images.values():
            yield from record.scanpaths

    @property
    def num_scanpaths(self) -> int:
        return sum(len(record.scanpaths) for record in self.images.values())


def _dims_for(image_id: str, image_dims: Union[ImageDims, Mapping[str, ImageDims], None]) -> ImageDims:
    if image_dims is None:
        return DEFAULT_IMAGE_DIMS
    if isinstance(image_dims, Mapping):
        width, height = image_dims.get(image_id, DEFAULT_IMAGE_DIMS)
    else:
        width, height = image_dims
    return int(width), int(height)


def _to_float(value: Any, name: str, line: int) -> float:
    if isinstance(value, bool):
        raise ParseError(f'Field "{name}" must be a number, got {value!r}', line=line)
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise ParseError(f'Field "{name}" must be a number, got {value!r}', line=line) from None
    if not math.isfinite(result):
        raise ParseError(f'Field "{name}" must be finite, got {value!r}', line=line)
    return result


def _read_csv_frame(text: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, index_col=False)
    except pd.errors.EmptyDataError:
        raise ParseError("Missing CSV header", line=1) from None
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ParseError(f"Malformed CSV row: {exc}", line=int(match[1]) if match else None) from None
    header = tuple(str(column).strip() for column in frame.columns)
    if header != CSV_HEADER:
        raise ParseError(f'CSV header must be exactly "{",".join(CSV_HEADER)}", got "{",".join(header)}"', line=1)
    frame.columns = list(CSV_HEADER)
    # short rows are padded with NaN even with keep_default_na off
    short = frame.isna().any(axis=1)
    if short.any():
        index = int(short.to_numpy().argmax())
        fields = int(frame.iloc[index].notna().sum())
        raise ParseError(f"Expected {len(CSV_HEADER)} fields, got {fields}", line=index + 2)
    return frame.assign(line=np.arange(len(frame)) + 2)


def _read_json_frame(text: str) -> pd.DataFrame:
    try:
        data = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as exc:
        raise ParseError(f"Invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, list):
        raise ParseError("JSON fixations must be an array of objects")
    for index, item in enumerate(data):
        if not isinstance(item, dict):
            raise ParseError("JSON fixation record must be an object", line=index)
        missing = [key for key in CSV_HEADER if key not in item]
        if missing:
            raise ParseError(f"JSON fixation record misses keys {missing}", line=index)
    records = [[item[key] for key in CSV_HEADER] for item in data]
    frame = pd.DataFrame(records, columns=list(CSV_HEADER), dtype=object)
    return frame.assign(line=np.arange(len(frame)))


def parse_fixations(
    data: Union[bytes, str],
    format: InputFormat = "csv",
    /,
    image_dims: Optional[Mapping[str, ImageDims]] = None,
    default_image_dims: ImageDims = DEFAULT_IMAGE_DIMS,
) -> FixationDataset:
    """Parse a fixation log into a dataset.

    :param data: CSV or JSON document (bytes are decoded as UTF-8)
    :param format: 'csv' or 'json'
    :param image_dims: (width, height) per image id, images not listed here use `default_image_dims`

    Rows are grouped by (image_id, observer_id) in order of first appearance. Unsorted fixations of a scanpath are
    reordered by onset with a warning.

    >>> ds = parse_fixations(b'image_id,observer_id,x_px,y_px,start_s,duration_s\\nimg1,obs1,10,20,0.0,0.5\\n')
    >>> ds.images['img1'].scanpaths[0].fixations[0]
    Fixation(x_px=10.0, y_px=20.0, start_s=0.0, duration_s=0.5)
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"Input is not valid UTF-8: {exc.reason}") from None
    else:
        text = data
    if format == "csv":
        frame = _read_csv_frame(text)
    elif format == "json":
        frame = _read_json_frame(text)
    else:
        raise ParseError(f'Unknown fixation format "{format}"\n\nFix: use "csv" or "json"')

    image_dims = image_dims or {}
    frame = frame.assign(
        image_id=frame["image_id"].astype(str).str.strip(), observer_id=frame["observer_id"].astype(str).str.strip()
    )
    fixations = []
    for row in frame.itertuples(index=False):
        line = int(row.line)
        if not row.image_id or not row.observer_id:
            raise ParseError("image_id and observer_id must be non-empty", line=line)
        values = [_to_float(getattr(row, key), key, line) for key in CSV_HEADER[2:]]
        try:
            fixation = Fixation(*values)
        except ValidationError as exc:
            raise ValidationError(exc.reason, line=line) from None
        width, height = image_dims.get(row.image_id, default_image_dims)
        if not fixation.within(width, height):
            raise ValidationError(
                f"Fixation ({fixation.x_px}, {fixation.y_px}) is outside image {row.image_id} of size {width}x{height}",
                line=line,
            )
        fixations.append(fixation)
    frame = frame.assign(
        start_s=[fixation.start_s for fixation in fixations], fixation=pd.Series(fixations, index=frame.index, dtype=object)
    )

    images = {}
    for image_id, rows in frame.groupby("image_id", sort=False):
        scanpaths = tuple(
            _make_scanpath(image_id, observer_id, group) for observer_id, group in rows.groupby("observer_id", sort=False)
        )
        images[image_id] = ImageRecord(*image_dims.get(image_id, default_image_dims), scanpaths=scanpaths)
    return FixationDataset(images)


def _make_scanpath(image_id: str, observer_id: str, rows: pd.DataFrame) -> ScanPath:
    if not rows["start_s"].is_monotonic_increasing:
        get_logger("fixations").warning(
            "Fixations of {image_id}/{observer_id} are not sorted by onset, reordering",
            image_id=image_id,
            observer_id=observer_id,
        )
        rows = rows.sort_values("start_s", kind="stable")
    duplicated = rows["start_s"].duplicated()
    if duplicated.any():
        first = rows[duplicated].iloc[0]
        raise ValidationError(
            f"Duplicate fixation onset {first['start_s']} in scanpath {image_id}/{observer_id}", line=int(first["line"])
        )
    return ScanPath(image_id, observer_id, tuple(rows["fixation"]))


def serialize_fixations(ds: FixationDataset, format: InputFormat = "csv", /) -> bytes:
    """Write a dataset in the fixation file format, floats are written with full precision."""
    frame = pd.DataFrame(
        [
            (scanpath.image_id, scanpath.observer_id, f.x_px, f.y_px, f.start_s, f.duration_s)
            for scanpath in ds.scanpaths()
            for f in scanpath.fixations
        ],
        columns=list(CSV_HEADER),
    )
    if format == "json":
        return json.dumps(frame.to_dict(orient="records")).encode("utf-8")
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Discrete histogram with seeded sampling.

    >>> d = EmpiricalDistribution((3.0, 5.0), (2 / 3, 1 / 3), 'discrete-count')
    >>> round(d.mean(), 6)
    3.666667
    """

    values: Tuple[float, ...]
    """Support values, strictly increasing"""

    probabilities: Tuple[float, ...]
    """Probability of each support value"""

    kind: DistributionKind

    bin_width_s: Optional[float] = None
    """Bin width for the 'binned-duration' kind, bin values are the bin centers"""

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if self.kind not in ("discrete-count", "binned-duration"):
            raise ValidationError(f'Unknown distribution kind "{self.kind}"')
        if not self.values or len(self.values) != len(self.probabilities):
            raise ValidationError("Distribution support must be non-empty and match its probabilities")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValidationError("Distribution support values must be strictly increasing")
        if any(p < 0 or not math.isfinite(p) for p in self.probabilities):
            raise ValidationError("Distribution probabilities must be non-negative")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-9:
            raise ValidationError(f"Distribution probabilities sum to {math.fsum(self.probabilities)}, not 1")
        if self.kind == "binned-duration" and (self.bin_width_s is None or self.bin_width_s <= 0):
            raise ValidationError("A binned duration distribution needs a positive bin width")

    @cached_property
    def _cdf(self) -> np.ndarray:
        return np.cumsum(self.probabilities)

    def mean(self) -> float:
        return math.fsum(v * p for v, p in zip(self.values, self.probabilities))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "bin_width_s": self.bin_width_s,
            "support": [[v, p] for v, p in zip(self.values, self.probabilities)],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], /) -> "EmpiricalDistribution":
        try:
            support = data["support"]
            return cls(
                tuple(v for v, _ in support),
                tuple(p for _, p in support),
                data["kind"],
                data.get("bin_width_s"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"Invalid distribution record: {exc}") from None


def fit_count_distribution(ds: FixationDataset, /) -> EmpiricalDistribution:
    """Distribution of the number of fixations per scanpath.

    >>> from salvol.fixations import Fixation, ScanPath, FixationDataset
    >>> sp = lambda n, o: ScanPath('img', o, tuple(Fixation(1, 1, t, 0.1) for t in range(n)))
    >>> fit_count_distribution(FixationDataset.from_scanpaths([sp(3, 'a'), sp(3, 'b'), sp(5, 'c')], (20, 10))).values
    (3.0, 5.0)
    """
    lengths = Counter(len(scanpath) for scanpath in ds.scanpaths())
    total = sum(lengths.values())
    if not total:
        raise EmptyInputError("Can't fit a fixation count distribution on an empty dataset")
    support = sorted(lengths)
    return EmpiricalDistribution(
        tuple(float(n) for n in support), tuple(lengths[n] / total for n in support), "discrete-count"
    )


def fit_duration_distribution(ds: FixationDataset, bin_width_s: float = DEFAULT_BIN_WIDTH_S, /) -> EmpiricalDistribution:
    """Binned distribution of fixation durations, each bin is represented by its center."""
    if not bin_width_s > 0:
        raise ValidationError(f"Duration bin width must be positive, got {bin_width_s}")
    durations = np.fromiter((f.duration_s for sp in ds.scanpaths() for f in sp.fixations), dtype=np.float64)
    if not durations.size:
        raise EmptyInputError("Can't fit a duration distribution on an empty dataset")
    bins, counts = np.unique(np.floor(durations / bin_width_s + 1e-9).astype(np.int64), return_counts=True)
    return EmpiricalDistribution(
        tuple((bins + 0.5) * bin_width_s),
        tuple(counts / durations.size),
        "binned-duration",
        bin_width_s,
    )


def sample_distribution(d: EmpiricalDistribution, rng: np.random.Generator, /) -> float:
    """Draw one support value, consuming exactly one uniform variate of `rng`."""
    cdf = d._cdf
    index = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return d.values[min(index, len(d.values) - 1)]
