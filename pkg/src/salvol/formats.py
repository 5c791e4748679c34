"""File formats: the SALVOL1 volume codec, PNG heatmaps, scanpath and report JSON."""

import json
import struct
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from salvol.config import get_logger
from salvol.errors import FormatError, ParseError, ValidationError
from salvol.fixations import EmpiricalDistribution, Fixation, ScanPath
from salvol.volume import SaliencyVolume, extract_saliency_map, extract_weighted_map

if TYPE_CHECKING:
    from salvol.metric import EvaluationResult

__all__ = [
    "MAGIC",
    "ExportMode",
    "encode_volume",
    "decode_volume",
    "write_volume",
    "read_volume",
    "to_grayscale",
    "export_heatmaps",
    "scanpath_to_dict",
    "scanpath_from_dict",
    "dumps_scanpaths",
    "loads_scanpaths",
    "dumps_distributions",
    "loads_distributions",
    "dumps_report",
]

MAGIC = b"SALVOL1\0"
_HEADER = struct.Struct("<8sIIId")

ExportMode = Literal["map", "weighted", "slices"]
_FIXATION_KEYS = ("x_px", "y_px", "start_s", "duration_s")


def encode_volume(v: SaliencyVolume, /) -> bytes:
    """Serialize a volume: magic, T, H, W as uint32, dt_s as float64, then float32 values in (t, h, w) order.

    >>> v = SaliencyVolume(np.ones((1, 1, 2)), dt_s=2.0)
    >>> len(encode_volume(v))
    36
    """
    header = _HEADER.pack(MAGIC, v.t_bins, v.height, v.width, v.dt_s)
    return header + v.values.astype("<f4").tobytes(order="C")


def decode_volume(data: bytes, /) -> SaliencyVolume:
    if len(data) < _HEADER.size:
        raise FormatError(f"Volume data is truncated: {len(data)} bytes, the header alone is {_HEADER.size}")
    magic, t_bins, height, width, dt_s = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"Not a SALVOL1 volume (magic {magic!r})")
    expected = _HEADER.size + 4 * t_bins * height * width
    if len(data) != expected:
        raise FormatError(f"Volume of shape {(t_bins, height, width)} needs {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(t_bins, height, width)
    try:
        return SaliencyVolume(values.astype(np.float64), dt_s)
    except (ValidationError, ValueError) as exc:
        raise FormatError(f"Invalid volume contents: {exc}") from exc


def write_volume(path: Union[str, Path], v: SaliencyVolume, /) -> Path:
    path = Path(path)
    path.write_bytes(encode_volume(v))
    get_logger("formats").debug("Volume {shape} written to {path}", shape=v.shape, path=str(path))
    return path


def read_volume(path: Union[str, Path], /) -> SaliencyVolume:
    return decode_volume(Path(path).read_bytes())


def to_grayscale(values: np.ndarray, /) -> Image.Image:
    """8-bit grayscale image with the maximum scaled to 255.

    >>> np.asarray(to_grayscale(np.array([[0.0, 0.5], [1.0, 2.0]]))).tolist()
    [[0, 64], [128, 255]]
    """
    peak = values.max()
    scaled = values / peak * 255.0 if peak > 0 else np.zeros_like(values)
    return Image.fromarray(np.rint(scaled).astype(np.uint8))


def export_heatmaps(
    v: SaliencyVolume,
    mode: ExportMode,
    out_dir: Union[str, Path],
    weights: Optional[Sequence[float]] = None,
) -> List[Path]:
    """Write PNG heatmaps of a volume: all slices, the saliency map or a temporally weighted map."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if mode == "slices":
        digits = max(2, len(str(v.t_bins - 1)))
        images = [(f"slice_{t:0{digits}d}.png", v.values[t]) for t in range(v.t_bins)]
    elif mode == "map":
        images = [("map.png", extract_saliency_map(v).values)]
    elif mode == "weighted":
        if weights is None:
            raise ValidationError('Export mode "weighted" needs slice weights\n\nFix: pass one weight per slice')
        images = [("weighted.png", extract_weighted_map(v, weights).values)]
    else:
        raise ValidationError(f'Unknown export mode "{mode}"\n\nFix: use "map", "weighted" or "slices"')
    paths = []
    for name, values in images:
        path = out_dir / name
        to_grayscale(values).save(path, format="PNG")
        paths.append(path)
    get_logger("formats").info("Exported {n} heatmaps to {out_dir}", n=len(paths), out_dir=str(out_dir))
    return paths


def scanpath_to_dict(sp: ScanPath, /) -> Dict[str, Any]:
    return {
        "image_id": sp.image_id,
        "observer_id": sp.observer_id,
        "fixations": [{key: getattr(f, key) for key in _FIXATION_KEYS} for f in sp.fixations],
    }


def scanpath_from_dict(data: Mapping[str, Any], /, index: Optional[int] = None) -> ScanPath:
    try:
        fixations = tuple(Fixation(*(float(item[key]) for key in _FIXATION_KEYS)) for item in data["fixations"])
        return ScanPath(str(data["image_id"]), str(data["observer_id"]), fixations)
    except ValidationError as exc:
        raise ValidationError(exc.reason, line=index) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"Invalid scanpath record: missing or malformed {exc}", line=index) from None


def dumps_scanpaths(scanpaths: Sequence[ScanPath], /) -> str:
    return json.dumps([scanpath_to_dict(sp) for sp in scanpaths])


def loads_scanpaths(text: Union[str, bytes], /) -> List[ScanPath]:
    """Read a scanpath JSON array (a single scanpath object is accepted too)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"Invalid JSON: {exc.msg}", line=exc.lineno) from None
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        raise ParseError("Scanpath JSON must be an array of scanpath objects")
    return [scanpath_from_dict(item, index=index) for index, item in enumerate(data)]


def dumps_distributions(count_dist: EmpiricalDistribution, dur_dist: EmpiricalDistribution, /) -> str:
    return json.dumps({"count": count_dist.to_dict(), "duration": dur_dist.to_dict()}, indent=2)


def loads_distributions(text: Union[str, bytes], /) -> Tuple[EmpiricalDistribution, EmpiricalDistribution]:
    try:
        data = json.loads(text)
        return EmpiricalDistribution.from_dict(data["count"]), EmpiricalDistribution.from_dict(data["duration"])
    except json.JSONDecodeError as exc:
        raise ParseError(f"Invalid JSON: {exc.msg}", line=exc.lineno) from None
    except (KeyError, TypeError):
        raise ParseError('Distribution JSON must hold "count" and "duration" records') from None


def dumps_report(result: "EvaluationResult", /) -> str:
    matrix = result.matrix.values
    return json.dumps(
        {
            "mean_cost": result.mean_cost,
            "pairs": [[i, j, float(matrix[i, j])] for i, j in result.assignment.pairs],
            "matrix_shape": list(matrix.shape),
        }
    )
