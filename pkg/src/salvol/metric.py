"""Scanpath set evaluation on the sphere.

Fixations are projected from the equirectangular image to the sphere and compared with great-circle distances.
Two scanpaths are compared by aligning their saccade vectors along the cheapest monotone path of a cost lattice,
and two scanpath sets are compared by matching them one to one with the Hungarian algorithm.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from salvol.config import RunConfig, get_logger
from salvol.errors import ConfigError, EmptyInputError, ShapeError, ValidationError
from salvol.fixations import ScanPath

__all__ = [
    "SphericalPoint",
    "CostMatrix",
    "Assignment",
    "MetricConfig",
    "EvaluationResult",
    "pixel_to_sphere",
    "orthodromic_distance",
    "align_scanpaths",
    "jarodzka_distance",
    "hungarian_min_assignment",
    "cost_matrix",
    "evaluate_sets",
]

ImageDims = Tuple[int, int]
LatticePath = List[Tuple[int, int]]


@dataclass(frozen=True)
class SphericalPoint:
    """Point on the unit sphere in radians."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -math.pi / 2 <= self.lat <= math.pi / 2:
            raise ValidationError(f"Latitude must be in [-pi/2, pi/2], got {self.lat}")
        if not -math.pi <= self.lon < math.pi:
            raise ValidationError(f"Longitude must be in [-pi, pi), got {self.lon}")


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Costs of matching generated scanpath i (rows) with ground truth scanpath j (columns)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError("Cost matrix must be 2D", expected=2, actual=values.ndim)
        if values.size == 0:
            raise EmptyInputError("Cost matrix is empty")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError("Cost matrix entries must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class Assignment:
    pairs: Tuple[Tuple[int, int], ...]
    """Matched (row, column) pairs sorted by row"""

    total_cost: float


@dataclass(frozen=True)
class MetricConfig:
    """Weights of the alignment cost terms and the evaluation parallelism.

    The aligned pair cost is the weighted mean of the terms with a positive weight: `position` is the mean
    great-circle distance between the saccade endpoints, `direction` the angle between the saccade bearings,
    `length` the difference of the saccade lengths and `duration` the mean difference of the endpoint fixation
    durations in seconds.
    """

    position: float = 1.0
    direction: float = 0.0
    length: float = 0.0
    duration: float = 0.0
    max_workers: int = 1

    def __post_init__(self) -> None:
        weights = (self.position, self.direction, self.length, self.duration)
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigError(f"Metric weights must be non-negative and not all zero, got {weights}", key="metric")
        if self.max_workers < 1:
            raise ConfigError(f"max_workers must be at least 1, got {self.max_workers}", key="metric.max_workers")

    @classmethod
    def from_config(cls, config: RunConfig, /) -> "MetricConfig":
        section = config["metric"]
        return cls(
            position=float(section["position"]),
            direction=float(section["direction"]),
            length=float(section["length"]),
            duration=float(section["duration"]),
            max_workers=int(section["max_workers"]),
        )


class EvaluationResult(NamedTuple):
    mean_cost: float
    assignment: Assignment
    matrix: CostMatrix


def pixel_to_sphere(x_px: float, y_px: float, W_img: int, H_img: int, /) -> SphericalPoint:
    """Project an equirectangular pixel to the sphere, pixel centers sit at half-pixel offsets.

    >>> pixel_to_sphere(0, 0, 360, 180).lon == -math.pi + math.pi / 360
    True
    """
    if not (0 <= x_px < W_img and 0 <= y_px < H_img):
        raise ValidationError(f"Pixel ({x_px}, {y_px}) is outside the {W_img}x{H_img} image")
    lat, lon = _to_sphere(np.array([x_px]), np.array([y_px]), W_img, H_img)
    return SphericalPoint(float(lat[0]), float(lon[0]))


def _to_sphere(xs: np.ndarray, ys: np.ndarray, W_img: int, H_img: int) -> Tuple[np.ndarray, np.ndarray]:
    lon = (xs + 0.5) / W_img * 2 * math.pi - math.pi
    lat = math.pi / 2 - (ys + 0.5) / H_img * math.pi
    # positions in the last half pixel would leave the coordinate ranges
    lon = np.where(lon >= math.pi, lon - 2 * math.pi, lon)
    return np.maximum(lat, -math.pi / 2), lon


def _haversine(lat1, lon1, lat2, lon2):
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2 * np.arctan2(np.sqrt(a), np.sqrt(1 - a))


def orthodromic_distance(a: SphericalPoint, b: SphericalPoint, /) -> float:
    """Great-circle angle between two points.

    >>> orthodromic_distance(SphericalPoint(0, 0), SphericalPoint(0, -math.pi)) == math.pi
    True
    """
    return float(_haversine(a.lat, a.lon, b.lat, b.lon))


def _bearing(lat1, lon1, lat2, lon2):
    y = np.sin(lon2 - lon1) * np.cos(lat2)
    x = np.cos(lat1) * np.sin(lat2) - np.sin(lat1) * np.cos(lat2) * np.cos(lon2 - lon1)
    return np.arctan2(y, x)


class _Saccades:
    """Saccade vectors of a scanpath on the sphere, a single fixation makes one zero-length vector."""

    __slots__ = ("lat", "lon", "durations", "lengths", "bearings")

    def __init__(self, sp: ScanPath, image_dims: ImageDims) -> None:
        width, height = image_dims
        if not len(sp):
            raise EmptyInputError(f"Scanpath {sp.image_id}/{sp.observer_id} is empty")
        xs = np.array([f.x_px for f in sp.fixations])
        ys = np.array([f.y_px for f in sp.fixations])
        if np.any(xs < 0) or np.any(xs >= width) or np.any(ys < 0) or np.any(ys >= height):
            raise ValidationError(
                f"Scanpath {sp.image_id}/{sp.observer_id} has fixations outside the {width}x{height} image"
            )
        self.lat, self.lon = _to_sphere(xs, ys, width, height)
        self.durations = np.array([f.duration_s for f in sp.fixations])
        if len(sp) == 1:
            self.lat, self.lon, self.durations = (np.repeat(a, 2) for a in (self.lat, self.lon, self.durations))
        self.lengths = _haversine(self.lat[:-1], self.lon[:-1], self.lat[1:], self.lon[1:])
        self.bearings = _bearing(self.lat[:-1], self.lon[:-1], self.lat[1:], self.lon[1:])


def _lattice(g: _Saccades, t: _Saccades, cfg: MetricConfig) -> np.ndarray:
    """Cost of aligning each saccade of `g` (rows) with each saccade of `t` (columns)."""
    total = np.zeros((g.lengths.size, t.lengths.size))
    if cfg.position:
        d = _haversine(g.lat[:, None], g.lon[:, None], t.lat[None, :], t.lon[None, :])
        total += cfg.position * (d[:-1, :-1] + d[1:, 1:]) / 2
    if cfg.direction:
        angle = np.abs(g.bearings[:, None] - t.bearings[None, :])
        angle = np.minimum(angle, 2 * math.pi - angle)
        moving = (g.lengths[:, None] > 0) & (t.lengths[None, :] > 0)
        total += cfg.direction * np.where(moving, angle, 0.0)
    if cfg.length:
        total += cfg.length * np.abs(g.lengths[:, None] - t.lengths[None, :])
    if cfg.duration:
        dur = np.abs(g.durations[:, None] - t.durations[None, :])
        total += cfg.duration * (dur[:-1, :-1] + dur[1:, 1:]) / 2
    return total / (cfg.position + cfg.direction + cfg.length + cfg.duration)


def _cheapest_path(costs: np.ndarray) -> Tuple[float, LatticePath]:
    """Monotone path from the top-left to the bottom-right cell with right, down and diagonal moves.

    Paths are compared by their total cost, ties go to the path visiting more cells. Returns the mean cost over
    the visited cells and the path itself.
    """
    rows, cols = costs.shape
    c = costs.tolist()
    best: List[List[Tuple[float, int]]] = [[(0.0, 0)] * cols for _ in range(rows)]
    back: List[List[Optional[Tuple[int, int]]]] = [[None] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            prev = None
            for pi, pj in ((i - 1, j - 1), (i - 1, j), (i, j - 1)):
                if pi >= 0 and pj >= 0:
                    total, steps = best[pi][pj]
                    if prev is None or (total, -steps) < (best[prev[0]][prev[1]][0], -best[prev[0]][prev[1]][1]):
                        prev = (pi, pj)
            total, steps = best[prev[0]][prev[1]] if prev else (0.0, 0)
            best[i][j] = (total + c[i][j], steps + 1)
            back[i][j] = prev
    path: LatticePath = []
    cell: Optional[Tuple[int, int]] = (rows - 1, cols - 1)
    while cell is not None:
        path.append(cell)
        cell = back[cell[0]][cell[1]]
    path.reverse()
    total, steps = best[-1][-1]
    return total / steps, path


def align_scanpaths(
    g: ScanPath, t: ScanPath, image_dims: ImageDims, cfg: Optional[MetricConfig] = None
) -> Tuple[float, LatticePath]:
    """Mean alignment cost in radians and the optimal lattice path of two scanpaths."""
    cfg = cfg or MetricConfig()
    return _cheapest_path(_lattice(_Saccades(g, image_dims), _Saccades(t, image_dims), cfg))


def jarodzka_distance(g: ScanPath, t: ScanPath, image_dims: ImageDims, cfg: Optional[MetricConfig] = None) -> float:
    """Vector-alignment distance between two scanpaths on the sphere, in radians."""
    return align_scanpaths(g, t, image_dims, cfg)[0]


def _solve_assignment(cost: List[List[float]]) -> List[int]:
    """Column assigned to each row by the potentials method, needs rows <= cols."""
    rows, cols = len(cost), len(cost[0])
    job = [-1] * (cols + 1)  # row assigned to a column, the extra column is a sentinel
    ys = [0.0] * rows  # row potentials
    yt = [0.0] * (cols + 1)  # column potentials
    for row in range(rows):
        w_cur = cols
        job[w_cur] = row
        min_to = [math.inf] * (cols + 1)
        prv = [-1] * (cols + 1)
        in_z = [False] * (cols + 1)
        while job[w_cur] != -1:
            in_z[w_cur] = True
            j = job[w_cur]
            delta, w_next = math.inf, -1
            for w in range(cols):
                if not in_z[w]:
                    reduced = cost[j][w] - ys[j] - yt[w]
                    if reduced < min_to[w]:
                        min_to[w] = reduced
                        prv[w] = w_cur
                    if min_to[w] < delta:
                        delta, w_next = min_to[w], w
            for w in range(cols + 1):
                if in_z[w]:
                    ys[job[w]] += delta
                    yt[w] -= delta
                else:
                    min_to[w] -= delta
            w_cur = w_next
        while w_cur != cols:
            w = prv[w_cur]
            job[w_cur] = job[w]
            w_cur = w
    assigned = [-1] * rows
    for w in range(cols):
        if job[w] != -1:
            assigned[job[w]] = w
    return assigned


def hungarian_min_assignment(c: Union[CostMatrix, np.ndarray], /) -> Assignment:
    """Minimum-cost one to one matching of min(m, n) rows and columns.

    >>> hungarian_min_assignment(np.array([[1.0, 2.0], [3.0, 1.0]]))
    Assignment(pairs=((0, 0), (1, 1)), total_cost=2.0)
    """
    values = (c if isinstance(c, CostMatrix) else CostMatrix(c)).values
    transposed = values.shape[0] > values.shape[1]
    matrix = values.T if transposed else values
    assigned = _solve_assignment(matrix.tolist())
    if transposed:
        pairs = sorted((col, row) for row, col in enumerate(assigned))
    else:
        pairs = [(row, col) for row, col in enumerate(assigned)]
    total = sum(float(values[i, j]) for i, j in pairs)
    return Assignment(tuple(pairs), total)


def cost_matrix(
    generated: Sequence[ScanPath],
    truth: Sequence[ScanPath],
    image_dims: ImageDims,
    cfg: Optional[MetricConfig] = None,
) -> CostMatrix:
    """Alignment distances of every generated scanpath (rows) to every ground truth scanpath (columns)."""
    cfg = cfg or MetricConfig()
    if not generated or not truth:
        raise EmptyInputError("Both scanpath sets must be non-empty")
    gen_saccades = [_Saccades(sp, image_dims) for sp in generated]
    truth_saccades = [_Saccades(sp, image_dims) for sp in truth]

    def _row(g: _Saccades) -> List[float]:
        return [_cheapest_path(_lattice(g, t, cfg))[0] for t in truth_saccades]

    if cfg.max_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as executor:
            rows = list(executor.map(_row, gen_saccades))
    else:
        rows = [_row(g) for g in gen_saccades]
    return CostMatrix(np.array(rows))


def evaluate_sets(
    generated: Sequence[ScanPath],
    truth: Sequence[ScanPath],
    image_dims: ImageDims,
    cfg: Optional[MetricConfig] = None,
) -> EvaluationResult:
    """Match generated scanpaths to the ground truth and average the matched alignment distances."""
    matrix = cost_matrix(generated, truth, image_dims, cfg)
    assignment = hungarian_min_assignment(matrix)
    mean_cost = assignment.total_cost / len(assignment.pairs)
    get_logger("metric").debug(
        "Matched {m}x{n} scanpaths, mean cost {mean_cost:.6f}",
        m=matrix.shape[0],
        n=matrix.shape[1],
        mean_cost=mean_cost,
    )
    return EvaluationResult(mean_cost, assignment, matrix)
