"""Command line interface.

Every subcommand resolves its configuration from the defaults, an optional ``--config`` JSON file and the flags
(in that order) and logs the resolved configuration before doing any work. Diagnostics go to stderr, data goes to
files or stdout.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from salvol import __version__
from salvol.compare import ROWS, compare_strategies
from salvol.config import STRATEGIES, RunConfig, configure_logging, get_logger, load_config_file, resolve_config
from salvol.errors import ConfigError, SalvolError, ValidationError
from salvol.fixations import (
    FixationDataset,
    ScanPath,
    fit_count_distribution,
    fit_duration_distribution,
    parse_fixations,
    serialize_fixations,
)
from salvol.formats import (
    dumps_distributions,
    dumps_report,
    dumps_scanpaths,
    export_heatmaps,
    loads_distributions,
    loads_scanpaths,
    read_volume,
    write_volume,
)
from salvol.metric import MetricConfig, evaluate_sets
from salvol.sampler import SamplingConfig, generate_scanpaths
from salvol.synthetic import make_synthetic_dataset
from salvol.volume import VolumeSettings, build_saliency_volume

__all__ = ["build_parser", "main"]


def _number_list(cast: Callable[[str], Any], size: Optional[int] = None) -> Callable[[str], List[Any]]:
    def _parse(text: str) -> List[Any]:
        try:
            values = [cast(item) for item in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f'"{text}" is not a comma separated list of numbers') from None
        if size is not None and len(values) != size:
            raise argparse.ArgumentTypeError(f'"{text}" must have {size} comma separated values')
        return values

    return _parse


def _fixations_format(path: Path, fmt: Optional[str]) -> str:
    return fmt or ("json" if path.suffix.lower() == ".json" else "csv")


def _read_dataset(path: str, config: RunConfig, fmt: Optional[str] = None) -> FixationDataset:
    width, height = config["fixations"]["image_dims"]
    source = Path(path)
    return parse_fixations(source.read_bytes(), _fixations_format(source, fmt), default_image_dims=(width, height))


def _write(path: Optional[str], data: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(data + "\n")
    else:
        Path(path).write_text(data, encoding="utf-8")


def _volume_settings(config: RunConfig) -> VolumeSettings:
    return VolumeSettings.from_config(config)


def _cmd_build_volume(args: argparse.Namespace, config: RunConfig) -> None:
    record = _read_dataset(args.fixations, config, args.format).image(args.image_id)
    s = _volume_settings(config)
    volume = build_saliency_volume(
        record.scanpaths, (s.t_bins, s.height, s.width), s.dt_s, s.bandwidths, s.wrap_width, record.dims
    )
    write_volume(args.out, volume)
    sums = volume.slice_sums()
    print(f"T={volume.t_bins} H={volume.height} W={volume.width}")
    print(f"slice sums in [{sums.min():.9f}, {sums.max():.9f}], normalized={bool(abs(sums - 1).max() <= 1e-6)}")


def _cmd_sample(args: argparse.Namespace, config: RunConfig) -> None:
    volume = read_volume(args.volume)
    if args.dists:
        count_dist, dur_dist = loads_distributions(Path(args.dists).read_text(encoding="utf-8"))
    elif args.fixations:
        dataset = _read_dataset(args.fixations, config, args.format)
        count_dist = fit_count_distribution(dataset)
        dur_dist = fit_duration_distribution(dataset, config["fixations"]["bin_width_s"])
    else:
        raise ConfigError("Fixation length and duration laws are missing\n\nFix: pass --fixations or --dists", key="dists")
    width, height = config["fixations"]["image_dims"]
    image_id = args.image_id or Path(args.volume).stem
    scanpaths = generate_scanpaths(
        volume, count_dist, dur_dist, SamplingConfig.from_config(config), image_dims=(width, height), image_id=image_id
    )
    _write(args.out, dumps_scanpaths(scanpaths))


def _read_truth(args: argparse.Namespace, config: RunConfig, generated: Sequence[ScanPath]) -> Tuple[List[ScanPath], Tuple[int, int]]:
    path = Path(args.truth)
    default_dims = tuple(config["fixations"]["image_dims"])
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            items = json.loads(data)
        except json.JSONDecodeError:
            items = None
        if isinstance(items, dict) or (isinstance(items, list) and items and "fixations" in items[0]):
            return loads_scanpaths(data), default_dims  # type: ignore[return-value]
    dataset = _read_dataset(args.truth, config)
    image_id = args.image_id or generated[0].image_id
    if image_id not in dataset.images and len(dataset.images) == 1:
        image_id = dataset.image_ids[0]
    record = dataset.image(image_id)
    return list(record.scanpaths), record.dims


def _cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> None:
    generated = loads_scanpaths(Path(args.generated).read_bytes())
    if not generated:
        raise ValidationError(f"No scanpaths in {args.generated}")
    truth, image_dims = _read_truth(args, config, generated)
    result = evaluate_sets(generated, truth, image_dims, MetricConfig.from_config(config))
    get_logger("cli").info("Mean cost {mean_cost:.6f} over {n} pairs", mean_cost=result.mean_cost, n=len(result.assignment.pairs))
    _write(args.out, dumps_report(result))


def _cmd_export(args: argparse.Namespace, config: RunConfig) -> None:
    volume = read_volume(args.volume)
    weights = args.weights
    if args.mode == "weighted" and weights is None:
        raise ConfigError('Export mode "weighted" needs slice weights\n\nFix: pass --weights w0,w1,...', key="weights")
    for path in export_heatmaps(volume, args.mode, args.out_dir, weights):
        print(path)


def _cmd_fit_dists(args: argparse.Namespace, config: RunConfig) -> None:
    dataset = _read_dataset(args.fixations, config, args.format)
    count_dist = fit_count_distribution(dataset)
    dur_dist = fit_duration_distribution(dataset, config["fixations"]["bin_width_s"])
    _write(args.out, dumps_distributions(count_dist, dur_dist))


def _cmd_synth(args: argparse.Namespace, config: RunConfig) -> None:
    dataset = make_synthetic_dataset(args.seed, args.images, args.observers)
    Path(args.out).write_bytes(serialize_fixations(dataset, _fixations_format(Path(args.out), None)))
    get_logger("cli").info(
        "Synthetic dataset with {n} scanpaths written to {out}", n=dataset.num_scanpaths, out=str(args.out)
    )


def _cmd_compare(args: argparse.Namespace, config: RunConfig) -> None:
    dataset = _read_dataset(args.fixations, config, args.format) if args.fixations else make_synthetic_dataset()
    scores = compare_strategies(
        dataset,
        _volume_settings(config),
        SamplingConfig.from_config(config),
        MetricConfig.from_config(config),
        seeds=args.seeds,
        rows=args.rows or ROWS,
    )
    _write(args.out, json.dumps(scores, indent=2))


# config key -> argparse dest, per config section
_CONFIG_FLAGS = {
    "fixations": {"bin_width_s": "bin_width", "image_dims": "image_dims"},
    "volume": {"dims": "dims", "dt_s": "dt", "bandwidths": "bandwidths", "wrap_width": "wrap_width"},
    "sampling": {"strategy": "strategy", "num_scanpaths": "n", "seed": "sampling_seed", "mask_sigma_px": "mask_sigma"},
    "metric": {
        "position": "position",
        "direction": "direction",
        "length": "length",
        "duration": "duration",
        "max_workers": "max_workers",
    },
    "logging": {"level": "log_level", "format": "log_format"},
}


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Config values set by flags, unset flags stay None and are skipped."""
    overrides: Dict[str, Any] = {}
    for section, keys in _CONFIG_FLAGS.items():
        values = {key: getattr(args, dest, None) for key, dest in keys.items()}
        values = {key: value for key, value in values.items() if value is not None}
        if values:
            overrides[section] = values
    return overrides


def _run_inputs(args: argparse.Namespace) -> Dict[str, Any]:
    """Arguments of the run which are not config values: paths, image ids, seeds, rows and export options."""
    mapped = {dest for keys in _CONFIG_FLAGS.values() for dest in keys.values()}
    return {key: value for key, value in vars(args).items() if key not in mapped and key != "handler"}


def _add_volume_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dims", type=_number_list(int, 3), help="T,H,W of the volume, T=0 derives T from the data")
    parser.add_argument("--dt", type=float, help="seconds per temporal slice")
    parser.add_argument("--bandwidths", type=_number_list(float, 3), help="Gaussian bandwidths t,h,w")
    parser.add_argument("--wrap-width", action=argparse.BooleanOptionalAction, default=None, help="wrap around the 360 seam")


def _add_fixation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("csv", "json"), help="fixation file format, guessed from the suffix")
    parser.add_argument("--image-dims", type=_number_list(int, 2), help="W,H of images in fixation files")


def _add_sampling_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="number of generated scanpaths")
    parser.add_argument("--mask-sigma", type=float, help="mask bandwidth in volume pixels")


def _add_metric_flags(parser: argparse.ArgumentParser) -> None:
    for name in ("position", "direction", "length", "duration"):
        parser.add_argument(f"--{name}", type=float, help=f"weight of the {name} alignment term")
    parser.add_argument("--max-workers", type=int, help="threads computing the cost matrix")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="salvol", description="Saliency volumes and scanpath generation for 360 images")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file with configuration overrides")
    parser.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"))
    parser.add_argument("--log-format", choices=("text", "json"))
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = commands.add_parser("build-volume", help="build a saliency volume file from fixations")
    p.add_argument("fixations")
    p.add_argument("--image-id", required=True)
    p.add_argument("--out", required=True)
    _add_fixation_flags(p)
    _add_volume_flags(p)
    p.set_defaults(handler=_cmd_build_volume)

    p = commands.add_parser("sample", help="generate scanpaths from a volume file")
    p.add_argument("volume")
    p.add_argument("--fixations", help="fixation file to fit the length and duration laws on")
    p.add_argument("--dists", help="distribution file written by fit-dists")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--seed", dest="sampling_seed", type=int)
    p.add_argument("--image-id")
    p.add_argument("--wrap-width", action=argparse.BooleanOptionalAction, default=None, help="masks wrap around the seam")
    p.add_argument("--bin-width", type=float, help="duration bin width in seconds")
    p.add_argument("--out", help="output scanpath JSON, stdout by default")
    _add_fixation_flags(p)
    _add_sampling_flags(p)
    p.set_defaults(handler=_cmd_sample)

    p = commands.add_parser("evaluate", help="score generated scanpaths against the ground truth")
    p.add_argument("generated", help="scanpath JSON")
    p.add_argument("--truth", required=True, help="fixation file or scanpath JSON")
    p.add_argument("--image-id")
    p.add_argument("--image-dims", type=_number_list(int, 2), help="W,H of the image")
    p.add_argument("--out", help="report JSON, stdout by default")
    _add_metric_flags(p)
    p.set_defaults(handler=_cmd_evaluate)

    p = commands.add_parser("export", help="write PNG heatmaps of a volume file")
    p.add_argument("volume")
    p.add_argument("--mode", choices=("map", "weighted", "slices"), default="map")
    p.add_argument("--weights", type=_number_list(float), help="slice weights for the weighted mode")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_export)

    p = commands.add_parser("fit-dists", help="fit fixation length and duration laws")
    p.add_argument("fixations")
    p.add_argument("--bin-width", type=float, help="duration bin width in seconds")
    p.add_argument("--out", help="distribution JSON, stdout by default")
    _add_fixation_flags(p)
    p.set_defaults(handler=_cmd_fit_dists)

    p = commands.add_parser("synth", help="write the synthetic fixation dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--images", type=int, default=6)
    p.add_argument("--observers", type=int, default=20)
    p.set_defaults(handler=_cmd_synth)

    p = commands.add_parser("compare", help="compare sampling strategies against the ground truth")
    p.add_argument("fixations", nargs="?", help="fixation file, the synthetic dataset by default")
    p.add_argument("--seeds", type=_number_list(int), default=[1, 2, 3, 4, 5])
    p.add_argument("--rows", type=lambda text: text.split(","), help=f"subset of {','.join(ROWS)}")
    p.add_argument("--strategy", choices=STRATEGIES, help="strategy of the gt-map and gt-volume rows")
    p.add_argument("--out", help="scores JSON, stdout by default")
    _add_fixation_flags(p)
    _add_volume_flags(p)
    _add_sampling_flags(p)
    _add_metric_flags(p)
    p.set_defaults(handler=_cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line, return the exit code: 0 on success, 1 on errors, usage errors exit with 2."""
    args = build_parser().parse_args(argv)
    logger = get_logger("cli")
    try:
        config = resolve_config(load_config_file(args.config) if args.config else None, _overrides(args))
        configure_logging(config["logging"]["level"], config["logging"]["format"])
        logger = get_logger("cli")
        echo = {"config": config, "args": _run_inputs(args)}
        logger.info("{command} config {config}", command=args.command, config=json.dumps(echo, sort_keys=True))
        args.handler(args, config)
    except (SalvolError, OSError) as exc:
        logger.error("{command} failed: {error}", command=args.command, error=exc, exc_info=exc)
        return 1
    return 0
