"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 data/format error.
Diagnostics go to stderr; reports go to stdout or to ``--out`` files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .cost_volume import build_gwc_volume
from .ddca import DynamicKernelField, compute_affinity, dynamic_group_conv
from .errors import ConfigurationError, GGEVError
from .evaluation import MetricReport, evaluate
from .features import expected_shapes, extract_builtin_features, load_feature_pyramid, pad_to_multiple, write_pyramid
from .io import read_mask, read_pfm, read_pnm, write_colormap, write_mask, write_pfm, write_pnm, write_tensor
from .oracles import dynamic_conv_oracle
from .pipeline import compute_features, infer
from .rng import random_tensor
from .scene import PlaneSpec, generate_stereogram
from .tensor import softmax
from .weights import init_weights, matching_core

logger = logging.getLogger("ggev")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
PRESETS = ("matching-core", "seeded")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    return h, w


def _plane(text: str) -> PlaneSpec:
    parts = [float(v) for v in text.split(",")]
    if len(parts) not in (5, 7):
        raise argparse.ArgumentTypeError("plane is y0,x0,y1,x1,disparity[,slope_x,slope_y]")
    y0, x0, y1, x1 = (int(v) for v in parts[:4])
    return PlaneSpec(y0, x0, y1, x1, *parts[4:])


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    """Flags bound to RunConfig; defaults are None so config-file values survive."""
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="JSON run configuration; explicit flags override it")
    g.add_argument("--seed", type=int)
    g.add_argument("--d-max4", type=int, dest="d_max4", help="quarter-resolution disparity hypotheses")
    g.add_argument("--iters", type=int)
    g.add_argument("--pool-size", type=int, dest="s", help="regional centre grid side S")
    g.add_argument("--k-small", type=int, dest="k_small")
    g.add_argument("--k-large", type=int, dest="k_large")
    g.add_argument("--groups", type=int)
    g.add_argument("--threads", type=int, help="disparity-slice workers (default: $GGEV_THREADS or all cores)")
    g.add_argument("--preset", choices=PRESETS, default="matching-core", help="weight preset")
    g.add_argument("--score-gain", type=float, default=3.0e4, help="score head gain for matching-core")


def _add_pair_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--left")
    p.add_argument("--right")
    p.add_argument("--depth-features", dest="depth_features", help="depth pyramid manifest (JSON)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ggev", description="Forward-only GGEV stereo matching on the CPU.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-scene", parents=[common], help="write a synthetic random-dot stereo scene")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=_size, default=(128, 256), help="HxW (default 128x256)")
    p.add_argument("--disparity", type=float, default=8.0, help="background plane disparity")
    p.add_argument("--plane", type=_plane, action="append", default=[], help="extra plane y0,x0,y1,x1,d[,sx,sy]")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")

    p = sub.add_parser("extract-features", parents=[common], help="write built-in feature pyramids for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--cue", choices=("texture-left", "texture-right", "depth"), default="depth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stem")
    _add_run_flags(p)

    p = sub.add_parser("infer", parents=[common], help="estimate disparity for a stereo pair")
    _add_pair_flags(p)
    p.add_argument("--out", help="full-resolution disparity (PFM)")
    p.add_argument("--iter-dir", help="write quarter-res iterates iter_XX.pfm here")
    p.add_argument("--volume-out", help="write the aggregated volume (tensor format)")
    p.add_argument("--colormap", help="write a colour-mapped PPM of the result")
    _add_run_flags(p)

    p = sub.add_parser("eval", parents=[common], help="compare a disparity PFM with ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", help="P5 mask restricting the evaluated region (e.g. non-occluded)")
    p.add_argument("--region", default=None, help="region label for the report (default: noc with --mask, else all)")
    p.add_argument("--thresholds", type=_csv_floats, default=None, help="bad-x thresholds, e.g. 1,2,3")
    p.add_argument("--out", help="also write the JSON report here")
    p.add_argument("--config")

    for name, help_text in (("dump-volume", "write the cost volume"), ("dump-affinity", "write affinity rows")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        _add_pair_flags(p)
        p.add_argument("--out", required=True)
        if name == "dump-volume":
            p.add_argument("--aggregated", action="store_true", help="dump the aggregated volume instead of the raw one")
        else:
            p.add_argument("--disparity", type=int, required=True)
            p.add_argument("--stride", type=int, default=1, help="pixel grid stride for the dumped rows")
        _add_run_flags(p)

    p = sub.add_parser("bench", parents=[common], help="micro-benchmarks")
    p.add_argument("--op", choices=("dynamic-conv",), default="dynamic-conv")
    p.add_argument("--size", type=_size, default=(64, 64))
    p.add_argument("--disparities", type=int, default=16)
    p.add_argument("--groups", type=int, default=8)
    p.add_argument("--kernel", type=int, default=7)
    p.add_argument("--channels-per-group", type=int, default=3)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    base = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    fields = ("seed", "d_max4", "iters", "s", "k_small", "k_large", "groups", "threads", "left", "right",
              "depth_features")
    overrides = {f: getattr(args, f) for f in fields if hasattr(args, f)}
    if getattr(args, "out", None) and args.command == "infer":
        overrides["out"] = args.out
    cfg = base.merged(overrides)
    if cfg.depth_features:
        cfg = cfg.merged({"feature_source": "files"})
    return cfg


def resolve_threads(cfg: RunConfig) -> int:
    if cfg.threads is not None:
        return cfg.threads
    env = os.environ.get("GGEV_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"GGEV_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigurationError("GGEV_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _weights(args, cfg: RunConfig):
    return matching_core(cfg, args.score_gain) if args.preset == "matching-core" else init_weights(cfg)


def _load_pair(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    if not cfg.left or not cfg.right:
        raise UsageError("--left and --right are required")
    return read_pnm(cfg.left, rgb=True), read_pnm(cfg.right, rgb=True)


def _load_depth(cfg: RunConfig, left: np.ndarray):
    if cfg.feature_source != "files":
        return None
    if not cfg.depth_features:
        raise UsageError("feature_source 'files' needs --depth-features")
    h, w = pad_to_multiple(left).shape[1:]
    return load_feature_pyramid(cfg.depth_features, expected_shapes("depth", h, w, cfg.channels))


def cmd_gen_scene(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    seed = cfg.seed if args.seed is None else args.seed
    h, w = args.size
    layout = [PlaneSpec.full(h, w, args.disparity), *args.plane]
    scene = generate_stereogram(h, w, layout, seed=seed, max_disparity=cfg.max_disparity)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_pnm(scene.left, out / "left.ppm")
    write_pnm(scene.right, out / "right.ppm")
    write_pfm(scene.gt, out / "gt.pfm")
    write_mask(scene.noc, out / "noc.pgm")
    (out / "scene.json").write_text(json.dumps(scene.descriptor, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"out_dir": str(out), "non_occluded": int(scene.noc.sum())}))
    return EXIT_OK


def cmd_extract_features(args) -> int:
    cfg = resolve_config(args)
    img = pad_to_multiple(read_pnm(args.image, rgb=True))
    pyr = extract_builtin_features(img, _weights(args, cfg), args.cue)
    manifest = write_pyramid(pyr, args.out_dir, args.stem)
    print(json.dumps({"manifest": str(manifest), "scales": list(pyr.scales)}))
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = resolve_config(args)
    threads = resolve_threads(cfg)
    left, right = _load_pair(cfg)
    depth = _load_depth(cfg, left)
    t0 = time.perf_counter()
    result = infer(left, right, _weights(args, cfg), cfg, depth=depth, threads=threads)
    logger.info("inference took %.2f s with %d thread(s)", time.perf_counter() - t0, threads)
    if cfg.out:
        write_pfm(result.disparity, cfg.out)
    if args.iter_dir:
        d = Path(args.iter_dir)
        d.mkdir(parents=True, exist_ok=True)
        write_pfm(result.d0, d / "iter_00.pfm")
        for k, it in enumerate(result.iterates, start=1):
            write_pfm(it, d / f"iter_{k:02d}.pfm")
    if args.volume_out:
        write_tensor(result.volume.data, args.volume_out)
    if args.colormap:
        write_colormap(result.disparity, args.colormap)
    if not cfg.out:
        print(json.dumps({"shape": list(result.disparity.shape), "mean": float(result.disparity.values.mean())}))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    thresholds = args.thresholds if args.thresholds else cfg.thresholds
    if not thresholds or any(t <= 0 for t in thresholds):
        raise UsageError("thresholds must be positive")
    pred, gt = read_pfm(args.pred), read_pfm(args.gt)
    mask = read_mask(args.mask) if args.mask else None
    region = args.region or ("noc" if mask is not None else "all")
    report: MetricReport = evaluate(pred, gt, thresholds, mask=mask, region=region)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_dump_volume(args) -> int:
    cfg = resolve_config(args)
    left, right = _load_pair(cfg)
    weights = _weights(args, cfg)
    if args.aggregated:
        result = infer(left, right, weights, cfg.merged({"iters": 0}), depth=_load_depth(cfg, left),
                       threads=resolve_threads(cfg))
        vol = result.volume
    else:
        feats = compute_features(pad_to_multiple(left), pad_to_multiple(right), weights, depth=None)
        vol = build_gwc_volume(feats["texture-left"][4], feats["texture-right"][4], cfg.d_max4, cfg.groups)
    write_tensor(vol.data, args.out)
    print(json.dumps({"kind": vol.kind, "shape": list(vol.data.shape)}))
    return EXIT_OK


def cmd_dump_affinity(args) -> int:
    cfg = resolve_config(args)
    if not 0 <= args.disparity < cfg.d_max4:
        raise UsageError(f"--disparity must lie in [0, {cfg.d_max4})")
    if args.stride < 1:
        raise UsageError("--stride must be >= 1")
    left, right = _load_pair(cfg)
    weights = _weights(args, cfg)
    feats = compute_features(pad_to_multiple(left), pad_to_multiple(right), weights, _load_depth(cfg, left))
    vol = build_gwc_volume(feats["texture-left"][4], feats["texture-right"][4], cfg.d_max4, cfg.groups)
    f_da4 = feats["depth-aware"][4]
    aff = compute_affinity(vol.data[:, args.disparity], f_da4, weights, cfg.s)
    h, w = aff.spatial
    grid = (np.arange(h)[::args.stride, None] * w + np.arange(w)[None, ::args.stride]).ravel()
    rows = aff.a[:, grid, :]
    write_tensor(rows, args.out)
    print(json.dumps({"disparity": args.disparity, "shape": list(rows.shape), "grid_stride": args.stride}))
    return EXIT_OK


def bench_dynamic_conv(size=(64, 64), disparities=16, groups=8, kernel=7, channels_per_group=3,
                       repeats=5, seed=42) -> dict:
    """Median wall time of the sliding-window fast path vs the per-pixel oracle over all slices."""
    h, w = size
    cx = groups * channels_per_group
    xs = [random_tensor(seed, f"bench.x{d}", (cx, h, w), -1.0, 1.0) for d in range(disparities)]
    fields = [
        DynamicKernelField(softmax(random_tensor(seed, f"bench.m{d}", (groups, h * w, kernel * kernel), -3.0, 3.0)),
                           kernel, (h, w))
        for d in range(disparities)
    ]
    fast_out = [dynamic_group_conv(x, f) for x, f in zip(xs, fields)]
    oracle_out = [dynamic_conv_oracle(x, f.m, kernel) for x, f in zip(xs, fields)]
    max_diff = max(float(np.abs(a - b).max()) for a, b in zip(fast_out, oracle_out))
    scale = max(float(np.abs(b).max()) for b in oracle_out)
    if max_diff > 1e-5 * max(scale, 1e-30):
        raise AssertionError(f"fast path and oracle disagree (max diff {max_diff})")

    def timed(fn) -> float:
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            for x, f in zip(xs, fields):
                fn(x, f)
            times.append(time.perf_counter() - t0)
        return statistics.median(times)

    fast = timed(dynamic_group_conv)
    oracle = timed(lambda x, f: dynamic_conv_oracle(x, f.m, kernel))
    return {
        "op": "dynamic-conv",
        "config": {"size": [h, w], "disparities": disparities, "groups": groups, "kernel": kernel,
                   "channels": cx, "repeats": repeats, "seed": seed},
        "outputs_equal": True,
        "max_abs_diff": max_diff,
        "fast_s": fast,
        "oracle_s": oracle,
        "speedup": oracle / fast,
    }


def cmd_bench(args) -> int:
    if args.repeats < 1 or args.disparities < 1 or args.groups < 1 or args.kernel % 2 == 0:
        raise UsageError("repeats, disparities and groups must be positive; kernel must be odd")
    report = bench_dynamic_conv(args.size, args.disparities, args.groups, args.kernel,
                                args.channels_per_group, args.repeats, args.seed)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


COMMANDS = {
    "gen-scene": cmd_gen_scene,
    "extract-features": cmd_extract_features,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "dump-volume": cmd_dump_volume,
    "dump-affinity": cmd_dump_affinity,
    "bench": cmd_bench,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ggev: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigurationError) as exc:
        print(f"ggev {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GGEVError, OSError, ValueError) as exc:
        print(f"ggev {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())
