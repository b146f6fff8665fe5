"""Command-line entry point.

Subcommands wrap the library workflows one to one. All randomness flows
from --seed; stdout carries machine-readable JSON (or a bare number for
`sigma`), stderr carries the echoed resolved configuration and error
messages. Exit codes: 0 ok, 2 search exhausted, 3 resample exhausted,
4 I/O failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import (
    CorruptManifest,
    IoFailure,
    MissingImage,
    VersionMismatch,
    montage_from_dataset,
)
from .ifs import IfsCode, SearchExhausted, SigmaTarget, search_category_set, sigma_factor
from .image import write_png
from .noise import InvalidParams
from .perturb import ResampleExhausted
from .pipeline import (
    DEFAULT_COUNT,
    DEFAULT_DELTA,
    DEFAULT_N_MAPS,
    DEFAULT_SIGMA,
    generate_fractal_dataset,
    generate_noise_dataset,
    generate_real_dataset,
    probe_dataset,
)
from .probe import TrainConfig
from .render import PATCH_MODES, PATCH_SINGLE, RenderConfig

EXIT_OK = 0
EXIT_SEARCH_EXHAUSTED = 2
EXIT_RESAMPLE_EXHAUSTED = 3
EXIT_IO = 4
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _echo_config(args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "handler"}
    print(json.dumps(cfg, sort_keys=True, default=str), file=sys.stderr)


def _positive(value: float, flag: str) -> None:
    if value <= 0:
        raise UsageError(f"{flag} must be > 0, got {value}")


def _nonnegative(value: float, flag: str) -> None:
    if value < 0:
        raise UsageError(f"{flag} must be >= 0, got {value}")


def _load_code(path: str) -> IfsCode:
    try:
        return IfsCode.from_json(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read code file {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise IoFailure(f"not a valid code file {path}: {exc}") from exc


def _render_config(args: argparse.Namespace) -> RenderConfig:
    return RenderConfig(
        point_count=args.points,
        width=args.size,
        height=args.size,
        patch_mode=args.patch_mode,
    )


def _cmd_search(args: argparse.Namespace) -> int:
    _positive(args.sigma, "--sigma")
    _nonnegative(args.tol, "--tol")
    if args.count < 1:
        raise UsageError(f"--count must be >= 1, got {args.count}")
    codes = search_category_set(
        args.count, args.n_maps, SigmaTarget(args.sigma, args.tol), args.seed
    )
    out = Path(args.out)
    if args.count == 1:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(codes[0].to_json())
        files = [str(out)]
    else:
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for i, code in enumerate(codes):
            path = out / f"{i:06d}.json"
            path.write_text(code.to_json())
            files.append(str(path))
    print(json.dumps({"files": files, "sigma": [sigma_factor(c) for c in codes]}))
    return EXIT_OK


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.code is not None and args.sigma_set:
        raise UsageError("--code and --sigma are mutually exclusive")
    _positive(args.sigma, "--sigma")
    _nonnegative(args.delta, "--delta")
    if args.l < 1:
        raise UsageError(f"--l must be >= 1, got {args.l}")
    code = _load_code(args.code) if args.code else None
    result = generate_fractal_dataset(
        args.out,
        code=code,
        sigma=args.sigma,
        tolerance=args.tol,
        n_maps=args.n_maps,
        delta=args.delta,
        count=args.l,
        seed=args.seed,
        render_cfg=_render_config(args),
        threads=args.threads,
    )
    print(json.dumps(result.summary.to_doc()))
    return EXIT_OK


def _cmd_noise(args: argparse.Namespace) -> int:
    _nonnegative(args.delta, "--delta")
    if args.l < 1:
        raise UsageError(f"--l must be >= 1, got {args.l}")
    if args.kind == "gaussian":
        params = (args.mu, args.sd)
    else:
        params = (args.low, args.high)
    result = generate_noise_dataset(
        args.out,
        kind=args.kind,
        params=params,
        delta=args.delta,
        count=args.l,
        seed=args.seed,
        width=args.size,
        height=args.size,
        threads=args.threads,
    )
    print(json.dumps(result.summary.to_doc()))
    return EXIT_OK


def _cmd_realimg(args: argparse.Namespace) -> int:
    _nonnegative(args.delta, "--delta")
    if args.l < 1:
        raise UsageError(f"--l must be >= 1, got {args.l}")
    result = generate_real_dataset(
        args.out,
        input_path=args.input,
        use_canny=args.canny,
        transform_kind=args.transform,
        delta=args.delta,
        count=args.l,
        seed=args.seed,
        threads=args.threads,
    )
    print(json.dumps(result.summary.to_doc()))
    return EXIT_OK


def _cmd_probe(args: argparse.Namespace) -> int:
    _positive(args.lr, "--lr")
    if args.epochs < 1:
        raise UsageError(f"--epochs must be >= 1, got {args.epochs}")
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, rng_seed=args.seed)
    report = probe_dataset(args.dataset, cfg)
    print(json.dumps(report))
    return EXIT_OK


def _cmd_montage(args: argparse.Namespace) -> int:
    if args.k < 1:
        raise UsageError(f"--k must be >= 1, got {args.k}")
    _, tiled = montage_from_dataset(args.dataset, args.k)
    out = Path(args.out) if args.out else Path(args.dataset) / "montage.png"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_png(tiled, out)
    print(json.dumps({"out": str(out), "tiles": args.k}))
    return EXIT_OK


def _cmd_sigma(args: argparse.Namespace) -> int:
    code = _load_code(args.code)
    print(format(sigma_factor(code), ".17g"))
    return EXIT_OK


class _SigmaAction(argparse.Action):
    """Records that --sigma was given explicitly (for the --code clash)."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        setattr(namespace, "sigma_set", True)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument(
        "--threads", type=int, default=1,
        help="parallel render pool size; output is identical for any value (default 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onefractal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="sample IFS codes at a sigma target")
    p.add_argument("--n-maps", type=int, default=DEFAULT_N_MAPS, help="maps per IFS (default 2)")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA, help="sigma target (default 3.5)")
    p.add_argument("--tol", type=float, default=1e-6, help="sigma tolerance (default 1e-6)")
    p.add_argument("--count", type=int, default=1, help="number of codes (default 1)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", required=True, help="output file (count 1) or directory")
    p.set_defaults(handler=_cmd_search)

    p = sub.add_parser("generate", help="build a perturbation-labeled fractal dataset")
    p.add_argument("--code", default=None, help="IFS code JSON file (skips the search)")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA, action=_SigmaAction,
                   help="sigma target when searching (default 3.5)")
    p.add_argument("--tol", type=float, default=1e-6, help="sigma tolerance (default 1e-6)")
    p.add_argument("--n-maps", type=int, default=DEFAULT_N_MAPS, help="maps per IFS (default 2)")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                   help="perturbation hypercube side (default 0.1)")
    p.add_argument("--l", type=int, default=DEFAULT_COUNT,
                   help="number of perturbation classes (default 1000)")
    p.add_argument("--size", type=int, default=256, help="image side in pixels (default 256)")
    p.add_argument("--points", type=int, default=100_000,
                   help="chaos-game points per image (default 100000)")
    p.add_argument("--patch-mode", choices=PATCH_MODES, default=PATCH_SINGLE,
                   help="pixel marking mode (default single-pixel)")
    p.add_argument("--out", required=True, help="dataset output directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_generate, sigma_set=False)

    p = sub.add_parser("noise", help="build a noise-image control dataset")
    p.add_argument("--kind", choices=("gaussian", "uniform"), required=True)
    p.add_argument("--mu", type=float, default=0.5, help="gaussian mean (default 0.5)")
    p.add_argument("--sd", type=float, default=0.15, help="gaussian sd (default 0.15)")
    p.add_argument("--low", type=float, default=0.0, help="uniform low bound (default 0)")
    p.add_argument("--high", type=float, default=1.0, help="uniform high bound (default 1)")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                   help="parameter perturbation side (default 0.1)")
    p.add_argument("--l", type=int, default=DEFAULT_COUNT,
                   help="number of classes (default 1000)")
    p.add_argument("--size", type=int, default=256, help="image side in pixels (default 256)")
    p.add_argument("--out", required=True, help="dataset output directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_noise)

    p = sub.add_parser("realimg", help="build a warped-real-image dataset")
    p.add_argument("--input", required=True, help="source RGB image (PNG/PPM)")
    p.add_argument("--canny", action="store_true", help="edge-extract before warping")
    p.add_argument("--transform", choices=("affine", "elastic", "polynomial"),
                   default="affine", help="warp family (default affine)")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                   help="warp parameter perturbation side (default 0.1)")
    p.add_argument("--l", type=int, default=DEFAULT_COUNT,
                   help="number of classes (default 1000)")
    p.add_argument("--out", required=True, help="dataset output directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_realimg)

    p = sub.add_parser("probe", help="train the learnability probe on a dataset")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--epochs", type=int, default=30, help="training epochs (default 30)")
    p.add_argument("--lr", type=float, default=0.1, help="SGD learning rate (default 0.1)")
    p.add_argument("--seed", type=int, default=0, help="probe seed (default 0)")
    p.set_defaults(handler=_cmd_probe)

    p = sub.add_parser("montage", help="tile the first K dataset images into one PNG")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--k", type=int, default=16, help="tiles (default 16)")
    p.add_argument("--out", default=None, help="output PNG (default <dataset>/montage.png)")
    p.set_defaults(handler=_cmd_montage)

    p = sub.add_parser("sigma", help="print the sigma factor of a code file")
    p.add_argument("--code", required=True, help="IFS code JSON file")
    p.set_defaults(handler=_cmd_sigma)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"onefractal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SearchExhausted as exc:
        print(f"onefractal: search exhausted: {exc}", file=sys.stderr)
        return EXIT_SEARCH_EXHAUSTED
    except ResampleExhausted as exc:
        print(f"onefractal: resample exhausted: {exc}", file=sys.stderr)
        return EXIT_RESAMPLE_EXHAUSTED
    except InvalidParams as exc:
        print(f"onefractal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IoFailure, OSError, CorruptManifest, MissingImage, VersionMismatch) as exc:
        print(f"onefractal: i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
