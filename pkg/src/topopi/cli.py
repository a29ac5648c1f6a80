"""Command-line front end: batch computation, sweeps, fixtures, scheduling.

Exit codes: 0 success, 2 usage or parameter error, 3 data contract violation,
4 empty input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ContractError, FormatError, TopopiError
from .filtration import kde_density, total_variation
from .loss import LossConfig, SchedulerState, scheduler_update, warmup_step, schedule_log_lines
from .metrics import evaluate_pair, aggregate, report_to_csv, report_to_json, write_report
from .pimage import (
    PersistenceImageConfig,
    compute_diagram,
    persistence_image,
    pi_from_diagram,
    write_pi,
    write_preview_pgm,
)
from .persistence import write_diagram_csv
from .loss import joint_loss, topological_dissimilarity
from .segmap import SegMap, extract_contours, load_segmap, write_segmap
from .synth import CORRUPTIONS, synth_pair

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONTRACT = 3
EXIT_EMPTY = 4

MAP_SUFFIXES = (".pgm", ".png", ".tpi1")


def _positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _nonnegative(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {text}")
    return value


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bandwidth", type=_positive, default=1.0, help="KDE bandwidth B")
    p.add_argument("--sigma2", type=_positive, default=1.0, help="Gaussian variance")
    p.add_argument("--gamma", type=_nonnegative, default=2.0, help="lifetime weighting exponent")
    p.add_argument("--beta", type=_nonnegative, default=0.05, help="TD weight in the joint loss")
    p.add_argument("--lambda", dest="lambda_", type=_nonnegative, default=0.0005,
                   help="scheduler decay rate")
    p.add_argument("--cap", type=_positive, default=20.0, help="filtration value ceiling")
    p.add_argument("--pi-rows", type=int, default=64)
    p.add_argument("--pi-cols", type=int, default=64)
    p.add_argument("--extent-birth", type=_positive, default=None,
                   help="birth-axis window (default: cap)")
    p.add_argument("--extent-life", type=_positive, default=None,
                   help="lifetime-axis window (default: cap)")
    p.add_argument("--overlap-threshold", type=_fraction, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--jobs", type=int, default=int(os.environ.get("TOPOPI_JOBS", "1")))
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _pi_config(args) -> PersistenceImageConfig:
    extent = (
        args.extent_birth if args.extent_birth is not None else args.cap,
        args.extent_life if args.extent_life is not None else args.cap,
    )
    return PersistenceImageConfig(
        resolution=(args.pi_rows, args.pi_cols),
        extent=extent,
        sigma2=args.sigma2,
        gamma=args.gamma,
    )


def _parameters(args) -> dict:
    cfg = _pi_config(args)
    return {
        "bandwidth": args.bandwidth,
        "sigma2": args.sigma2,
        "gamma": args.gamma,
        "beta": args.beta,
        "lambda": args.lambda_,
        "cap": args.cap,
        "resolution": list(cfg.resolution),
        "extent": list(cfg.extent),
        "overlap_threshold": args.overlap_threshold,
        "seed": args.seed,
        "warmup": args.warmup,
    }


def _write_manifest(out_dir: Path, command: str, inputs: list[str], args) -> None:
    manifest = {
        "command": command,
        "inputs": inputs,
        "parameters": _parameters(args),
        "output_dir": str(out_dir),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="ascii"
    )


def _load_map(path: Path) -> SegMap:
    if not path.is_file():
        print(f"error: no such file: {path}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return load_segmap(path)


def _discover_pairs(gt_dir: Path, pred_dir: Path) -> tuple[list[tuple[Path, Path]], list[str]]:
    def names(d: Path) -> dict[str, Path]:
        return {p.name: p for p in sorted(d.iterdir()) if p.suffix.lower() in MAP_SUFFIXES}

    gt_files = names(gt_dir)
    pred_files = names(pred_dir)
    paired = sorted(set(gt_files) & set(pred_files))
    unpaired = sorted(set(gt_files) ^ set(pred_files))
    return [(gt_files[n], pred_files[n]) for n in paired], unpaired


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_pi(args) -> int:
    path = Path(args.map)
    m = _load_map(path)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    diagram, degenerate = compute_diagram(m, args.bandwidth, args.cap)
    if degenerate:
        print(f"warning: {path.name} has no foreground; persistence image is all zero",
              file=sys.stderr)
    image = pi_from_diagram(diagram, _pi_config(args), degenerate=degenerate)
    stem = path.stem
    write_pi(image, out_dir / f"{stem}.tpp1")
    write_diagram_csv(diagram, out_dir / f"{stem}.diagram.csv")
    if args.preview:
        write_preview_pgm(image, out_dir / f"{stem}.preview.pgm")
    _write_manifest(out_dir, "pi", [str(path)], args)
    return EXIT_OK


def cmd_td(args) -> int:
    gt = _load_map(Path(args.gt))
    pred = _load_map(Path(args.pred))
    if (gt.width, gt.height) != (pred.width, pred.height):
        print(
            f"error: dimension mismatch: {gt.width}x{gt.height} vs {pred.width}x{pred.height}",
            file=sys.stderr,
        )
        return EXIT_CONTRACT
    cfg = _pi_config(args)
    pi_gt = persistence_image(gt, args.bandwidth, args.sigma2, args.gamma, cfg, cap=args.cap)
    pi_pred = persistence_image(pred, args.bandwidth, args.sigma2, args.gamma, cfg, cap=args.cap)
    td = topological_dissimilarity(pi_gt, pi_pred)
    payload: dict = {"td": td, "ce": args.ce}
    if args.ce is not None:
        payload["loss"] = joint_loss(args.ce, td, args.beta)
    print(json.dumps(payload))
    return EXIT_OK


def cmd_eval(args) -> int:
    gt_dir, pred_dir = Path(args.gt_dir), Path(args.pred_dir)
    for d in (gt_dir, pred_dir):
        if not d.is_dir():
            print(f"error: no such directory: {d}", file=sys.stderr)
            return EXIT_USAGE
    pairs, unpaired = _discover_pairs(gt_dir, pred_dir)
    for name in unpaired:
        print(f"warning: unpaired file skipped: {name}", file=sys.stderr)
    if not pairs:
        print("error: no paired map files to evaluate", file=sys.stderr)
        return EXIT_EMPTY

    def one(pair: tuple[Path, Path]):
        gt_path, pred_path = pair
        return evaluate_pair(load_segmap(pred_path), load_segmap(gt_path),
                             args.overlap_threshold)

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        rows = list(pool.map(one, pairs))
    report = aggregate(rows)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(report, out_dir / "report.json", out_dir / "report.csv")
    _write_manifest(out_dir, "eval", [str(gt_dir), str(pred_dir)], args)
    if args.format == "json":
        print(report_to_json(report), end="")
    else:
        print(report_to_csv(report), end="")
    return EXIT_OK


def cmd_schedule(args) -> int:
    path = Path(args.log)
    if not path.is_file():
        print(f"error: no such file: {path}", file=sys.stderr)
        return EXIT_USAGE
    lines = path.read_text(encoding="ascii").splitlines()
    if not lines or lines[0].strip() != "step,ce,td":
        print("error: schedule log must start with header 'step,ce,td'", file=sys.stderr)
        return EXIT_USAGE
    if args.gamma0 < 1 or args.warmup < 0:
        print("error: --gamma0 must be >= 1 and --warmup >= 0", file=sys.stderr)
        return EXIT_USAGE
    config = LossConfig(
        beta=args.beta,
        lambda_=args.lambda_,
        gamma0=args.gamma0,
        warmup_steps=args.warmup,
        gamma_min=args.gamma_min,
    )
    state = SchedulerState.initial(config)
    for line in lines[1:]:
        line = line.strip()
        if not line:
            continue
        _, ce_s, td_s = line.split(",")
        ce, td = float(ce_s), float(td_s)
        if state.step < config.warmup_steps:
            state = warmup_step(state, ce, td)
        else:
            state = scheduler_update(state, ce, td, config)
    text = "\n".join(schedule_log_lines(state.history)) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="ascii")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    gt, pred = synth_pair(
        seed=args.seed, n_objects=args.n_objects, size=args.size, corruption=args.corruption
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_segmap(gt, out_dir / f"gt_s{args.seed}.pgm")
    write_segmap(pred, out_dir / f"{args.corruption}_s{args.seed}.pgm")
    _write_manifest(out_dir, "synth", [], args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    values = [v for v in (args.values or "").split(",") if v.strip()]
    if not values:
        print("error: empty parameter grid", file=sys.stderr)
        return EXIT_USAGE
    try:
        grid = [float(v) for v in values]
    except ValueError:
        print(f"error: non-numeric grid value in {args.values!r}", file=sys.stderr)
        return EXIT_USAGE
    gt_dir, pred_dir = Path(args.gt_dir), Path(args.pred_dir)
    for d in (gt_dir, pred_dir):
        if not d.is_dir():
            print(f"error: no such directory: {d}", file=sys.stderr)
            return EXIT_USAGE
    pairs, unpaired = _discover_pairs(gt_dir, pred_dir)
    for name in unpaired:
        print(f"warning: unpaired file skipped: {name}", file=sys.stderr)
    if not pairs:
        print("error: no paired map files to sweep", file=sys.stderr)
        return EXIT_EMPTY

    maps = [(load_segmap(g), load_segmap(p)) for g, p in pairs]
    diagram_cache: dict[tuple[int, float], tuple] = {}

    def tds_at(param: str, value: float) -> tuple[list[float], float]:
        bandwidth = value if param == "bandwidth" else args.bandwidth
        sigma2 = value if param == "sigma2" else args.sigma2
        gamma = value if param == "gamma" else args.gamma
        cfg = PersistenceImageConfig(
            resolution=(args.pi_rows, args.pi_cols),
            extent=(
                args.extent_birth if args.extent_birth is not None else args.cap,
                args.extent_life if args.extent_life is not None else args.cap,
            ),
            sigma2=sigma2,
            gamma=gamma,
        )
        tds = []
        tvs = []

        def one(indexed):
            i, (gt, pred) = indexed
            results = []
            for j, m in ((0, gt), (1, pred)):
                key = (2 * i + j, bandwidth)
                if key not in diagram_cache:
                    diagram_cache[key] = compute_diagram(m, bandwidth, args.cap)
                results.append(diagram_cache[key])
            (d_gt, deg_gt), (d_pred, deg_pred) = results
            pi_gt = pi_from_diagram(d_gt, cfg, degenerate=deg_gt)
            pi_pred = pi_from_diagram(d_pred, cfg, degenerate=deg_pred)
            contours = extract_contours(gt)
            # density smoothness, recorded so bandwidth sweeps expose the
            # smoothing/detail trade-off
            tv = total_variation(kde_density(contours, bandwidth)) if contours.count else 0.0
            return topological_dissimilarity(pi_gt, pi_pred), tv

        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            for td, tv in pool.map(one, enumerate(maps)):
                tds.append(td)
                tvs.append(tv)
        return tds, float(np.mean(tvs))

    if args.param == "gamma" and any(v < 0 for v in grid):
        print("error: gamma grid values must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    if args.param in ("bandwidth", "sigma2") and any(v <= 0 for v in grid):
        print(f"error: {args.param} grid values must be > 0", file=sys.stderr)
        return EXIT_USAGE

    lines = ["param,value,td_mean,td_median,td_std,field_tv_mean,n"]
    for value in grid:
        tds, tv_mean = tds_at(args.param, value)
        arr = np.array(tds)
        lines.append(
            f"{args.param},{value:.17g},{arr.mean():.17g},{np.median(arr):.17g},"
            f"{arr.std():.17g},{tv_mean:.17g},{len(tds)}"
        )
    text = "\n".join(lines) + "\n"
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.csv").write_text(text, encoding="ascii")
    _write_manifest(out_dir, "sweep", [str(gt_dir), str(pred_dir)], args)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topopi",
        description="Persistence-image toolkit for 2D segmentation maps",
    )
    parser.add_argument("--version", action="version", version=f"topopi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pi", help="persistence image, diagram CSV, optional preview")
    p.add_argument("map", help="segmentation map file (.pgm/.png/.tpi1)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--preview", action="store_true", help="also write an 8-bit PGM preview")
    _add_common(p)
    p.set_defaults(func=cmd_pi)

    p = sub.add_parser("td", help="topological dissimilarity between two maps")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("--ce", type=_nonnegative, default=None,
                   help="cross entropy; adds the joint loss to the output")
    _add_common(p)
    p.set_defaults(func=cmd_td)

    p = sub.add_parser("eval", help="metric report over paired map directories")
    p.add_argument("gt_dir")
    p.add_argument("pred_dir")
    p.add_argument("--out", default="eval_out")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("schedule", help="replay the gamma scheduler over a CE/TD log")
    p.add_argument("log", help="CSV file with header step,ce,td")
    p.add_argument("--gamma0", type=float, default=2.0)
    p.add_argument("--gamma-min", type=_nonnegative, default=0.0)
    p.add_argument("--out", default=None, help="write JSON lines here instead of stdout")
    _add_common(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("synth", help="deterministic synthetic map pairs")
    p.add_argument("--n-objects", type=int, default=4)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--corruption", choices=CORRUPTIONS, default="delete")
    p.add_argument("--out", default="synth_out")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="TD statistics over a parameter grid")
    p.add_argument("gt_dir")
    p.add_argument("pred_dir")
    p.add_argument("--param", choices=("bandwidth", "sigma2", "gamma"), required=True)
    p.add_argument("--values", required=True, help="comma-separated grid, e.g. 0.5,1,2")
    p.add_argument("--out", default="sweep_out")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except TopopiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
