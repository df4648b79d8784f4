"""Batch command line: ``aggregate``, ``evaluate`` and ``simulate``.

Exit codes: 0 success, 1 usage error, 2 input-data error, 3 numerical failure.
Every file written is accompanied by ``<file>.manifest.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from latentmos import __version__
from latentmos.errors import InputError, UndefinedMetricError
from latentmos.io import (
    DEFAULT_DIGITS,
    DataFileError,
    file_digest,
    fmt_num,
    read_annotations,
    read_dataset,
    read_pairs,
    read_scores,
    write_dataset,
    write_pairs,
)
from latentmos.latent import FitConfig, fit
from latentmos.metrics import lcc, ppref_counts, screen_preferences, srcc
from latentmos.ratings import RatingSet, mos, n_low_mos
from latentmos.synth import (
    DEFAULT_GRID_MU,
    DEFAULT_GRID_SIGMA,
    SynthConfig,
    generate_dataset,
    generate_grid,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

AGGREGATE_COLUMNS = (
    "sample_id", "n_ratings", "mos", "representative", "method",
    "sigma_hat", "loss", "initial_loss", "fell_back", "iterations",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def write_manifest(output: Path, command: str, config: dict, inputs: Sequence[Path]) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "input_digests": {str(p): file_digest(p) for p in inputs},
        "tool_version": __version__,
    }
    path = output.with_name(output.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------- aggregate


def aggregate_row(rs: RatingSet, method: str, n_low: Optional[int], cfg: FitConfig, digits: int) -> list[str]:
    row = dict.fromkeys(AGGREGATE_COLUMNS, "")
    row.update(sample_id=rs.sample_id, n_ratings=str(len(rs)), mos=fmt_num(mos(rs), digits), method=method)
    if method == "mos":
        row["representative"] = fmt_num(mos(rs), digits)
    elif method == "nlow":
        row["representative"] = fmt_num(n_low_mos(rs, n_low), digits)
    else:
        res = fit(rs, cfg)
        row.update(
            representative=fmt_num(res.representative, digits),
            sigma_hat=fmt_num(res.params.sigma if res.params else None, digits),
            loss=fmt_num(res.loss, digits),
            initial_loss=fmt_num(res.initial_loss, digits),
            fell_back="true" if res.fell_back else "false",
            iterations=str(res.iterations_run),
        )
    return [row[c] for c in AGGREGATE_COLUMNS]


def _aggregate_job(args):
    return aggregate_row(*args)


def cmd_aggregate(args) -> int:
    cfg = FitConfig(
        beta=args.beta, max_iters=args.max_iters, sigma_min=args.sigma_min, scale_max=args.scale_max
    )
    if args.method == "nlow" and args.n_low is None:
        raise UsageError("--n-low is required for --method nlow")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    dataset = read_dataset(args.dataset, cfg.scale_max)
    if args.method == "nlow":
        short = [f"{rs.sample_id} ({len(rs)})" for rs in dataset if len(rs) < args.n_low]
        if short:
            raise InputError(f"--n-low {args.n_low} exceeds the rating count of: {', '.join(short)}")

    jobs = [(rs, args.method, args.n_low, cfg, args.digits) for rs in dataset]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_aggregate_job, jobs, chunksize=max(1, len(jobs) // (4 * args.jobs))))
    else:
        rows = [_aggregate_job(j) for j in jobs]

    out_fh = sys.stdout if args.output == "-" else open(args.output, "w", encoding="utf-8", newline="")
    try:
        writer = csv.writer(out_fh, lineterminator="\n")
        writer.writerow(AGGREGATE_COLUMNS)
        writer.writerows(rows)
    finally:
        if out_fh is not sys.stdout:
            out_fh.close()
    if args.output != "-":
        config = {
            "method": args.method,
            "n_low": args.n_low,
            "beta": cfg.beta,
            "max_iters": cfg.max_iters,
            "sigma_min": cfg.sigma_min,
            "scale_max": cfg.scale_max,
            "digits": args.digits,
        }
        write_manifest(Path(args.output), "aggregate", config, [Path(args.dataset)])
    return EXIT_OK


# ----------------------------------------------------------------- evaluate


def _correlations(pred, truth) -> dict:
    report: dict = {"n_samples": len(truth)}
    try:
        report["lcc"] = lcc(pred, truth)
        report["srcc"] = srcc(pred, truth)
    except UndefinedMetricError as exc:
        report.update(lcc=None, srcc=None, reason=str(exc))
    return report


def cmd_evaluate(args) -> int:
    pred = read_scores(args.predictions)
    inputs = [Path(args.predictions)]
    if args.mode == "correlation":
        if not args.truth:
            raise UsageError("--truth is required for --mode correlation")
        truth = read_scores(args.truth)
        inputs.append(Path(args.truth))
        report = _correlations(pred, truth)
    else:
        if bool(args.pairs) == bool(args.annotations):
            raise UsageError("--mode ppref needs exactly one of --pairs or --annotations")
        report = {}
        if args.pairs:
            pairs = read_pairs(args.pairs)
            inputs.append(Path(args.pairs))
        else:
            annotations = read_annotations(args.annotations)
            inputs.append(Path(args.annotations))
            pairs = screen_preferences(annotations, args.min_agree)
            report.update(n_pairs_screened=len(pairs), n_pairs_dropped=len(annotations) - len(pairs))
            if args.screened_out:
                write_pairs(args.screened_out, pairs)
        n_correct, n_all = ppref_counts(pred, pairs)
        report.update(n_all=n_all, n_correct=n_correct)
        if n_all:
            report["ppref"] = n_correct / n_all
        else:
            report.update(ppref=None, reason="no preference pairs to score")

    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.output:
        out = Path(args.output)
        out.write_text(text + "\n", encoding="utf-8")
        config = {"mode": args.mode, "min_agree": args.min_agree}
        write_manifest(out, "evaluate", config, inputs)
    return EXIT_OK


# ----------------------------------------------------------------- simulate

_SYNTH_KEYS = ("mu_star", "sigma_star", "n_ratings", "n_samples", "seed", "scale_max", "grid_mu", "grid_sigma")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve_synth(args) -> dict:
    settings = {"n_ratings": 8, "n_samples": 1, "seed": 0, "scale_max": 5}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        unknown = sorted(set(loaded) - set(_SYNTH_KEYS))
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        settings.update(loaded)
    for key in _SYNTH_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if args.grid:
        settings.setdefault("grid_mu", list(DEFAULT_GRID_MU))
        settings.setdefault("grid_sigma", list(DEFAULT_GRID_SIGMA))
    return settings


def cmd_simulate(args) -> int:
    s = _resolve_synth(args)
    gridded = "grid_mu" in s or "grid_sigma" in s
    try:
        if gridded:
            if not (s.get("grid_mu") and s.get("grid_sigma")):
                raise UsageError("a grid needs both mu and sigma values")
            SynthConfig(s["grid_mu"][0], s["grid_sigma"][0], s["n_ratings"], s["n_samples"], s["seed"], s["scale_max"])
            dataset, truth = generate_grid(
                s["grid_mu"], s["grid_sigma"], s["n_ratings"], s["n_samples"], s["seed"], s["scale_max"]
            )
            truth_rows = [(t.sample_id, t.mu_star, t.sigma_star) for t in truth]
        else:
            if "mu_star" not in s or "sigma_star" not in s:
                raise UsageError("--mu-star and --sigma-star are required (or use a grid)")
            cfg = SynthConfig(s["mu_star"], s["sigma_star"], s["n_ratings"], s["n_samples"], s["seed"], s["scale_max"])
            dataset = generate_dataset(cfg)
            truth_rows = [(rs.sample_id, cfg.mu_star, cfg.sigma_star) for rs in dataset]
    except (InputError, TypeError) as exc:
        raise UsageError(str(exc)) from None

    out = Path(args.output)
    write_dataset(out, dataset, args.format)
    truth_path = out.with_name(out.stem + ".truth.csv")
    with open(truth_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "mu_star", "sigma_star"])
        for sid, mu, sigma in truth_rows:
            writer.writerow([sid, fmt_num(mu), fmt_num(sigma)])
    config = dict(s, format=args.format)
    write_manifest(out, "simulate", config, [Path(args.config)] if args.config else [])
    return EXIT_OK


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latentmos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    agg = sub.add_parser("aggregate", help="compute one representative score per sample")
    agg.add_argument("dataset", help="ratings file (CSV or JSONL)")
    agg.add_argument("-o", "--output", default="-", help="output CSV (default: stdout)")
    agg.add_argument("--method", choices=("mos", "nlow", "latent"), default="latent")
    agg.add_argument("--n-low", type=int, help="number of lowest ratings averaged by nlow")
    agg.add_argument("--beta", type=float, default=0.03)
    agg.add_argument("--max-iters", type=int, default=100)
    agg.add_argument("--sigma-min", type=float, default=1e-5)
    agg.add_argument("--scale-max", type=int, default=5)
    agg.add_argument("--jobs", type=int, default=1)
    agg.add_argument("--digits", type=int, default=DEFAULT_DIGITS, help="significant digits in output")
    agg.set_defaults(func=cmd_aggregate)

    ev = sub.add_parser("evaluate", help="score predictions with LCC/SRCC or ppref")
    ev.add_argument("predictions", help="CSV sample_id,score")
    ev.add_argument("--truth", help="reference scores CSV (correlation mode)")
    ev.add_argument("--mode", choices=("correlation", "ppref"), default="correlation")
    ev.add_argument("--pairs", help="screened pairs CSV id_a,id_b,label")
    ev.add_argument("--annotations", help="raw votes CSV pair_id,id_a,id_b,vote_1,...")
    ev.add_argument("--min-agree", type=int, default=3)
    ev.add_argument("--screened-out", help="write pairs that survived screening here")
    ev.add_argument("-o", "--output", help="JSON report path")
    ev.set_defaults(func=cmd_evaluate)

    sim = sub.add_parser("simulate", help="generate synthetic ratings from the latent model")
    sim.add_argument("-o", "--output", required=True, help="dataset output path")
    sim.add_argument("--config", help="JSON file with simulation settings")
    sim.add_argument("--mu-star", dest="mu_star", type=float)
    sim.add_argument("--sigma-star", dest="sigma_star", type=float)
    sim.add_argument("--n-ratings", dest="n_ratings", type=int)
    sim.add_argument("--n-samples", dest="n_samples", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--scale-max", dest="scale_max", type=int)
    sim.add_argument("--grid", action="store_true", help="sweep the default (mu*, sigma*) grid")
    sim.add_argument("--grid-mu", dest="grid_mu", type=_float_list)
    sim.add_argument("--grid-sigma", dest="grid_sigma", type=_float_list)
    sim.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"latentmos: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFileError, InputError, OSError) as exc:
        print(f"latentmos: input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"latentmos: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
