"""Command-line interface.

Subcommands:
  generate     sample a synthetic cohort (episodes.jsonl + oracle.csv)
  experiment   run the full protocol and render the report tables
  sweep-trees  tree-complexity sweep on a single split
  ope          inverse-probability product diagnostics for a saved model
  report       re-render tables/figures from a saved report.json

Exit codes: 0 success, 1 configuration error, 2 data error. The environment
variable SEQPOL_THREADS controls candidate-level parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import (
    apply_preprocessor,
    fit_preprocessor,
    load_episodes,
    save_episodes_jsonl,
)
from .errors import ConfigError, DataError, SeqpolError
from .models import model_from_dict
from .ope import inverse_probability_products, median_product_curve
from .runner import ExperimentConfig, load_report, render_report, run_experiment
from .schema import CohortSchema
from .staterep import StateSpec
from .svg import line_chart
from .synthgen import GeneratorConfig, generate_cohort


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqpol",
        description="Interpretable behavior-policy modeling over decision logs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a synthetic cohort")
    p.add_argument("--config", required=True, help="generator config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("experiment", help="run the full experimental protocol")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("sweep-trees", help="tree-complexity sweep on one split")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=500, help="models per state")
    p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("ope", help="inverse-probability product diagnostics")
    p.add_argument("--model", required=True, help="saved model bundle JSON")
    p.add_argument("--data", required=True, help="episodes (JSONL or CSV)")
    p.add_argument("--spec", required=True, help="state spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--max-stage", type=int, default=10)

    p = sub.add_parser("report", help="re-render tables from report.json")
    p.add_argument("--in", dest="indir", required=True, help="report directory")
    p.add_argument("--out", default=None, help="output directory (default: --in)")
    return parser


def _cmd_generate(args) -> int:
    gen = GeneratorConfig.from_json(args.config)
    if args.seed is not None:
        gen = GeneratorConfig.from_dict({**gen.to_dict(), "seed": args.seed})
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    episodes, oracle = generate_cohort(gen)
    save_episodes_jsonl(episodes, str(outdir / "episodes.jsonl"))
    oracle.to_csv(str(outdir / "oracle.csv"))
    episodes.schema.to_json(str(outdir / "schema.json"))
    with open(outdir / "generator.json", "w", encoding="utf-8") as fh:
        json.dump(gen.to_dict(), fh, indent=2)
        fh.write("\n")
    print(
        f"generated {len(episodes)} patients, {episodes.n_stages} stages "
        f"-> {outdir}"
    )
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    report = run_experiment(cfg)
    written = render_report(report, args.out)
    print(f"wrote {len(written)} files -> {args.out}")
    return 0


def _cmd_sweep_trees(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.tree_sweep_n = args.n
    # Only the sweep runs; skip the candidate protocol by keeping one split
    # and rendering just the sweep-bearing report.
    cfg.n_splits = 1
    cfg.n_candidates = 1
    report = run_experiment(cfg)
    written = render_report(report, args.out)
    print(f"wrote {len(written)} files -> {args.out}")
    return 0


def _cmd_ope(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        bundle = json.load(fh)
    if "model" in bundle:  # bundle with preprocessor + schema
        model = model_from_dict(bundle["model"])
        schema = CohortSchema.from_dict(bundle["schema"])
        from .dataset import Preprocessor

        prep = Preprocessor.from_dict(bundle["preprocessor"])
    else:
        raise ConfigError(
            "model file must be a bundle with 'model', 'schema' and "
            "'preprocessor' sections (see runner.save_model_bundle)"
        )
    spec = StateSpec.from_json(args.spec)
    episodes = load_episodes(args.data, schema)
    encoded = apply_preprocessor(episodes, prep)
    products = inverse_probability_products(encoded, model, spec)
    curve = median_product_curve(products, args.max_stage)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "ope_curve.csv", "w", encoding="utf-8") as fh:
        fh.write("stage,median,n,floored_events\n")
        for t, median, n, floored in curve.rows():
            fh.write(f"{t},{median:.6f},{n},{floored}\n")
    line_chart(
        [("model", curve.stages, curve.medians)],
        str(outdir / "ope_curve.svg"),
        title="Median inverse-probability product by stage",
        x_label="stage",
        y_label="median product",
        log_y=True,
    )
    print(f"wrote ope_curve.csv and ope_curve.svg -> {outdir}")
    return 0


def _cmd_report(args) -> int:
    report = load_report(args.indir)
    outdir = args.out or args.indir
    written = render_report(report, outdir)
    print(f"wrote {len(written)} files -> {outdir}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "experiment": _cmd_experiment,
    "sweep-trees": _cmd_sweep_trees,
    "ope": _cmd_ope,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SeqpolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
