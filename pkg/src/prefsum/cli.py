"""Command-line interface.

Subcommands: ingest (normalize a cluster to JSON), simulate (run one
seeded simulated session), evaluate (budget/strategy/unit/feature
analyses), ablate (pipeline ablations), serve (HTTP API).  Analysis
outputs are CSV tables plus rendered PNG figures, each with a sidecar
echoing the effective config.  All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analyses, plotting
from .config import RunConfig
from .corpus import cluster_to_json, ingest_cluster
from .errors import ValidationError
from .pipeline import canonical_json, run_simulated_session
from .simulate import GeneratorConfig, make_synthetic_cluster, user_from_references


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _effective_config(args, base: RunConfig = None) -> RunConfig:
    if args.config:
        base = RunConfig.load(args.config)
    elif base is None:
        base = RunConfig()
    overrides = {
        "unit": getattr(args, "unit", None),
        "budget": getattr(args, "budget", None),
        "summary_length": getattr(args, "summary_length", None),
        "strategy": getattr(args, "strategy", None),
        "reward_mode": getattr(args, "reward_mode", None),
        "reward_budget": getattr(args, "reward_budget", None),
        "pool_size": getattr(args, "pool_size", None),
        "redundancy_cap": getattr(args, "redundancy_cap", None),
        "ablation": getattr(args, "variant", None),
        "seed": args.seed,
    }
    if overrides.get("ablation") == "all":
        overrides["ablation"] = None
    return base.merged(overrides)


def cmd_ingest(args) -> int:
    config = _effective_config(args)
    cluster = ingest_cluster(Path(args.cluster), config.unit)
    out = Path(args.out) / "cluster.json"
    _write(out, canonical_json(cluster_to_json(cluster)))
    _write(out.with_suffix(".json.config.json"), canonical_json(config.to_json()))
    print(f"wrote {out} ({len(cluster.sentences)} sentences, "
          f"{len(cluster.concepts)} {cluster.unit} concepts)")
    return 0


def cmd_simulate(args) -> int:
    config = _effective_config(args)
    seed = config.seed
    if args.cluster:
        cluster = ingest_cluster(Path(args.cluster), config.unit)
        if not cluster.references:
            raise ValidationError(
                "simulated sessions on a real cluster need reference summaries"
            )
        from .corpus import featurize_concepts, reference_tokens

        cluster = featurize_concepts(cluster)
        user = user_from_references(cluster)
        references = reference_tokens(cluster)
    else:
        generator = GeneratorConfig(unit=config.unit)
        cluster, user, references = make_synthetic_cluster(generator, seed=seed)

    result = run_simulated_session(cluster, user, references, config, seed=seed)
    out_dir = Path(args.out)
    _write(out_dir / "final_summary.json", canonical_json(result.final_json))
    _write(out_dir / "result.json", canonical_json(result.to_json()))
    if result.learning_curve:
        analyses.write_csv(result.learning_curve, out_dir / "learning_curve.csv",
                           config=config)
        plotting.plot_learning_curve(result.learning_curve,
                                     out_dir / "learning_curve.png")
    print(f"final summary: {result.final_json['text']!r}")
    print(f"rouge1={result.rouge1:.4f} rouge2={result.rouge2:.4f} "
          f"value={result.ground_truth_value:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    config = _effective_config(args, base=analyses.ANALYSIS_RUN)
    seeds = list(range(config.seed, config.seed + args.n_seeds))
    rows = analyses.run_analysis(args.analysis, seeds, config=config)
    out_dir = Path(args.out)
    csv_path = out_dir / f"{args.analysis}.csv"
    analyses.write_csv(rows, csv_path, config=config)
    figure_path = out_dir / f"{args.analysis}.png"
    plotting.ANALYSIS_PLOTS[args.analysis](rows, figure_path)
    print(f"wrote {csv_path} and {figure_path}")
    return 0


def cmd_ablate(args) -> int:
    config = _effective_config(args, base=analyses.ABLATION_RUN)
    seeds = list(range(config.seed, config.seed + args.n_seeds))
    variants = analyses.ABLATION_GRID if args.variant == "all" else (args.variant,)
    rows = analyses.run_ablation(variants=variants, seeds=tuple(seeds), config=config)
    out_dir = Path(args.out)
    csv_path = out_dir / "ablation.csv"
    analyses.write_csv(rows, csv_path, config=config)
    if len(rows) > 1:
        plotting.plot_ablation_bars(rows, out_dir / "ablation.png")
    for row in rows:
        print(f"{row['variant']}: rouge1={row['mean_rouge1']:.4f} "
              f"value={row['mean_value']:.4f}")
    return 0


def cmd_serve(args) -> int:
    from .service import run_server

    run_server(args.data_dir, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefsum",
        description="Interactive preference-driven multi-document summarization",
    )
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--config", type=str, default=None, help="JSON config file")
    parser.add_argument("--out", type=str, default="out", help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="normalize a cluster to JSON")
    p_ingest.add_argument("--cluster", required=True, help="cluster directory or JSON file")
    p_ingest.add_argument("--unit", choices=("unigram", "bigram", "sentence"))
    p_ingest.set_defaults(func=cmd_ingest)

    p_sim = sub.add_parser("simulate", help="run one simulated session")
    p_sim.add_argument("--cluster", help="cluster path (omit for a synthetic cluster)")
    p_sim.add_argument("--unit", choices=("unigram", "bigram", "sentence"))
    p_sim.add_argument("--budget", type=int)
    p_sim.add_argument("--summary-length", dest="summary_length", type=int)
    p_sim.add_argument("--strategy")
    p_sim.add_argument("--reward-mode", dest="reward_mode", choices=("point", "pairwise"))
    p_sim.add_argument("--reward-budget", dest="reward_budget", type=int)
    p_sim.add_argument("--pool-size", dest="pool_size", type=int)
    p_sim.add_argument("--redundancy-cap", dest="redundancy_cap", type=float)
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser("evaluate", help="run an analysis harness")
    p_eval.add_argument("--analysis", required=True,
                        choices=sorted(analyses.ANALYSES))
    p_eval.add_argument("--n-seeds", dest="n_seeds", type=int, default=10)
    p_eval.set_defaults(func=cmd_evaluate)

    p_abl = sub.add_parser("ablate", help="run pipeline ablations")
    p_abl.add_argument("--variant", default="all",
                       choices=("all",) + analyses.ABLATION_GRID)
    p_abl.add_argument("--n-seeds", dest="n_seeds", type=int, default=10)
    p_abl.set_defaults(func=cmd_ablate)

    p_serve = sub.add_parser("serve", help="run the HTTP session service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--data-dir", dest="data_dir", default="sessions")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
