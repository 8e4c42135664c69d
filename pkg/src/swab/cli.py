"""Command-line surface: validate, rank, bench, synth, ot.

Exit codes: 0 success, 1 validation failure, 2 asset missing, 3 solver
failure. All randomness is seed-addressed via flags; nothing reads the clock.
The resolved RunConfig is echoed into every JSON output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, bundle_io, capability, synth, transport
from .config import RunConfig, parse_seeds
from .core import AssetMissingError, SolverError, SwabError, ValidationError, validate_bundle

logger = logging.getLogger("swab.cli")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_ASSET_MISSING = 2
EXIT_SOLVER = 3


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="JSON RunConfig file; flags override")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--lambda-filter", type=float, default=None, dest="lambda_filter")
    p.add_argument("--mass-fraction", type=float, default=None, dest="mass_fraction")
    p.add_argument("--no-exponentiate-cost", action="store_true")
    p.add_argument("--noise-sigma", type=float, default=None, dest="noise_sigma")
    p.add_argument("--seeds", type=str, default=None, help='e.g. "1-10" or "1,2,5"')
    p.add_argument("--ot-method", choices=("exact", "sinkhorn"), default=None, dest="ot_method")
    p.add_argument("--branch", choices=("swab", "swab-m", "swab-c", "avg-rank", "inb", "modelgpt"),
                   default=None)
    p.add_argument("--ridge-lambda", type=float, default=None, dest="ridge_lambda")
    p.add_argument("--gap-level", choices=("class_mean", "dataset_mean"), default=None,
                   dest="gap_level")


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides: dict = {}
    for name in ("alpha", "lambda_filter", "mass_fraction", "noise_sigma",
                 "ot_method", "branch", "ridge_lambda", "gap_level"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "seeds", None) is not None:
        overrides["seeds"] = parse_seeds(args.seeds)
    if getattr(args, "no_exponentiate_cost", False):
        overrides["exponentiate_cost"] = False
    if overrides:
        base = dataclasses.replace(base, **overrides)
    return base


def _echo_config(config: RunConfig) -> None:
    print("config: " + json.dumps(config.to_dict(), sort_keys=True), file=sys.stderr)


def cmd_validate(args) -> int:
    dirs = bundle_io.find_bundle_dirs(args.bundle_dir)
    if not dirs:
        print(f"{args.bundle_dir}: no bundle manifests found")
        return EXIT_VALIDATION
    failures = 0
    for d in dirs:
        try:
            bundle = bundle_io.load_bundle(d)
            zoo = bundle_io.zoo_from_bundles([bundle])
            report = validate_bundle(bundle, zoo)
        except SwabError as exc:
            print(f"{d}: INVALID\n  {exc}")
            failures += 1
            continue
        if report.ok:
            fmt = json.loads((Path(d) / "manifest.json").read_text())["matrix_format"]
            print(f"{d}: ok (format={fmt})")
        else:
            print(f"{d}: INVALID")
            for line in report.violations:
                print(f"  {line}")
            failures += 1
    return EXIT_OK if failures == 0 else EXIT_VALIDATION


def _rank_payload(target, sources, zoo, config: RunConfig) -> dict:
    """Single-target prediction with per-branch components."""
    bench.check_assets([target] + sources, zoo)
    fold_bundles = sorted([target] + sources, key=lambda b: b.dataset_id)
    target_index = [b.dataset_id for b in fold_bundles].index(target.dataset_id)
    if config.branch in ("swab", "swab-m", "modelgpt"):
        fold = bench.run_fold(fold_bundles, zoo, target_index, config)
        methods = fold["per_seed"][config.seeds[0]]
    else:
        # transfer-only branches skip the ranker machinery (and its row minimum)
        methods = _transfer_only_methods(fold_bundles, zoo, target_index, config)
    chosen = methods[config.branch]
    order = np.lexsort((np.arange(chosen.size), chosen.values))
    ranking = [
        {
            "model_id": chosen.model_ids[i],
            "rank": chosen.values[i],
            "components": {name: rv.values[i] for name, rv in sorted(methods.items())},
        }
        for i in order
    ]
    return {
        "config": config.to_dict(),
        "target": target.dataset_id,
        "sources": [b.dataset_id for b in sources],
        "branch": config.branch,
        "ranking": ranking,
    }


def _transfer_only_methods(bundles, zoo, target_index, config) -> dict:
    """The non-learning branches for cmd_rank (no ranker fit required)."""
    target = bundles[target_index]
    sources = [b for i, b in enumerate(bundles) if i != target_index]
    notes: list[str] = []
    pool = bench._pool_sources(sources, zoo, config.gap_level)
    idx = bench._filtered_indices(pool.classname_emb, target.classname_embeddings.data,
                                  config.lambda_filter, notes, target.dataset_id)
    cost = transport.build_cost_matrix(pool.classname_emb[idx],
                                       target.classname_embeddings.data,
                                       exponentiate=config.exponentiate_cost)
    u, v = transport.uniform_marginals(len(idx), target.k)
    if config.partial_for_capability:
        plan = transport.solve_partial_ot(cost, u, v, config.mass_fraction)
    else:
        plan = transport.solve_ot(cost, u, v, method=config.ot_method)
    table = capability.class_rankings(pool.accuracies[:, idx], zoo.model_ids)
    r2_vals = capability.aggregate_target_rank(
        capability.transfer_rankings(table, plan), column_mass=plan.column_mass)
    out = {"swab-c": bench.rank_models(zoo.model_ids, r2_vals, higher_is_better=False)}

    all_table = capability.class_rankings(pool.accuracies, zoo.model_ids)
    uni = capability.uniform_plan(pool.accuracies.shape[1], target.k)
    avg_vals = capability.aggregate_target_rank(capability.transfer_rankings(all_table, uni))
    out["avg-rank"] = bench.rank_models(zoo.model_ids, avg_vals, higher_is_better=False)

    inb_vals = [target.models[mid].imagenet_accuracy for mid in zoo.model_ids]
    if all(v is not None for v in inb_vals):
        out["inb"] = bench.rank_models(zoo.model_ids, np.array(inb_vals, dtype=float), True)
    return out


def cmd_rank(args) -> int:
    config = _resolve_config(args)
    _echo_config(config)
    target = bundle_io.load_bundle(args.target)
    sources = []
    for src in args.sources:
        sources.extend(bundle_io.load_bundle(d) for d in bundle_io.find_bundle_dirs(src))
    sources = [b for b in sources if b.dataset_id != target.dataset_id]
    if not sources:
        raise AssetMissingError("no source bundles (roles: class_accuracies, class_gap_vectors)")
    zoo = bundle_io.zoo_from_bundles([target] + sources)
    payload = _rank_payload(target, sources, zoo, config)

    for row in payload["ranking"]:
        comps = " ".join(f"{k}={v:.3f}" for k, v in row["components"].items())
        print(f"{row['model_id']}  rank={row['rank']:.2f}  [{comps}]")
    if args.json_out:
        Path(args.json_out).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _resolve_config(args)
    _echo_config(config)
    bundles = bundle_io.load_universe(args.universe_dir)
    zoo = bundle_io.zoo_from_bundles(bundles)
    report = bench.run_lodo_benchmark(bundles, zoo, config)
    out = Path(args.out)
    report_path = report.write(out)
    headline = report.payload["overall"].get(config.branch)
    if headline:
        print(
            f"{config.branch}: R5={headline['R5']['mean']:.3f} "
            f"tau={headline['tau']['mean']:.3f} "
            f"R5+tau={headline['r5_plus_tau']['mean']:.3f}"
        )
    print(f"report: {report_path}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        n_datasets=args.n_datasets,
        classes_per_dataset=args.classes_per_dataset,
        n_models=args.n_models,
        dim=args.dim,
        semantic_clusters=args.semantic_clusters,
        gap_scale=args.gap_scale,
        noise=args.noise,
        captions_per_class=args.captions_per_class,
        synonyms_per_class=args.synonyms_per_class,
    )
    universe = synth.generate_synthetic_universe(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for bundle in universe.bundles:
        bundle_io.save_bundle(bundle, out / bundle.dataset_id, fmt=args.format)
    meta = {
        "generator": cfg.to_dict(),
        "seed": args.seed,
        "datasets": [b.dataset_id for b in universe.bundles],
        "models": list(universe.zoo.model_ids),
        "truth_ranking": {ds: universe.truth_ranking[ds].tolist()
                          for ds in universe.truth_ranking},
    }
    (out / "universe.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(universe.bundles)} bundles to {out}")
    return EXIT_OK


def cmd_ot(args) -> int:
    src, _ = bundle_io.read_matrix(args.src)
    tgt, _ = bundle_io.read_matrix(args.tgt)
    cost = transport.build_cost_matrix(src, tgt, exponentiate=not args.no_exponentiate)
    u, v = transport.uniform_marginals(src.shape[0], tgt.shape[0])
    if args.mass_fraction is not None:
        plan = transport.solve_partial_ot(cost, u, v, args.mass_fraction)
    else:
        plan = transport.solve_ot(cost, u, v, method=args.method)
    payload = {
        "objective": plan.objective,
        "solver_tag": plan.solver_tag,
        "mass": plan.total_mass,
        "plan": plan.gamma.tolist(),
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    if args.out:
        transport.save_plan(plan, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swab",
        description="Language-only model-zoo ranking with transport-bridged statistics",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate bundle directories")
    p.add_argument("bundle_dir")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rank", help="rank the zoo for one target bundle")
    p.add_argument("--target", required=True)
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--json-out", default=None, dest="json_out")
    _add_config_flags(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("bench", help="leave-one-dataset-out benchmark over a universe")
    p.add_argument("universe_dir")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic universe")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n-datasets", type=int, default=6, dest="n_datasets")
    p.add_argument("--classes-per-dataset", type=int, default=8, dest="classes_per_dataset")
    p.add_argument("--n-models", type=int, default=10, dest="n_models")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--semantic-clusters", type=int, default=3, dest="semantic_clusters")
    p.add_argument("--gap-scale", type=float, default=1.0, dest="gap_scale")
    p.add_argument("--noise", type=float, default=0.35)
    p.add_argument("--captions-per-class", type=int, default=12, dest="captions_per_class")
    p.add_argument("--synonyms-per-class", type=int, default=4, dest="synonyms_per_class")
    p.add_argument("--format", choices=("swab-mat", "csv"), default="swab-mat")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ot", help="debug: solve transport between two embedding files")
    p.add_argument("src")
    p.add_argument("tgt")
    p.add_argument("--method", choices=("exact", "sinkhorn"), default="exact")
    p.add_argument("--mass-fraction", type=float, default=None, dest="mass_fraction")
    p.add_argument("--no-exponentiate", action="store_true", dest="no_exponentiate")
    p.add_argument("--out", default=None, help="path prefix for plan .mat/.json")
    p.set_defaults(func=cmd_ot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except AssetMissingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSET_MISSING
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValidationError, SwabError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
