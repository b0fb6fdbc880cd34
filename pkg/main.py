"""
Main Application Entry Point
Tree Inference Lab - Command Line Interface

Subcommands:
  generate     Sample a tree, draw an I(h0, h1) instance, write the dataset
  reconstruct  Run the deep pipeline on a dataset file
  classify     Run one baseline on a dataset file
  bench        Multi-trial separation experiment from a JSON config
  count-tv     Census total-variation decay for two fixed roots

Exit codes: 0 success, 2 when any trial or reconstruction failed, 1 on usage
or input errors.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from src.baselines import BaselineKind, classify_dataset
from src.config import get_settings
from src.core import Model, ModelParams, PermutationRegime, build_tree, default_rewirings
from src.dataset_io import read_dataset, read_rewiring, write_dataset, write_ground_truth
from src.errors import TreeLabError
from src.experiments import ExperimentConfig, run_count_tv_experiment, run_separation_experiment
from src.reconstruct import DeepLabeler
from src.samplers import InstanceSpec, generate_instance, make_dataset, simulate

logger = logging.getLogger("main")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


def configure_logging() -> None:
    """Stream handler plus an optional file handler (TREELAB_LOG_FILE)"""
    settings = get_settings()
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
    )


class UsageErrorParser(argparse.ArgumentParser):
    """argparse parser that exits with code 1 on usage errors"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_edge_permutations(path: Optional[str]):
    if path is None:
        return None
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            rows.append(tuple(int(x) for x in line.split(",")))
    return tuple(rows)


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_generate(args) -> int:
    tree = build_tree(args.d, args.h)
    model = Model(args.model)
    rewiring = default_rewirings(args.k, args.h, args.seed) if model == Model.FIM else None
    params = ModelParams(variant=model, q=args.q, k=args.k, lam=args.lam,
                         regime=PermutationRegime(args.regime), rewiring=rewiring,
                         edge_permutations=_read_edge_permutations(args.edges), seed=args.seed)

    truth = simulate(tree, params, "uniform", n_jobs=get_settings().n_jobs)
    labels, labeled_set = generate_instance(tree, InstanceSpec(args.h0, args.h1), args.seed)
    truth = truth.with_instance(labels, labeled_set)
    dataset = make_dataset(truth)

    write_dataset(dataset, args.out)
    if args.truth:
        write_ground_truth(truth, args.truth)
    logger.info(f"Generated {model.value} dataset: {len(dataset.labeled_nodes)} labeled, "
                f"{len(dataset.unlabeled_nodes)} unlabeled leaves")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    dataset = read_dataset(args.input)
    rewiring = None
    if dataset.model == Model.FIM:
        if not args.truth:
            logger.error("FIM reconstruction needs --truth (ground-truth file with the rewiring)")
            return EXIT_USAGE
        rewiring = read_rewiring(args.truth)
    # Edge permutations are unknown to inference, so the regime is only recorded
    params = ModelParams(variant=dataset.model, q=dataset.q, k=dataset.k, lam=args.lam, rewiring=rewiring)

    result = DeepLabeler(params, args.r).run(dataset)
    payload = result.to_dict()
    payload["regime"] = args.regime
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Reconstruction result written to {out}")

    if not result.success:
        logger.error(f"Reconstruction failed: {result.diagnostics.failure_reason}")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_classify(args) -> int:
    dataset = read_dataset(args.input)
    kind = BaselineKind(args.baseline)
    depth = args.depth if args.depth is not None else 2
    labels = classify_dataset(dataset, kind, lam=args.lam, depth=depth, s=args.s)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"leaf": [str(node) for node in dataset.unlabeled_nodes], "label": labels})
    frame.to_csv(out, index=False)
    logger.info(f"{kind.value}: labeled {len(frame)} leaves, written to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    report = run_separation_experiment(config, get_settings().n_jobs)
    report.write(args.out_dir)

    print("\n" + "=" * 60)
    print("SEPARATION EXPERIMENT")
    print("=" * 60)
    print(report.rows.to_string(index=False))

    if report.any_failures:
        logger.warning("At least one deep reconstruction failed; see trials.csv")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_count_tv(args) -> int:
    h_list = [int(h) for h in args.h_list.split(",") if h.strip()]
    if not h_list:
        logger.error("--h-list needs at least one height")
        return EXIT_USAGE
    report = run_count_tv_experiment(args.d, args.lam, args.q, args.k, h_list, args.samples, args.seed)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.rows.to_csv(out, index=False, float_format="%.6f")
    nested = out.with_suffix(".json") if out.suffix != ".json" else out.with_name(f"{out.stem}_report.json")
    nested.write_text(report.to_json(), encoding="utf-8")
    print(report.rows.to_string(index=False))
    logger.info(f"Census TV table written to {out} and {nested}")
    return EXIT_OK


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = UsageErrorParser(prog="main.py", description="Tree Inference Lab")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageErrorParser)

    gen = sub.add_parser("generate", help="sample a labeled dataset")
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--h", type=int, required=True)
    gen.add_argument("--q", type=int, required=True)
    gen.add_argument("--k", type=int, required=True)
    gen.add_argument("--lambda", dest="lam", type=float, required=True)
    gen.add_argument("--model", choices=[m.value for m in Model], default=Model.IIDM.value)
    gen.add_argument("--regime", choices=[r.value for r in PermutationRegime], default=PermutationRegime.RANDOM.value)
    gen.add_argument("--edges", help="adversarial regime: one comma-separated permutation per edge")
    gen.add_argument("--h0", type=int, required=True)
    gen.add_argument("--h1", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--truth")
    gen.set_defaults(func=cmd_generate)

    rec = sub.add_parser("reconstruct", help="deep reconstruction and labeling")
    rec.add_argument("--in", dest="input", required=True)
    rec.add_argument("--r", type=int, default=None)
    rec.add_argument("--lambda", dest="lam", type=float, required=True)
    rec.add_argument("--regime", choices=[r.value for r in PermutationRegime], default=PermutationRegime.RANDOM.value)
    rec.add_argument("--truth")
    rec.add_argument("--out", required=True)
    rec.set_defaults(func=cmd_reconstruct)

    cls = sub.add_parser("classify", help="run a baseline classifier")
    cls.add_argument("--in", dest="input", required=True)
    cls.add_argument("--baseline", choices=[b.value for b in BaselineKind], required=True)
    cls.add_argument("--lambda", dest="lam", type=float, default=None)
    cls.add_argument("--depth", type=int, default=None)
    cls.add_argument("--s", type=int, default=2)
    cls.add_argument("--out", required=True)
    cls.set_defaults(func=cmd_classify)

    bench = sub.add_parser("bench", help="multi-trial separation experiment")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out-dir", dest="out_dir", required=True)
    bench.set_defaults(func=cmd_bench)

    tv = sub.add_parser("count-tv", help="census total-variation decay")
    tv.add_argument("--d", type=int, required=True)
    tv.add_argument("--lambda", dest="lam", type=float, required=True)
    tv.add_argument("--q", type=int, required=True)
    tv.add_argument("--k", type=int, required=True)
    tv.add_argument("--h-list", dest="h_list", required=True, help="comma-separated heights, e.g. 2,4,6")
    tv.add_argument("--samples", type=int, default=10_000)
    tv.add_argument("--seed", type=int, default=0)
    tv.add_argument("--out", required=True)
    tv.set_defaults(func=cmd_count_tv)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        return args.func(args)
    except (TreeLabError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    try:
        exit_code = main()
        sys.exit(exit_code if exit_code is not None else 0)
    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        sys.exit(0)
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"\n Error: {e}\n")
        sys.exit(1)
