"""Command-line entry point: ``lightcake {stats,train,eval,gradcheck,report}``."""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import dataclass

from .aggregator import Aggregator, Variant
from .checkpoint import Checkpoint, CheckpointError, check_compatible, load_checkpoint, save_checkpoint
from .config import RunConfig, parse_pairs
from .context import build_context_index
from .dataset import TripleFormatError, compute_stats, load_dataset
from .evaluator import metrics_from_ranks, rank_split
from .gradcheck import TOLERANCE, run_gradcheck
from .model import ModelKind
from .trainer import fit

CHECKPOINT_NAME = "checkpoint.lcke"
LOG_NAME = "train_log.jsonl"
CONFIG_NAME = "config.txt"


@dataclass(frozen=True)
class EfficiencyReport:
    model: str
    dim: int
    num_entities: int
    num_relations_augmented: int
    num_iterations: int
    variant: str
    trainable_parameter_count: int
    aggregation_work: int

    def as_dict(self):
        return dict(self.__dict__)


def efficiency_report(dataset, kind, dim, num_iterations, variant=Variant.BOTH, context=None):
    """Parameter count and context entries touched per forward pass.

    Aggregation adds no parameters, so the count is ``(|E| + 2|R|) * d`` for
    every ``num_iterations``.
    """
    variant = Variant.parse(variant)
    if context is None:
        context = build_context_index(dataset)
    per_step = 0
    if variant.uses_entity_context:
        per_step += len(context.entity)
    if variant.uses_relation_context:
        per_step += len(context.relation)
    L = 0 if variant == Variant.NONE else num_iterations
    return EfficiencyReport(
        model=ModelKind.parse(kind).label, dim=dim, num_entities=dataset.num_entities,
        num_relations_augmented=dataset.num_relations_augmented, num_iterations=num_iterations,
        variant=variant.label,
        trainable_parameter_count=(dataset.num_entities + dataset.num_relations_augmented) * dim,
        aggregation_work=per_step * L)


# flag dest -> config key
_FLAG_KEYS = {
    "dataset_dir": "dataset_dir", "model": "model", "context": "variant", "dim": "dim",
    "lr": "learning_rate", "l2": "l2_coeff", "batch_size": "batch_size",
    "iterations": "num_iterations", "epochs": "max_epochs", "patience": "patience",
    "seed": "seed", "threads": "threads", "cap": "context_cap", "cap_seed": "cap_seed",
    "mask_target_edge": "mask_target_edge", "out": "output_dir",
}


def resolve_config(args):
    """Defaults, then ``--config`` file, then explicit flags."""
    values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            values.update(parse_pairs(fh.read()))
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[key] = v
    return RunConfig.from_mapping(values)


def _add_run_flags(p):
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--dataset-dir")
    p.add_argument("--model", choices=["transe", "distmult"])
    p.add_argument("--context", choices=["both", "ent", "rel", "none"])
    p.add_argument("--dim", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--cap-seed", type=int)
    p.add_argument("--mask-target-edge", action="store_const", const=True, default=None)
    p.add_argument("--out")


def _emit(record, stream=None):
    print(json.dumps(record), file=stream or sys.stdout, flush=True)


def _limit_threads(n):
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def _require_dataset_dir(cfg):
    if not cfg.dataset_dir:
        raise ValueError("--dataset-dir is required")
    if not os.path.isdir(cfg.dataset_dir):
        raise FileNotFoundError(f"dataset directory not found: {cfg.dataset_dir}")


def cmd_stats(args):
    ds = load_dataset(args.dataset_dir)
    stats = compute_stats(ds)
    if args.json:
        print(stats.to_json())
    else:
        print(stats.format())
    if args.dump_contexts:
        ctx = build_context_index(ds, args.cap)
        with open(args.dump_contexts, "w", encoding="utf-8") as fh:
            for h in range(ctx.entity.num_centers):
                fh.write(json.dumps({"entity": h, "context": ctx.entity.leaves(h)}) + "\n")
            for r in range(ctx.relation.num_centers):
                fh.write(json.dumps({"relation": r, "context": ctx.relation.leaves(r)}) + "\n")
    return 0


def cmd_train(args):
    cfg = resolve_config(args)
    _require_dataset_dir(cfg)
    tc = cfg.train
    ds = load_dataset(cfg.dataset_dir)
    os.makedirs(cfg.output_dir, exist_ok=True)
    cfg.save(os.path.join(cfg.output_dir, CONFIG_NAME))
    ckpt_path = os.path.join(cfg.output_dir, CHECKPOINT_NAME)

    def on_improve(epoch, tables):
        save_checkpoint(ckpt_path, Checkpoint(tc.model, tables, tc.num_iterations, tc.variant,
                                              ds.entity_vocab.symbols, ds.relation_vocab.symbols,
                                              tc.context_cap, tc.cap_seed))

    with _limit_threads(cfg.threads), open(os.path.join(cfg.output_dir, LOG_NAME), "w") as log_fh:
        def on_epoch(record):
            log_fh.write(json.dumps(record) + "\n")
            log_fh.flush()
            _emit(record)

        ctx = build_context_index(ds, tc.context_cap, tc.cap_seed)
        best, log = fit(ds, tc, context=ctx, on_epoch=on_epoch, on_improve=on_improve)
        if not log:
            on_improve(0, best)
        if len(ds.test):
            final = Aggregator(ctx, tc.model, tc.aggregation).run(best).final
            report = metrics_from_ranks(rank_split(ds.test, final, tc.model, ds.num_relations))
            _emit({"split": "test", **report.as_dict()})
    return 0


def cmd_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.dataset_dir)
    check_compatible(ckpt, ds)
    ctx = build_context_index(ds, ckpt.context_cap, ckpt.cap_seed)
    with _limit_threads(args.threads):
        state = Aggregator(ctx, ckpt.kind, ckpt.aggregation).run(ckpt.tables)
        split = ds.split(args.split)
        ranks = rank_split(split, state.final, ckpt.kind, ds.num_relations)
    report = metrics_from_ranks(ranks)
    if args.json:
        _emit({"split": args.split, **report.as_dict()})
    else:
        print(report.format())
    if args.dump_ranks:
        with open(args.dump_ranks, "w", encoding="utf-8") as fh:
            for (h, r, t), rank in zip(split.tolist(), ranks.tolist()):
                fh.write(json.dumps({"head": h, "relation": r, "tail": t, "rank": rank}) + "\n")
    if args.dump_attention:
        with open(args.dump_attention, "w", encoding="utf-8") as fh:
            for l in range(state.num_iterations):
                for c in range(ctx.entity.num_centers):
                    w = state.alpha(l, c)
                    if w is not None and len(w):
                        fh.write(json.dumps({"iteration": l, "entity": c, "alpha": w.tolist()}) + "\n")
                for c in range(ctx.relation.num_centers):
                    w = state.beta(l, c)
                    if w is not None and len(w):
                        fh.write(json.dumps({"iteration": l, "relation": c, "beta": w.tolist()}) + "\n")
    return 0


def cmd_gradcheck(args):
    res = run_gradcheck(args.model, args.iterations, args.seed,
                        mask_target_edge=bool(args.mask_target_edge), corrupt=args.corrupt_gradient)
    _emit({"model": res.kind.label, "iterations": res.num_iterations, "seed": res.seed,
           "max_rel_error": res.max_rel_error, "tolerance": TOLERANCE, "passed": res.passed})
    return 0 if res.passed else 1


def cmd_report(args):
    cfg = resolve_config(args)
    _require_dataset_dir(cfg)
    tc = cfg.train
    ds = load_dataset(cfg.dataset_dir)
    ctx = build_context_index(ds, tc.context_cap, tc.cap_seed)
    rep = efficiency_report(ds, tc.model, tc.dim, tc.num_iterations, tc.variant, ctx)
    _emit(rep.as_dict())
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="lightcake", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--dataset-dir", required=True)
    p.add_argument("--json", action="store_true", help="one JSON record instead of a table")
    p.add_argument("--cap", type=int)
    p.add_argument("--dump-contexts", metavar="PATH", help="write both star graphs as JSON lines")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model with early stopping")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset-dir", required=True)
    p.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p.add_argument("--threads", type=int)
    p.add_argument("--json", action="store_true")
    p.add_argument("--dump-ranks", metavar="PATH")
    p.add_argument("--dump-attention", metavar="PATH")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradient")
    p.add_argument("--model", choices=["transe", "distmult"], default="distmult")
    p.add_argument("--iterations", type=int, default=2)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--mask-target-edge", action="store_true")
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="parameter count and aggregation cost")
    _add_run_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, TripleFormatError, CheckpointError, ValueError) as exc:
        print(f"lightcake {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
