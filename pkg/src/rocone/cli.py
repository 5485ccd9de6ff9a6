"""Command-line interface: train, eval, generate-synthetic, grad-check,
ablate.

Hyperparameter defaults come from the built-in dataset profiles and can be
overridden by a flat key-value config file (``--config``) and then by
individual flags (flags win).  All randomness is seeded from ``--seed``.
Exit codes: 0 success, 1 runtime failure (diagnostic on stderr), 2 usage
error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import evaluation, training
from .diffcore import grad_check, load_checkpoint
from .errors import ConfigError, RoconeError
from .operators import VARIANTS, init_param_store
from .querylang import QUERY_TYPES, TRAIN_TYPES
from .training import TrainConfig

PROFILES = {
    "fb15k237": {"d": 1600, "gamma": 30.0, "lr": 5e-5, "lam": 0.1,
                 "batch": 128, "negatives": 512},
    "nell995": {"d": 800, "gamma": 20.0, "lr": 1e-4, "lam": 0.02,
                "batch": 128, "negatives": 512},
}

CONFIG_VERSION = 1

_CONFIG_KEYS = {
    "d": int, "batch": int, "negatives": int, "epochs": int, "seed": int,
    "checkpoint_every": int,
    "gamma": float, "lr": float, "lam": float,
    "variant": str, "profile": str,
}


def parse_config_file(path) -> dict:
    """Flat ``key = value`` config text with a ``#version`` first line."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != f"#version {CONFIG_VERSION}":
        raise ConfigError(
            f"config file must start with '#version {CONFIG_VERSION}'"
        )
    values: dict = {}
    for lineno, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {raw!r}") from exc
    return values


def _resolve_train_config(args) -> TrainConfig:
    """Profile defaults, then config file, then explicit flags."""
    merged: dict = {}
    file_values = parse_config_file(args.config) if args.config else {}
    profile = getattr(args, "profile", None) or file_values.get("profile")
    if profile:
        if profile not in PROFILES:
            raise ConfigError(
                f"unknown profile {profile!r}, expected one of {sorted(PROFILES)}"
            )
        merged.update(PROFILES[profile])
    merged.update({k: v for k, v in file_values.items() if k != "profile"})
    for key in ("d", "batch", "negatives", "gamma", "lr", "lam", "epochs",
                "seed", "variant", "checkpoint_every"):
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return TrainConfig(**merged)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("ROCONE_OUT")
    if not out:
        raise ConfigError("no output directory: pass --out or set ROCONE_OUT")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", choices=sorted(PROFILES), default=None)
    p.add_argument("--config", default=None, help="flat key-value config file")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--negatives", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--checkpoint-every", dest="checkpoint_every",
                   type=int, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rocone",
        description="Cone-rotation query embeddings over knowledge graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a dataset directory")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--seed", type=int, default=None)
    _add_hyper_flags(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--split", choices=("valid", "test"), default="test")
    p_eval.add_argument("--lambda", dest="lam", type=float, default=None)

    p_gen = sub.add_parser("generate-synthetic",
                           help="write a synthetic pattern dataset")
    p_gen.add_argument("--pattern", required=True,
                       choices=data_mod.PatternSpec.PATTERNS)
    p_gen.add_argument("--entities", type=int, required=True)
    p_gen.add_argument("--pairs", type=int, default=0)
    p_gen.add_argument("--holdout", type=float, default=0.2)
    p_gen.add_argument("--relations", type=int, default=1)
    p_gen.add_argument("--triples", type=int, default=0)
    p_gen.add_argument("--ground", default=None,
                       help="comma-separated query types to ground for training")
    p_gen.add_argument("--n-queries", dest="n_queries", type=int, default=100)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", default=None)

    p_gc = sub.add_parser("grad-check",
                          help="finite-difference check of the loss gradients")
    p_gc.add_argument("--d", type=int, default=4)
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.add_argument("--eps", type=float, default=1e-5)
    p_gc.add_argument("--samples", type=int, default=6,
                      help="sampled coordinates per parameter group")
    p_gc.add_argument("--variant", choices=VARIANTS, default="base")

    p_ab = sub.add_parser("ablate",
                          help="train and evaluate projection variants side by side")
    p_ab.add_argument("--data", required=True)
    p_ab.add_argument("--out", default=None)
    p_ab.add_argument("--variants", default="base,trunc,se,neural")
    p_ab.add_argument("--seeds", default="0")
    p_ab.add_argument("--split", choices=("valid", "test"), default="test")
    _add_hyper_flags(p_ab)

    return parser


def _cmd_train(args) -> int:
    cfg = _resolve_train_config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    out = _out_dir(args)
    graph, queries = data_mod.load_dataset_dir(args.data)
    if "train" not in queries:
        raise ConfigError(f"{args.data} has no train-queries.txt")
    rng = np.random.default_rng(cfg.seed)
    store = init_param_store(graph.n_entities, graph.n_relations, cfg.d, rng,
                             variant=cfg.variant)
    training.train(cfg, queries["train"], graph, store, out_dir=out)
    print(f"trained {cfg.epochs} epochs; checkpoint at {out / 'checkpoint.npz'}")
    return 0


def _cmd_eval(args) -> int:
    out = _out_dir(args)
    graph, queries = data_mod.load_dataset_dir(args.data)
    if args.split not in queries:
        raise ConfigError(f"{args.data} has no {args.split}-queries.txt")
    params, config = load_checkpoint(args.checkpoint)
    d = params["entity_axis"].shape[1]
    variant = config.get("variant", "base")
    store = init_param_store(graph.n_entities, graph.n_relations, d,
                             np.random.default_rng(0), variant=variant)
    store.load_data(params)
    lam = args.lam if args.lam is not None else float(config.get("lam", 0.02))
    report = evaluation.evaluate(store, queries[args.split], lam, variant=variant)
    (out / "report.tsv").write_text(report.to_tsv())
    (out / "report.json").write_text(report.to_json())
    sys.stdout.write(report.to_tsv())
    return 0


def _cmd_generate(args) -> int:
    out = _out_dir(args)
    spec = data_mod.PatternSpec(
        pattern=args.pattern,
        n_entities=args.entities,
        n_pairs=args.pairs or max(args.entities, 10),
        holdout=args.holdout,
        n_relations=args.relations,
        n_triples=args.triples,
    )
    graph, holdout_queries = data_mod.generate_synthetic(spec, args.seed)
    splits = {"test": holdout_queries}
    if args.ground:
        types = [t.strip() for t in args.ground.split(",") if t.strip()]
        for t in types:
            if t not in QUERY_TYPES:
                raise ConfigError(f"unknown query type {t!r} in --ground")
        splits["train"] = data_mod.ground_queries(
            graph, types, args.n_queries, args.seed + 1, eval_split=None
        )
    else:
        splits["train"] = data_mod.queries_from_edges(graph, "train")
    data_mod.save_dataset_dir(out, graph, splits)
    print(
        f"wrote {args.pattern} dataset to {out}: "
        f"{len(graph.splits.get('train', ()))} train / "
        f"{len(graph.splits.get('test', ()))} held-out triples, "
        f"{len(splits['train'])} train queries, {len(holdout_queries)} eval queries"
    )
    return 0


def _cmd_grad_check(args) -> int:
    from .data import PatternSpec, generate_synthetic, ground_queries
    from .training import loss_batch, negative_sample
    from .querylang import execute_batch

    rng = np.random.default_rng(args.seed)
    spec = PatternSpec("random", n_entities=12, n_pairs=0, holdout=0.25,
                       n_relations=3, n_triples=60)
    graph, _ = generate_synthetic(spec, args.seed)
    dataset = ground_queries(graph, TRAIN_TYPES + ("pi", "ip", "2u", "up"),
                             2, args.seed, eval_split="test",
                             max_attempts_per_query=300)
    store = init_param_store(graph.n_entities, graph.n_relations, args.d, rng,
                             variant=args.variant)
    worst = 0.0
    worst_tag = None
    for tag in QUERY_TYPES:
        queries = list(dataset.by_type.get(tag, ()))[:2]
        if not queries:
            continue
        anchors = np.asarray([q.anchors for q in queries])
        relations = np.asarray([q.relations for q in queries])
        positives = np.asarray([sorted(q.all_answers)[0] for q in queries])
        negatives = np.stack(
            [negative_sample(q, 2, rng, graph.n_entities) for q in queries]
        )

        def f():
            branches = execute_batch(tag, anchors, relations, store,
                                     variant=args.variant, mode="train")
            return loss_batch(branches, positives, negatives, store,
                              gamma=2.0, lam=0.1)

        err = grad_check(f, store, eps=args.eps,
                         samples_per_param=args.samples,
                         rng=np.random.default_rng(args.seed + 1))
        if err > worst:
            worst, worst_tag = err, tag
    print(f"max relative error {worst:.3e} (worst structure: {worst_tag})")
    return 0 if worst <= 1e-4 else 1


def _cmd_ablate(args) -> int:
    out = _out_dir(args)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}, expected one of {VARIANTS}")
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    graph, queries = data_mod.load_dataset_dir(args.data)
    if "train" not in queries or args.split not in queries:
        raise ConfigError(
            f"{args.data} needs train-queries.txt and {args.split}-queries.txt"
        )
    base_cfg = _resolve_train_config(args)

    tags_seen: list[str] = []
    table: dict[str, dict[str, tuple[float, float]]] = {}
    for variant in variants:
        reports = []
        for seed in seeds:
            cfg = TrainConfig(**{**base_cfg.as_dict(), "variant": variant,
                                 "seed": seed})
            rng = np.random.default_rng(seed)
            store = init_param_store(graph.n_entities, graph.n_relations,
                                     cfg.d, rng, variant=variant)
            training.train(cfg, queries["train"], graph, store)
            reports.append(
                evaluation.evaluate(store, queries[args.split], cfg.lam,
                                    variant=variant)
            )
        agg = evaluation.aggregate_reports(reports)
        table[variant] = {t: (m, s) for t, (m, s, _) in agg.items()}
        for t in agg:
            if t not in tags_seen:
                tags_seen.append(t)

    tags = [t for t in QUERY_TYPES if t in tags_seen]
    lines = ["variant\t" + "\t".join(tags)]
    for variant in variants:
        cells = [variant]
        for t in tags:
            if t in table[variant]:
                m, s = table[variant][t]
                cells.append(f"{m:.4f}+-{s:.4f}" if len(seeds) > 1 else f"{m:.4f}")
            else:
                cells.append("-")
        lines.append("\t".join(cells))
    text = "\n".join(lines) + "\n"
    (out / "ablation.tsv").write_text(text)
    sys.stdout.write(text)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "generate-synthetic": _cmd_generate,
    "grad-check": _cmd_grad_check,
    "ablate": _cmd_ablate,
}


def run(argv=None) -> int:
    """Parse arguments and execute one command; returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except RoconeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
