"""Command-line driver: ``relperceiver <verb> [options]``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import MISSING, fields

from .config import RunConfig, coerce, load_config

log = logging.getLogger("relperceiver")

ARMS = ("full", "no_temporal_sampler", "full_self_attention")


def _add_run_flags(p):
    p.add_argument("--config", help="flat key = value file; flags override it")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        typ = str(f.type)
        if "bool" in typ:
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            default = f.default if f.default is not MISSING else None
            p.add_argument(flag, dest=f.name, default=None, help=f"default: {default}")


def _run_config(args, **extra):
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)
                 if getattr(args, f.name, None) is not None}
    overrides.update(extra)
    if args.config:
        return load_config(args.config, **overrides)
    return RunConfig(**coerce(overrides))


def _progress(entry):
    log.info("epoch %d train_loss %s val %s", entry["epoch"],
             {k: round(v, 4) for k, v in entry["train_loss"].items()},
             {k: round(v, 4) for k, v in entry["val"].items()})


def cmd_generate(args):
    from .synthetic import SyntheticSpec, generate_dataset
    kw = {"signal": args.signal, "noise": args.noise}
    if args.tasks:
        kw["tasks"] = tuple(t.strip() for t in args.tasks.split(",") if t.strip())
    for name in ("n_users", "n_items", "n_signals", "examples_per_task", "events_per_user",
                 "horizon_days"):
        v = getattr(args, name)
        if v is not None:
            kw[name] = v
    out = generate_dataset(SyntheticSpec(**kw), args.seed, args.out)
    print(out)
    return 0


def _train_one(cfg):
    from .report import write_timing
    from .train import train
    t0 = time.perf_counter()
    result = train(cfg, progress=_progress)
    write_timing(result.checkpoint, time.perf_counter() - t0)
    for tid, v in sorted(result.test.items()):
        print(f"{result.run_id}\t{tid}\ttest\t{v:.6f}")
    print(f"checkpoint: {result.checkpoint}")
    print(f"metrics: {result.metrics_csv}")
    return result


def cmd_train(args):
    _train_one(_run_config(args))
    return 0


def cmd_evaluate(args):
    from .train import evaluate_checkpoint
    scores = evaluate_checkpoint(args.checkpoint, args.split, data=args.data)
    for tid, v in sorted(scores.items()):
        print(f"{tid}\t{args.split}\t{v:.6f}")
    return 0


def cmd_ablate(args):
    from .report import run_report
    base = _run_config(args)
    arms = [a.strip() for a in args.arms.split(",") if a.strip()]
    bad = set(arms) - set(ARMS)
    if bad:
        raise SystemExit(f"unknown arms {sorted(bad)}; choose from {ARMS}")
    seeds = [base.seed + i for i in range(args.seeds)]
    ckpts = []
    for arm in arms:
        for seed in seeds:
            cfg = base.replace(seed=seed, run_id=f"{arm}-s{seed}",
                               no_temporal_sampler=arm == "no_temporal_sampler",
                               full_self_attention=arm == "full_self_attention")
            ckpts.append(_train_one(cfg).checkpoint)
    text, _ = run_report(ckpts, out_csv=os.path.join(base.out, "ablation.csv"))
    print(text)
    return 0


def cmd_bench(args):
    from .bench import benchmark_kernels, complexity_csv, rows_to_csv
    sizes = tuple(int(s) for s in args.sizes.split(","))
    text, exps = complexity_csv(sizes=sizes, num_latents=args.num_latents, layers=args.layers,
                                dim=args.dim, repeats=args.repeats, seed=args.seed)
    _emit(text, args.csv)
    print("# fitted exponent: " + ", ".join(f"{k} {v:.3f}" for k, v in exps.items()))
    if args.kernels:
        rows = benchmark_kernels(num_queries=args.queries, seed=args.seed)
        print(rows_to_csv(rows, ("backend", "queries", "min_s", "mean_s", "speedup",
                                 "matches_python")), end="")
    return 0


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")


def cmd_report(args):
    from .report import run_report
    text, _ = run_report(args.checkpoints, out_csv=args.csv, reference_arm=args.reference)
    print(text, end="")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="relperceiver", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="write a synthetic relational dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--signal", default="structural",
                   choices=("structural", "temporal_nonlocal", "mixed"))
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--tasks", default="")
    g.add_argument("--n-users", dest="n_users", type=int)
    g.add_argument("--n-items", dest="n_items", type=int)
    g.add_argument("--n-signals", dest="n_signals", type=int)
    g.add_argument("--events-per-user", dest="events_per_user", type=float)
    g.add_argument("--horizon-days", dest="horizon_days", type=float)
    g.add_argument("--examples-per-task", dest="examples_per_task", type=int)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one run")
    _add_run_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint on a split")
    e.add_argument("checkpoint")
    e.add_argument("--split", default="test", choices=("train", "val", "test"))
    e.add_argument("--data", help="dataset directory, if moved since training")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("ablate", help="train several arms over seeds and compare")
    _add_run_flags(a)
    a.add_argument("--arms", default="full,no_temporal_sampler")
    a.add_argument("--seeds", type=int, default=3, help="number of consecutive seeds")
    a.set_defaults(func=cmd_ablate)

    b = sub.add_parser("bench", help="encoder complexity and sampler kernel timings")
    b.add_argument("--sizes", default="128,256,512,1024")
    b.add_argument("--num-latents", dest="num_latents", type=int, default=16)
    b.add_argument("--layers", type=int, default=2)
    b.add_argument("--dim", type=int, default=64)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv")
    b.add_argument("--kernels", action="store_true", help="also time compiled vs Python sampler")
    b.add_argument("--queries", type=int, default=2000)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="comparison table over checkpoints")
    r.add_argument("checkpoints", nargs="+")
    r.add_argument("--csv")
    r.add_argument("--reference", default="full")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
