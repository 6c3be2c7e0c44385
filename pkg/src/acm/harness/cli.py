"""Command-line entry point: ``acm {run,bench,split,gen-drift,inspect}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from acm.ann import HnswIndex, HnswParams
from acm.errors import AcmError
from acm.harness.bench import bench_index, write_bench_table
from acm.harness.config import ExperimentConfig, apply_overrides
from acm.harness.experiment import run_experiment
from acm.harness.report import emit_report
from acm.learner import LEARNER_MAGIC, AcmLearner
from acm.preprocess import WEIGHTS_MAGIC, ProjectionWeights
from acm.stream import (
    FEATURE_MAGIC,
    DriftConfig,
    SplitSpec,
    chronological_split,
    generate_drift_stream,
    load_feature_file,
    read_feature_header,
    write_feature_file,
)
from acm.ann.hnsw import SNAPSHOT_MAGIC

log = logging.getLogger("acm")


def _run(args) -> int:
    data = yaml.safe_load(Path(args.config).read_text()) if args.config else {}
    data = data or {}
    flags = {
        "method": args.method,
        "seed": args.seed,
        "feature_file": args.feature_file,
        "timing": args.timing,
        "output.out_dir": args.out,
        "output.format": args.format,
        "metrics.h": args.h,
        "metrics.delay": args.delay,
    }
    overrides = [f"{k}={v}" for k, v in flags.items() if v is not None]
    if args.feature_file:
        data.pop("drift", None)
    cfg = ExperimentConfig.from_dict(apply_overrides(data, overrides + (args.set or [])))
    report = run_experiment(cfg)
    summary = report.summary
    out = cfg.output.out_dir
    if out:
        paths = emit_report(report, out, cfg.output.format)
        log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 130 if report.interrupted else 0


def _bench(args) -> int:
    sizes = [int(float(s)) for s in args.sizes.split(",")]
    params = HnswParams(m=args.m, ef_construction=args.ef_construction,
                        ef_search=args.ef_search, rng_seed=args.seed)
    rows = bench_index(sizes, args.dim, args.trials, params, seed=args.seed,
                       clusters=args.clusters, spread=args.spread, brute=not args.no_brute,
                       threads=args.threads)
    if args.out:
        write_bench_table(rows, args.out)
    first = rows[0]
    for r in rows:
        ratio = r.hnsw_median_ns / first.hnsw_median_ns
        brute = (f"{r.brute_median_ns / 1e3:10.1f}us x{r.brute_median_ns / first.brute_median_ns:6.1f}"
                 if r.brute_median_ns else "")
        print(f"n={r.n:>9d} hnsw {r.hnsw_median_ns / 1e3:8.1f}us x{ratio:5.2f}  "
              f"p99 {r.hnsw_p99_ns / 1e3:8.1f}us  {brute}  recall@10={r.recall_at_10}")
    return 0


def _split(args) -> int:
    records = load_feature_file(args.input)
    _, _, classes = read_feature_header(Path(args.input).read_bytes()[:64])
    parts = chronological_split(records, SplitSpec(args.pretrain, args.test, args.seed))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("pretrain", "online", "test"), parts):
        write_feature_file(out / f"{name}.acmf", part, classes, dim=len(records[0].feature))
        print(f"{name}: {len(part)}")
    return 0


def _gen_drift(args) -> int:
    cfg = DriftConfig(num_classes=args.classes, dim=args.dim, samples=args.samples,
                      mode=args.mode, sigma=args.sigma, modes_per_class=args.modes_per_class,
                      arrival_span=args.arrival_span, rotation=args.rotation, seed=args.seed)
    records = generate_drift_stream(cfg)
    write_feature_file(args.out, records, cfg.num_classes, dim=cfg.dim)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _inspect(args) -> int:
    path = Path(args.path)
    head = path.read_bytes()[:64]
    if head.startswith(FEATURE_MAGIC):
        dim, count, classes = read_feature_header(head)
        info = {"kind": "features", "dim": dim, "count": count, "classes": classes}
        if args.validate:
            load_feature_file(path)
            info["valid"] = True
    elif head.startswith(SNAPSHOT_MAGIC):
        idx = HnswIndex.load(path)
        info = {"kind": "hnsw-index", "dim": idx.dim, "count": idx.count,
                "max_level": idx.max_level, "m": idx.params.m, "m0": idx.params.m0,
                "ef_construction": idx.params.ef_construction}
        if args.validate:
            idx.check_invariants()
            info["valid"] = True
    elif head.startswith(LEARNER_MAGIC):
        lr = AcmLearner.load(path)
        info = {"kind": "acm-learner", "dim": lr.dim, "count": lr.memory.count, "k": lr.k,
                "config": lr.config.to_dict()}
    elif head.startswith(WEIGHTS_MAGIC):
        w = ProjectionWeights.load(path)
        info = {"kind": "projection", "type": w.kind.name, "in_dim": w.in_dim,
                "out_dim": w.out_dim}
    else:
        raise AcmError(f"{path}: unrecognised file type")
    print(json.dumps(info, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one online experiment")
    r.add_argument("--config", help="YAML or JSON experiment config")
    r.add_argument("--method", choices=["acm", "ncm", "slda", "sgd_logistic", "sgd_hinge",
                                        "brute_knn"])
    r.add_argument("--feature-file")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="directory for step rows, summary and curve")
    r.add_argument("--format", choices=["csv", "jsonl"])
    r.add_argument("--timing", choices=["monotonic", "none"])
    r.add_argument("--h", type=int, help="information-retention window")
    r.add_argument("--delay", type=int, help="near-future delay")
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config field, e.g. method_params.k_initial=1")
    r.set_defaults(func=_run)

    b = sub.add_parser("bench", help="HNSW vs linear-scan search latency scaling")
    b.add_argument("--sizes", default="1e4,1e5,1e6")
    b.add_argument("--dim", type=int, default=64)
    b.add_argument("--trials", type=int, default=200)
    b.add_argument("--m", type=int, default=100)
    b.add_argument("--ef-construction", type=int, default=500)
    b.add_argument("--ef-search", type=int, default=500)
    b.add_argument("--clusters", type=int, default=0, help="0 for isotropic data")
    b.add_argument("--spread", type=float, default=0.5)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--no-brute", action="store_true")
    b.add_argument("--out", help="table path (.csv or .json)")
    b.set_defaults(func=_bench)

    s = sub.add_parser("split", help="chronological pretrain/online/test split of a feature file")
    s.add_argument("input")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--pretrain", type=float, default=0.2)
    s.add_argument("--test", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_split)

    g = sub.add_parser("gen-drift", help="write a synthetic drifting stream as a feature file")
    g.add_argument("--out", required=True)
    g.add_argument("--classes", type=int, default=10)
    g.add_argument("--dim", type=int, default=32)
    g.add_argument("--samples", type=int, default=1000)
    g.add_argument("--mode", choices=["class_incremental", "mean_rotation"],
                   default="class_incremental")
    g.add_argument("--sigma", type=float, default=0.1)
    g.add_argument("--modes-per-class", type=int, default=1)
    g.add_argument("--arrival-span", type=float, default=1.0)
    g.add_argument("--rotation", type=float, default=1.5707963267948966)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=_gen_drift)

    i = sub.add_parser("inspect", help="describe a feature, index, learner or weights file")
    i.add_argument("path")
    i.add_argument("--validate", action="store_true", help="fully parse and check invariants")
    i.set_defaults(func=_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AcmError, OSError, yaml.YAMLError) as exc:
        print(f"acm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
