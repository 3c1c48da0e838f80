"""Command-line interface.

Every command writes a run manifest (command line, effective settings,
input and output digests, version, wall time) next to its outputs.
``ponzitrace rerun MANIFEST`` repeats the run and checks that every output
is byte-identical to the recorded digest.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from collections import defaultdict
from pathlib import Path

from . import __version__
from .features import FEATURE_SETS, FeatureTable, build_feature_table
from .ingest import (
    ONE_DAY_SECS,
    WEI_PER_ETH,
    IngestError,
    assemble,
    load_dataset,
    parse_transactions,
    read_address_types,
    read_labels,
    save_dataset,
)
from .models import ModelConfig, make_model, save_model
from .sampling import BorderlineSMOTE
from .evaluation import (
    HOLDOUT_TYPES,
    ExperimentPlan,
    evaluate,
    importance_counts,
    rank_features,
    run_experiment1,
    run_experiment2,
    run_experiment3,
    write_experiment1_csv,
    METRIC_NAMES,
)
from .synthgen import make_corpus, write_corpus

log = logging.getLogger("ponzitrace")

MODEL_TOKENS = {
    "knn": dict(kind="knn"),
    "rf": dict(kind="random_forest"),
    "gbdt-level": dict(kind="gbdt", growth="level_wise"),
    "gbdt-leaf": dict(kind="gbdt", growth="leaf_wise"),
}


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    val = str(raw).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names."""
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        cfg[key.lstrip("-").replace("-", "_")] = val.strip("\"'")
    return cfg


def _model_configs(tokens: str, args) -> tuple[ModelConfig, ...]:
    out = []
    for tok in tokens.split(","):
        tok = tok.strip()
        if tok not in MODEL_TOKENS:
            raise UsageError(f"unknown model {tok!r}; choose from {', '.join(MODEL_TOKENS)}")
        out.append(ModelConfig(**MODEL_TOKENS[tok], trees=args.trees, knn_k=args.knn_k, seed=args.seed))
    return tuple(out)


def _int_list(raw: str) -> list[int]:
    return [int(x) for x in str(raw).split(",") if x.strip()]


def _float_list(raw: str) -> list[float]:
    return [float(x) for x in str(raw).split(",") if x.strip()]


# --- figure data -----------------------------------------------------------


def figure_rows(app):
    """Per-day volume rows, per-transaction event rows, per-day balance rows."""
    daily = defaultdict(lambda: [0, 0, 0, 0])  # n_in, n_out, wei_in, wei_out
    events, bal_by_day, bal = [], {}, 0
    for tx in app.txs:
        day = (tx.timestamp - app.created_at) // ONE_DAY_SECS
        inc = tx.is_incoming(app.address)
        d = daily[day]
        d[0 if inc else 1] += 1
        d[2 if inc else 3] += tx.value_wei
        bal += tx.value_wei if inc else -tx.value_wei
        bal_by_day[day] = bal
        events.append(
            [tx.timestamp, day, "in" if inc else "out", tx.kind, tx.counterpart(app.address),
             repr(tx.value_wei / WEI_PER_ETH)]
        )
    last_day = max(daily) if daily else -1
    volume, balance, running = [], [], 0
    for day in range(last_day + 1):
        n_in, n_out, w_in, w_out = daily.get(day, (0, 0, 0, 0))
        volume.append([day, n_in + n_out, n_in, n_out, repr(w_in / WEI_PER_ETH), repr(w_out / WEI_PER_ETH)])
        running = bal_by_day.get(day, running)
        balance.append([day, repr(running / WEI_PER_ETH)])
    return volume, events, balance


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# --- commands --------------------------------------------------------------


def cmd_ingest(args):
    txs = parse_transactions(args.txs, args.schema)
    types = read_address_types(args.address_types) if args.address_types else None
    ds = assemble(txs, read_labels(args.labels), types, strict=args.strict)
    out = Path(args.out)
    save_dataset(out, ds)
    for kind in ("retained", "dropped"):
        counts = ds.report[kind]
        print(f"{kind}: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return [out]


def cmd_features(args):
    ds = load_dataset(args.dataset)
    table = build_feature_table(ds, args.set, args.interval_hours, n_jobs=args.threads)
    out = Path(args.out)
    table.to_csv(out)
    print(f"{len(table.addresses)} rows x {table.n_features} features -> {out}")
    return [out]


def _load_table(args) -> FeatureTable:
    types = None
    if getattr(args, "labels", None):
        types = {lab.address: lab.ponzi_type for lab in read_labels(args.labels)}
    return FeatureTable.from_csv(args.features, types)


def _plan(args, models, feature_set="acc-ts") -> ExperimentPlan:
    return ExperimentPlan(
        feature_set=feature_set,
        interval_hours=getattr(args, "interval_hours", 24),
        models=models,
        repeats=args.repeats,
        folds=args.folds,
        test_fraction=args.test_fraction,
        seed=args.seed,
    )


def _top_k(table, plan, k):
    if not 1 <= k <= table.n_features:
        raise UsageError(f"--top-k must lie in [1, {table.n_features}]")
    counts = importance_counts(table, plan, ModelConfig(kind="gbdt", growth="leaf_wise", seed=plan.seed))
    return table.select(rank_features(table.names, counts)[:k])


def cmd_train(args):
    table = _load_table(args)
    (config,) = _model_configs(args.model, args)
    plan = _plan(args, (config,))
    if args.top_k:
        table = _top_k(table, plan, args.top_k)
    sampler = BorderlineSMOTE(random_state=args.seed)
    Xs, ys = sampler.fit_resample(table.X, table.y)
    model = make_model(config).fit(Xs, ys)
    out = Path(args.out)
    save_model(model, out, table.names)
    print(f"trained {config.label} on {Xs.shape[0]} rows x {Xs.shape[1]} features -> {out}")
    return [out]


def cmd_eval(args):
    table = _load_table(args)
    (config,) = _model_configs(args.model, args)
    plan = _plan(args, (config,), list(table.names))
    if args.top_k:
        table = _top_k(table, plan, args.top_k)
        plan.feature_set = tuple(table.names)
    rep = evaluate(table, plan, config, n_jobs=args.threads)
    out = Path(args.out)
    rep.write_json(out, timing=False)
    print(" ".join(f"{k}={rep.mean[k]:.4f}" for k in METRIC_NAMES))
    return [out]


def _experiment_source(args):
    if bool(args.dataset) == bool(args.features):
        raise UsageError("give exactly one of --dataset or --features")
    if args.dataset:
        return load_dataset(args.dataset)
    return _load_table(args)


def _acc_ts_table(source, T, threads):
    if isinstance(source, FeatureTable):
        return source
    return build_feature_table(source, "acc-ts", T, n_jobs=threads)


def cmd_experiment(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source = _experiment_source(args)
    outputs = []
    if args.number == 1:
        models = _model_configs(args.models or "knn,rf,gbdt-level,gbdt-leaf", args)
        intervals = _int_list(args.interval_hours)
        plan = _plan(args, models)
        plan.interval_hours = intervals[0]
        if isinstance(source, FeatureTable):
            if len(intervals) != 1:
                raise UsageError("a feature CSV covers one interval; pass a single --interval-hours")
            source = {intervals[0]: source}
        sets = [s for s in ("acc", "ts", "acc-ts")]
        rows = run_experiment1(source, plan, sets, intervals, n_jobs=args.threads)
        csv_path, json_path = out_dir / "experiment1.csv", out_dir / "experiment1.json"
        write_experiment1_csv(rows, csv_path)
        payload = [
            {k: v for k, v in row.items() if k != "report"} | {"report": row["report"].to_dict(False)}
            for row in rows
        ]
        json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        for row in rows:
            T = row["interval_hours"] or "-"
            print(f"{row['feature_set']:>6} T={T:<3} {row['model']:<16} f1={row['report'].mean['f1']:.4f}")
        outputs += [csv_path, json_path]
    elif args.number == 2:
        (config,) = _model_configs(args.models or "gbdt-leaf", args)
        T = _int_list(args.interval_hours)[0]
        table = _acc_ts_table(source, T, args.threads)
        plan = _plan(args, (config,))
        plan.interval_hours = T
        sweep = run_experiment2(table, plan, args.step, config, n_jobs=args.threads)
        curve, ranking = out_dir / "curve.csv", out_dir / "ranking.csv"
        refined, summary = out_dir / "refined_features.txt", out_dir / "experiment2.json"
        sweep.write_curve_csv(curve)
        sweep.write_ranking_csv(ranking)
        refined.write_text("\n".join(sweep.prefix(sweep.best_k)) + "\n")
        full_f1 = next(f1 for k, f1, _ in sweep.curve if k == table.n_features) if any(
            k == table.n_features for k, _, _ in sweep.curve
        ) else None
        info = {
            "features_used": sweep.n_used,
            "best_k": sweep.best_k,
            "best_f1": max(f1 for _, f1, _ in sweep.curve),
            "full_f1": full_f1,
            "best_composition": sweep.composition(sweep.best_k),
        }
        summary.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
        print(json.dumps(info, sort_keys=True))
        outputs += [curve, ranking, refined, summary]
    else:
        (config,) = _model_configs(args.models or "gbdt-leaf", args)
        T = _int_list(args.interval_hours)[0]
        table = _acc_ts_table(source, T, args.threads)
        plan = _plan(args, (config,))
        plan.interval_hours = T
        holdouts = [h.strip() for h in args.holdout.split(",")]
        reports = []
        for h in holdouts:
            for rate in _float_list(args.scam_rate):
                rep = run_experiment3(table, plan, h, rate, config, n_jobs=args.threads)
                reports.append(rep)
                print(f"{h:<10} rate={rate:<5} " + " ".join(f"{k}={rep.mean[k]:.4f}" for k in METRIC_NAMES))
        csv_path, json_path = out_dir / "experiment3.csv", out_dir / "experiment3.json"
        _write_csv(
            csv_path,
            ["holdout_type", "scam_rate", "n_holdout", "n_negatives", *METRIC_NAMES],
            [
                [r.plan["holdout_type"], r.plan["scam_rate"], r.plan["n_holdout"], r.plan["n_negatives"]]
                + [repr(r.mean[k]) for k in METRIC_NAMES]
                for r in reports
            ],
        )
        json_path.write_text(json.dumps([r.to_dict(False) for r in reports], indent=2, sort_keys=True) + "\n")
        outputs += [csv_path, json_path]
    return outputs


def cmd_synth(args):
    corpus = make_corpus(args.chain, args.tree, args.handover, args.waterfall, args.benign, seed=args.seed)
    paths = write_corpus(corpus, args.out_dir, args.schema)
    n_tx = sum(len(a.txs) for a in corpus.apps)
    print(f"{len(corpus.apps)} applications, {n_tx} transactions -> {args.out_dir}")
    return list(paths.values())


def cmd_figure_data(args):
    ds = load_dataset(args.dataset)
    addr = args.address.lower()
    app = next((a for a in ds.apps if a.address == addr), None)
    if app is None:
        raise IngestError(f"address {args.address} not in dataset")
    volume, events, balance = figure_rows(app)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "daily_volume.csv", out / "events.csv", out / "balance.csv"]
    _write_csv(paths[0], ["day", "n_txs", "n_in", "n_out", "eth_in", "eth_out"], volume)
    _write_csv(paths[1], ["timestamp", "day", "direction", "kind", "counterpart", "value_eth"], events)
    _write_csv(paths[2], ["day", "balance_eth"], balance)
    return paths


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=1, help="seed for all randomness")
    common.add_argument("--threads", type=int, default=1, help="worker cap")
    common.add_argument("--config", help="key = value file; flags override it")

    evalopts = argparse.ArgumentParser(add_help=False)
    evalopts.add_argument("--repeats", type=int, default=50)
    evalopts.add_argument("--folds", type=int, default=5, help="0 skips cross-validation")
    evalopts.add_argument("--test-fraction", type=float, default=0.2)
    evalopts.add_argument("--trees", type=int, default=100)
    evalopts.add_argument("--knn-k", type=int, default=5)

    p = argparse.ArgumentParser(prog="ponzitrace", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ponzitrace {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="build a refined dataset")
    s.add_argument("--txs", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--address-types")
    s.add_argument("--schema", choices=("jsonl", "csv"))
    s.add_argument("--strict", action="store_true")
    s.add_argument("--out", required=True)

    s = sub.add_parser("features", parents=[common], help="write a feature CSV")
    s.add_argument("--dataset", required=True)
    s.add_argument("--interval-hours", type=int, choices=(12, 24, 48), default=24)
    s.add_argument("--set", choices=tuple(FEATURE_SETS), default="acc-ts")
    s.add_argument("--out", required=True)

    for name, helptext in (("train", "fit one model on all rows"), ("eval", "repeated hold-out evaluation")):
        s = sub.add_parser(name, parents=[common, evalopts], help=helptext)
        s.add_argument("--features", required=True)
        s.add_argument("--model", choices=tuple(MODEL_TOKENS), default="gbdt-leaf")
        s.add_argument("--top-k", type=int)
        s.add_argument("--out", required=True)

    s = sub.add_parser("experiment", parents=[common, evalopts], help="run experiment 1, 2 or 3")
    s.add_argument("number", type=int, choices=(1, 2, 3))
    s.add_argument("--dataset")
    s.add_argument("--features")
    s.add_argument("--labels", help="labels CSV supplying Ponzi types for a feature CSV")
    s.add_argument("--models", help="comma list of " + ",".join(MODEL_TOKENS))
    s.add_argument("--interval-hours", default="12,24,48", help="comma list; experiments 2 and 3 use the first")
    s.add_argument("--step", type=int, default=5)
    s.add_argument("--holdout", default=",".join(HOLDOUT_TYPES))
    s.add_argument("--scam-rate", default="1.0,0.5,0.06")
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    for scheme, n in (("chain", 48), ("tree", 4), ("handover", 4), ("waterfall", 4), ("benign", 940)):
        s.add_argument(f"--{scheme}", type=int, default=n)
    s.add_argument("--schema", choices=("jsonl", "csv"), default="jsonl")
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("figure-data", parents=[common], help="per-day series of one application")
    s.add_argument("--dataset", required=True)
    s.add_argument("--address", required=True)
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("rerun", help="repeat a run from its manifest and compare outputs")
    s.add_argument("manifest")
    return p


COMMANDS = {
    "ingest": cmd_ingest,
    "features": cmd_features,
    "train": cmd_train,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "synth": cmd_synth,
    "figure-data": cmd_figure_data,
}

INPUT_FLAGS = ("txs", "labels", "address_types", "dataset", "features")


def _parse(parser, argv, config: dict | None):
    """Parse ``argv`` with a config file (or dict) supplying defaults.

    argparse would stop on a missing required flag before the config file
    is read, so required checks are deferred whenever a config is in play.
    """
    subparsers = parser._subparsers._group_actions[0].choices
    deferred = []
    if config or any(a == "--config" or a.startswith("--config=") for a in argv):
        for sp in subparsers.values():
            for a in sp._actions:
                if a.required and a.option_strings:
                    a.required = False
                    deferred.append(a)
    args = parser.parse_args(argv)
    if args.command == "rerun":
        return args, {}
    subparser = subparsers[args.command]
    cfg = dict(config or {})
    if getattr(args, "config", None):
        cfg = {**read_config(args.config), **cfg}
    if cfg:
        known = {a.dest: a for a in subparser._actions}
        unknown = sorted(set(cfg) - set(known))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        subparser.set_defaults(
            **{
                k: _bool(v) if isinstance(known[k], argparse._StoreTrueAction) else v
                for k, v in cfg.items()
            }
        )
        args = parser.parse_args(argv)
    for a in deferred:
        if a in subparser._actions and getattr(args, a.dest, None) is None:
            raise UsageError(f"missing {a.option_strings[0]}")
    return args, cfg


def _manifest_path(args, outputs) -> Path:
    if getattr(args, "out_dir", None):
        return Path(args.out_dir) / "manifest.json"
    return Path(str(outputs[0]) + ".manifest.json")


def run(argv, config=None) -> int:
    parser = build_parser()
    try:
        args, cfg = _parse(parser, argv, config)
    except UsageError as exc:
        print(f"ponzitrace: error: {exc}", file=sys.stderr)
        return 2
    if args.command == "rerun":
        return rerun(args.manifest)
    t0 = time.perf_counter()
    try:
        outputs = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ponzitrace: error: {exc}", file=sys.stderr)
        return 2
    except (IngestError, ValueError, KeyError, OSError, FloatingPointError) as exc:
        print(f"ponzitrace: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    inputs = {}
    for flag in INPUT_FLAGS:
        path = getattr(args, flag, None)
        if path:
            inputs[path] = _sha256(Path(path))
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": cfg,
        "settings": {k: v for k, v in sorted(vars(args).items()) if k != "config"},
        "seed": getattr(args, "seed", None),
        "inputs": inputs,
        "outputs": {str(p): _sha256(Path(p)) for p in outputs},
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
    }
    mpath = _manifest_path(args, outputs)
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def rerun(manifest_path) -> int:
    """Replay a manifest; 0 when every output digest matches, 1 otherwise."""
    try:
        manifest = json.loads(Path(manifest_path).read_text())
        argv, cfg, expected = manifest["argv"], manifest["config"], manifest["outputs"]
    except (OSError, ValueError, KeyError) as exc:
        print(f"ponzitrace: cannot read manifest: {exc}", file=sys.stderr)
        return 1
    argv = _strip_config(argv)
    code = run(argv, cfg)
    if code:
        return code
    bad = [p for p, digest in expected.items() if not Path(p).exists() or _sha256(Path(p)) != digest]
    for p in bad:
        print(f"mismatch: {p}", file=sys.stderr)
    if not bad:
        print(f"reproduced {len(expected)} output(s)")
    return 1 if bad else 0


def _strip_config(argv):
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--config":
            skip = True
            continue
        if a.startswith("--config="):
            continue
        out.append(a)
    return out


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
