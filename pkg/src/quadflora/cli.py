"""Command-line entry points: gen, infer, eval, sweep, taxonomy-validate.

Every failure path prints a single `error: ...` line to stderr and
exits 2; warnings go to stderr prefixed `warning:` and do not change
the exit code. Worker count for inference is read from the
QUADFLORA_WORKERS environment variable (default 1).
"""

import argparse
import dataclasses
import os
import sys
import warnings

from . import formats
from ._util import atomic_write_text
from .ensemble import compose_model
from .errors import QuadfloraError, UnattainableTargetError
from .metric import GroundTruthTable, score
from .pipeline import RunConfig, infer_corpus, select_predictions
from .synthworld import gen_world, synth_summary
from .taxonomy import load_taxonomy, write_taxonomy_csv


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _load_world(data_dir: str):
    tax = load_taxonomy(os.path.join(data_dir, "taxonomy.csv"))
    quadrats = formats.load_quadrat_features(os.path.join(data_dir, "quadrats.csv"))
    registry = formats.load_head_registry(os.path.join(data_dir, "heads.csv"))
    return tax, quadrats, registry


def _models_for(cfg: RunConfig, registry):
    return [compose_model(registry, sel) for sel in cfg.head_combos]


def cmd_gen(args) -> int:
    cfg = formats.synth_config_from(formats.load_config(args.config))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    tax, quadrats, registry = gen_world(cfg)
    os.makedirs(args.out, exist_ok=True)
    write_taxonomy_csv(tax, os.path.join(args.out, "taxonomy.csv"))
    gt = GroundTruthTable(
        quadrats={q.quadrat_id: (q.transect_id, q.truth) for q in quadrats}
    )
    formats.write_ground_truth(gt, os.path.join(args.out, "groundtruth.csv"))
    formats.write_quadrat_features(quadrats, os.path.join(args.out, "quadrats.csv"))
    formats.write_head_registry(registry, os.path.join(args.out, "heads.csv"))
    print(synth_summary(tax, quadrats))
    return 0


def cmd_infer(args) -> int:
    cfg = formats.run_config_from(formats.load_config(args.config))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    tax, quadrats, registry = _load_world(args.data)
    models = _models_for(cfg, registry)
    cache_path = args.cache or os.path.join(args.data, "logit_cache.csv")
    cache = formats.LogitCache.load(cache_path)
    candidates = infer_corpus(quadrats, cfg, tax, models, cache)
    groups = {q.quadrat_id: q.transect_id for q in quadrats}
    preds, tau, achieved = select_predictions(candidates, cfg, groups)
    formats.write_submission(preds, args.out, species_labels=tax.species_labels)
    cache.save(cache_path)
    print(
        f"wrote {args.out}: {len(preds)} quadrats, "
        f"threshold {tau:.6g}, mean length {achieved:.4f}"
    )
    return 0


def cmd_eval(args) -> int:
    preds = formats.load_submission(args.submission)
    gt = formats.load_ground_truth(args.groundtruth)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = score(preds, gt)
    for w in caught:
        _warn(str(w.message))
    report_path = args.report or args.submission + ".report.json"
    formats.write_score_report(report, report_path)
    print(f"final {report.final:.5f}")
    for tid in sorted(report.per_transect):
        print(f"transect {tid} {report.per_transect[tid]:.5f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = formats.run_config_from(formats.load_config(args.config))
    targets = sorted(float(part) for part in args.targets.split(","))
    tax, quadrats, registry = _load_world(args.data)
    gt_path = args.groundtruth or os.path.join(args.data, "groundtruth.csv")
    gt = formats.load_ground_truth(gt_path)
    models = _models_for(cfg, registry)
    cache_path = args.cache or os.path.join(args.data, "logit_cache.csv")
    cache = formats.LogitCache.load(cache_path)
    candidates = infer_corpus(quadrats, cfg, tax, models, cache)
    groups = {q.quadrat_id: q.transect_id for q in quadrats}
    print(f"{'target':>8} {'threshold':>14} {'mean_len':>9} {'score':>8}")
    rows = []
    for target in targets:
        sel = dataclasses.replace(
            cfg.selection, target_mean_len=target, min_logit=None
        )
        per_target = dataclasses.replace(cfg, selection=sel)
        try:
            preds, tau, achieved = select_predictions(candidates, per_target, groups)
        except UnattainableTargetError:
            print(f"{target:>8.4g} {'unattainable':>14} {'-':>9} {'-':>8}")
            rows.append((target, "", "", ""))
            continue
        final = score(preds, gt).final
        print(f"{target:>8.4g} {tau:>14.6g} {achieved:>9.4f} {final:>8.5f}")
        rows.append((target, tau, achieved, final))
    cache.save(cache_path)
    if args.out:
        lines = ["target,threshold,mean_len,score"]
        for target, tau, achieved, final in rows:
            if tau == "":
                lines.append(f"{target:g},unattainable,,")
            else:
                lines.append(f"{target:g},{tau:.9g},{achieved:.9g},{final:.9g}")
        atomic_write_text(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_taxonomy_validate(args) -> int:
    table = load_taxonomy(args.taxonomy)
    print(
        f"taxonomy ok: {table.n_species} species, {table.n_genera} genera, "
        f"{table.n_families} families"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadflora",
        description="Multi-label quadrat species prediction toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic survey corpus")
    p.add_argument("--config", required=True, help="generator key=value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("infer", help="run inference and write a submission")
    p.add_argument("--config", required=True, help="run key=value config file")
    p.add_argument("--data", required=True, help="corpus directory from gen")
    p.add_argument("--out", required=True, help="submission CSV to write")
    p.add_argument("--cache", default=None, help="logit cache path (default in data dir)")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score a submission against ground truth")
    p.add_argument("submission")
    p.add_argument("groundtruth")
    p.add_argument("--report", default=None, help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="calibrate thresholds for several target lengths")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--targets", required=True, help="comma-separated mean lengths")
    p.add_argument("--groundtruth", default=None, help="default: data dir groundtruth.csv")
    p.add_argument("--cache", default=None)
    p.add_argument("--out", default=None, help="optional CSV of sweep rows")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("taxonomy-validate", help="load and validate a taxonomy CSV")
    p.add_argument("taxonomy")
    p.set_defaults(func=cmd_taxonomy_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (QuadfloraError, OSError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
