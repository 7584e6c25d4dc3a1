"""Command-line pipeline: apply -> train -> label -> eval/report/export.

Stages talk only through files. Each written file gets a run manifest with
input and output hashes, and every stage refuses inputs whose hash no longer
matches the manifest they were produced with.

Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid input
(including stale files and unfittable matrices), 4 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Sequence

from heurepo import __version__
from heurepo.analysis import (
    baseline_classify,
    diagnostics,
    evaluate,
    leave_one_out,
    model_eval,
    read_gold,
    render_report,
)
from heurepo.artifacts import load_dataset, validate
from heurepo.errors import HeurepoError, ParseError
from heurepo.heuristics import LabelMatrix, align, apply_all, load_heuristics
from heurepo.io_utils import write_json
from heurepo.labelmodel import FitConfig, LabelModelParams, fit, predict, read_labels, write_labels
from heurepo.manifest import RunManifest, check_fresh
from heurepo.tasks import TaskDefinition, export, find_task, resolve_task

log = logging.getLogger("heurepo")

HEURISTICS_ENV = "HEUREPO_HEURISTICS_DIR"


def default_heuristics_dir() -> Path:
    env = os.environ.get(HEURISTICS_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("heurepo") / "data" / "heuristics"))


def _task(args) -> TaskDefinition | None:
    if not getattr(args, "task", None):
        return None
    return find_task(args.heuristics, args.task)


def _fit_config(args, task: TaskDefinition | None) -> FitConfig:
    balance = args.class_balance
    if balance is None and task is not None:
        balance = task.class_balance
    return FitConfig(tol=args.tol, max_iter=args.max_iter, class_balance=balance, seed=args.seed)


def _manifest(args, registry_hash: str | None = None) -> RunManifest:
    config = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in ("func", "quiet") and not k.startswith("_")
    }
    return RunManifest(
        command=args.command,
        config=config,
        seed=getattr(args, "seed", None),
        registry_hash=registry_hash,
        tool_version=__version__,
        _t0=args._started,
    )


def _emit(args, payload: dict | str) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + ("" if text.endswith("\n") else "\n"), encoding="utf-8")
    else:
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))


def _fallback(args, task: TaskDefinition | None) -> int:
    if getattr(args, "fallback", None):
        return 1 if args.fallback == "positive" else -1
    return task.fallback_vote if task else -1


def _load(args):
    for p in (args.dataset, getattr(args, "issues", None)):
        if p:
            check_fresh(p)
    return load_dataset(args.dataset, getattr(args, "issues", None), policy=args.link_policy)


# -- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    ds = _load(args)
    report = validate(ds).to_dict()
    report["link"] = dict(ds.provenance.get("link", {}))
    _emit(args, report)
    return 0


def cmd_apply(args) -> int:
    registry = load_heuristics(args.heuristics)
    task = _task(args)
    if task is not None:
        registry = resolve_task(task, registry)
    ds = _load(args)
    report = validate(ds)
    if report.empty_messages:
        log.info("%d of %d commits have empty messages", len(report.empty_messages), report.n_commits)
    matrix = apply_all(registry, ds)
    for name, count in matrix.errors.items():
        log.warning("heuristic %s raised on %d rows (counted as abstain)", name, count)
    man = _manifest(args, registry.content_hash())
    man.add_input(args.dataset)
    if args.issues:
        man.add_input(args.issues)
    matrix.write(
        args.out,
        meta={
            "dataset_name": ds.name,
            "dataset_hash": ds.content_hash(),
            "task": task.name if task else None,
            "link": dict(ds.provenance.get("link", {})),
        },
    )
    man.write(args.out)
    log.info("wrote %d x %d label matrix to %s", *matrix.shape, args.out)
    return 0


def cmd_train(args) -> int:
    check_fresh(args.matrix)
    matrix = LabelMatrix.read(args.matrix)
    task = _task(args)
    config = _fit_config(args, task)
    params = fit(matrix, config)
    params.save(args.out)
    man = _manifest(args, matrix.meta.get("registry_hash"))
    man.config["fit"] = dataclasses.asdict(config)
    man.add_input(args.matrix)
    man.write(args.out)
    log.info(
        "fitted %d heuristics in %d iterations (converged=%s), log-likelihood %.6f, class balance %.4f",
        params.n_heuristics, params.n_iter, params.converged, params.log_likelihood, params.class_balance,
    )
    return 0


def cmd_label(args) -> int:
    for p in (args.model, args.matrix):
        check_fresh(p)
    params = LabelModelParams.load(args.model)
    matrix = LabelMatrix.read(args.matrix)
    labels = predict(params, matrix)
    write_labels(args.out, labels)
    man = _manifest(args, matrix.meta.get("registry_hash"))
    man.add_input(args.model)
    man.add_input(args.matrix)
    man.write(args.out)
    n_abs = sum(lb.abstained for lb in labels)
    log.info("labeled %d rows, model abstained on %d (%.1f%%)", len(labels), n_abs,
             100.0 * n_abs / len(labels) if labels else 0.0)
    return 0


def cmd_eval(args) -> int:
    task = _task(args)
    check_fresh(args.gold)
    gold = read_gold(args.gold, task.label_names if task else None)
    man = _manifest(args)
    man.add_input(args.gold)
    if args.baseline:
        if not args.dataset:
            raise ParseError("--baseline needs --dataset")
        predicted = baseline_classify(args.baseline, _load(args))
        man.add_input(args.dataset)
    else:
        if not args.labels:
            raise ParseError("eval needs --labels or --baseline")
        check_fresh(args.labels)
        predicted = read_labels(args.labels)
        man.add_input(args.labels)
    report = evaluate(predicted, gold, _fallback(args, task))
    _emit(args, report.to_dict())
    if args.out:
        man.write(args.out)
    return 0


def cmd_diagnostics(args) -> int:
    check_fresh(args.matrix)
    matrix = LabelMatrix.read(args.matrix)
    gold = read_gold(args.gold) if args.gold else None
    diags = diagnostics(matrix, gold)
    _emit(args, {"n_rows": matrix.shape[0], "heuristics": [d.to_dict() for d in diags]})
    if args.out:
        man = _manifest(args, matrix.meta.get("registry_hash"))
        man.add_input(args.matrix)
        man.write(args.out)
    return 0


def cmd_report(args) -> int:
    task = _task(args)
    config = _fit_config(args, task)
    fallback = _fallback(args, task)
    gold = read_gold(args.gold, task.label_names if task else None)
    paths = [args.head_train, args.head_test, args.gold] + [p for p in (args.base_train, args.base_test) if p]
    for p in paths:
        check_fresh(p)
    head_train = LabelMatrix.read(args.head_train)
    head_test = align(LabelMatrix.read(args.head_test), head_train.column_names)
    name = args.test_name
    eval_head = {name: model_eval(head_train, head_test, gold, config, fallback)}
    eval_base = None
    new = list(head_train.column_names)
    if args.base_train:
        if not args.base_test:
            raise ParseError("--base-train needs --base-test")
        base_train = LabelMatrix.read(args.base_train)
        base_test = align(LabelMatrix.read(args.base_test), base_train.column_names)
        eval_base = {name: model_eval(base_train, base_test, gold, config, fallback)}
        new = [c for c in head_train.column_names if c not in base_train.column_names]
    contributions = leave_one_out(head_train, {name: (head_test, gold)}, new, config, fallback)
    report = render_report(
        diagnostics(head_test, gold),
        eval_head,
        eval_base,
        contributions=contributions,
        new_heuristics=new if args.base_train else (),
    )
    _emit(args, report.markdown)
    if args.out:
        json_out = Path(args.json_out or f"{args.out}.json")
        write_json(json_out, report.record)
        man = _manifest(args, head_train.meta.get("registry_hash"))
        man.config["fit"] = dataclasses.asdict(config)
        for p in paths:
            man.add_input(p)
        man.write(args.out, json_out)
    return 0


def cmd_export(args) -> int:
    task = _task(args) or TaskDefinition(name="default")
    check_fresh(args.labels)
    labels = read_labels(args.labels)
    ds = _load(args)
    fields = [f for f in (args.fields or "").split(",") if f]
    result = export(task, labels, ds, args.mode, fields)
    result.write(args.out)
    man = _manifest(args)
    man.add_input(args.labels)
    man.add_input(args.dataset)
    man.write(args.out)
    log.info("export %s", json.dumps(result.summary()))
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heurepo",
        description="Label software-repository artifacts with a repository of heuristics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--task", help="task name, looked up under <heuristics>/tasks/")
    common.add_argument(
        "--heuristics",
        type=Path,
        default=None,
        help=f"heuristics directory (default: ${HEURISTICS_ENV} or the bundled set)",
    )
    common.add_argument("--out", type=Path, help="output file (stdout for report-style commands)")
    common.add_argument("--seed", type=int, default=0, help="recorded in manifests; EM itself is deterministic")
    common.add_argument("--quiet", "-q", action="store_true", help="only warnings and errors")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--dataset", type=Path, help="commit dataset (line-delimited JSON)")
    data.add_argument("--issues", type=Path, help="issue dataset (line-delimited JSON)")
    data.add_argument("--link-policy", choices=("strict", "drop", "keep"), default="drop")

    fitting = argparse.ArgumentParser(add_help=False)
    fitting.add_argument("--tol", type=float, default=1e-6)
    fitting.add_argument("--max-iter", type=int, default=1000)
    fitting.add_argument("--class-balance", type=float, default=None, help="freeze the positive-class prior")

    fallback = argparse.ArgumentParser(add_help=False)
    fallback.add_argument("--fallback", choices=("positive", "negative"), help="overrides the task's fallback")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common, data], help="report data-quality issues")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("apply", parents=[common, data], help="apply heuristics, write the label matrix")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("train", parents=[common, fitting], help="fit the label model")
    p.add_argument("--matrix", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("label", parents=[common], help="write probabilistic labels")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--matrix", type=Path, required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("eval", parents=[common, data, fallback], help="score labels against gold")
    p.add_argument("--gold", type=Path, required=True)
    p.add_argument("--labels", type=Path)
    p.add_argument("--baseline", choices=("gitcproc", "tufano"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnostics", parents=[common], help="coverage, overlap and conflict per heuristic")
    p.add_argument("--matrix", type=Path, required=True)
    p.add_argument("--gold", type=Path)
    p.set_defaults(func=cmd_diagnostics)

    p = sub.add_parser("report", parents=[common, fitting, fallback], help="render the pull-request report")
    p.add_argument("--head-train", type=Path, required=True)
    p.add_argument("--head-test", type=Path, required=True)
    p.add_argument("--base-train", type=Path)
    p.add_argument("--base-test", type=Path)
    p.add_argument("--gold", type=Path, required=True)
    p.add_argument("--test-name", default="test")
    p.add_argument("--json-out", type=Path, help="machine-readable twin (default: <out>.json)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export", parents=[common, data], help="export a labeled dataset")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--mode", choices=("soft", "hard", "model-labeled-only"), default="model-labeled-only")
    p.add_argument("--fields", help="extra commit fields, comma separated (author,timestamp,files,issue_ids)")
    p.set_defaults(func=cmd_export)
    return parser


_OUT_REQUIRED = {"apply", "train", "label", "export"}
_DATASET_REQUIRED = {"validate", "apply", "export"}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._started = time.perf_counter()
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    if args.heuristics is None:
        args.heuristics = default_heuristics_dir()
    try:
        if args.command in _OUT_REQUIRED and not args.out:
            raise ParseError(f"{args.command} needs --out")
        if args.command in _DATASET_REQUIRED and not args.dataset:
            raise ParseError(f"{args.command} needs --dataset")
        return args.func(args)
    except HeurepoError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
