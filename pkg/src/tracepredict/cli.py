"""Command-line front end.

Exit status: 0 when the trace is well-formed / nothing was found, 1 on a
violation or when findings are reported, 2 on usage, input or bound errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from itertools import permutations
from pathlib import Path

from . import __version__
from .alphabet import build_rwl_dependence, build_rwl_dual, width
from .confp import confp_deadlocks, confp_races
from .monitors import ADJACENT, SUBSEQUENCE, PatternSpec, adjacency_monitor, pattern_monitor
from .oracle import CLOSURE_KINDS, DEFAULT_BOUND, OracleBoundError, closure
from .predict import MAZ, STRONG, STRONG_RF, PredictMode, Sampling, predict, predict_all
from .trace import Execution, TraceError, check_well_formed, conflicting, parse_trace

log = logging.getLogger("tracepredict")

SCHEMA = 1
CONFP = "confp"
EXIT_OK, EXIT_FOUND, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _load(args) -> Execution:
    path = Path(args.input)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_trace(text, args.format)


# -- trace -------------------------------------------------------------------


def cmd_trace_validate(args) -> int:
    execution = _load(args)
    v = check_well_formed(execution)
    summary = f"{len(execution)} events, {len(execution.threads)} threads"
    if v is None:
        print(f"{summary}, well-formed")
        return EXIT_OK
    print(f"{summary}, violation at event {v.index}: {v.reason}")
    return EXIT_FOUND


def cmd_trace_stats(args) -> int:
    execution = _load(args)
    dual = build_rwl_dual(execution)
    stats = {
        "events": len(execution),
        "threads": len(execution.threads),
        "locks": len(execution.locks),
        "locations": len(execution.locations),
        "distinct_labels": len(dual.letters),
        "reads": sum(1 for lab in execution.labels if lab.op == "r"),
        "writes": sum(1 for lab in execution.labels if lab.op == "w"),
        "width": width(dual),
        "well_formed": check_well_formed(execution) is None,
    }
    print(json.dumps(stats, indent=2))
    return EXIT_OK


# -- analyze -----------------------------------------------------------------


def _sampling(args) -> Sampling | None:
    if args.sample is None:
        if args.seed is not None:
            raise UsageError("--seed requires --sample")
        return None
    if args.mode not in (STRONG, STRONG_RF):
        raise UsageError("--sample is only meaningful with --mode strong or strong-rf")
    return Sampling(0 if args.seed is None else args.seed, args.sample)


def _predict_mode(args) -> PredictMode:
    return PredictMode(args.mode, retrofit=True, sampling=_sampling(args))


def _race_findings(execution: Execution, args) -> tuple[list[dict], dict]:
    if args.mode == CONFP:
        if args.sample is not None:
            raise UsageError("--sample is not available in confp mode")
        result = confp_races(execution, all_pairs=args.all_pairs, workers=args.threads)
        findings = [r.to_dict() for r in result.races]
        return findings, {"findings": len(findings), "racy_events": result.count}
    mode = _predict_mode(args)
    d = build_rwl_dependence(execution)
    labels = sorted(set(execution.labels))
    # a race is two conflicting events of different threads placed next to each other
    pairs = [
        (a, b)
        for a, b in permutations(labels, 2)
        if a.thread != b.thread and conflicting(a, b)
    ]
    monitors = [adjacency_monitor(d, a, b) for a, b in pairs]
    verdicts = predict_all(execution, monitors, mode, workers=args.threads)
    findings = [
        {"events": list(v.witness or ()), "labels": [str(a), str(b)], "witness": v.mask.indices()}
        for (a, b), v in zip(pairs, verdicts)
        if v.found
    ]
    findings.sort(key=lambda f: (max(f["events"]), min(f["events"]), f["labels"]))
    racy = {max(f["events"]) for f in findings}
    return findings, {"findings": len(findings), "racy_events": len(racy)}


def _deadlock_findings(execution: Execution, args) -> tuple[list[dict], dict]:
    if args.max_cycle < 2:
        raise UsageError("--max-cycle must be at least 2")
    result = confp_deadlocks(execution, args.max_cycle, workers=args.threads)
    findings = [r.to_dict() for r in result.deadlocks]
    return findings, {"findings": len(findings), "distinct_label_tuples": result.count}


def _pattern_findings(execution: Execution, args) -> tuple[list[dict], dict]:
    if args.mode == CONFP:
        raise UsageError("pattern analysis supports --mode maz, strong or strong-rf")
    spec = PatternSpec.parse(args.pattern, args.match)
    d = build_rwl_dependence(list(execution.labels) + list(spec.letters))
    verdict = predict(execution, pattern_monitor(d, spec), _predict_mode(args), workers=args.threads)
    findings = []
    if verdict.found:
        findings.append(
            {
                "pattern": str(spec),
                "match": spec.kind,
                "events": list(verdict.witness or ()),
                "witness": verdict.mask.indices(),
            }
        )
    return findings, {"findings": len(findings), "masks_explored": verdict.masks_explored}


ANALYSES = {"race": _race_findings, "deadlock": _deadlock_findings, "pattern": _pattern_findings}


def cmd_analyze(args) -> int:
    execution = _load(args)
    v = check_well_formed(execution)
    if v is not None:
        raise UsageError(f"execution is not well-formed at event {v.index}: {v.reason}")
    start = time.perf_counter()
    findings, counts = ANALYSES[args.analysis](execution, args)
    elapsed_ms = round((time.perf_counter() - start) * 1000.0, 3)
    log.info("analyze %s finished in %.3f ms", args.analysis, elapsed_ms)
    report = {
        "schema": SCHEMA,
        "command": f"analyze {args.analysis}",
        "mode": args.mode,
        "events": len(execution),
        "findings": findings,
        "counts": counts,
    }
    if getattr(args, "sample", None) is not None:
        report["sampling"] = {"budget": args.sample, "seed": args.seed or 0}
    if args.timing:
        report["elapsed_ms"] = elapsed_ms
    text = json.dumps(report, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        print(f"{len(findings)} finding(s); report written to {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_FOUND if findings else EXIT_OK


# -- oracle ------------------------------------------------------------------


def cmd_oracle_closure(args) -> int:
    execution = _load(args)
    try:
        result = closure(args.kind, execution, bound=args.bound)
    except OracleBoundError as exc:
        raise UsageError(str(exc)) from None
    for seq in sorted(result):
        print(" ".join(map(str, seq)) if seq else "<empty>")
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="trace file")
    p.add_argument(
        "--format", choices=("std", "structured"), default="std", help="trace format"
    )


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="tracepredict", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    trace = groups.add_parser("trace", help="inspect a trace file", formatter_class=fmt)
    trace_cmds = trace.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = trace_cmds.add_parser("validate", help="check lock discipline", formatter_class=fmt)
    _input_args(p)
    p.set_defaults(func=cmd_trace_validate)
    p = trace_cmds.add_parser("stats", help="print trace statistics as JSON", formatter_class=fmt)
    _input_args(p)
    p.set_defaults(func=cmd_trace_stats)

    analyze = groups.add_parser("analyze", help="predictive analyses", formatter_class=fmt)
    kinds = analyze.add_subparsers(dest="analysis", required=True, parser_class=_Parser)
    for name in ANALYSES:
        p = kinds.add_parser(name, help=f"{name} prediction", formatter_class=fmt)
        _input_args(p)
        if name == "deadlock":
            p.add_argument("--mode", choices=(CONFP,), default=CONFP, help="reordering class")
            p.add_argument("--max-cycle", type=int, default=2, metavar="K", help="longest lock cycle")
        else:
            modes = (MAZ, STRONG, STRONG_RF) + ((CONFP,) if name == "race" else ())
            p.add_argument(
                "--mode",
                choices=modes,
                default=CONFP if name == "race" else STRONG_RF,
                help="reordering class to predict over",
            )
            p.add_argument("--sample", type=int, default=None, metavar="N", help="sample N prefixes")
            p.add_argument("--seed", type=int, default=None, help="sampling seed, 0 if omitted")
        if name == "race":
            p.add_argument("--all-pairs", action="store_true", help="confp: check every pair")
        if name == "pattern":
            p.add_argument("--pattern", required=True, help="comma separated labels t|op|d")
            p.add_argument(
                "--match", choices=(SUBSEQUENCE, ADJACENT), required=True, help="pattern match kind"
            )
        p.add_argument("--threads", type=int, default=1, metavar="N", help="worker processes")
        p.add_argument("--timing", action="store_true", help="include elapsed_ms in the report")
        p.add_argument("--output", default=None, help="write the JSON report here instead of stdout")
        p.set_defaults(func=cmd_analyze)

    oracle = groups.add_parser("oracle", help="brute-force reference closures", formatter_class=fmt)
    oracle_cmds = oracle.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = oracle_cmds.add_parser("closure", help="print a closure set", formatter_class=fmt)
    _input_args(p)
    p.add_argument("--kind", choices=CLOSURE_KINDS, required=True)
    p.add_argument("--bound", type=int, default=DEFAULT_BOUND, help="maximum number of events")
    p.set_defaults(func=cmd_oracle_closure)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "threads", 1) < 1:
        print("tracepredict: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, TraceError, ValueError) as exc:
        print(f"tracepredict: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
