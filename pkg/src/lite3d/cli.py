"""lite3d command line: build, profile, infer, bench, verify.

Exit status is 0 on success, 1 on a runtime or verification failure and 2 on
a usage error (bad flags, unknown architecture, unsupported width).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analyzer import emit_report, validate_report
from .harness import aggregate_clip_scores, bench, make_clip
from .io import load_clip, load_weights, save_weights
from .models import ARCHS, DEFAULT_CLASSES, ModelGraph, WidthError, build_model, forward, init_weights
from .verify import run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", required=True, choices=ARCHS)
    p.add_argument("--width", type=float, default=None, help="width multiplier (default 1.0)")
    p.add_argument("--classes", type=_positive, default=DEFAULT_CLASSES)
    p.add_argument("--frames", type=_positive, default=16)
    p.add_argument("--size", type=_positive, default=112)
    p.add_argument("--allow-any-width", action="store_true", help="accept widths outside the published set")


def _out_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="write here instead of stdout")


def _weights_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", type=Path, default=None, help="E3DW weight file; seeded init otherwise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive, default=None)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lite3d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="initialize weights and write them as E3DW")
    _model_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("profile", help="static shapes, params, MACs and structure as JSON")
    _model_flags(p)
    _out_flag(p)

    p = sub.add_parser("infer", help="class scores for a clip file or a seeded clip")
    _model_flags(p)
    _weights_flags(p)
    _out_flag(p)
    p.add_argument("--clip", type=Path, default=None, help="E3DW clip file (n, c, d, h, w)")
    p.add_argument("--clips", type=_positive, default=1, help="number of seeded clips when --clip is absent")
    p.add_argument("--topk", type=_positive, default=None)

    p = sub.add_parser("bench", help="throughput in clips per second")
    _model_flags(p)
    _weights_flags(p)
    _out_flag(p)
    p.add_argument("--batch", type=_positive, default=8)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--force", action="store_true", help="run even if the kernel self-check fails")
    p.add_argument("--verify-cases", type=_positive, default=20)

    p = sub.add_parser("verify", help="randomized equivalence against the loop-level oracles")
    p.add_argument("--cases", type=_positive, default=200)
    p.add_argument("--block-cases", type=_positive, default=None)
    p.add_argument("--seed", type=int, default=0)
    _out_flag(p)
    return parser


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text + "\n")
    else:
        out.write_text(text + "\n")


def _graph(args: argparse.Namespace) -> ModelGraph:
    try:
        return build_model(args.arch, args.width, args.classes, (3, args.frames, args.size, args.size),
                           allow_any_width=args.allow_any_width)
    except WidthError as e:
        raise UsageError(str(e)) from e


def _weighted(args: argparse.Namespace) -> ModelGraph:
    graph = _graph(args)
    if args.weights is not None:
        return load_weights(args.weights, graph)
    return init_weights(graph, seed=args.seed)


def cmd_build(args: argparse.Namespace) -> int:
    graph = init_weights(_graph(args), seed=args.seed)
    save_weights(args.out, graph)
    print(f"wrote {len(graph.weights)} tensors for {graph.name} to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_profile(args: argparse.Namespace) -> int:
    _emit(emit_report(_graph(args)).to_json(), args.out)
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    graph = _weighted(args)
    if args.clip is not None:
        clips = load_clip(args.clip)
    else:
        clips = make_clip((args.clips,) + tuple(graph.input_shape), seed=args.seed)
    scores = forward(graph, clips, threads=args.threads)
    label, probs = aggregate_clip_scores(scores)
    doc = {"model": graph.name, "clips": int(scores.shape[0]), "label": label}
    if args.topk is not None:
        order = np.argsort(-probs, kind="stable")[: args.topk]
        doc["topk"] = [{"class": int(i), "prob": float(probs[i])} for i in order]
    else:
        doc["scores"] = scores.astype(float).tolist()
        doc["probabilities"] = probs.tolist()
    _emit(json.dumps(doc), args.out)
    return EXIT_OK


def _print_results(results, stream) -> bool:
    for r in results:
        print(r.line(), file=stream)
    return all(r.passed for r in results)


def cmd_bench(args: argparse.Namespace) -> int:
    if args.iters < 3 or args.warmup < 0:
        raise UsageError("bench needs --iters >= 3 and --warmup >= 0")
    if not _print_results(run_suite(args.verify_cases, seed=args.seed), sys.stderr) and not args.force:
        print("kernel self-check failed; refusing to benchmark (use --force to override)", file=sys.stderr)
        return EXIT_FAIL
    graph = _weighted(args)
    stats = bench(graph, batch=args.batch, warmup=args.warmup, iters=args.iters, threads=args.threads,
                  seed=args.seed)
    doc = emit_report(graph, stats).to_dict()
    validate_report(doc)
    _emit(json.dumps(doc, indent=2), args.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_suite(args.cases, args.block_cases, seed=args.seed)
    ok = _print_results(results, sys.stdout)
    if args.out is not None:
        args.out.write_text(json.dumps([asdict(r) for r in results], indent=2) + "\n")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"build": cmd_build, "profile": cmd_profile, "infer": cmd_infer, "bench": cmd_bench,
            "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"lite3d: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as e:
        print(f"lite3d: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
