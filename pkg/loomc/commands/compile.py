"""`loomc compile` controller. No business logic here."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from loomc.errors import IoError, UsageError
from loomc.models.graph import op_stats
from loomc.services.pipeline import Compilation, CompileOptions, Compiler, EmitLevel, parse_tile
from loomc.utils.responses import ok


def add_pass_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-decompose", action="store_true", help="skip operation decomposition")
    parser.add_argument("--no-rewrite", action="store_true", help="skip graph rewriting")
    parser.add_argument("--no-constprop", action="store_true", help="skip constant propagation")
    parser.add_argument(
        "--tile",
        action="append",
        default=[],
        metavar="OP:SIZE",
        help="block the outermost loops of every OP nest by SIZE (repeatable)",
    )
    parser.add_argument("--print-op-stats", action="store_true", help="print per-kind op counts to stderr")


def compile_options(args: argparse.Namespace) -> CompileOptions:
    return CompileOptions(
        decompose=not args.no_decompose,
        rewrite=not args.no_rewrite,
        constprop=not args.no_constprop,
        tiles=tuple(parse_tile(spec) for spec in args.tile),
    )


def print_op_stats(compilation: Compilation) -> None:
    module = compilation.optimized or compilation.graph
    stats = op_stats(module)
    width = max((len(kind) for kind in stats), default=4)
    sys.stderr.write(f"{'op':<{width}}  count\n")
    for kind, count in stats.items():
        sys.stderr.write(f"{kind:<{width}}  {count:>5}\n")
    sys.stderr.write(f"{'total':<{width}}  {sum(stats.values()):>5}\n")


def print_pass_report(compilation: Compilation) -> None:
    if compilation.report is None:
        return
    for result in compilation.report.results:
        fired = ", ".join(f"{name}={n}" for name, n in sorted(result.fired.items()))
        sys.stderr.write(
            f"{result.name}: {result.ops_before} -> {result.ops_after} ops, "
            f"{result.rewrites} rewrite(s), {result.sweeps} sweep(s), {result.elapsed_ms:.3f} ms"
            + (f" [{fired}]" if fired else "")
            + "\n"
        )


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("model", help="model.json manifest, a directory holding one, or a plan file")
    parser.add_argument(
        "--emit",
        choices=[level.value for level in EmitLevel],
        default=EmitLevel.AFFINE.value,
        help="abstraction level to print (default: affine)",
    )
    parser.add_argument("--output", "-o", help="write to this file instead of stdout")
    parser.add_argument("--verbose-passes", action="store_true", help="print per-pass statistics to stderr")
    add_pass_arguments(parser)


def handle(compiler: Compiler, args: argparse.Namespace) -> int:
    level = EmitLevel(args.emit)
    options = compile_options(args)
    source = compiler.load(args.model)

    if source.program is not None:
        if level not in (EmitLevel.AFFINE, EmitLevel.PLAN):
            raise UsageError(message=f"a plan file can only be emitted as affine or plan, not {level.value}")
        compilation = Compilation(program=source.program)
    else:
        assert source.graph is not None
        compilation = compiler.compile(source.graph, options, level)
        if args.print_op_stats:
            print_op_stats(compilation)
        if args.verbose_passes:
            print_pass_report(compilation)

    text = compiler.emit(compilation, level)
    if args.output:
        path = Path(args.output)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoError(message=f"cannot write {path}: {exc.strerror or exc}") from exc
        return 0
    return ok(text, end="")
