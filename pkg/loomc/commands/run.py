"""`loomc run` controller. No business logic here."""

from __future__ import annotations

import argparse

from loomc.commands.compile import add_pass_arguments, compile_options, print_op_stats
from loomc.services.pipeline import Compiler
from loomc.utils.responses import fail, ok


def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("model", help="model.json manifest, a directory holding one, or a plan file")
    parser.add_argument("inputs", nargs="*", help="input payload files (.tensor), one per entry input")
    parser.add_argument("--out-dir", default=".", help="directory for output_<i>.tensor (default: .)")
    parser.add_argument("--verify", action="store_true", help="check outputs against the reference evaluator")
    add_pass_arguments(parser)


def handle(compiler: Compiler, args: argparse.Namespace) -> int:
    options = compile_options(args)
    source = compiler.load(args.model)
    result = compiler.run(source, args.inputs, args.out_dir, options, verify=args.verify)
    if args.print_op_stats and result.compilation is not None:
        print_op_stats(result.compilation)

    lines = [
        f"compile-seconds: {result.compile_seconds:.3f}",
        f"run-seconds: {result.run_seconds:.3f}",
    ]
    for i, (value, path) in enumerate(zip(result.outputs, result.output_paths)):
        lines.append(f"output {i}: {value.type} -> {path}")
    if result.max_abs_diff is not None:
        lines.append(f"max-abs-diff: {result.max_abs_diff:.3e} (tolerance {result.tolerance:.3e})")
    ok("\n".join(lines))

    if not result.verified:
        return fail(
            "verification_failed",
            f"output differs from the reference evaluator by {result.max_abs_diff:.3e}",
            1,
        )
    return 0

