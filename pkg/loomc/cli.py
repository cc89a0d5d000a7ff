"""Command-line driver: `loomc compile` and `loomc run`."""

from __future__ import annotations

import argparse
from collections.abc import Sequence

from loomc import create_compiler
from loomc.commands import compile as compile_command
from loomc.commands import run as run_command
from loomc.error_handlers import run_guarded

COMMANDS = {
    "compile": (compile_command, "compile a model and print one of its IR levels"),
    "run": (run_command, "compile a model (or load a plan) and interpret it on input payloads"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loomc", description="Multi-level inference compiler")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (module, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        module.add_arguments(sub)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments and dispatch; returns the process exit code (argparse exits 2 on bad usage)."""

    args = build_parser().parse_args(argv)
    module, _ = COMMANDS[args.command]

    def command() -> int:
        return module.handle(create_compiler(), args)

    return run_guarded(command)


if __name__ == "__main__":
    raise SystemExit(main())
