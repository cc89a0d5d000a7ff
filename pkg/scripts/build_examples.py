"""Regenerate the bundled example models under models/.

The MNIST-class CNN carries deterministic pattern weights as `.tensor` payloads;
the checked-in copy under models/mnist_small is what `--seed 0` produces.

Usage:
  python scripts/build_examples.py [--out models] [--seed 0] [--only mnist_small]
"""

from __future__ import annotations

import argparse
import logging
import pathlib
import sys
from collections.abc import Sequence

from tqdm import tqdm

PROJECT_ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(PROJECT_ROOT))

from loomc.services.model_importer import export_model  # noqa: E402
from loomc.services.model_zoo import ZOO, mnist_small  # noqa: E402

logger = logging.getLogger(__name__)


def main(argv: Sequence[str] | None = None) -> int:
    """Export every zoo model to <out>/<name>/model.json."""

    parser = argparse.ArgumentParser(description="Export the bundled example models")
    parser.add_argument("--out", dest="out_dir", type=pathlib.Path, default=PROJECT_ROOT / "models")
    parser.add_argument("--seed", type=int, default=0, help="weight seed for mnist_small")
    parser.add_argument("--only", choices=sorted(ZOO), action="append", default=None)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")

    names = args.only or sorted(ZOO)
    for name in tqdm(names, desc="Exporting"):
        module = mnist_small(args.seed) if name == "mnist_small" else ZOO[name]()
        result = export_model(module, args.out_dir / name)
        logger.info("%s: %s (%d payload(s))", name, result.manifest_path, len(result.payload_paths))

    return 0


if __name__ == "__main__":
    raise SystemExit(main())
