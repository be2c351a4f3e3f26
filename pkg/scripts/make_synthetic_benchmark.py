#!/usr/bin/env python3
"""Write the synthetic benchmark files (dataset, corpus, qrels, embeddings, split)."""

import argparse
from pathlib import Path

from clarifyir import synthetic


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("benchmark"), help="output directory")
    parser.add_argument("--seed", type=int, default=13, help="split seed")
    args = parser.parse_args()

    paths = synthetic.write_benchmark(args.out, seed=args.seed)
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
