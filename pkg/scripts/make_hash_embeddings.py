#!/usr/bin/env python3
"""Build an embedding file for a dataset from its own text.

Questions are embedded from their text, images from their aspect
annotations, using the deterministic feature-hash embedder. Useful for
running the multimodal pipeline on datasets that ship without vectors.
"""

import argparse
from pathlib import Path

import numpy as np

from clarifyir import dataset as ds
from clarifyir import multimodal as mm


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", type=Path, required=True)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    data = ds.load_dataset(args.dataset)
    vectors: dict[str, np.ndarray] = {}
    skipped = 0
    for question in data.questions:
        try:
            vectors[question.id] = mm.hash_embed(question.text, args.dim, args.seed)
        except ValueError:
            skipped += 1
            continue
        for image in question.images:
            try:
                vectors[image.id] = mm.hash_embed(image.aspect, args.dim, args.seed)
            except ValueError:
                skipped += 1
    mm.save_embeddings(mm.EmbeddingStore(args.dim, vectors), args.out)
    print(f"wrote {len(vectors)} vectors (dim {args.dim}) to {args.out}; {skipped} too short to embed")


if __name__ == "__main__":
    main()
