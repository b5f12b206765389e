#!/usr/bin/env python3
"""Write a synthetic raw-stage feature CSV for pipeline walkthroughs.

The corpus mimics extractor output: grouped 512-dim vectors in three
separable classes, so the full train-compression / prepare / train chain
can run without any image data.
"""

import argparse

from qbm.pipeline import save_features
from qbm.synthetic import separable_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="features.csv")
    parser.add_argument("--groups-per-class", type=int, default=50)
    parser.add_argument("--images-per-group", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    records = separable_corpus(groups_per_class=args.groups_per_class,
                               images_per_group=args.images_per_group,
                               seed=args.seed)
    save_features(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")


if __name__ == "__main__":
    main()
