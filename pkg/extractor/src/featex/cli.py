"""Command-line entry point: image folder in, feature CSV plus manifest out."""

import argparse
import json
import sys
from pathlib import Path

from .errors import ExtractError
from .extract import extract


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Extract 512-dim frozen-CNN features from a class/group "
                    "image folder tree into a CSV.")
    parser.add_argument("--images", required=True,
                        help="root folder with per-class subfolders")
    parser.add_argument("--out", required=True, help="output feature CSV")
    parser.add_argument("--labels",
                        help="JSON file mapping class folder names to integer "
                             "labels (default: sorted folder order)")
    parser.add_argument("--weights", default="imagenet",
                        help="'imagenet', 'random', or a state-dict path")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for --weights random")
    parser.add_argument("--batch-size", type=int, default=16)
    args = parser.parse_args(argv)
    try:
        mapping = None
        if args.labels:
            with open(args.labels, encoding="utf-8") as fh:
                mapping = json.load(fh)
            if not isinstance(mapping, dict):
                raise ExtractError(f"{args.labels} must hold a name-to-label "
                                   "JSON object")
        manifest = extract(args.images, args.out, mapping,
                           weights=args.weights, seed=args.seed,
                           batch_size=args.batch_size)
    except ExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest_path = Path(args.out).parent / "manifest.json"
    with manifest_path.open("w", encoding="utf-8") as fh:
        json.dump(manifest.to_json_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {manifest.image_count} rows to {args.out} "
          f"({len(manifest.skipped)} skipped)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
