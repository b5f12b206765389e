"""Folder scan, batched inference and CSV emission.

Output rows are ``group_id,label,f0..f511``, the raw-stage format the
classifier pipeline loads directly.  Row order is sorted by image path, so
the batch size never changes the file.
"""

import csv
import hashlib
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .backbone import FEATURE_DIM, build_backbone, features_for_batch
from .errors import ExtractError
from .preprocess import DESCRIPTION, load_image, to_tensor

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class ExtractionManifest:
    image_count: int
    class_mapping: dict
    model: str
    preprocessing: str
    checksum: str
    skipped: tuple = ()

    def to_json_dict(self) -> dict:
        return {"image_count": self.image_count,
                "class_mapping": dict(self.class_mapping),
                "model": self.model,
                "preprocessing": self.preprocessing,
                "checksum": self.checksum,
                "skipped": list(self.skipped)}


def _is_image(path: Path) -> bool:
    return path.is_file() and not path.name.startswith(".") \
        and path.suffix.lower() in IMAGE_SUFFIXES


def scan_images(image_dir, class_mapping=None):
    """(path, group_id, label) triples sorted by path, plus the mapping.

    Class folders are the directories directly under ``image_dir``; the
    group id of an image is its parent folder's path relative to the root.
    Without an explicit mapping, sorted class-folder names get labels 0..k-1.
    """
    root = Path(image_dir)
    if not root.is_dir():
        raise ExtractError(f"image folder {root} does not exist")
    class_dirs = sorted(p for p in root.iterdir()
                        if p.is_dir() and not p.name.startswith("."))
    if not class_dirs:
        raise ExtractError(f"{root} has no class subfolders")
    if class_mapping is None:
        class_mapping = {p.name: i for i, p in enumerate(class_dirs)}
    entries = []
    for class_dir in class_dirs:
        if class_dir.name not in class_mapping:
            raise ExtractError(f"class folder {class_dir.name!r} missing from "
                               "the label mapping")
        label = int(class_mapping[class_dir.name])
        images = sorted(p for p in class_dir.rglob("*") if _is_image(p))
        if not images:
            raise ExtractError(f"class folder {class_dir} contains no images")
        for img in images:
            group = img.parent.relative_to(root).as_posix()
            entries.append((img, group, label))
    entries.sort(key=lambda e: str(e[0]))
    return entries, dict(class_mapping)


def extract(image_dir, out_csv, class_mapping=None, weights: str = "imagenet",
            seed: int = 0, batch_size: int = 16) -> ExtractionManifest:
    """Run the frozen backbone over a class/group folder tree.

    Unreadable images are skipped with a warning and noted in the manifest;
    everything else lands in ``out_csv``.
    """
    if batch_size < 1:
        raise ExtractError(f"batch_size must be positive, got {batch_size}")
    entries, mapping = scan_images(image_dir, class_mapping)
    net, identifier = build_backbone(weights, seed)
    out = Path(out_csv)
    skipped = []
    written = 0
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group_id", "label"]
                        + [f"f{i}" for i in range(FEATURE_DIM)])
        for start in range(0, len(entries), batch_size):
            chunk = entries[start:start + batch_size]
            tensors, kept = [], []
            for path, group, label in chunk:
                try:
                    tensors.append(to_tensor(load_image(path)))
                except Exception as exc:
                    note = f"{path}: {exc}"
                    warnings.warn(f"skipping unreadable image {note}")
                    skipped.append(note)
                    continue
                kept.append((group, label))
            if not kept:
                continue
            feats = features_for_batch(net, torch.stack(tensors))
            for (group, label), vec in zip(kept, feats):
                writer.writerow([group, label]
                                + [repr(float(v)) for v in vec])
                written += 1
    digest = hashlib.sha256(out.read_bytes()).hexdigest()
    return ExtractionManifest(image_count=written, class_mapping=mapping,
                              model=identifier, preprocessing=DESCRIPTION,
                              checksum=f"sha256:{digest}",
                              skipped=tuple(skipped))
