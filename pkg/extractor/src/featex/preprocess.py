"""Image loading and normalization ahead of the frozen backbone.

The rule is fixed: resize so the shorter side hits ``RESIZE_SHORTER``,
center-crop to ``CROP`` x ``CROP``, replicate grayscale to three channels,
then apply the standard ImageNet per-channel normalization.
"""

import numpy as np
import torch
from PIL import Image

RESIZE_SHORTER = 256
CROP = 224
CHANNEL_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
CHANNEL_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

DESCRIPTION = (
    f"resize shorter side to {RESIZE_SHORTER}, center crop {CROP}x{CROP}, "
    "grayscale replicated to 3 channels, ImageNet channel normalization"
)


def load_image(path) -> Image.Image:
    with Image.open(path) as img:
        img.load()
        # single-channel and palette inputs come out as replicated RGB
        return img.convert("RGB")


def to_tensor(img: Image.Image) -> torch.Tensor:
    """(3, CROP, CROP) normalized float32 tensor for one image."""
    scale = RESIZE_SHORTER / min(img.size)
    resized = img.resize((round(img.width * scale), round(img.height * scale)),
                         Image.Resampling.BILINEAR)
    left = (resized.width - CROP) // 2
    top = (resized.height - CROP) // 2
    cropped = resized.crop((left, top, left + CROP, top + CROP))
    arr = np.asarray(cropped, dtype=np.float32) / 255.0
    arr = (arr - CHANNEL_MEAN) / CHANNEL_STD
    return torch.from_numpy(arr.transpose(2, 0, 1))
