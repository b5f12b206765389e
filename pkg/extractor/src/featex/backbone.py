"""Frozen ResNet-18 trunk producing 512-dim pooled features."""

from pathlib import Path

import torch
from torch import nn
from torchvision.models import ResNet18_Weights, resnet18

from .errors import ExtractError

FEATURE_DIM = 512


def build_backbone(weights: str = "imagenet", seed: int = 0):
    """(model, identifier) with the classification head removed.

    ``weights`` is ``"imagenet"`` for the pretrained trunk, ``"random"`` for
    a seeded untrained one, or a path to a state-dict file.  The returned
    model is in eval mode with gradients disabled.
    """
    if weights == "imagenet":
        try:
            net = resnet18(weights=ResNet18_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise ExtractError(
                "could not load the pretrained weights (offline?): "
                f"{exc}; pass --weights PATH to use a local state-dict file "
                "or --weights random for an untrained trunk"
            ) from exc
        identifier = "resnet18-imagenet"
    elif weights == "random":
        torch.manual_seed(seed)
        net = resnet18(weights=None)
        identifier = f"resnet18-random-seed{seed}"
    else:
        path = Path(weights)
        if not path.exists():
            raise ExtractError(f"weights file {path} does not exist")
        net = resnet18(weights=None)
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
            net.load_state_dict(state)
        except Exception as exc:
            raise ExtractError(f"could not load weights from {path}: {exc}") from exc
        identifier = f"resnet18-file-{path.name}"
    net.fc = nn.Identity()
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net, identifier


def features_for_batch(net, batch: torch.Tensor) -> torch.Tensor:
    with torch.no_grad():
        out = net(batch)
    if out.ndim != 2 or out.shape[1] != FEATURE_DIM:
        raise ExtractError(f"backbone produced shape {tuple(out.shape)}, "
                           f"expected (N, {FEATURE_DIM})")
    return out
