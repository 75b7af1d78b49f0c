"""Seeded image augmentation for transformation-consistency pairs."""

from __future__ import annotations

import math

import torch
from torchvision.transforms import functional as F

from .models import AugmentPolicy


def _uniform(generator: torch.Generator, low: float, high: float) -> float:
    return low + (high - low) * float(torch.rand(1, generator=generator))


def _crop_box(
    height: int, width: int, policy: AugmentPolicy, generator: torch.Generator
) -> tuple[int, int, int, int]:
    """Random-resized-crop box ``(top, left, h, w)``; full image after 10 misses."""
    area = height * width
    log_low, log_high = math.log(policy.crop_ratio[0]), math.log(policy.crop_ratio[1])
    for _ in range(10):
        target = area * _uniform(generator, *policy.crop_scale)
        ratio = math.exp(_uniform(generator, log_low, log_high))
        w = round(math.sqrt(target * ratio))
        h = round(math.sqrt(target / ratio))
        if 0 < w <= width and 0 < h <= height:
            top = int(torch.randint(0, height - h + 1, (1,), generator=generator))
            left = int(torch.randint(0, width - w + 1, (1,), generator=generator))
            return top, left, h, w
    return 0, 0, height, width


def augment_with(
    image: torch.Tensor, policy: AugmentPolicy, generator: torch.Generator
) -> torch.Tensor:
    """Augment one channels-last image in [0, 1] drawing from ``generator``.

    The output has the input's size: the crop is resized back.
    """
    if policy.is_identity:
        return image.clone()
    height, width = image.shape[0], image.shape[1]
    chw = image.permute(2, 0, 1)

    top, left, h, w = _crop_box(height, width, policy, generator)
    if (h, w) != (height, width):
        chw = F.resized_crop(chw, top, left, h, w, [height, width], antialias=True)
    if float(torch.rand(1, generator=generator)) < policy.flip_probability:
        chw = F.hflip(chw)
    if policy.brightness > 0:
        chw = F.adjust_brightness(chw, _uniform(generator, 1 - policy.brightness, 1 + policy.brightness))
    if policy.contrast > 0:
        chw = F.adjust_contrast(chw, _uniform(generator, 1 - policy.contrast, 1 + policy.contrast))
    return chw.permute(1, 2, 0).contiguous()


def augment(image: torch.Tensor, policy: AugmentPolicy, seed: int) -> torch.Tensor:
    """Augment one channels-last image; the same seed gives the same transform.

    Parameters
    ----------
    image : torch.Tensor
        Pixels of shape (H, W, C) in [0, 1]
    policy : AugmentPolicy
        Crop, flip and jitter ranges
    seed : int
        Seed of the random draws

    Returns
    -------
    torch.Tensor
        Augmented image of shape (H, W, C)
    """
    generator = torch.Generator().manual_seed(seed)
    return augment_with(image, policy, generator)


def augment_batch(
    images: torch.Tensor, policy: AugmentPolicy, generator: torch.Generator
) -> torch.Tensor:
    """Independently augment every image of a (batch, H, W, C) tensor."""
    return torch.stack([augment_with(image, policy, generator) for image in images])
