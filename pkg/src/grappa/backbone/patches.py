"""Image <-> patch-sequence reshaping."""

from __future__ import annotations

import torch

from ..errors import ShapeMismatchError


def patchify(images: torch.Tensor, patch_size: int) -> torch.Tensor:
    """Split channels-last images into flattened patches.

    Parameters
    ----------
    images : torch.Tensor
        Images of shape (batch, H, W, C)
    patch_size : int
        Patch side P

    Returns
    -------
    torch.Tensor
        Patches of shape (batch, T, P*P*C) with T = HW / P^2, ordered
        row-major over the patch grid; each patch is flattened as (P, P, C)

    Raises
    ------
    ShapeMismatchError
        If the input is not 4-D or H, W are not divisible by P
    """
    if images.ndim != 4:
        raise ShapeMismatchError("images", expected="(batch, H, W, C)", actual=tuple(images.shape))
    batch, height, width, channels = images.shape
    if height % patch_size or width % patch_size:
        raise ShapeMismatchError(
            "images",
            expected=f"H and W divisible by {patch_size}",
            actual=(height, width),
        )
    rows, cols = height // patch_size, width // patch_size
    x = images.reshape(batch, rows, patch_size, cols, patch_size, channels)
    x = x.permute(0, 1, 3, 2, 4, 5)
    return x.reshape(batch, rows * cols, patch_size * patch_size * channels)


def unpatchify(
    patches: torch.Tensor, patch_size: int, height: int, width: int
) -> torch.Tensor:
    """Inverse of `patchify`.

    Parameters
    ----------
    patches : torch.Tensor
        Patches of shape (batch, T, P*P*C)
    patch_size : int
        Patch side P
    height, width : int
        Output image size

    Returns
    -------
    torch.Tensor
        Images of shape (batch, H, W, C)
    """
    batch, num_patches, patch_dim = patches.shape
    rows, cols = height // patch_size, width // patch_size
    if rows * cols != num_patches or patch_dim % (patch_size * patch_size):
        raise ShapeMismatchError(
            "patches",
            expected=(rows * cols, f"k*{patch_size * patch_size}"),
            actual=(num_patches, patch_dim),
        )
    channels = patch_dim // (patch_size * patch_size)
    x = patches.reshape(batch, rows, cols, patch_size, patch_size, channels)
    x = x.permute(0, 1, 3, 2, 4, 5)
    return x.reshape(batch, height, width, channels)
