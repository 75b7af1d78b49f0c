"""Norm-softmax (cosine) classifier used to train adaptors on pseudo-labels."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import ConfigError, NumericalDivergenceError


def _unit_rows(x: torch.Tensor, what: str) -> torch.Tensor:
    norms = x.norm(dim=-1, keepdim=True)
    if bool((norms == 0).any()):
        raise NumericalDivergenceError(f"norm-softmax: zero-norm {what}, cosine undefined")
    return x / norms


class NormSoftmaxHead(nn.Module):
    """Class weights ``theta`` of shape (k, D); logits are ``gamma * cos``.

    Only used during adaptor training; it is never stored with the adaptors.
    """

    def __init__(self, num_classes: int, dim: int, gamma: float = 25.0) -> None:
        super().__init__()
        self.gamma = gamma
        self.weight = nn.Parameter(torch.empty(num_classes, dim))
        nn.init.trunc_normal_(self.weight, std=0.02)

    @property
    def num_classes(self) -> int:
        return int(self.weight.shape[0])

    def cosine(self, z: torch.Tensor) -> torch.Tensor:
        """Cosine similarity of every feature to every class row, in [-1, 1]."""
        return _unit_rows(z, "feature") @ _unit_rows(self.weight, "class row").T

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.gamma * self.cosine(z)


def norm_softmax_loss(z: torch.Tensor, labels: torch.Tensor, head: NormSoftmaxHead) -> torch.Tensor:
    """Mean of ``-log softmax(gamma * cos)[y]`` over the batch.

    Parameters
    ----------
    z : torch.Tensor
        Features of shape (batch, D)
    labels : torch.Tensor
        Class ids in [0, k)
    head : NormSoftmaxHead
        Class weights and scale

    Returns
    -------
    torch.Tensor
        Scalar loss

    Raises
    ------
    ConfigError
        If a label falls outside [0, k)
    NumericalDivergenceError
        If a feature or class row has zero norm
    """
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= head.num_classes):
        raise ConfigError(f"Labels must lie in [0, {head.num_classes})")
    return F.cross_entropy(head(z), labels)
