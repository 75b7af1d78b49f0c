"""Query-key attention over adaptor outputs (no value projection)."""

from __future__ import annotations

import math
from collections.abc import Sequence

import torch
from torch import nn

from ..errors import ShapeMismatchError


class FusionLayer(nn.Module):
    """Per-layer ``Q`` and ``K`` projections (D x D, no bias).

    ``Q`` starts at zero, which makes the attention uniform, and ``K`` at the
    identity, so the first gradient step on ``Q`` is not zero.
    """

    def __init__(
        self,
        dim: int,
        layer_index: int = 0,
        include_class_token: bool = True,
        scale_logits: bool = True,
    ) -> None:
        super().__init__()
        self.dim = dim
        self.layer_index = layer_index
        self.include_class_token = include_class_token
        self.scale_logits = scale_logits
        self.q = nn.Linear(dim, dim, bias=False)
        self.k = nn.Linear(dim, dim, bias=False)
        with torch.no_grad():
            self.q.weight.zero_()
            self.k.weight.copy_(torch.eye(dim))


def pool_tokens(x: torch.Tensor, include_class_token: bool = True) -> torch.Tensor:
    """Mean over the token axis (second to last); row 0 is the class token."""
    if not include_class_token:
        x = x[..., 1:, :]
    return x.mean(dim=-2)


def stack_adaptor_outputs(
    adaptor_outputs: Sequence[torch.Tensor], mlp_branch: torch.Tensor
) -> torch.Tensor:
    """``U`` of shape (batch, N, T + 1, D): row i is ``A_i(h_bar) + MLP(LN(h~))``."""
    if not adaptor_outputs:
        raise ShapeMismatchError("adaptor outputs", expected="N >= 1", actual=0)
    return torch.stack([delta + mlp_branch for delta in adaptor_outputs], dim=1)


def fusion_attention(h_bar: torch.Tensor, stack: torch.Tensor, layer: FusionLayer) -> torch.Tensor:
    """Attention ``alpha`` of shape (batch, N) over the adaptor stack.

    Parameters
    ----------
    h_bar : torch.Tensor
        Layer output tokens of shape (batch, T + 1, D)
    stack : torch.Tensor
        Adaptor stack ``U`` of shape (batch, N, T + 1, D)
    layer : FusionLayer
        Projections and pooling flags

    Returns
    -------
    torch.Tensor
        ``softmax((Q pool(h_bar)) . (K pool(U_i)) / sqrt(D))`` over i
    """
    if stack.ndim != 4 or stack.shape[0] != h_bar.shape[0] or stack.shape[2:] != h_bar.shape[1:]:
        raise ShapeMismatchError(
            "adaptor stack",
            expected=(h_bar.shape[0], "N", *h_bar.shape[1:]),
            actual=tuple(stack.shape),
        )
    query = layer.q(pool_tokens(h_bar, layer.include_class_token))
    keys = layer.k(pool_tokens(stack, layer.include_class_token))
    logits = torch.einsum("bd,bnd->bn", query, keys)
    if layer.scale_logits:
        logits = logits / math.sqrt(layer.dim)
    return logits.softmax(dim=-1)


def _mlp_branch(
    h_tilde: torch.Tensor, h_bar: torch.Tensor, mlp_branch: torch.Tensor | None
) -> torch.Tensor:
    return h_bar - h_tilde if mlp_branch is None else mlp_branch


def combine(stack: torch.Tensor, alpha: torch.Tensor, h_tilde: torch.Tensor) -> torch.Tensor:
    """``sum_i alpha_i U_i + h~`` with per-image weights broadcast over tokens."""
    return torch.einsum("bn,bntd->btd", alpha, stack) + h_tilde


def fuse_layer(
    h_tilde: torch.Tensor,
    h_bar: torch.Tensor,
    adaptor_outputs: Sequence[torch.Tensor],
    layer: FusionLayer,
    mlp_branch: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Attention-weighted fusion of one layer's adaptor outputs.

    Parameters
    ----------
    h_tilde : torch.Tensor
        Attention-block output ``h~`` of shape (batch, T + 1, D)
    h_bar : torch.Tensor
        Layer output ``h_bar`` of shape (batch, T + 1, D)
    adaptor_outputs : Sequence[torch.Tensor]
        ``A_i(h_bar)`` for every adaptor set (residual-free)
    layer : FusionLayer
        Fusion projections of this layer
    mlp_branch : torch.Tensor | None, optional
        ``MLP(LN(h~))``; taken as ``h_bar - h~`` when omitted

    Returns
    -------
    tuple[torch.Tensor, torch.Tensor]
        Fused tokens ``sum_i alpha_i U_i + h~`` and the attention ``alpha``
    """
    stack = stack_adaptor_outputs(adaptor_outputs, _mlp_branch(h_tilde, h_bar, mlp_branch))
    alpha = fusion_attention(h_bar, stack, layer)
    return combine(stack, alpha, h_tilde), alpha


def avg_fuse_layer(
    h_tilde: torch.Tensor,
    h_bar: torch.Tensor,
    adaptor_outputs: Sequence[torch.Tensor],
    mlp_branch: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """`fuse_layer` with ``alpha`` fixed to ``1 / N``."""
    stack = stack_adaptor_outputs(adaptor_outputs, _mlp_branch(h_tilde, h_bar, mlp_branch))
    batch, n = stack.shape[0], stack.shape[1]
    alpha = torch.full((batch, n), 1.0 / n, dtype=stack.dtype, device=stack.device)
    return combine(stack, alpha, h_tilde), alpha
