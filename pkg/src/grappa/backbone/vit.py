"""Vision Transformer backbone.

Parameter names follow the timm/DINO layout (``cls_token``, ``pos_embed``,
``blocks.<i>.norm1``, ``blocks.<i>.attn.qkv``, ...), so pretrained state
dicts map onto this module with only the patch projection reshaped.
"""

from __future__ import annotations

import logging

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import NumericalDivergenceError, ShapeMismatchError
from .models import BackboneConfig, TokenTensor
from .patches import patchify

logger = logging.getLogger(__name__)


class MultiHeadSelfAttention(nn.Module):
    """Multi-head self-attention with a fused qkv projection."""

    def __init__(self, dim: int, num_heads: int) -> None:
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.scale = self.head_dim**-0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, N, C = x.shape
        qkv = self.qkv(x).reshape(B, N, 3, self.num_heads, self.head_dim)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        attn = (q * self.scale) @ k.transpose(-2, -1)
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(B, N, C)
        return self.proj(out)


class Mlp(nn.Module):
    """Two-layer MLP with a GELU in between."""

    def __init__(self, dim: int, hidden_dim: int, gelu_approximate: str = "none") -> None:
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, dim)
        self.gelu_approximate = gelu_approximate

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(F.gelu(self.fc1(x), approximate=self.gelu_approximate))


class ViTLayer(nn.Module):
    """Pre-norm transformer layer.

    ``h~ = MSA(LN(h)) + h`` and ``h_bar = MLP(LN(h~)) + h~``.
    """

    def __init__(self, config: BackboneConfig) -> None:
        super().__init__()
        self.norm1 = nn.LayerNorm(config.dim, eps=config.layer_norm_eps)
        self.attn = MultiHeadSelfAttention(config.dim, config.num_heads)
        self.norm2 = nn.LayerNorm(config.dim, eps=config.layer_norm_eps)
        self.mlp = Mlp(config.dim, config.mlp_hidden_dim, config.gelu_approximate)

    def branches(self, h: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Return ``(h~, y)`` where ``y = MLP(LN(h~))`` is the MLP branch."""
        h_tilde = self.attn(self.norm1(h)) + h
        y = self.mlp(self.norm2(h_tilde))
        return h_tilde, y

    def forward(self, h: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h_tilde, y = self.branches(h)
        return h_tilde, y + h_tilde


def ensure_finite(x: torch.Tensor, where: str, layer_index: int | None = None) -> None:
    """Raise NumericalDivergenceError if ``x`` holds NaN or Inf."""
    if not bool(torch.isfinite(x).all()):
        raise NumericalDivergenceError(where, layer_index=layer_index)


def vit_layer_forward(
    h_prev: torch.Tensor, layer: ViTLayer, layer_index: int = 0
) -> tuple[torch.Tensor, torch.Tensor]:
    """Run one transformer layer and return both ``h~`` and ``h_bar``.

    Parameters
    ----------
    h_prev : torch.Tensor
        Tokens of shape (batch, T + 1, D)
    layer : ViTLayer
        Layer parameters
    layer_index : int
        Index used in error messages

    Returns
    -------
    tuple[torch.Tensor, torch.Tensor]
        ``(h~, h_bar)``, both of shape (batch, T + 1, D)

    Raises
    ------
    NumericalDivergenceError
        If either output holds NaN or Inf
    """
    h_tilde, h_bar = layer(h_prev)
    ensure_finite(h_tilde, "attention block", layer_index)
    ensure_finite(h_bar, "MLP block", layer_index)
    return h_tilde, h_bar


class PatchEmbed(nn.Module):
    """Linear projection of flattened patches to the token width."""

    def __init__(self, config: BackboneConfig) -> None:
        super().__init__()
        self.patch_size = config.patch_size
        self.proj = nn.Linear(config.patch_dim, config.dim)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.proj(patchify(images, self.patch_size))


class VisionTransformer(nn.Module):
    """ViT used as a frozen feature extractor and as a host for adaptors."""

    def __init__(self, config: BackboneConfig) -> None:
        super().__init__()
        self.config = config
        self.patch_embed = PatchEmbed(config)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, config.dim))
        self.pos_embed = nn.Parameter(torch.zeros(1, config.num_patches + 1, config.dim))
        self.blocks = nn.ModuleList(ViTLayer(config) for _ in range(config.num_layers))
        self.norm = nn.LayerNorm(config.dim, eps=config.layer_norm_eps)
        self.frozen = False
        self.reset_parameters()

    def reset_parameters(self) -> None:
        """Truncated-normal weights, zero biases, identity LayerNorms."""
        std = self.config.init_std
        nn.init.trunc_normal_(self.cls_token, std=std)
        nn.init.trunc_normal_(self.pos_embed, std=std)
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.trunc_normal_(module.weight, std=std)
                nn.init.zeros_(module.bias)
            elif isinstance(module, nn.LayerNorm):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)

    def freeze(self) -> VisionTransformer:
        """Disable gradients for every parameter and switch to eval mode."""
        self.requires_grad_(False)
        self.frozen = True
        return self.eval()

    def standardize(self, images: torch.Tensor) -> torch.Tensor:
        """Per-channel ``(x - mean) / std`` on channels-last pixels, if configured."""
        if self.config.pixel_mean is not None:
            images = images - images.new_tensor(self.config.pixel_mean)
        if self.config.pixel_std is not None:
            images = images / images.new_tensor(self.config.pixel_std)
        return images

    def embed(self, images: torch.Tensor) -> torch.Tensor:
        """Build ``h^0``: class token + projected patches + position embeddings."""
        expected = (
            self.config.image_height,
            self.config.image_width,
            self.config.channels,
        )
        if tuple(images.shape[1:]) != expected:
            raise ShapeMismatchError("images", expected=expected, actual=tuple(images.shape[1:]))
        tokens = self.patch_embed(self.standardize(images))
        cls = self.cls_token.expand(tokens.shape[0], -1, -1)
        return torch.cat([cls, tokens], dim=1) + self.pos_embed

    def readout(self, h: torch.Tensor) -> torch.Tensor:
        """Image representation ``z = LN(h^L)[class]``."""
        return self.norm(h)[:, 0]

    def forward_tokens(self, images: torch.Tensor) -> list[TokenTensor]:
        """Return ``h^0 .. h^L`` for inspection."""
        h = self.embed(images)
        outputs = [TokenTensor(h, 0)]
        for index, layer in enumerate(self.blocks, start=1):
            _, h = vit_layer_forward(h, layer, index)
            outputs.append(TokenTensor(h, index))
        return outputs

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        h = self.embed(images)
        for index, layer in enumerate(self.blocks, start=1):
            _, h = vit_layer_forward(h, layer, index)
        return self.readout(h)


def extract_feature(images: torch.Tensor, model: nn.Module) -> torch.Tensor:
    """Features of a batch of images, shape (batch, D).

    Works for the plain backbone and for every adapted model built on it.
    """
    return model(images)


@torch.no_grad()
def encode_images(
    model: nn.Module, images: torch.Tensor, batch_size: int = 256
) -> torch.Tensor:
    """Features for a whole image tensor, computed in eval mode in batches."""
    if images.shape[0] == 0:
        raise ShapeMismatchError("images", expected="at least one image", actual=0)
    was_training = model.training
    model.eval()
    try:
        chunks = [
            extract_feature(images[start : start + batch_size], model)
            for start in range(0, images.shape[0], batch_size)
        ]
    finally:
        model.train(was_training)
    return torch.cat(chunks, dim=0)
