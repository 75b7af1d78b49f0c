"""Bottleneck adaptors and the single-set adapted backbone."""

from __future__ import annotations

import logging

import torch
import torch.nn.functional as F
from torch import nn

from ..backbone import VisionTransformer, ensure_finite, vit_layer_forward
from ..errors import ConfigError, ShapeMismatchError
from .models import AdaptorProvenance

logger = logging.getLogger(__name__)


class AdaptorLayer(nn.Module):
    """Down-projection, GELU, up-projection, with a residual add in `forward`.

    Parameters
    ----------
    dim : int
        Token width D
    bottleneck_dim : int
        Hidden width D' (must be smaller than D)
    gelu_approximate : str, optional
        GELU variant passed to `torch.nn.functional.gelu` (default: "none")
    zero_init_up : bool, optional
        Zero the up-projection so the layer starts as the identity
        (default: True)
    init_std : float, optional
        Truncated-normal std of the random weights (default: 0.02)
    """

    def __init__(
        self,
        dim: int,
        bottleneck_dim: int,
        gelu_approximate: str = "none",
        zero_init_up: bool = True,
        init_std: float = 0.02,
    ) -> None:
        super().__init__()
        if not 0 < bottleneck_dim < dim:
            raise ConfigError(
                f"Adaptor bottleneck {bottleneck_dim} must satisfy 0 < D' < D = {dim}",
                {"dim": dim, "bottleneck_dim": bottleneck_dim},
            )
        self.dim = dim
        self.bottleneck_dim = bottleneck_dim
        self.gelu_approximate = gelu_approximate
        self.down = nn.Linear(dim, bottleneck_dim)
        self.up = nn.Linear(bottleneck_dim, dim)
        nn.init.trunc_normal_(self.down.weight, std=init_std)
        nn.init.zeros_(self.down.bias)
        if zero_init_up:
            nn.init.zeros_(self.up.weight)
        else:
            nn.init.trunc_normal_(self.up.weight, std=init_std)
        nn.init.zeros_(self.up.bias)

    def delta(self, h: torch.Tensor) -> torch.Tensor:
        """Residual-free branch ``Up(GELU(Down(h)))``."""
        return self.up(F.gelu(self.down(h), approximate=self.gelu_approximate))

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        return self.delta(h) + h


def adaptor_forward(h_bar: torch.Tensor, layer: AdaptorLayer) -> torch.Tensor:
    """Standalone adaptor step ``Up(GELU(Down(h_bar))) + h_bar``.

    Raises
    ------
    ShapeMismatchError
        If the token width differs from the adaptor's
    NumericalDivergenceError
        If the input holds NaN or Inf
    """
    if h_bar.shape[-1] != layer.dim:
        raise ShapeMismatchError("tokens", expected=layer.dim, actual=h_bar.shape[-1])
    ensure_finite(h_bar, "adaptor input")
    return layer(h_bar)


class AdaptorSet(nn.Module):
    """One adaptor per transformer layer, trained on one pseudo-label set."""

    def __init__(
        self,
        num_layers: int,
        dim: int,
        bottleneck_dim: int,
        granularity: int = 0,
        gelu_approximate: str = "none",
        zero_init_up: bool = True,
    ) -> None:
        super().__init__()
        self.granularity = granularity
        self.layers = nn.ModuleList(
            AdaptorLayer(dim, bottleneck_dim, gelu_approximate, zero_init_up)
            for _ in range(num_layers)
        )
        self.provenance: AdaptorProvenance | None = None

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return self.layers[0].dim

    @property
    def bottleneck_dim(self) -> int:
        return self.layers[0].bottleneck_dim

    @property
    def gelu_approximate(self) -> str:
        return self.layers[0].gelu_approximate

    def freeze(self) -> AdaptorSet:
        self.requires_grad_(False)
        return self.eval()

    @classmethod
    def for_backbone(
        cls,
        backbone: VisionTransformer,
        bottleneck_dim: int,
        granularity: int = 0,
        zero_init_up: bool = True,
    ) -> AdaptorSet:
        """Adaptor set shaped for ``backbone``."""
        config = backbone.config
        return cls(
            config.num_layers,
            config.dim,
            bottleneck_dim,
            granularity=granularity,
            gelu_approximate=config.gelu_approximate,
            zero_init_up=zero_init_up,
        )


class AdaptedViT(nn.Module):
    """Frozen backbone with one adaptor set: ``h^l = A^l(h_bar^l) + h_bar^l``."""

    def __init__(self, backbone: VisionTransformer, adaptors: AdaptorSet) -> None:
        super().__init__()
        if adaptors.num_layers != backbone.config.num_layers:
            raise ShapeMismatchError(
                "adaptor layers",
                expected=backbone.config.num_layers,
                actual=adaptors.num_layers,
            )
        if adaptors.dim != backbone.config.dim:
            raise ShapeMismatchError("adaptor width", expected=backbone.config.dim, actual=adaptors.dim)
        self.backbone = backbone
        self.adaptors = adaptors

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        h = self.backbone.embed(images)
        for index, (block, adaptor) in enumerate(
            zip(self.backbone.blocks, self.adaptors.layers, strict=True), start=1
        ):
            _, h_bar = vit_layer_forward(h, block, index)
            h = adaptor(h_bar)
            ensure_finite(h, "adaptor", index)
        return self.backbone.readout(h)
