"""Tests for bottleneck adaptors and the adapted backbone."""

from __future__ import annotations

import pytest
import torch

from grappa.adaptors import AdaptedViT, AdaptorLayer, AdaptorSet, adaptor_forward
from grappa.errors import ConfigError, NumericalDivergenceError, ShapeMismatchError


class TestAdaptorLayer:
    """Test a single adaptor."""

    def test_zero_init_is_identity(self):
        layer = AdaptorLayer(16, 4)
        h = torch.randn(2, 5, 16)

        torch.testing.assert_close(adaptor_forward(h, layer), h)

    def test_matches_formula(self):
        layer = AdaptorLayer(16, 4, zero_init_up=False)
        h = torch.randn(3, 5, 16)

        expected = layer.up(torch.nn.functional.gelu(layer.down(h))) + h

        torch.testing.assert_close(adaptor_forward(h, layer), expected)

    def test_acts_per_token(self):
        layer = AdaptorLayer(16, 4, zero_init_up=False)
        h = torch.randn(1, 5, 16)

        torch.testing.assert_close(adaptor_forward(h, layer)[:, 2], layer(h[:, 2]))

    @pytest.mark.parametrize("bottleneck", [0, 16, 20])
    def test_bottleneck_must_be_smaller(self, bottleneck):
        with pytest.raises(ConfigError):
            AdaptorLayer(16, bottleneck)

    def test_width_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            adaptor_forward(torch.randn(1, 5, 8), AdaptorLayer(16, 4))

    def test_non_finite_input(self):
        h = torch.randn(1, 5, 16)
        h[0, 1, 2] = float("inf")

        with pytest.raises(NumericalDivergenceError):
            adaptor_forward(h, AdaptorLayer(16, 4))


class TestAdaptedViT:
    """Test the backbone with one adaptor set."""

    def test_zero_init_matches_backbone(self, tiny_backbone, tiny_images):
        adaptors = AdaptorSet.for_backbone(tiny_backbone, bottleneck_dim=4)

        model = AdaptedViT(tiny_backbone, adaptors)

        torch.testing.assert_close(model(tiny_images), tiny_backbone(tiny_images))

    def test_trained_adaptor_changes_features(self, tiny_backbone, tiny_images):
        torch.manual_seed(0)
        adaptors = AdaptorSet.for_backbone(tiny_backbone, bottleneck_dim=4, zero_init_up=False)

        model = AdaptedViT(tiny_backbone, adaptors)

        assert not torch.allclose(model(tiny_images), tiny_backbone(tiny_images))

    def test_layer_count_checked(self, tiny_backbone):
        adaptors = AdaptorSet(num_layers=3, dim=16, bottleneck_dim=4)

        with pytest.raises(ShapeMismatchError):
            AdaptedViT(tiny_backbone, adaptors)

    def test_width_checked(self, tiny_backbone):
        adaptors = AdaptorSet(num_layers=2, dim=32, bottleneck_dim=4)

        with pytest.raises(ShapeMismatchError):
            AdaptedViT(tiny_backbone, adaptors)

    def test_set_properties(self, tiny_backbone):
        adaptors = AdaptorSet.for_backbone(tiny_backbone, bottleneck_dim=4, granularity=2)

        assert (adaptors.num_layers, adaptors.dim, adaptors.bottleneck_dim) == (2, 16, 4)
        assert adaptors.granularity == 2
        assert not any(p.requires_grad for p in adaptors.freeze().parameters())
