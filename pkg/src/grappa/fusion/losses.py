"""Barlow Twins redundancy-reduction loss and its projector."""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ConfigError

# Guards standardisation and column norms against zero-variance dimensions
BARLOW_EPS = 1e-5


class Projector(nn.Module):
    """``Linear -> BatchNorm -> ReLU -> Linear`` head, discarded after training."""

    def __init__(self, dim: int, hidden_dim: int) -> None:
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(dim, hidden_dim),
            nn.BatchNorm1d(hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, hidden_dim),
        )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


def _standardize(x: torch.Tensor) -> torch.Tensor:
    centred = x - x.mean(dim=0, keepdim=True)
    return centred / torch.sqrt(centred.pow(2).mean(dim=0, keepdim=True) + BARLOW_EPS)


def cross_correlation(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Batch cross-correlation ``C`` (D_out x D_out) of two standardised views."""
    a, b = _standardize(a), _standardize(b)
    norm_a = a.norm(dim=0).clamp_min(BARLOW_EPS)
    norm_b = b.norm(dim=0).clamp_min(BARLOW_EPS)
    return (a.T @ b) / (norm_a[:, None] * norm_b[None, :])


def barlow_twins_loss(
    z_a: torch.Tensor,
    z_b: torch.Tensor,
    beta: float = 0.005,
    projector: nn.Module | None = None,
    scale: float = 1.0,
) -> torch.Tensor:
    """``sum_n (1 - C_nn)^2 + beta * sum_{n != m} C_nm^2`` on paired features.

    Parameters
    ----------
    z_a, z_b : torch.Tensor
        Paired features of shape (batch, D)
    beta : float, optional
        Weight of the off-diagonal (redundancy) term (default: 0.005)
    projector : nn.Module | None, optional
        Head ``g`` applied to both views first; identity when None
    scale : float, optional
        Multiplier of the whole loss (default: 1.0)

    Returns
    -------
    torch.Tensor
        Scalar loss

    Raises
    ------
    ConfigError
        If fewer than two pairs are given or the views differ in shape
    """
    if z_a.shape != z_b.shape:
        raise ConfigError(f"Paired views differ in shape: {tuple(z_a.shape)} vs {tuple(z_b.shape)}")
    if z_a.shape[0] < 2:
        raise ConfigError("Barlow Twins needs a batch of at least two pairs")
    if projector is not None:
        z_a, z_b = projector(z_a), projector(z_b)
    c = cross_correlation(z_a, z_b)
    diagonal = torch.diagonal(c)
    on_diag = (1.0 - diagonal).pow(2).sum()
    off_diag = c.pow(2).sum() - diagonal.pow(2).sum()
    return scale * (on_diag + beta * off_diag)
