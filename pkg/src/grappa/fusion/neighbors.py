"""Exact k-NN graph over features and the pair sampler built on it."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import torch

from ..data import AugmentPolicy, UnlabeledPool, augment_batch
from ..errors import ConfigError, ShapeMismatchError

logger = logging.getLogger(__name__)

PairVariant = Literal["tc", "ac"]

# Upper bound on elements of one (rows, n, D) difference block
_DISTANCE_BLOCK = 1 << 22


@dataclass(frozen=True)
class NeighborGraph:
    """The ``k_nn`` nearest neighbours of every pool image.

    Attributes
    ----------
    neighbors : np.ndarray
        Neighbour indices of shape (n, k_nn), nearest first
    epoch : int
        Training epoch the graph was built at
    """

    neighbors: np.ndarray
    epoch: int = 0

    def __post_init__(self) -> None:
        n = self.neighbors.shape[0]
        if bool((self.neighbors == np.arange(n)[:, None]).any()):
            raise ConfigError("NeighborGraph contains a self-neighbour")
        self.neighbors.setflags(write=False)

    @property
    def k_nn(self) -> int:
        return int(self.neighbors.shape[1])

    def __len__(self) -> int:
        return int(self.neighbors.shape[0])


def build_knn_graph(
    features: np.ndarray | torch.Tensor, k_nn: int, epoch: int = 0
) -> NeighborGraph:
    """Exact Euclidean k-NN graph; self excluded, ties go to the lower id.

    Parameters
    ----------
    features : np.ndarray | torch.Tensor
        Features of shape (n, D)
    k_nn : int
        Neighbours per node, 1 <= k_nn < n
    epoch : int, optional
        Epoch stamp stored with the graph (default: 0)

    Returns
    -------
    NeighborGraph
        Neighbour lists, nearest first

    Raises
    ------
    ConfigError
        If ``k_nn`` is not in [1, n)
    """
    if isinstance(features, torch.Tensor):
        features = features.detach().cpu().numpy()
    points = np.asarray(features, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeMismatchError("features", expected="(n, D)", actual=points.shape)
    n, dim = points.shape
    if not 1 <= k_nn < n:
        raise ConfigError(f"k_nn must satisfy 1 <= k_nn < n = {n}, got {k_nn}", {"k_nn": k_nn})

    neighbors = np.empty((n, k_nn), dtype=np.int64)
    rows = max(1, _DISTANCE_BLOCK // max(1, n * dim))
    for start in range(0, n, rows):
        block = points[start : start + rows]
        diff = block[:, None, :] - points[None, :, :]
        distances = np.einsum("bnd,bnd->bn", diff, diff)
        distances[np.arange(block.shape[0]), np.arange(start, start + block.shape[0])] = np.inf
        order = np.argsort(distances, axis=1, kind="stable")
        neighbors[start : start + rows] = order[:, :k_nn]
    logger.debug(f"Built {k_nn}-NN graph over {n} points at epoch {epoch}")
    return NeighborGraph(neighbors=neighbors, epoch=epoch)


@dataclass(frozen=True)
class PairBatch:
    """Two views per anchor; ``partners`` are pool indices of the second view."""

    first: torch.Tensor
    second: torch.Tensor
    anchors: torch.Tensor
    partners: torch.Tensor


def sample_pairs(
    variant: PairVariant,
    pool: UnlabeledPool,
    anchors: torch.Tensor,
    generator: torch.Generator,
    graph: NeighborGraph | None = None,
    policy: AugmentPolicy | None = None,
) -> PairBatch:
    """Build training pairs for a batch of anchor images.

    ``tc`` pairs are two independent augmentations of each anchor. ``ac``
    pairs match each anchor with a neighbour drawn uniformly from its list.

    Raises
    ------
    ConfigError
        If ``ac`` pairs are requested without a graph, or the graph does not
        cover the pool
    """
    if variant == "tc":
        images = pool.images[anchors]
        policy = policy or AugmentPolicy()
        return PairBatch(
            first=augment_batch(images, policy, generator),
            second=augment_batch(images, policy, generator),
            anchors=anchors,
            partners=anchors,
        )
    if variant != "ac":
        raise ConfigError(f"Unknown pair variant {variant!r}")
    if graph is None:
        raise ConfigError("Attention-consistency pairs need a neighbour graph")
    if len(graph) != len(pool):
        raise ShapeMismatchError("neighbour graph", expected=len(pool), actual=len(graph))
    slots = torch.randint(0, graph.k_nn, (anchors.shape[0],), generator=generator)
    table = torch.from_numpy(np.array(graph.neighbors, dtype=np.int64))
    partners = table[anchors, slots]
    return PairBatch(
        first=pool.images[anchors],
        second=pool.images[partners],
        anchors=anchors,
        partners=partners,
    )
