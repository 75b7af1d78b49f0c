"""Feature extraction over the unlabeled pool."""

from __future__ import annotations

import logging

import numpy as np
from torch import nn

from ..backbone import encode_images
from ..checkpoint import parameters_sha256
from ..data import UnlabeledPool
from .models import FeatureStore

logger = logging.getLogger(__name__)


def extract_feature_store(
    model: nn.Module, pool: UnlabeledPool, batch_size: int = 256
) -> FeatureStore:
    """Compute ``Z = {f(x; M) for x in pool}`` with the model's fingerprint."""
    features = encode_images(model, pool.images, batch_size=batch_size)
    store = FeatureStore(
        features=features.cpu().numpy().astype(np.float64),
        ids=pool.ids,
        fingerprint=parameters_sha256(model),
    )
    logger.info(f"Extracted {len(store)} features of width {store.dim}")
    return store
