"""Model façade.

Each layer owns its data models (`backbone/models.py`, `pseudolabels/models.py`,
`adaptors/models.py`, `fusion/models.py`, `retrieval/models.py`,
`data/models.py`); this module re-exports them so `from grappa.models import
RetrievalReport` works without knowing the layer.
"""

from __future__ import annotations

# --- Re-exports (explicit `as` form for mypy strict) ---
from .adaptors.models import AdaptorConfig as AdaptorConfig
from .adaptors.models import AdaptorProvenance as AdaptorProvenance
from .backbone.models import BackboneConfig as BackboneConfig
from .backbone.models import BackboneSource as BackboneSource
from .backbone.models import TokenTensor as TokenTensor
from .data.models import AugmentPolicy as AugmentPolicy
from .data.models import DatasetManifest as DatasetManifest
from .data.models import SyntheticSpec as SyntheticSpec
from .data.models import TaskDataset as TaskDataset
from .data.models import TaskStatistics as TaskStatistics
from .data.models import UnlabeledPool as UnlabeledPool
from .fusion.models import FusionConfig as FusionConfig
from .fusion.models import FusionProvenance as FusionProvenance
from .fusion.models import FusionVariant as FusionVariant
from .pseudolabels.models import FeatureStore as FeatureStore
from .pseudolabels.models import PseudoLabelSet as PseudoLabelSet
from .retrieval.models import EvalTask as EvalTask
from .retrieval.models import OracleReport as OracleReport
from .retrieval.models import OracleTask as OracleTask
from .retrieval.models import QueryScore as QueryScore
from .retrieval.models import RetrievalReport as RetrievalReport
from .retrieval.models import TaskReport as TaskReport

__all__ = [
    "AdaptorConfig",
    "AdaptorProvenance",
    "AugmentPolicy",
    "BackboneConfig",
    "BackboneSource",
    "DatasetManifest",
    "EvalTask",
    "FeatureStore",
    "FusionConfig",
    "FusionProvenance",
    "FusionVariant",
    "OracleReport",
    "OracleTask",
    "PseudoLabelSet",
    "QueryScore",
    "RetrievalReport",
    "SyntheticSpec",
    "TaskDataset",
    "TaskReport",
    "TaskStatistics",
    "TokenTensor",
    "UnlabeledPool",
]
