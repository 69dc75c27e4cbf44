"""Multi-image visual prompt bank, alignment head and ablation harness."""
from .bank import Action, Policy, UpdateRecord, VisualBank, cosine_similarity
from .fusion import (
    MlpParams,
    PrototypeBatch,
    alignment_scores,
    assign_labels,
    mlp_forward,
    project_prototypes,
    softmax,
)
from .kernels import backend_name, use_backend

__version__ = "0.1.0"

__all__ = [
    "Action",
    "MlpParams",
    "Policy",
    "PrototypeBatch",
    "UpdateRecord",
    "VisualBank",
    "alignment_scores",
    "assign_labels",
    "backend_name",
    "cosine_similarity",
    "mlp_forward",
    "project_prototypes",
    "softmax",
    "use_backend",
]
