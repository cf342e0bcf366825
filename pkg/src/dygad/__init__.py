"""Anomaly detection on dynamic graphs via diffusion-guided attention.

The pipeline: partition a timestamped edge stream into fixed-size snapshots,
sample a diffusion-ranked context window around each edge, encode the window
with learnable structural/temporal tables, and score it with a small
attention network trained to separate observed edges from absent pairs.
"""

__version__ = "0.1.0"

from .diffusion import (
    DiffusionCache,
    DiffusionMatrix,
    SubstructureSample,
    compute_heat,
    compute_ppr,
    edge_connectivity,
    sample_substructure,
)
from .encoding import EncodingTables, fuse_and_stack
from .errors import ConfigError, DataError, DygadError, NumericalError
from .graphstream import (
    GraphStream,
    LabeledTestEdge,
    Snapshot,
    ingest_edge_list,
    inject_anomalies,
    split_train_test,
)
from .model import ModelParameters, forward, load_checkpoint, save_checkpoint
from .synth import cross_block_anomalies, generate_sbm, write_edge_list
from .trainer import (
    EvaluationReport,
    TrainConfig,
    TrainResult,
    compute_auc,
    score_edges,
    train,
)

__all__ = [
    "__version__",
    "ConfigError", "DataError", "DygadError", "NumericalError",
    "GraphStream", "Snapshot", "LabeledTestEdge",
    "ingest_edge_list", "split_train_test", "inject_anomalies",
    "DiffusionMatrix", "DiffusionCache", "SubstructureSample",
    "compute_ppr", "compute_heat", "edge_connectivity", "sample_substructure",
    "EncodingTables", "fuse_and_stack",
    "ModelParameters", "forward", "save_checkpoint", "load_checkpoint",
    "generate_sbm", "cross_block_anomalies", "write_edge_list",
    "TrainConfig", "TrainResult", "EvaluationReport",
    "train", "score_edges", "compute_auc",
]
