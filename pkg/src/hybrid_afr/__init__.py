"""Feature recognition and dimension extraction for hybrid additive-subtractive parts."""

from .brep import Solid, build, make_box
from .featuregen import GenSpec, GroundTruth, generate_dataset, generate_model
from .gcnn import Model, ModelConfig, load_checkpoint, predict, save_checkpoint, train
from .geomextract import extract_dimensions, extract_model, group_instances, stock_sizes
from .hiergraph import build_hier_graph, graph_from_model, make_batches, normalize
from .metrics import ConfusionMatrix, scores
from .step_io import parse_step, write_step
from .taxonomy import N_CLASSES, STOCK, feature_class, taxonomy

__version__ = "0.1.0"

__all__ = [
    "ConfusionMatrix",
    "GenSpec",
    "GroundTruth",
    "Model",
    "ModelConfig",
    "N_CLASSES",
    "STOCK",
    "Solid",
    "build",
    "build_hier_graph",
    "extract_dimensions",
    "extract_model",
    "feature_class",
    "generate_dataset",
    "generate_model",
    "graph_from_model",
    "group_instances",
    "load_checkpoint",
    "make_batches",
    "make_box",
    "normalize",
    "parse_step",
    "predict",
    "save_checkpoint",
    "scores",
    "stock_sizes",
    "taxonomy",
    "train",
    "write_step",
]
