"""Rotating cone embeddings for first-order logical query answering over
incomplete knowledge graphs."""

from .geometry import (
    ConeBatch,
    RelationRotation,
    UnitComplexVec,
    arg,
    axis_vector,
    boundaries,
    cone_from_boundaries,
    wrap_angle,
)
from .diffcore import (
    DiffValue,
    OptimizerState,
    ParamStore,
    adam_step,
    grad_check,
    load_checkpoint,
    save_checkpoint,
)
from .operators import (
    ConeSet,
    IntersectionWeights,
    MLPSpec,
    card_min,
    compose_rotations,
    distance,
    init_param_store,
    intersect,
    inverse_rotation,
    negate,
    project,
    semantic_average,
    union,
)
from .querylang import (
    EPFO_TYPES,
    NEGATION_TYPES,
    QUERY_TYPES,
    TRAIN_TYPES,
    GroundedQuery,
    build_template,
    execute,
    symbolic_answers,
    to_dnf,
)
from .data import (
    KnowledgeGraph,
    PatternSpec,
    QueryDataset,
    generate_synthetic,
    ground_queries,
    load_graph,
    load_queries,
)
from .training import TrainConfig, loss, negative_sample, train
from .evaluation import EvalReport, evaluate, mrr, rank_entity

__version__ = "0.1.0"

__all__ = [
    "ConeBatch", "RelationRotation", "UnitComplexVec", "arg", "axis_vector",
    "boundaries", "cone_from_boundaries", "wrap_angle",
    "DiffValue", "OptimizerState", "ParamStore", "adam_step", "grad_check",
    "load_checkpoint", "save_checkpoint",
    "ConeSet", "IntersectionWeights", "MLPSpec", "card_min",
    "compose_rotations", "distance", "init_param_store", "intersect",
    "inverse_rotation", "negate", "project", "semantic_average", "union",
    "EPFO_TYPES", "NEGATION_TYPES", "QUERY_TYPES", "TRAIN_TYPES",
    "GroundedQuery", "build_template", "execute", "symbolic_answers", "to_dnf",
    "KnowledgeGraph", "PatternSpec", "QueryDataset", "generate_synthetic",
    "ground_queries", "load_graph", "load_queries",
    "TrainConfig", "loss", "negative_sample", "train",
    "EvalReport", "evaluate", "mrr", "rank_entity",
]
