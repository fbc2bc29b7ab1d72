"""Batch anonymization of tabular data with embedding-clustered value hierarchies."""

from .anonymize import (
    AnonymizationResult,
    LatticeNode,
    PrivacyParams,
    anonymize_table,
    apply_node,
    check_privacy,
    generate_vghs,
    loss,
    search,
)
from .cluster import ClusterAssignment, MergeStep, agglomerate, kmeans, ward_merge
from .efficacy import EfficacyReport, FeatureMatrix, encode, evaluate, train_classifier
from .embed import (
    HttpApiProvider,
    ProviderConfig,
    WordVectorProvider,
    create_provider,
    embed_all,
    embed_value,
    preprocess,
)
from .errors import InputError, ProviderError
from .metrics import MetricReport, achieved_privacy, c_avg, perc_recs, t_closeness
from .tabular import (
    Column,
    EquivalenceClass,
    QiSpec,
    Table,
    group_by_qi,
    load_csv,
    write_csv,
)
from .vgh import Vgh, build_vgh, get_categories, read_hierarchy, write_hierarchy

__version__ = "0.1.0"

__all__ = [
    "AnonymizationResult",
    "ClusterAssignment",
    "Column",
    "EfficacyReport",
    "EquivalenceClass",
    "FeatureMatrix",
    "HttpApiProvider",
    "InputError",
    "LatticeNode",
    "MergeStep",
    "MetricReport",
    "PrivacyParams",
    "ProviderConfig",
    "ProviderError",
    "QiSpec",
    "Table",
    "Vgh",
    "WordVectorProvider",
    "achieved_privacy",
    "agglomerate",
    "anonymize_table",
    "apply_node",
    "build_vgh",
    "c_avg",
    "check_privacy",
    "create_provider",
    "embed_all",
    "embed_value",
    "encode",
    "evaluate",
    "generate_vghs",
    "get_categories",
    "group_by_qi",
    "kmeans",
    "load_csv",
    "loss",
    "perc_recs",
    "preprocess",
    "read_hierarchy",
    "search",
    "t_closeness",
    "train_classifier",
    "ward_merge",
    "write_csv",
    "write_hierarchy",
]
