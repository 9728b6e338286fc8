"""Subtype discovery by clustering driven by weighted linear supervision."""
from .clustering import ClusteringMethod, GmmModel, KmeansModel, fit_gmm, fit_kmeans
from .consensus import cooccurrence, spectral_clustering
from .data import Dataset, ToyConfig, ToyConfigId, generate_flanking, generate_toy, load_csv, load_idx, write_csv
from .em import (
    MulticlassUcsl,
    NegativeWeighting,
    UcslConfig,
    UcslModel,
    e_step,
    fit,
    fit_multiclass,
    fit_regression,
    initialize_q,
    m_step,
    run_em_once,
)
from .estimators import EstimatorKind, LinearModel, fit_weighted
from .metrics import adjusted_rand_index, balanced_accuracy, cluster_balanced_accuracy, v_measure
from .projection import DirectionBasis, gram_schmidt, project

__version__ = "0.1.0"
