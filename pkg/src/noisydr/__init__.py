"""Signal-referenced calibration of t-SNE embeddings.

Data are modeled as a low-dimensional signal embedded in data space plus
isotropic noise. Embeddings are scored against both the raw observations and
the signal so that hyperparameters can be chosen without rewarding noise.
"""

from noisydr.datagen import (
    DatasetBundle,
    embed_and_noise,
    generate_gaussian_clusters,
    generate_links,
    generate_trefoil,
    load_mammoth,
)
from noisydr.errors import DataError, IngestionError, NoisyDRError, ParameterError, RunError
from noisydr.metrics import (
    MetricReport,
    ReferenceFrame,
    shepard_goodness,
    silhouette,
    trustworthiness,
    trustworthiness_subsampled,
)
from noisydr.neighbors import DistanceMatrix, RankTable, knn_sets, pairwise_distances, rank_table
from noisydr.signal_model import PcaBasis, fit_pca, inverse_transform, project, scree
from noisydr.sweep import (
    SweepConfig,
    SweepRecord,
    SweepResult,
    SweepSummary,
    evaluate_external,
    extract_signal,
    run_sweep,
    scale_perplexity_for_subsample,
)
from noisydr.tsne import (
    AffinityModel,
    EmbeddingRun,
    TsneSettings,
    conditional_affinities,
    kl_divergence,
    kl_gradient,
    low_dim_similarities,
    run_tsne,
    symmetrize,
)

__version__ = "0.1.0"
