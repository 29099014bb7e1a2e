"""Class-conditional density estimation for neural representations.

Dirichlet-process Gaussian mixtures over pooled activation vectors,
fitted with a blocked collapsed Gibbs sampler, with Monte-Carlo posterior
predictive densities, KL estimation, class-structure analyses and
randomized-smoothing certification statistics.
"""

__version__ = "0.1.0"

from .analysis import (ClassDensityReport, DensityBinning, DensityGroups,
                       GenerativeClassification, KLMatrix, SubsetSelection,
                       TrialRecords, between_class_kl_matrix,
                       class_log_density_stats, density_bins,
                       detect_density_groups, f_scores, generative_classify,
                       memorization_from_trials, select_memorization_subsets)
from .certify import (CertifyConfig, CertifyOutcome, certification_report,
                      certify, clopper_pearson_lower)
from .dataset import (RepresentationDataset, SvdProjection, class_row_indices,
                      derive_prior, split_by_class, svd_reduce)
from .errors import (ConfigurationError, CorruptionError, EmptySubsetError,
                     FormatError, InsufficientDataError, NumericalError,
                     ParameterError, RepdensityError, UndefinedScoreError,
                     ValidationError)
from .io import (load_representations, read_snapshot_archive,
                 read_trial_records, write_representations,
                 write_snapshot_archive, write_trial_records)
from .kernels import BACKEND
from .niw import (ComponentStats, NIWParams, add_observation, log_predictive,
                  posterior_update, remove_observation, sample_predictive)
from .predictive import (DiagonalGaussian, KLConfig, KLEstimate,
                         PredictiveModel, conditional_predictive_logpdf,
                         fit_predictive_model, kl_between_predictives,
                         kl_to_reference, max_entropy_reference,
                         posterior_predictive_logpdf,
                         sample_posterior_predictive)
from .sampler import (ChainSnapshot, ChainState, SamplerConfig,
                      block_gibbs_sweep, init_chain, plain_gibbs_sweep,
                      resample_alpha, run)
