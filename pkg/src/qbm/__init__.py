"""Boltzmann-machine classifier with annealing-style samplers, a matched
feed-forward baseline, and a hyperparameter search harness."""

from .adam import AdamHyper, AdamState, adam_update, init_adam
from .classifier import (QbmClassifier, QbmTopology, TrainConfig, TrainHistory,
                         data_phase_moments, init_qbm, model_phase_moments,
                         predict, predict_scores, train, train_step)
from .energy import (EnergyModel, boltzmann_probability, clamp, energy,
                     to_minimization_objective)
from .errors import (CapabilityError, CorruptModelFileError, InputError,
                     ModelFileError, ModelFormatVersionError, QbmError,
                     UndefinedMetricError)
from .fnn import FnnModel, fnn_forward, fnn_train, init_fnn, parameter_count
from .metrics import accuracy, auc_roc_macro
from .model_io import load_model, save_model
from .pipeline import (CompressionLayer, DatasetSplit, FeatureRecord,
                       binarize, compress, feature_matrix, load_features,
                       prepare_records, save_features, split_balanced,
                       train_compression)
from .samplers import (AnnealSchedule, DEFAULT_SCHEDULE, ExactSampler,
                       GibbsSampler, Moments, SampleSet, SaSampler,
                       enumerate_distribution, estimate_moments, exact_moments,
                       make_sampler, sample_exact, sample_gibbs, sample_sa)

__version__ = "0.1.0"
