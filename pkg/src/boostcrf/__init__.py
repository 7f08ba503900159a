"""Boosted and maximum-likelihood training of linear-chain conditional Markov
networks on partially labelled sequences."""

from .boost import (BoostConfig, CandidateStats, TrainingDiverged, TrainTrace,
                    all_candidate_stats, candidate_stats, exp_loss, line_search_step,
                    rank_loss_exact, select_beam, sequence_weights, train_boost)
from .evaluation import EvalReport, evaluate, recover_transition_matrix, transition_weights
from .features import (FeatureSetKind, build_feature_set, compute_norm_stats,
                       extract_obs_features, normalize)
from .inference import (ChainPosteriors, PotentialTable, brute_force_posteriors,
                        build_potentials, conditional_log_prob, posteriors, viterbi)
from .mle import MleConfig, MleTrace, nll_and_grad, train_mle
from .model import (HIDDEN, Dataset, Feature, LabeledSequence, LabelSpace, Model,
                    NormStats, ObservationSequence, eval_feature, score_assignment)
from .synth import ScenarioSpec, default_scenario, generate_dataset, mask_labels

__version__ = "0.1.0"
