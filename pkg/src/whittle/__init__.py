"""Interactive image search refined by comparative attribute feedback."""

from .dataset import (
    ComparisonLabel,
    DatasetManifest,
    ImageRecord,
    ManifestError,
    Relation,
    SynthConfig,
    load_manifest,
    save_manifest,
    synthesize_dataset,
)
from .ranker import (
    AttributeModel,
    HingeClassifier,
    PairwiseRankSVM,
    ResponseSigmoid,
    TrainConfig,
    fit_equal_sigmoid,
    fit_order_sigmoid,
    predict_attribute,
    response_probabilities,
    train_attribute_ranker,
)
from .relevance import (
    FeedbackConstraint,
    RankingMode,
    RelevanceState,
    SearchContext,
    percentile_rank,
    rank_images,
    update_relevance,
)
from .pivots import PivotSet, TreeNode, build_tree, descend
from .active import (
    CandidateQuestion,
    LikelihoodKind,
    LikelihoodModel,
    entropy,
    expected_entropy,
    kendall_tau,
    select_question,
)
from .hybrid import BinaryFeedback, build_ordered_pairs, satisfaction_partition, train_hybrid_scorer
from .simuser import SimUserConfig, SimulatedUser, equal_threshold_from_training
from .indexing import build_context, build_index, train_models
from .evaluation import ExperimentConfig, GroundTruth, Policy, ground_truth_for, ndcg_at_k, run_episode, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
