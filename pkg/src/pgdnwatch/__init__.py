"""Detection pipeline for newly registered pornographic/gambling domains.

The pieces compose in pipeline order: collect daily observations, extract
the 19+1 feature set, optionally augment, train the two-level classifier,
then evaluate or forecast.
"""

from .augment import AugmentationPlan, augment_dataset, replace_chars
from .classifier import (
    TrainedModel,
    TwoLevelClassifier,
    classify,
    level1_classify,
    load_model,
    save_model,
    stratified_split,
    train_two_level,
)
from .collector import (
    DomainProbeState,
    ObservationStore,
    ProbeTask,
    ProbeType,
    VirtualClock,
    detection_cycle,
    enqueue_domains,
    run_consumer,
    run_detection,
)
from .embedding import (
    EMBEDDING_DIM,
    BuiltinProvider,
    HttpProvider,
    PairBatch,
    builtin_embed,
    cosent_loss,
    cosine_similarity,
    embed_title,
    make_provider,
    sbert_triplet_loss,
)
from .evaluation import (
    ConfusionCounts,
    EvalReport,
    ForecastOutcome,
    confusion,
    forecast_analysis,
    metrics,
    run_comparison,
    sample_proportion,
)
from .features import (
    CategoricalDictionary,
    FeatureExtractor,
    ReverseCnameIndex,
    assemble_feature_vector,
    build_dictionary,
    cname_fanin,
    ip_url_redirect_metric,
    oscillating_metric,
    sld_lexical_features,
)
from .level2 import DecisionTree, ForestParams, LinearSvm, RandomForest, forest_predict, forest_train
from .mlp import MlpParams, TrainConfig, mlp_forward, mlp_train
from .timelines import load_single_day, load_timelines
from .types import (
    BinaryLabel,
    DailyObservation,
    DomainName,
    DomainTimeline,
    FeatureVector,
    Label,
    binarize,
    parse_domain,
)

__version__ = "0.1.0"
