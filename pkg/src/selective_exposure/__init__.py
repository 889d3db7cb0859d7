"""Selective-exposure analysis of user-post like logs."""

__version__ = "0.1.0"

from .bipartite import (
    UserPageVector,
    UserPostIncidence,
    UserTopicVector,
    aggregate_by_page,
    aggregate_by_topic,
    build_user_post,
    load_incidence,
    save_incidence,
)
from .ingest import (
    Dataset,
    IdIndex,
    IngestError,
    IngestStats,
    InteractionLog,
    InteractionRecord,
    TopicMixtures,
    load_dataset,
    parse_interactions,
    parse_post_meta,
    parse_topic_mixtures,
)
from .metrics import (
    TopicEngagementRule,
    UserProfiles,
    activity,
    binarize_topics,
    compute_profiles,
    gini,
    gini_min,
    gini_pages_min,
    gini_pages_norm,
    gini_pages_raw,
    gini_rows,
    gini_topics,
    lifetime,
    lifetimes,
    normalized_gini,
    pages_per_user,
    topics_per_user,
)
from .report import (
    AxisSpec,
    BinnedCurve,
    DensityGrid,
    PipelineOptions,
    binned_average,
    density_grid,
    run_pipeline,
)
from .synth import (
    SynthConfig,
    SyntheticData,
    brute_force_gini,
    brute_force_gini_min,
    generate,
    generate_files,
)
from .taxonomy import (
    REFERENCE_THRESHOLDS,
    TaxonomyLabel,
    TaxonomyThresholds,
    classify_population,
    classify_user,
    compute_thresholds,
)
