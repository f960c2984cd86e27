//! Evaluation protocols: supervised link prediction and clustering of the
//! learned embeddings.

mod cluster;
mod experiment;
mod link;

pub use cluster::{
    community_metrics, kmeans, kmeans_with, random_clustering, Clustering, CommunityMetrics, KMeansConfig,
    SEPARABILITY_SENTINEL,
};
pub use experiment::{
    embed_emerging, plan_link_experiment, run_community_experiment, run_link_experiment, run_link_plan,
    CommunityResult, ExperimentConfig, LinkExperimentPlan, LinkFoldMetrics, LinkResult, MeanStd, Method,
};
pub use link::{
    auc, classification_metrics, link_features, sample_negatives, train_linear_classifier, ClassificationMetrics,
    LinearClassifier, SvmConfig,
};
