//! The six novelty detectors. Every score is oriented so that higher means
//! more likely unknown.

pub mod class_stats;
pub mod clusters;
pub mod kmeans;
pub mod mahalanobis;
pub mod openmax;
pub mod pca;
pub mod softmax;
pub mod threshold;
pub mod weibull;

mod fit;

pub use self::class_stats::{fit_class_statistics, ClassMeans, ClassStatistics};
pub use self::clusters::{
    fit_input_clusters, fit_output_clusters, score_input_cluster, score_output_cluster, InputClusterParams,
    OutputClusterParams,
};
pub use self::fit::{fit_bundle, FitConfig};
pub use self::mahalanobis::{fit_mahalanobis, score_mahalanobis, MahalanobisParams};
pub use self::openmax::{fit_openmax, openmax_probabilities, score_openmax, OpenMaxParams};
pub use self::softmax::{gradient_value, max_softmax_value, score_gradient, score_max_softmax};
pub use self::threshold::calibrate_threshold;
pub use self::weibull::{fit_weibull_tail, WeibullModel};
