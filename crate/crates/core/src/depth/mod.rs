//! Lens depth over sample Fermat distances, inner-point reduction and the
//! fitted per-class scorer.

pub mod kmeans;
pub mod lens;
pub mod reduce;
pub mod scorer;

pub use kmeans::{kmeans, KMeansResult};
pub use lens::{lens_count, lens_depth, LensMode};
pub use reduce::{
    reduce_kmean_center, reduce_kmean_center_plus, reduce_random, ReductionStrategy, StrategyKind,
};
pub use scorer::{fit, ClusterModel, DepthScorer, FitConfig, ModelMetadata, DEFAULT_ALPHA};
