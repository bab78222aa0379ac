//! Toy data generators and feature-file ingestion.

pub mod features;
pub mod toy;

pub use features::{load_features, load_features_allow_empty, save_features, FeatureFormat};
pub use toy::{gaussians3, spiral, two_moons, ToyKind, ToySpec};
