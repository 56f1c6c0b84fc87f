//! One-class nearest-neighbor classification on unit feature vectors.

pub mod classify;
pub mod cv;
pub mod distance;
pub mod noise;

pub use classify::{
    assess, classify, ratio, Assessment, ClassificationResult, Decision, Neighbor, Probe, ReferenceSet,
    ThresholdVector, NO_BOUND,
};
pub use cv::{coarse_grid, refined_grid, score, select_threshold, CvConfig, StageReport, ThresholdReport};
pub use distance::{angular_distance, angular_distance_checked, MAX_DISTANCE};
pub use noise::{quantile_linear, split_noise, MemberRole, TrainingMember, TrainingPartition};
