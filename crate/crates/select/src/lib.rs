//! Device selection: labelled training data from policy compiles, a random
//! forest over circuit features, and ranked device predictions.

pub mod forest;
pub mod labels;
pub mod predict;
pub mod store;

pub use forest::{
    roster_of, train_forest, ForestConfig, ForestError, ForestModel, ForestReport, Hyper, RosterEntry,
};
pub use labels::{generate_labels, policy_stamp, rank_by_score, LabelError, LabelStats, TrainingSample};
pub use predict::{predict_device, PredictError};
pub use store::{ResultStore, StoreError, StoreKey, StoreRecord};
