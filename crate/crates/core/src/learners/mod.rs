//! From-scratch regressors and binary probability learners.

pub mod binary;
pub mod forest;
pub mod knn;
pub mod linear;
pub mod tree;

pub use binary::{fit_binary_prob, sigmoid, BinaryBase, BinaryModel};
pub use forest::{fit_random_forest, predict_forest, ForestParams, RandomForest};
pub use knn::{fit_knn, predict_knn, KnnModel, Weighting};
pub use linear::{fit_linear, predict_linear, LinearModel, Penalty};
pub use tree::{fit_cart, predict_tree, DecisionTree, Node, TreeParams};
