//! The non-boosted, non-neural classifiers: multinomial logistic
//! regression, Gaussian naive Bayes, CART and random forests.

mod forest;
mod gnb;
mod logreg;
pub(crate) mod tree;

pub use forest::{fit_forest, ForestConfig, RandomForest};
pub use gnb::{fit_gnb, GaussianNb};
pub use logreg::{fit_logreg, LogRegConfig, LogisticRegression};
pub use tree::{fit_tree, Criterion, DecisionTree, TreeConfig, TreeNode};
