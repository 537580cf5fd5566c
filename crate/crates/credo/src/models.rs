//! The eight classifiers behind one enum, so they can be fitted from a
//! config entry, predicted through [`Model`] and persisted by kind.

use credo_core::baselines::{fit_forest, fit_gnb, fit_logreg, fit_tree, GaussianNb, LogisticRegression, DecisionTree, RandomForest};
use credo_core::gbt::{fit_gbt, BoostedEnsemble};
use credo_core::lda::{fit_lda, LdaConfig, ProjectionLda};
use credo_core::neural::{fit_hybrid, fit_mlp, HybridXgDnn, Mlp};
use credo_core::params::{ParamSet, Persist};
use credo_core::{Matrix, Model};

use crate::config::ModelSpec;
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub enum Fitted {
    Logreg(LogisticRegression),
    Gnb(GaussianNb),
    Tree(DecisionTree),
    Forest(RandomForest),
    Gbt(BoostedEnsemble),
    Mlp(Mlp),
    Lda(ProjectionLda),
    Xgdnn(HybridXgDnn),
}

pub fn fit(spec: &ModelSpec, x: &Matrix, y: &[usize], n_classes: usize) -> Result<Fitted> {
    Ok(match spec {
        ModelSpec::Logreg(p) => Fitted::Logreg(fit_logreg(x, y, n_classes, &p.into())?),
        ModelSpec::Gnb(p) => Fitted::Gnb(fit_gnb(x, y, n_classes, p.var_smoothing)?),
        ModelSpec::Tree(p) => Fitted::Tree(fit_tree(x, y, n_classes, &p.into())?),
        ModelSpec::Forest(p) => Fitted::Forest(fit_forest(x, y, n_classes, &p.into())?),
        ModelSpec::Gbt(p) => Fitted::Gbt(fit_gbt(x, y, n_classes, &p.into())?),
        ModelSpec::Mlp(p) => Fitted::Mlp(fit_mlp(x, y, n_classes, &p.into())?),
        ModelSpec::Lda(p) => {
            Fitted::Lda(fit_lda(x, y, n_classes, &LdaConfig { n_components: usize::MAX, ridge: p.ridge })?)
        }
        ModelSpec::Xgdnn(p) => {
            Fitted::Xgdnn(fit_hybrid(x, y, n_classes, &(&p.gbt).into(), &(&p.mlp).into(), p.features.into())?)
        }
    })
}

impl Fitted {
    pub fn kind(&self) -> &'static str {
        match self {
            Fitted::Logreg(_) => LogisticRegression::KIND,
            Fitted::Gnb(_) => GaussianNb::KIND,
            Fitted::Tree(_) => DecisionTree::KIND,
            Fitted::Forest(_) => RandomForest::KIND,
            Fitted::Gbt(_) => BoostedEnsemble::KIND,
            Fitted::Mlp(_) => Mlp::KIND,
            Fitted::Lda(_) => ProjectionLda::KIND,
            Fitted::Xgdnn(_) => HybridXgDnn::KIND,
        }
    }

    pub fn model(&self) -> &dyn Model {
        match self {
            Fitted::Logreg(m) => m,
            Fitted::Gnb(m) => m,
            Fitted::Tree(m) => m,
            Fitted::Forest(m) => m,
            Fitted::Gbt(m) => m,
            Fitted::Mlp(m) => m,
            Fitted::Lda(m) => m,
            Fitted::Xgdnn(m) => m,
        }
    }

    pub fn to_params(&self) -> ParamSet {
        match self {
            Fitted::Logreg(m) => m.to_params(),
            Fitted::Gnb(m) => m.to_params(),
            Fitted::Tree(m) => m.to_params(),
            Fitted::Forest(m) => m.to_params(),
            Fitted::Gbt(m) => m.to_params(),
            Fitted::Mlp(m) => m.to_params(),
            Fitted::Lda(m) => m.to_params(),
            Fitted::Xgdnn(m) => m.to_params(),
        }
    }

    pub fn from_params(kind: &str, p: &ParamSet) -> Result<Fitted> {
        Ok(match kind {
            "logreg" => Fitted::Logreg(LogisticRegression::from_params(p)?),
            "gnb" => Fitted::Gnb(GaussianNb::from_params(p)?),
            "tree" => Fitted::Tree(DecisionTree::from_params(p)?),
            "forest" => Fitted::Forest(RandomForest::from_params(p)?),
            "gbt" => Fitted::Gbt(BoostedEnsemble::from_params(p)?),
            "mlp" => Fitted::Mlp(Mlp::from_params(p)?),
            "lda" => Fitted::Lda(ProjectionLda::from_params(p)?),
            "xgdnn" => Fitted::Xgdnn(HybridXgDnn::from_params(p)?),
            other => return Err(CliError::Data(format!("unknown model kind '{other}' in archive"))),
        })
    }
}
