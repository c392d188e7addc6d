//! LDA projection and the classical classifiers: KNN, SVM (linear and RBF),
//! CART decision tree, random forest and L2 logistic regression.

pub mod knn;
pub mod lda;
pub mod linalg;
pub mod logreg;
pub mod svm;
pub mod tree;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::container::{ModelContainer, ModelKind, Persist};
use crate::error::{Error, Result};

pub use knn::{KnnParams, KnnState};
pub use lda::{fit_lda, LdaProjector};
pub use logreg::{LogRegParams, LogRegState};
pub use svm::{Kernel, SvmParams, SvmState};
pub use tree::{ForestParams, ForestState, TreeParams, TreeState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    User,
    Segment,
}

/// Feature rows with binary labels (`true` = risk) and the id of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    pub x: Array2<f64>,
    pub y: Vec<bool>,
    pub ids: Vec<String>,
    pub granularity: Granularity,
}

impl DatasetMatrix {
    pub fn new(x: Array2<f64>, y: Vec<bool>, ids: Vec<String>, granularity: Granularity) -> Result<DatasetMatrix> {
        if x.nrows() != y.len() || y.len() != ids.len() {
            return Err(Error::Validation(format!(
                "dataset has {} rows, {} labels and {} ids",
                x.nrows(),
                y.len(),
                ids.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("dataset contains NaN or infinite values".into()));
        }
        Ok(DatasetMatrix {
            x: x.as_standard_layout().into_owned(),
            y,
            ids,
            granularity,
        })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<bool>, ids: Vec<String>, granularity: Granularity) -> Result<DatasetMatrix> {
        DatasetMatrix::new(rows_to_array(rows)?, y, ids, granularity)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        row(&self.x, i)
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let pos = self.y.iter().filter(|&&v| v).count();
        if pos == 0 || pos == self.y.len() {
            return Err(Error::Validation("training data must contain both classes".into()));
        }
        Ok(())
    }
}

pub fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), d), flat).expect("shape checked above"))
}

pub(crate) fn row(x: &Array2<f64>, i: usize) -> &[f64] {
    let d = x.ncols();
    let s = x.as_slice().expect("matrices are kept in standard layout");
    &s[i * d..(i + 1) * d]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShallowParams {
    Knn(KnnParams),
    SvmLinear(SvmParams),
    SvmRbf(SvmParams),
    Dtree(TreeParams),
    Rforest(ForestParams),
    Logreg(LogRegParams),
}

impl ShallowParams {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ShallowParams::Knn(_) => "knn",
            ShallowParams::SvmLinear(_) => "svm_linear",
            ShallowParams::SvmRbf(_) => "svm_rbf",
            ShallowParams::Dtree(_) => "dtree",
            ShallowParams::Rforest(_) => "rforest",
            ShallowParams::Logreg(_) => "logreg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitted {
    Knn(KnnState),
    Svm(SvmState),
    Tree(TreeState),
    Forest(ForestState),
    Logreg(LogRegState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShallowModel {
    pub params: ShallowParams,
    state: Option<Fitted>,
}

impl ShallowModel {
    pub fn new(params: ShallowParams) -> ShallowModel {
        ShallowModel { params, state: None }
    }

    pub fn is_fitted(&self) -> bool {
        self.state.is_some()
    }

    pub fn state(&self) -> Option<&Fitted> {
        self.state.as_ref()
    }

    pub fn fit(&mut self, data: &DatasetMatrix) -> Result<()> {
        data.require_both_classes()?;
        let state = match &self.params {
            ShallowParams::Knn(p) => Fitted::Knn(knn::fit(p, data)?),
            ShallowParams::SvmLinear(p) => Fitted::Svm(svm::fit(p, Kernel::Linear, data)?),
            ShallowParams::SvmRbf(p) => {
                let gamma = p.gamma.unwrap_or_else(|| svm::scale_gamma(&data.x));
                Fitted::Svm(svm::fit(p, Kernel::Rbf { gamma }, data)?)
            }
            ShallowParams::Dtree(p) => Fitted::Tree(tree::fit_tree(p, data, None)?),
            ShallowParams::Rforest(p) => Fitted::Forest(tree::fit_forest(p, data)?),
            ShallowParams::Logreg(p) => Fitted::Logreg(logreg::fit(p, data)?),
        };
        self.state = Some(state);
        Ok(())
    }

    /// Risk scores in [0,1], one per row.
    pub fn predict_score(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let state = self.state.as_ref().ok_or(Error::NotFitted)?;
        let x = x.as_standard_layout().into_owned();
        let expected = match state {
            Fitted::Knn(s) => s.x.ncols(),
            Fitted::Svm(s) => s.support.ncols(),
            Fitted::Tree(s) => s.n_features,
            Fitted::Forest(s) => s.n_features,
            Fitted::Logreg(s) => s.w.len(),
        };
        if x.ncols() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.ncols() });
        }
        Ok((0..x.nrows())
            .map(|i| {
                let r = row(&x, i);
                match state {
                    Fitted::Knn(s) => s.score(r),
                    Fitted::Svm(s) => linalg::sigmoid(s.decision(r)),
                    Fitted::Tree(s) => s.score(r),
                    Fitted::Forest(s) => s.score(r),
                    Fitted::Logreg(s) => s.score(r),
                }
            })
            .collect())
    }

    pub fn predict_label(&self, x: &Array2<f64>) -> Result<Vec<bool>> {
        Ok(self.predict_score(x)?.into_iter().map(|s| s >= 0.5).collect())
    }
}

impl Persist for ShallowModel {
    fn to_container(&self) -> Result<ModelContainer> {
        let mut c = ModelContainer::new(ModelKind::Shallow, &self.params)?;
        let state = self.state.as_ref().ok_or(Error::NotFitted)?;
        c.push_json("state", state)?;
        Ok(c)
    }

    fn from_container(c: &ModelContainer) -> Result<ShallowModel> {
        c.expect_kind(ModelKind::Shallow)?;
        Ok(ShallowModel {
            params: c.config()?,
            state: Some(c.json("state")?),
        })
    }
}

/// How segment-level scores become one score per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentAggregation {
    #[default]
    Mean,
    Max,
    /// Fraction of segments labeled positive.
    Vote,
}

/// Groups `(id, score)` pairs by id, in order of first appearance.
pub fn aggregate_scores(ids: &[String], scores: &[f64], how: SegmentAggregation) -> Vec<(String, f64)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<&str, Vec<f64>> = std::collections::HashMap::new();
    for (id, &s) in ids.iter().zip(scores) {
        let g = groups.entry(id.as_str()).or_default();
        if g.is_empty() {
            order.push(id.clone());
        }
        g.push(s);
    }
    order
        .into_iter()
        .map(|id| {
            let g = &groups[id.as_str()];
            let v = match how {
                SegmentAggregation::Mean => g.iter().sum::<f64>() / g.len() as f64,
                SegmentAggregation::Max => g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                SegmentAggregation::Vote => g.iter().filter(|&&s| s >= 0.5).count() as f64 / g.len() as f64,
            };
            (id, v)
        })
        .collect()
}
