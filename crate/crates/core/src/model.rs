//! Problem instances: plant, cost, noise and channel parameters.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadform::{check_pd, check_psd, symmetrize};

/// Distribution family used for `X_0` and the process noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// `L z` with `z` i.i.d. uniform on `{-1, +1}` and `L Lᵀ` the target covariance.
    RademacherScaled,
}

/// Plant `x' = A x + B_L u_L + B_R u_R + w`, stage costs `s' R_t s` with
/// `s = (x, u_L, u_R)`, and drop probability `p`. Time runs `0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub horizon: usize,
    pub a: DMatrix<f64>,
    pub b_l: DMatrix<f64>,
    pub b_r: DMatrix<f64>,
    /// One cost matrix per time step, `horizon + 1` in total.
    pub r: Vec<DMatrix<f64>>,
    pub x0_mean: DVector<f64>,
    pub x0_cov: DMatrix<f64>,
    /// One noise covariance per time step, `horizon + 1` in total.
    pub noise_cov: Vec<DMatrix<f64>>,
    pub noise_kind: NoiseKind,
    pub p: f64,
}

impl SystemModel {
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_l(&self) -> usize {
        self.b_l.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.b_r.ncols()
    }

    /// `n_x + n_l + n_r`.
    pub fn n_s(&self) -> usize {
        self.n_x() + self.n_l() + self.n_r()
    }

    /// `[A, B_L, B_R]`.
    pub fn stacked_dynamics(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_x(), self.n_s());
        m.view_mut((0, 0), (self.n_x(), self.n_x())).copy_from(&self.a);
        m.view_mut((0, self.n_x()), (self.n_x(), self.n_l())).copy_from(&self.b_l);
        m.view_mut((0, self.n_x() + self.n_l()), (self.n_x(), self.n_r()))
            .copy_from(&self.b_r);
        m
    }

    /// Same model with a different drop probability.
    pub fn with_p(&self, p: f64) -> SystemModel {
        SystemModel { p, ..self.clone() }
    }

    pub fn validate(self) -> Result<ValidatedModel> {
        let n = self.n_x();
        if n == 0 {
            return Err(Error::DimensionMismatch("A must be at least 1x1".into()));
        }
        expect_shape(&self.a, n, n, "A")?;
        expect_shape(&self.b_l, n, self.n_l(), "B_L")?;
        expect_shape(&self.b_r, n, self.n_r(), "B_R")?;
        if self.x0_mean.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "x0_mean has length {}, expected {n}",
                self.x0_mean.len()
            )));
        }
        expect_shape(&self.x0_cov, n, n, "x0_cov")?;
        let steps = self.horizon + 1;
        if self.r.len() != steps {
            return Err(Error::DimensionMismatch(format!(
                "R has {} entries, expected horizon + 1 = {steps}",
                self.r.len()
            )));
        }
        if self.noise_cov.len() != steps {
            return Err(Error::DimensionMismatch(format!(
                "noise_cov has {} entries, expected horizon + 1 = {steps}",
                self.noise_cov.len()
            )));
        }
        for (t, r) in self.r.iter().enumerate() {
            expect_shape(r, self.n_s(), self.n_s(), &format!("R_{t}"))?;
        }
        for (t, w) in self.noise_cov.iter().enumerate() {
            expect_shape(w, n, n, &format!("noise_cov_{t}"))?;
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::BadProbability(self.p));
        }

        let mut m = self;
        m.x0_cov = symmetrize(&m.x0_cov);
        check_psd(&m.x0_cov, "x0_cov")?;
        for (t, r) in m.r.iter_mut().enumerate() {
            *r = symmetrize(r);
            check_pd(r, &format!("R_{t}"))?;
        }
        for (t, w) in m.noise_cov.iter_mut().enumerate() {
            *w = symmetrize(w);
            check_psd(w, &format!("noise_cov_{t}"))?;
        }
        Ok(ValidatedModel(m))
    }
}

fn expect_shape(m: &DMatrix<f64>, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// A model whose invariants have been checked. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel(SystemModel);

impl ValidatedModel {
    pub fn into_inner(self) -> SystemModel {
        self.0
    }
}

impl Deref for ValidatedModel {
    type Target = SystemModel;

    fn deref(&self) -> &SystemModel {
        &self.0
    }
}

type RowMajor = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(RowMajor),
    Many(Vec<RowMajor>),
}

/// On-disk JSON configuration. Matrices are row-major nested arrays; `R` and
/// `noise_cov` take either one matrix (used at every step) or one per step.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    horizon: usize,
    #[serde(rename = "A")]
    a: RowMajor,
    #[serde(rename = "B_L")]
    b_l: RowMajor,
    #[serde(rename = "B_R")]
    b_r: RowMajor,
    #[serde(rename = "R")]
    r: OneOrMany,
    x0_mean: Vec<f64>,
    x0_cov: RowMajor,
    noise_cov: OneOrMany,
    #[serde(default)]
    noise_kind: NoiseKind,
    p: f64,
}

/// Parses the JSON configuration format. Shapes are not checked here; call
/// [`SystemModel::validate`].
pub fn load_model(text: &str) -> Result<SystemModel> {
    let doc: ConfigDocument = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => Error::Schema(e.to_string()),
        _ => Error::Parse(e.to_string()),
    })?;
    let n = doc.a.len();
    let steps = doc.horizon + 1;
    let broadcast = |v: OneOrMany, field: &str| -> Result<Vec<DMatrix<f64>>> {
        match v {
            OneOrMany::One(m) => {
                let m = from_rows(&m, None, field)?;
                Ok(vec![m; steps])
            }
            OneOrMany::Many(ms) => ms
                .iter()
                .enumerate()
                .map(|(t, m)| from_rows(m, None, &format!("{field}[{t}]")))
                .collect(),
        }
    };
    Ok(SystemModel {
        horizon: doc.horizon,
        a: from_rows(&doc.a, None, "A")?,
        b_l: from_rows(&doc.b_l, Some(n), "B_L")?,
        b_r: from_rows(&doc.b_r, Some(n), "B_R")?,
        r: broadcast(doc.r, "R")?,
        x0_mean: DVector::from_vec(doc.x0_mean),
        x0_cov: from_rows(&doc.x0_cov, None, "x0_cov")?,
        noise_cov: broadcast(doc.noise_cov, "noise_cov")?,
        noise_kind: doc.noise_kind,
        p: doc.p,
    })
}

/// Serializes a model back to the configuration format.
pub fn model_to_json(model: &SystemModel) -> String {
    let doc = ConfigDocument {
        horizon: model.horizon,
        a: to_rows(&model.a),
        b_l: to_rows(&model.b_l),
        b_r: to_rows(&model.b_r),
        r: OneOrMany::Many(model.r.iter().map(to_rows).collect()),
        x0_mean: model.x0_mean.iter().copied().collect(),
        x0_cov: to_rows(&model.x0_cov),
        noise_cov: OneOrMany::Many(model.noise_cov.iter().map(to_rows).collect()),
        noise_kind: model.noise_kind,
        p: model.p,
    };
    serde_json::to_string_pretty(&doc).expect("config document serializes")
}

/// Row-major nested arrays to a matrix. `[]` with `empty_rows = Some(n)`
/// becomes an `n x 0` matrix, which is how an absent controller is written.
pub(crate) fn from_rows(rows: &[Vec<f64>], empty_rows: Option<usize>, field: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(empty_rows.unwrap_or(0), 0));
    }
    let cols = rows[0].len();
    if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Schema(format!(
            "{field}: row {i} has {} entries, row 0 has {cols}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> RowMajor {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
