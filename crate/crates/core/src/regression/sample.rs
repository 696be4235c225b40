use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariates for every subject, responses for some.
///
/// `x` is stored row-major with `p` columns. A response slot is `None`
/// exactly when the subject's indicator is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteCaseSample {
    p: usize,
    x: Vec<f64>,
    y: Vec<Option<f64>>,
    observed: Vec<usize>,
}

impl CompleteCaseSample {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<Option<f64>>) -> Result<Self> {
        let p = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("ragged covariate rows".into()));
        }
        let x = rows.into_iter().flatten().collect();
        Self::from_flat(p, x, y)
    }

    pub fn from_flat(p: usize, x: Vec<f64>, y: Vec<Option<f64>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("need at least one covariate".into()));
        }
        if x.len() != p * y.len() {
            return Err(Error::InvalidArgument(format!(
                "covariate matrix has {} entries, expected {}",
                x.len(),
                p * y.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite covariate in row {}",
                i / p
            )));
        }
        if let Some(i) = y.iter().position(|v| matches!(v, Some(t) if !t.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite response in row {i}")));
        }
        let observed = y
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|_| i))
            .collect();
        Ok(CompleteCaseSample { p, x, y, observed })
    }

    /// Build from covariates, responses and 0/1 indicators. Responses of
    /// rows with indicator 0 are discarded.
    pub fn with_indicators(rows: Vec<Vec<f64>>, y: Vec<f64>, a: &[u8]) -> Result<Self> {
        if y.len() != a.len() {
            return Err(Error::InvalidArgument("indicator length mismatch".into()));
        }
        let y = y
            .into_iter()
            .zip(a)
            .map(|(v, &ai)| (ai == 1).then_some(v))
            .collect();
        Self::new(rows, y)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of observed responses.
    pub fn m(&self) -> usize {
        self.observed.len()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn response(&self, i: usize) -> Option<f64> {
        self.y[i]
    }

    pub fn indicator(&self, i: usize) -> u8 {
        self.y[i].is_some() as u8
    }

    pub fn indicators(&self) -> Vec<u8> {
        (0..self.n()).map(|i| self.indicator(i)).collect()
    }

    /// Indices of the complete cases, ascending.
    pub fn observed_indices(&self) -> &[usize] {
        &self.observed
    }

    /// Observed responses in `observed_indices` order.
    pub fn observed_responses(&self) -> Vec<f64> {
        self.observed.iter().map(|&i| self.y[i].unwrap()).collect()
    }

    /// Overwrite row `i`. The indicator of the row is left unchanged: a
    /// response is stored only when the row was observed.
    pub fn replace_row(&mut self, i: usize, x: &[f64], y: f64) {
        assert_eq!(x.len(), self.p);
        self.x[i * self.p..(i + 1) * self.p].copy_from_slice(x);
        if self.y[i].is_some() {
            self.y[i] = Some(y);
        }
    }

    /// Same sample with rows reordered by `perm` (row `k` of the result is row `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let rows = perm.iter().map(|&i| self.x_row(i).to_vec()).collect();
        let y = perm.iter().map(|&i| self.y[i]).collect();
        Self::new(rows, y).expect("permutation of a valid sample")
    }

    /// Same covariates with responses mapped by `f`.
    pub fn map_responses(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let y = self
            .y
            .iter()
            .enumerate()
            .map(|(i, v)| v.map(|t| f(i, t)))
            .collect();
        Self::from_flat(self.p, self.x.clone(), y).expect("mapped sample")
    }
}
