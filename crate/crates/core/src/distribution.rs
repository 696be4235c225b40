//! Empirical distributions queried by the location functionals.
//!
//! [`ConvolvedDistribution`] is the uniform distribution over the `n·m`
//! sums `g(xⱼ, β̂) + ûᵢ` of every fitted value (missing rows included) with
//! every complete-case residual. It keeps only the two sorted component
//! samples: `cdf` costs `O(m log n)`, `quantile` is an exact selection in the
//! implicit sorted-sums matrix, and `mean` follows from linearity.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::regression::{CompleteCaseSample, RegressionFit, RegressionModel};

/// Largest support size [`ConvolvedDistribution::materialize`] will expand.
pub const MATERIALIZE_LIMIT: usize = 1_000_000;

/// Distribution interface needed by location functionals and plug-in variances.
pub trait EmpiricalDistribution {
    fn mean(&self) -> f64;

    /// Lower quantile `inf{t : cdf(t) ≥ p}`, always a support point.
    fn quantile(&self, p: f64) -> f64;

    /// Midpoint of the lower and upper medians.
    fn median(&self) -> f64;

    fn cdf(&self, t: f64) -> f64;

    /// Probability of the single value `t`.
    fn mass_at(&self, t: f64) -> f64;

    fn expectation<H: Fn(f64) -> f64>(&self, h: H) -> f64;

    /// `(E h₁(y), E h₂(y))` for `h(y) = (h₁(y), h₂(y))`, in one pass.
    fn expectation_pair<H: Fn(f64) -> (f64, f64)>(&self, h: H) -> (f64, f64) {
        (self.expectation(|y| h(y).0), self.expectation(|y| h(y).1))
    }

    /// `(E w(y), E w(y)·y)`.
    fn weighted_moments<W: Fn(f64) -> f64>(&self, w: W) -> (f64, f64) {
        self.expectation_pair(|y| {
            let wy = w(y);
            (wy, wy * y)
        })
    }
}

/// Smallest `k` in `1..=total` with `k / total ≥ p`, in floating point.
pub(crate) fn lower_rank(p: f64, total: u64) -> u64 {
    let nf = total as f64;
    let mut k = ((p * nf).ceil() as u64).clamp(1, total);
    while k > 1 && ((k - 1) as f64 / nf) >= p {
        k -= 1;
    }
    while k < total && (k as f64 / nf) < p {
        k += 1;
    }
    k
}

/// `F̂ = R̂ * K̂` stored as two sorted samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolvedDistribution {
    predictions: Vec<f64>,
    residuals: Vec<f64>,
}

impl ConvolvedDistribution {
    /// From arbitrary fitted values and residuals (both sorted internally).
    pub fn new(mut predictions: Vec<f64>, mut residuals: Vec<f64>) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::EmptyObservedSet);
        }
        if predictions.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if predictions.iter().chain(&residuals).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite support value".into()));
        }
        predictions.sort_by(f64::total_cmp);
        residuals.sort_by(f64::total_cmp);
        Ok(ConvolvedDistribution {
            predictions,
            residuals,
        })
    }

    /// Fitted values over all `n` rows, residuals `yᵢ - g(xᵢ, β̂)` over the observed rows.
    pub fn build<M: RegressionModel + ?Sized>(
        fit: &RegressionFit,
        sample: &CompleteCaseSample,
        model: &M,
    ) -> Result<Self> {
        if sample.m() == 0 {
            return Err(Error::EmptyObservedSet);
        }
        let predictions = (0..sample.n())
            .map(|j| model.value(sample.x_row(j), &fit.beta_hat))
            .collect();
        let residuals = sample
            .observed_indices()
            .iter()
            .map(|&i| sample.response(i).unwrap() - model.value(sample.x_row(i), &fit.beta_hat))
            .collect();
        Self::new(predictions, residuals)
    }

    pub fn n(&self) -> usize {
        self.predictions.len()
    }

    pub fn m(&self) -> usize {
        self.residuals.len()
    }

    /// Support size `n·m` counted with multiplicity.
    pub fn len(&self) -> u64 {
        self.n() as u64 * self.m() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// `#{(i,j) : pⱼ + uᵢ ≤ t}` by binary search per residual.
    pub fn count_le(&self, t: f64) -> u64 {
        self.residuals
            .iter()
            .map(|&u| self.predictions.partition_point(|&p| p + u <= t) as u64)
            .sum()
    }

    fn count_lt(&self, t: f64) -> u64 {
        self.residuals
            .iter()
            .map(|&u| self.predictions.partition_point(|&p| p + u < t) as u64)
            .sum()
    }

    /// Same count as `count_le` via a monotone staircase walk, `O(n + m)`.
    fn count_le_walk(&self, t: f64) -> u64 {
        let mut j = self.predictions.len();
        let mut total = 0u64;
        for &u in &self.residuals {
            while j > 0 && self.predictions[j - 1] + u > t {
                j -= 1;
            }
            total += j as u64;
        }
        total
    }

    /// All sums in `(lo, hi]`, unsorted.
    fn sums_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = self.predictions.len();
        let (mut a, mut b) = (n, n);
        let mut out = Vec::new();
        for &u in &self.residuals {
            while a > 0 && self.predictions[a - 1] + u > lo {
                a -= 1;
            }
            while b > 0 && self.predictions[b - 1] + u > hi {
                b -= 1;
            }
            out.extend(self.predictions[a..b].iter().map(|&p| p + u));
        }
        out
    }

    /// Every support point, sorted. Refuses supports above [`MATERIALIZE_LIMIT`].
    /// `k`-th smallest sum, `1 ≤ k ≤ nm`: bisection on the value with
    /// staircase counts, then enumeration of the few sums left in the bracket.
    pub fn select(&self, k: u64) -> f64 {
        let total = self.len();
        assert!((1..=total).contains(&k), "rank {k} outside 1..={total}");
        let n = self.predictions.len();
        let m = self.residuals.len();
        let mut lo = self.predictions[0] + self.residuals[0];
        let mut hi = self.predictions[n - 1] + self.residuals[m - 1];
        let mut c_lo = self.count_le_walk(lo);
        if c_lo >= k {
            return lo;
        }
        let mut c_hi = total;
        let small = (n + m).max(1024) as u64;
        loop {
            if c_hi - c_lo <= small {
                let mut between = self.sums_between(lo, hi);
                between.sort_by(f64::total_cmp);
                return between[(k - c_lo - 1) as usize];
            }
            let mid = 0.5 * lo + 0.5 * hi;
            if mid <= lo || mid >= hi {
                // Adjacent floats: every sum in (lo, hi] equals hi.
                return hi;
            }
            let c = self.count_le_walk(mid);
            if c >= k {
                hi = mid;
                c_hi = c;
            } else {
                lo = mid;
                c_lo = c;
            }
        }
    }

    pub fn materialize(&self) -> Result<Vec<f64>> {
        if self.len() > MATERIALIZE_LIMIT as u64 {
            return Err(Error::InvalidArgument(format!(
                "support of {} points exceeds the materialization limit",
                self.len()
            )));
        }
        let mut all = Vec::with_capacity(self.len() as usize);
        for &u in &self.residuals {
            all.extend(self.predictions.iter().map(|&p| p + u));
        }
        all.sort_by(f64::total_cmp);
        Ok(all)
    }

    /// Write the full support as a one-column CSV (`y`), sorted.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["y"]).map_err(|e| Error::Io(e.to_string()))?;
        for v in self.materialize()? {
            w.write_record([format!("{v:?}")]).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Uniform draws (with replacement) from the support, or the full
    /// support when it has at most `count` points.
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<f64> {
        if self.len() <= count as u64 {
            return self.materialize().expect("small support");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let i = rng.random_range(0..self.m());
                let j = rng.random_range(0..self.n());
                self.predictions[j] + self.residuals[i]
            })
            .collect()
    }
}

impl EmpiricalDistribution for ConvolvedDistribution {
    fn mean(&self) -> f64 {
        let mp = self.predictions.iter().sum::<f64>() / self.n() as f64;
        let mr = self.residuals.iter().sum::<f64>() / self.m() as f64;
        mp + mr
    }

    fn quantile(&self, p: f64) -> f64 {
        self.select(lower_rank(p, self.len()))
    }

    fn median(&self) -> f64 {
        let total = self.len();
        if total % 2 == 1 {
            self.select(total / 2 + 1)
        } else {
            0.5 * (self.select(total / 2) + self.select(total / 2 + 1))
        }
    }

    fn cdf(&self, t: f64) -> f64 {
        self.count_le(t) as f64 / self.len() as f64
    }

    fn mass_at(&self, t: f64) -> f64 {
        (self.count_le(t) - self.count_lt(t)) as f64 / self.len() as f64
    }

    fn expectation<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        let mut total = 0.0;
        for &u in &self.residuals {
            total += self.predictions.iter().map(|&p| h(p + u)).sum::<f64>();
        }
        total / self.len() as f64
    }

    fn expectation_pair<H: Fn(f64) -> (f64, f64)>(&self, h: H) -> (f64, f64) {
        let (mut s1, mut s2) = (0.0, 0.0);
        for &u in &self.residuals {
            let (mut a, mut b) = (0.0, 0.0);
            for &p in &self.predictions {
                let (h1, h2) = h(p + u);
                a += h1;
                b += h2;
            }
            s1 += a;
            s2 += b;
        }
        let total = self.len() as f64;
        (s1 / total, s2 / total)
    }
}

/// Finite sample with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl WeightedSample {
    /// Equal weights `1/N`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let nf = v.len() as f64;
        let cumulative = (1..=v.len()).map(|k| k as f64 / nf).collect();
        Ok(WeightedSample {
            weights: vec![1.0 / nf; v.len()],
            values: v,
            cumulative,
        })
    }

    pub fn new(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if values.len() != weights.len() {
            return Err(Error::InvalidArgument("values and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let weights: Vec<f64> = order.iter().map(|&i| weights[i] / total).collect();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(WeightedSample {
            values,
            weights,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl EmpiricalDistribution for WeightedSample {
    fn mean(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    fn quantile(&self, p: f64) -> f64 {
        let idx = self.cumulative.partition_point(|&c| c < p);
        self.values[idx.min(self.values.len() - 1)]
    }

    fn median(&self) -> f64 {
        let last = self.values.len() - 1;
        let idx = self.cumulative.partition_point(|&c| c < 0.5).min(last);
        if idx < last && (self.cumulative[idx] - 0.5).abs() <= 1e-12 {
            0.5 * (self.values[idx] + self.values[idx + 1])
        } else {
            self.values[idx]
        }
    }

    fn cdf(&self, t: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        }
    }

    fn mass_at(&self, t: f64) -> f64 {
        let a = self.values.partition_point(|&v| v < t);
        let b = self.values.partition_point(|&v| v <= t);
        self.weights[a..b].iter().sum()
    }

    fn expectation<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        self.values.iter().zip(&self.weights).map(|(&v, w)| w * h(v)).sum()
    }

    fn expectation_pair<H: Fn(f64) -> (f64, f64)>(&self, h: H) -> (f64, f64) {
        self.values.iter().zip(&self.weights).fold((0.0, 0.0), |(a, b), (&v, w)| {
            let (h1, h2) = h(v);
            (a + w * h1, b + w * h2)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ConvolvedDistribution {
        ConvolvedDistribution::new(vec![0.0, 1.0, 2.0], vec![-1.0, 1.0]).unwrap()
    }

    #[test]
    fn enumerates_six_points() {
        assert_eq!(small().materialize().unwrap(), vec![-1.0, 0.0, 1.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn cdf_counts_sums() {
        let d = small();
        assert!((d.cdf(1.0) - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(d.cdf(-5.0), 0.0);
        assert_eq!(d.cdf(10.0), 1.0);
        assert!((d.mass_at(1.0) - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn median_is_midpoint_for_even_support() {
        let d = ConvolvedDistribution::new(vec![0.0, 10.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(d.median(), 5.5);
        assert_eq!(small().median(), 1.0);
        let w = WeightedSample::from_values(&[4.0, 1.0, 2.0, 8.0]).unwrap();
        assert_eq!(w.median(), 3.0);
        assert_eq!(WeightedSample::from_values(&[1.0, 2.0, 9.0]).unwrap().median(), 2.0);
    }

    #[test]
    fn quantiles() {
        let d = small();
        assert_eq!(d.quantile(0.5), 1.0);
        assert_eq!(d.quantile(1e-12), -1.0);
        assert_eq!(d.quantile(1.0), 3.0);
    }

    #[test]
    fn mean_and_expectation() {
        let d = small();
        assert!((d.mean() - 1.0).abs() < 1e-15);
        assert!((d.expectation(|y| y) - 1.0).abs() < 1e-15);
        assert!((d.expectation(|_| 1.0) - 1.0).abs() < 1e-15);
        let t = 1.5;
        assert!((d.expectation(|y| (y <= t) as u8 as f64) - d.cdf(t)).abs() < 1e-15);
        let zero = ConvolvedDistribution::new(vec![1.0, 4.0], vec![0.0]).unwrap();
        assert_eq!(zero.mean(), 2.5);
    }

    #[test]
    fn point_mass() {
        let d = ConvolvedDistribution::new(vec![2.0], vec![0.5]).unwrap();
        assert_eq!(d.quantile(0.5), 2.5);
        assert_eq!(d.cdf(2.5), 1.0);
        assert_eq!(d.cdf(2.4), 0.0);
    }

    #[test]
    fn empty_residuals() {
        assert_eq!(
            ConvolvedDistribution::new(vec![1.0], vec![]).unwrap_err(),
            Error::EmptyObservedSet
        );
    }

    #[test]
    fn weighted_sample_queries() {
        let s = WeightedSample::new(&[3.0, 1.0, 2.0], &[0.2, 0.5, 0.3]).unwrap();
        assert_eq!(s.quantile(0.5), 1.0);
        assert_eq!(s.quantile(0.6), 2.0);
        assert!((s.cdf(2.0) - 0.8).abs() < 1e-15);
        assert!((s.mean() - (0.5 + 0.6 + 0.6)).abs() < 1e-15);
        assert!(WeightedSample::new(&[1.0], &[0.5]).is_err());
        let u = WeightedSample::from_values(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(u.quantile(0.5), 2.0);
    }

    #[test]
    fn csv_dump() {
        let mut buf = Vec::new();
        small().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("y\n-1.0\n"));
    }
}
