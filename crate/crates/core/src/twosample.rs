//! Two-sample mean tests with a pooled covariance.
//!
//! Both samples share one covariance matrix. The statistics standardize by
//! pooled variances with divisor `n1 + n2 - 2`: the sum statistic's centering
//! constant `(n1+n2-2)p/(n1+n2-4)` is exactly the mean of a sum of squared
//! pooled t-statistics under that convention. The pooled correlation (and its
//! trace) is divisor-free.

use crate::data::{is_degenerate_variance, DataMatrix};
use crate::error::{require, Error, Result};
use crate::onesample::{centered_max, TestReport};

#[derive(Debug, Clone)]
pub struct TwoSampleData {
    sample1: DataMatrix,
    sample2: DataMatrix,
}

impl TwoSampleData {
    pub fn new(sample1: DataMatrix, sample2: DataMatrix) -> Result<Self> {
        require(sample1.n_cols() == sample2.n_cols(), || {
            Error::DimensionMismatch {
                context: "TwoSampleData",
                expected: sample1.n_cols(),
                actual: sample2.n_cols(),
            }
        })?;
        require(sample1.n_rows() >= 2 && sample2.n_rows() >= 2, || {
            Error::TooFewObservations {
                context: "TwoSampleData",
                n: sample1.n_rows().min(sample2.n_rows()),
                min: 2,
            }
        })?;
        Ok(Self { sample1, sample2 })
    }

    pub fn sample1(&self) -> &DataMatrix {
        &self.sample1
    }

    pub fn sample2(&self) -> &DataMatrix {
        &self.sample2
    }

    pub fn n1(&self) -> usize {
        self.sample1.n_rows()
    }

    pub fn n2(&self) -> usize {
        self.sample2.n_rows()
    }

    pub fn p(&self) -> usize {
        self.sample1.n_cols()
    }
}

/// Mean difference, pooled variances (divisor `n1 + n2 - 2`) and the pooled
/// centered sums of squares for the correlation trace.
struct Pooled {
    n1: f64,
    n2: f64,
    p: usize,
    diff: Vec<f64>,
    variances: Vec<f64>,
    sumsq: Vec<f64>,
    means1: Vec<f64>,
    means2: Vec<f64>,
}

fn pool(data: &TwoSampleData) -> Result<Pooled> {
    let p = data.p();
    let means1 = data.sample1.column_means();
    let means2 = data.sample2.column_means();
    let (ss1, am1) = data.sample1.centered_sumsq(&means1);
    let (ss2, am2) = data.sample2.centered_sumsq(&means2);
    let dof = (data.n1() + data.n2() - 2) as f64;
    let mut variances = Vec::with_capacity(p);
    let mut sumsq = Vec::with_capacity(p);
    for j in 0..p {
        let total = ss1[j] + ss2[j];
        let v = total / dof;
        if is_degenerate_variance(v, am1[j].max(am2[j])) {
            return Err(Error::ZeroVariance { column: j });
        }
        variances.push(v);
        sumsq.push(total);
    }
    let diff = means1.iter().zip(&means2).map(|(a, b)| a - b).collect();
    Ok(Pooled {
        n1: data.n1() as f64,
        n2: data.n2() as f64,
        p,
        diff,
        variances,
        sumsq,
        means1,
        means2,
    })
}

/// `tr(R_hat^2)` of the pooled sample correlation, through the Gram matrix of
/// the stacked norm-scaled centered rows (divisor-free).
fn pooled_trace_r2(data: &TwoSampleData, pooled: &Pooled) -> f64 {
    let n = data.n1() + data.n2();
    let p = pooled.p;
    let mut v = vec![0.0f64; n * p];
    for i in 0..data.n1() {
        let row = data.sample1.row(i);
        let out = &mut v[i * p..(i + 1) * p];
        for j in 0..p {
            out[j] = (row[j] - pooled.means1[j]) / pooled.sumsq[j].sqrt();
        }
    }
    for i in 0..data.n2() {
        let row = data.sample2.row(i);
        let out = &mut v[(data.n1() + i) * p..(data.n1() + i + 1) * p];
        for j in 0..p {
            out[j] = (row[j] - pooled.means2[j]) / pooled.sumsq[j].sqrt();
        }
    }
    let mut frob = 0.0;
    for i in 0..n {
        let ri = &v[i * p..(i + 1) * p];
        let gii: f64 = ri.iter().map(|x| x * x).sum();
        frob += gii * gii;
        for k in (i + 1)..n {
            let rk = &v[k * p..(k + 1) * p];
            let gik: f64 = ri.iter().zip(rk).map(|(a, b)| a * b).sum();
            frob += 2.0 * gik * gik;
        }
    }
    frob
}

/// Pooled sum-type statistic, asymptotically `N(0, 1)` under equal means.
/// Includes the small-sample correction factor `c_{p,n} = 1 + tr(R_hat^2) / p^{3/2}`.
pub fn t_sum_two(data: &TwoSampleData) -> Result<f64> {
    let n = data.n1() + data.n2();
    require(n >= 5, || Error::TooFewObservations {
        context: "two-sample sum statistic",
        n,
        min: 5,
    })?;
    let pooled = pool(data)?;
    let total = n as f64;
    let p = pooled.p as f64;
    let factor = pooled.n1 * pooled.n2 / total;
    let quad: f64 = (0..pooled.p)
        .map(|j| factor * pooled.diff[j] * pooled.diff[j] / pooled.variances[j])
        .sum();
    let tr_r2 = pooled_trace_r2(data, &pooled);
    let bound = p * p / (total - 2.0);
    require(tr_r2 > bound, || Error::DegenerateDenominator {
        context: "two-sample sum statistic: tr(R_hat^2) must exceed p^2/(n1+n2-2)",
        value: tr_r2,
        bound,
    })?;
    let c_pn = 1.0 + tr_r2 / p.powf(1.5);
    let center = (total - 2.0) * p / (total - 4.0);
    Ok((quad - center) / (2.0 * (tr_r2 - bound) * c_pn).sqrt())
}

/// Pooled max-type statistic. Returns `(raw, centered)`.
pub fn t_max_two(data: &TwoSampleData) -> Result<(f64, f64)> {
    require(data.p() >= 2, || Error::InvalidParameter {
        name: "p",
        value: data.p() as f64,
        constraint: "max statistic needs at least two coordinates",
    })?;
    let pooled = pool(data)?;
    let factor = pooled.n1 * pooled.n2 / (pooled.n1 + pooled.n2);
    let raw = (0..pooled.p)
        .map(|j| factor * pooled.diff[j] * pooled.diff[j] / pooled.variances[j])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((raw, centered_max(raw, pooled.p)))
}

/// Combined two-sample test.
pub fn combo_two(data: &TwoSampleData, alpha: f64) -> Result<TestReport> {
    let t_sum = t_sum_two(data)?;
    let (_, centered) = t_max_two(data)?;
    TestReport::from_statistics(t_sum, centered, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{sample_matrix, InnovationKind, RngStream};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gaussian(n: usize, p: usize, seed: u64) -> DataMatrix {
        sample_matrix(InnovationKind::StdNormal, n, p, RngStream::new(seed)).unwrap()
    }

    #[test]
    fn identical_samples_give_zero_quadratic_form() {
        let x = gaussian(6, 4, 11);
        let data = TwoSampleData::new(x.clone(), x).unwrap();
        let (raw, _) = t_max_two(&data).unwrap();
        assert_eq!(raw, 0.0);
        let t = t_sum_two(&data).unwrap();
        assert!(t < 0.0, "pure centering term must be negative, got {t}");
    }

    #[test]
    fn needs_five_observations_total() {
        let a = gaussian(2, 3, 1);
        let b = gaussian(2, 3, 2);
        let data = TwoSampleData::new(a, b).unwrap();
        assert_eq!(
            t_sum_two(&data).unwrap_err().code(),
            "too-few-observations"
        );
    }

    #[test]
    fn mismatched_p_is_rejected() {
        let a = gaussian(4, 3, 1);
        let b = gaussian(4, 2, 2);
        assert!(TwoSampleData::new(a, b).is_err());
    }

    fn shift_scale(data: &DataMatrix, a: f64, b: &[f64]) -> DataMatrix {
        let rows: Vec<Vec<f64>> = (0..data.n_rows())
            .map(|i| {
                data.row(i)
                    .iter()
                    .zip(b)
                    .map(|(x, bj)| a * x + bj)
                    .collect()
            })
            .collect();
        DataMatrix::from_rows(&rows).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn location_scale_invariance(seed in 0u64..300, a in prop::sample::select(vec![-2.0f64, 0.5, 3.0])) {
            let x1 = gaussian(7, 5, seed);
            let x2 = gaussian(9, 5, seed + 1000);
            let b: Vec<f64> = (0..5).map(|j| j as f64 - 2.0).collect();
            let data = TwoSampleData::new(x1.clone(), x2.clone()).unwrap();
            let moved = TwoSampleData::new(shift_scale(&x1, a, &b), shift_scale(&x2, a, &b)).unwrap();

            let t = t_sum_two(&data).unwrap();
            let t_moved = t_sum_two(&moved).unwrap();
            prop_assert!((t - t_moved).abs() <= 1e-10 * t.abs().max(1.0));

            let (raw, _) = t_max_two(&data).unwrap();
            let (raw_moved, _) = t_max_two(&moved).unwrap();
            prop_assert!((raw - raw_moved).abs() <= 1e-10 * raw.abs().max(1.0));
        }

        #[test]
        fn swapping_samples_changes_nothing(seed in 0u64..300) {
            let x1 = gaussian(6, 4, seed);
            let x2 = gaussian(8, 4, seed + 500);
            let fwd = TwoSampleData::new(x1.clone(), x2.clone()).unwrap();
            let rev = TwoSampleData::new(x2, x1).unwrap();
            let (t1, t2) = (t_sum_two(&fwd).unwrap(), t_sum_two(&rev).unwrap());
            prop_assert!((t1 - t2).abs() <= 1e-10 * t1.abs().max(1.0));
            let (m1, _) = t_max_two(&fwd).unwrap();
            let (m2, _) = t_max_two(&rev).unwrap();
            prop_assert!((m1 - m2).abs() <= 1e-10 * m1.abs().max(1.0));
        }
    }

    #[test]
    fn combo_two_composes_p_values() {
        let x1 = gaussian(20, 6, 3);
        let x2 = gaussian(20, 6, 4);
        let data = TwoSampleData::new(x1, x2).unwrap();
        let report = combo_two(&data, 0.05).unwrap();
        assert_relative_eq!(report.p_combo, report.p_sum.min(report.p_max), epsilon = 0.0);
        assert_relative_eq!(
            crate::dists::combo_threshold(0.05),
            0.02532056551910361,
            epsilon = 1e-12
        );
    }
}
