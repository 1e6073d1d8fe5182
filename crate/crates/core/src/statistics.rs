//! Test statistics: the two-sample functional, its weighted k-sample
//! generalization, and the log-convex variant `τ`.
//!
//! Every statistic is the plug-in (ECDF) value of a population functional
//! minus the constant that the functional attains when all distributions
//! coincide. The finite-sample bias of the plug-in is left in; null
//! calibration happens by simulation in [`crate::nulldist`].

use serde::{Deserialize, Serialize};

use crate::ecdf::{cross_sample_ties, integral_h_f_dg, integral_xi_dxi, CdfConvention, Sample};
use crate::error::{Error, Result};
use crate::generators::{ConvexGenerator, LogConvexGenerator};

/// Allowed deviation of `Σ p_j` from 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Positive weights `p_1..p_k`, `k ≥ 2`, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::param(format!(
                "weight vector needs at least two entries, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::param(format!("weights must be positive, got {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::param(format!("weights must sum to 1, got {sum}")));
        }
        Ok(WeightVector { weights })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::param(format!("uniform weights need k >= 2, got {k}")));
        }
        Ok(WeightVector {
            weights: vec![1.0 / k as f64; k],
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `1 - Σ p_j²`.
    pub fn equality_factor(&self) -> f64 {
        1.0 - self.weights.iter().map(|p| p * p).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    /// `raw_functional - centering_constant`.
    pub value: f64,
    pub raw_functional: f64,
    pub centering_constant: f64,
    /// Distinct values shared by two or more samples.
    pub tie_count: usize,
    pub generator_name: String,
    pub characterization_guaranteed: bool,
}

impl StatisticValue {
    fn new(raw: f64, centering: f64, tie_count: usize, name: &str, guaranteed: bool) -> Self {
        StatisticValue {
            value: raw - centering,
            raw_functional: raw,
            centering_constant: centering,
            tie_count,
            generator_name: name.to_string(),
            characterization_guaranteed: guaranteed,
        }
    }
}

/// `∫h(F_n)dG_m + ∫h(G_m)dF_n − 2∫₀¹h` under the default convention.
pub fn two_sample_statistic(h: &ConvexGenerator, x: &Sample, y: &Sample) -> StatisticValue {
    two_sample_statistic_with(h, x, y, CdfConvention::default())
}

pub fn two_sample_statistic_with(
    h: &ConvexGenerator,
    x: &Sample,
    y: &Sample,
    convention: CdfConvention,
) -> StatisticValue {
    let f = x.ecdf(convention);
    let g = y.ecdf(convention);
    let raw = integral_h_f_dg(h, &f, &g) + integral_h_f_dg(h, &g, &f);
    StatisticValue::new(
        raw,
        2.0 * h.integral_0_1(),
        cross_sample_ties(&[x, y]),
        h.name(),
        h.characterization_guaranteed(),
    )
}

/// `Σ_{j≠k} p_j p_k ∫h(F_j)dF_k − (1 − Σp²)∫₀¹h` over ordered pairs.
pub fn k_sample_statistic(
    h: &ConvexGenerator,
    samples: &[Sample],
    weights: &WeightVector,
) -> Result<StatisticValue> {
    k_sample_statistic_with(h, samples, weights, CdfConvention::default())
}

pub fn k_sample_statistic_with(
    h: &ConvexGenerator,
    samples: &[Sample],
    weights: &WeightVector,
    convention: CdfConvention,
) -> Result<StatisticValue> {
    if samples.len() < 2 {
        return Err(Error::param(format!(
            "k-sample statistic needs at least two samples, got {}",
            samples.len()
        )));
    }
    if samples.len() != weights.len() {
        return Err(Error::param(format!(
            "{} samples but {} weights",
            samples.len(),
            weights.len()
        )));
    }
    let cdfs: Vec<_> = samples.iter().map(|s| s.ecdf(convention)).collect();
    let p = weights.as_slice();
    let mut raw = 0.0;
    for (j, fj) in cdfs.iter().enumerate() {
        for (k, fk) in cdfs.iter().enumerate() {
            if j != k {
                raw += p[j] * p[k] * integral_h_f_dg(h, fj, fk);
            }
        }
    }
    let refs: Vec<&Sample> = samples.iter().collect();
    Ok(StatisticValue::new(
        raw,
        weights.equality_factor() * h.integral_0_1(),
        cross_sample_ties(&refs),
        h.name(),
        h.characterization_guaranteed(),
    ))
}

/// `∫ξ(G_m)dΞ(F_n) + ∫ξ(F_n)dΞ(G_m) − 2∫₀¹ξ²`.
pub fn tau_statistic(xi: &LogConvexGenerator, x: &Sample, y: &Sample) -> StatisticValue {
    tau_statistic_with(xi, x, y, CdfConvention::default())
}

pub fn tau_statistic_with(
    xi: &LogConvexGenerator,
    x: &Sample,
    y: &Sample,
    convention: CdfConvention,
) -> StatisticValue {
    let f = x.ecdf(convention);
    let g = y.ecdf(convention);
    let raw = integral_xi_dxi(xi, &g, &f) + integral_xi_dxi(xi, &f, &g);
    StatisticValue::new(
        raw,
        2.0 * xi.integral_sq_0_1(),
        cross_sample_ties(&[x, y]),
        xi.name(),
        xi.characterization_guaranteed(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    TwoSample,
    KSample,
    Tau,
}

impl StatisticKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StatisticKind::TwoSample => "two_sample",
            StatisticKind::KSample => "k_sample",
            StatisticKind::Tau => "tau",
        }
    }
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_sample" | "two-sample" | "test2" => Ok(StatisticKind::TwoSample),
            "k_sample" | "k-sample" | "testk" => Ok(StatisticKind::KSample),
            "tau" => Ok(StatisticKind::Tau),
            other => Err(Error::config(other, "statistic kind must be two_sample, k_sample or tau")),
        }
    }
}

#[derive(Debug, Clone)]
pub enum StatisticForm {
    TwoSample(ConvexGenerator),
    KSample(ConvexGenerator, WeightVector),
    Tau(LogConvexGenerator),
}

/// A fully specified statistic: form, generator, weights and ECDF convention.
#[derive(Debug, Clone)]
pub struct Statistic {
    form: StatisticForm,
    convention: CdfConvention,
}

impl Statistic {
    pub fn two_sample(h: ConvexGenerator) -> Self {
        Statistic {
            form: StatisticForm::TwoSample(h),
            convention: CdfConvention::default(),
        }
    }

    pub fn k_sample(h: ConvexGenerator, weights: WeightVector) -> Self {
        Statistic {
            form: StatisticForm::KSample(h, weights),
            convention: CdfConvention::default(),
        }
    }

    pub fn tau(xi: LogConvexGenerator) -> Self {
        Statistic {
            form: StatisticForm::Tau(xi),
            convention: CdfConvention::default(),
        }
    }

    pub fn with_convention(mut self, convention: CdfConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn form(&self) -> &StatisticForm {
        &self.form
    }

    pub fn convention(&self) -> CdfConvention {
        self.convention
    }

    pub fn kind(&self) -> StatisticKind {
        match self.form {
            StatisticForm::TwoSample(_) => StatisticKind::TwoSample,
            StatisticForm::KSample(..) => StatisticKind::KSample,
            StatisticForm::Tau(_) => StatisticKind::Tau,
        }
    }

    pub fn generator_name(&self) -> &str {
        match &self.form {
            StatisticForm::TwoSample(h) | StatisticForm::KSample(h, _) => h.name(),
            StatisticForm::Tau(xi) => xi.name(),
        }
    }

    pub fn weights(&self) -> Option<&WeightVector> {
        match &self.form {
            StatisticForm::KSample(_, w) => Some(w),
            _ => None,
        }
    }

    pub fn characterization_guaranteed(&self) -> bool {
        match &self.form {
            StatisticForm::TwoSample(h) | StatisticForm::KSample(h, _) => h.characterization_guaranteed(),
            StatisticForm::Tau(xi) => xi.characterization_guaranteed(),
        }
    }

    /// Number of samples the statistic consumes.
    pub fn arity(&self) -> usize {
        match &self.form {
            StatisticForm::KSample(_, w) => w.len(),
            _ => 2,
        }
    }

    pub fn check_sizes(&self, sizes: &[usize]) -> Result<()> {
        if sizes.len() != self.arity() {
            return Err(Error::param(format!(
                "{} statistic needs {} samples, got {}",
                self.kind().as_str(),
                self.arity(),
                sizes.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::param("every sample size must be at least 1"));
        }
        Ok(())
    }

    pub fn evaluate(&self, samples: &[Sample]) -> Result<StatisticValue> {
        let sizes: Vec<usize> = samples.iter().map(Sample::len).collect();
        self.check_sizes(&sizes)?;
        Ok(match &self.form {
            StatisticForm::TwoSample(h) => {
                two_sample_statistic_with(h, &samples[0], &samples[1], self.convention)
            }
            StatisticForm::KSample(h, w) => k_sample_statistic_with(h, samples, w, self.convention)?,
            StatisticForm::Tau(xi) => tau_statistic_with(xi, &samples[0], &samples[1], self.convention),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{exp_sq_generator, power_generator};

    fn s(v: &[f64]) -> Sample {
        Sample::new("s", v.to_vec()).unwrap()
    }

    #[test]
    fn worked_two_sample() {
        let h = power_generator(2).unwrap();
        let v = two_sample_statistic(&h, &s(&[1.0, 3.0]), &s(&[2.0, 4.0]));
        assert!((v.value - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(v.raw_functional, 0.75);
        assert_eq!(v.centering_constant, 2.0 / 3.0);
        assert_eq!(v.value, v.raw_functional - v.centering_constant);
        assert_eq!(v.tie_count, 0);
        assert_eq!(v.generator_name, "power:2");
    }

    #[test]
    fn identical_samples_keep_finite_n_bias() {
        let h = power_generator(2).unwrap();
        let x = s(&[0.1, 0.7]);
        let v = two_sample_statistic(&h, &x, &x);
        assert!((v.value - 7.0 / 12.0).abs() < 1e-15);
        assert_eq!(v.tie_count, 2);
    }

    #[test]
    fn weights() {
        let w = WeightVector::uniform(3).unwrap();
        assert!((w.equality_factor() - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            WeightVector::new(vec![0.5, 0.6]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(WeightVector::new(vec![1.0]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
        assert!(WeightVector::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn worked_k_sample() {
        let h = power_generator(2).unwrap();
        let samples = [s(&[1.0, 3.0]), s(&[2.0, 4.0])];
        let w = WeightVector::uniform(2).unwrap();
        let v = k_sample_statistic(&h, &samples, &w).unwrap();
        assert!((v.value - 1.0 / 48.0).abs() < 1e-15);
        let w3 = WeightVector::uniform(3).unwrap();
        assert!(matches!(
            k_sample_statistic(&h, &samples, &w3),
            Err(Error::InvalidParameter(_))
        ));
        assert!(k_sample_statistic(&h, &samples[..1], &w).is_err());
    }

    #[test]
    fn tau_with_unit_xi_is_zero() {
        let one = LogConvexGenerator::from_fn_unchecked("one", |_| 1.0).unwrap();
        let v = tau_statistic(&one, &s(&[1.0, 3.0, 3.5]), &s(&[2.0, 4.0]));
        assert!((v.raw_functional - 2.0).abs() < 1e-14);
        assert!(v.value.abs() < 1e-14);
        assert!(!v.characterization_guaranteed);
    }

    #[test]
    fn statistic_dispatch() {
        let h = power_generator(2).unwrap();
        let stat = Statistic::two_sample(h.clone());
        let samples = [s(&[1.0, 3.0]), s(&[2.0, 4.0])];
        assert_eq!(stat.evaluate(&samples).unwrap(), two_sample_statistic(&h, &samples[0], &samples[1]));
        assert!(stat.evaluate(&samples[..1]).is_err());
        let tau = Statistic::tau(exp_sq_generator(1.0).unwrap());
        assert_eq!(tau.kind(), StatisticKind::Tau);
        assert_eq!(tau.arity(), 2);
        let k = Statistic::k_sample(h, WeightVector::uniform(3).unwrap());
        assert_eq!(k.arity(), 3);
        assert!(k.check_sizes(&[2, 2]).is_err());
        assert!(k.check_sizes(&[2, 0, 2]).is_err());
    }
}
