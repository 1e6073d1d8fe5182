//! Population-level reference computations.
//!
//! Everything here works with analytic CDFs and is computed independently of
//! the ECDF machinery: quadrature in the quantile domain for the functionals,
//! exhaustive enumeration of rank interleavings for exact null laws, and
//! plain Monte Carlo for the order-statistic probabilities.
//!
//! Substituting `u = G(x)` turns `∫ h(F(x)) dG(x)` into `∫₀¹ h(F(G⁻¹(u))) du`,
//! a finite-range integral regardless of the supports involved.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ecdf::Sample;
use crate::error::{Error, Result};
use crate::generators::{
    bernstein_generator, exp_sq_generator, polynomial_generator, power_generator, ConvexGenerator,
    LogConvexGenerator,
};
use crate::quadrature::{Quadrature, ORACLE_QUADRATURE};
use crate::statistics::{Statistic, WeightVector};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A continuous CDF together with its quantile function.
#[derive(Clone)]
pub enum AnalyticCdf {
    /// Uniform on [0, 1].
    Uniform,
    /// `x^a` on [0, 1].
    Power(f64),
    Logistic { location: f64, scale: f64 },
    Exponential { rate: f64 },
    Custom {
        name: String,
        cdf: RealFn,
        quantile: RealFn,
    },
}

/// Parses `uniform`, `power:a`, `logistic:location,scale` and `exponential:rate`.
impl std::str::FromStr for AnalyticCdf {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (head, args) = spec.split_once(':').unwrap_or((spec, ""));
        let numbers = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::config(t, format!("cannot parse CDF parameter in `{spec}`")))
                })
                .collect()
        };
        let arity = |n: usize, v: Vec<f64>| -> Result<Vec<f64>> {
            if v.len() == n {
                Ok(v)
            } else {
                Err(Error::config(spec, format!("`{head}` takes {n} parameter(s)")))
            }
        };
        match head.trim() {
            "uniform" if args.is_empty() => Ok(AnalyticCdf::Uniform),
            "power" => AnalyticCdf::power(arity(1, numbers()?)?[0]),
            "logistic" => {
                let v = arity(2, numbers()?)?;
                AnalyticCdf::logistic(v[0], v[1])
            }
            "exponential" => AnalyticCdf::exponential(arity(1, numbers()?)?[0]),
            _ => Err(Error::config(
                head,
                "unknown CDF; expected uniform, power:a, logistic:loc,scale or exponential:rate",
            )),
        }
    }
}

impl fmt::Debug for AnalyticCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl AnalyticCdf {
    pub fn power(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::param(format!("power CDF needs a > 0, got {a}")));
        }
        Ok(AnalyticCdf::Power(a))
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self> {
        if !(location.is_finite() && scale.is_finite() && scale > 0.0) {
            return Err(Error::param(format!(
                "logistic CDF needs finite location and scale > 0, got ({location}, {scale})"
            )));
        }
        Ok(AnalyticCdf::Logistic { location, scale })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::param(format!("exponential CDF needs rate > 0, got {rate}")));
        }
        Ok(AnalyticCdf::Exponential { rate })
    }

    pub fn custom<C, Q>(name: impl Into<String>, cdf: C, quantile: Q) -> Self
    where
        C: Fn(f64) -> f64 + Send + Sync + 'static,
        Q: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        AnalyticCdf::Custom {
            name: name.into(),
            cdf: Arc::new(cdf),
            quantile: Arc::new(quantile),
        }
    }

    pub fn name(&self) -> String {
        match self {
            AnalyticCdf::Uniform => "uniform".into(),
            AnalyticCdf::Power(a) => format!("x^{a}"),
            AnalyticCdf::Logistic { location, scale } => format!("logistic({location},{scale})"),
            AnalyticCdf::Exponential { rate } => format!("exponential({rate})"),
            AnalyticCdf::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            AnalyticCdf::Uniform => x.clamp(0.0, 1.0),
            AnalyticCdf::Power(a) => x.clamp(0.0, 1.0).powf(*a),
            AnalyticCdf::Logistic { location, scale } => {
                1.0 / (1.0 + (-(x - location) / scale).exp())
            }
            AnalyticCdf::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            AnalyticCdf::Custom { cdf, .. } => cdf(x),
        }
    }

    /// Inverse CDF on (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            AnalyticCdf::Uniform => u,
            AnalyticCdf::Power(a) => u.powf(1.0 / a),
            AnalyticCdf::Logistic { location, scale } => location + scale * (u / (1.0 - u)).ln(),
            AnalyticCdf::Exponential { rate } => -(-u).ln_1p() / rate,
            AnalyticCdf::Custom { quantile, .. } => quantile(u),
        }
    }

    /// Checks `F(Q(u)) = u` within 1e-9 and monotonicity on a probe grid.
    pub fn check(&self, grid_size: usize) -> Result<()> {
        let mut previous = 0.0;
        for i in 1..grid_size {
            let u = i as f64 / grid_size as f64;
            let back = self.eval(self.quantile(u));
            if !((back - u).abs() <= 1e-9) {
                return Err(Error::InvalidInput(format!(
                    "{}: F(Q({u})) = {back}",
                    self.name()
                )));
            }
            if back < previous {
                return Err(Error::InvalidInput(format!("{}: CDF decreases near {u}", self.name())));
            }
            previous = back;
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }
}

fn integrate(q: &Quadrature, f: impl Fn(f64) -> f64, what: impl FnOnce() -> String) -> Result<f64> {
    q.integrate(f, 0.0, 1.0)
        .map(|r| r.value)
        .map_err(|e| Error::Numerical(format!("{}: {e}", what())))
}

/// `∫ h(F(x)) dG(x)`.
pub fn cross_integral(h: &ConvexGenerator, f: &AnalyticCdf, g: &AnalyticCdf) -> Result<f64> {
    integrate(
        &ORACLE_QUADRATURE,
        |u| h.eval(f.eval(g.quantile(u))),
        || format!("∫{}({})d{}", h.name(), f.name(), g.name()),
    )
}

/// `∫ F(x)^m dG(x) = P{max of m draws from F < one draw from G}`.
pub fn cross_moment(m: u32, f: &AnalyticCdf, g: &AnalyticCdf) -> Result<f64> {
    integrate(
        &ORACLE_QUADRATURE,
        |u| f.eval(g.quantile(u)).powi(m as i32),
        || format!("∫{}^{m}d{}", f.name(), g.name()),
    )
}

/// `∫h(F)dG + ∫h(G)dF`.
pub fn population_functional(h: &ConvexGenerator, f: &AnalyticCdf, g: &AnalyticCdf) -> Result<f64> {
    Ok(cross_integral(h, f, g)? + cross_integral(h, g, f)?)
}

/// Population functional minus its equality value `2∫₀¹h`.
pub fn two_sample_gap(h: &ConvexGenerator, f: &AnalyticCdf, g: &AnalyticCdf) -> Result<f64> {
    Ok(population_functional(h, f, g)? - 2.0 * h.integral_0_1())
}

/// Two-sample Cramér–von Mises distance `∫(F − G)² d((F + G)/2)`.
pub fn cvm_distance(f: &AnalyticCdf, g: &AnalyticCdf) -> Result<f64> {
    let over_f = integrate(
        &ORACLE_QUADRATURE,
        |u| (u - g.eval(f.quantile(u))).powi(2),
        || format!("cvm over {}", f.name()),
    )?;
    let over_g = integrate(
        &ORACLE_QUADRATURE,
        |u| (f.eval(g.quantile(u)) - u).powi(2),
        || format!("cvm over {}", g.name()),
    )?;
    Ok(0.5 * (over_f + over_g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
}

/// Monte Carlo estimate of `P{max(X_1..X_m) < Y}`, `X_j ~ F`, `Y ~ G`.
pub fn max_probability(
    m: u32,
    f: &AnalyticCdf,
    g: &AnalyticCdf,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m < 1 || trials < 1 {
        return Err(Error::param(format!(
            "max probability needs m >= 1 and at least one trial, got m={m}, N={trials}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..trials {
        let max = (0..m).map(|_| f.sample(&mut rng)).fold(f64::NEG_INFINITY, f64::max);
        if max < g.sample(&mut rng) {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    Ok(McEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}

/// `Σ_{j≠k} p_j p_k ∫h(F_j)dF_k − (1 − Σp²)∫₀¹h`.
pub fn jensen_gap(h: &ConvexGenerator, cdfs: &[AnalyticCdf], weights: &WeightVector) -> Result<f64> {
    if cdfs.len() < 2 || cdfs.len() != weights.len() {
        return Err(Error::param(format!(
            "jensen gap needs k >= 2 CDFs matching {} weights, got {}",
            weights.len(),
            cdfs.len()
        )));
    }
    let p = weights.as_slice();
    let mut total = 0.0;
    for (j, fj) in cdfs.iter().enumerate() {
        for (k, fk) in cdfs.iter().enumerate() {
            if j != k {
                total += p[j] * p[k] * cross_integral(h, fj, fk)?;
            }
        }
    }
    Ok(total - weights.equality_factor() * h.integral_0_1())
}

/// `∫ξ(G)dΞ(F) + ∫ξ(F)dΞ(G)`, with `dΞ(F(x)) = ξ(F(x)) dF(x)`.
pub fn log_convex_functional(xi: &LogConvexGenerator, f: &AnalyticCdf, g: &AnalyticCdf) -> Result<f64> {
    let a = integrate(
        &ORACLE_QUADRATURE,
        |u| xi.eval(g.eval(f.quantile(u))) * xi.eval(u),
        || format!("∫{}({})dΞ({})", xi.name(), g.name(), f.name()),
    )?;
    let b = integrate(
        &ORACLE_QUADRATURE,
        |u| xi.eval(f.eval(g.quantile(u))) * xi.eval(u),
        || format!("∫{}({})dΞ({})", xi.name(), f.name(), g.name()),
    )?;
    Ok(a + b)
}

/// Largest number of rank interleavings [`enumerate_null`] will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportPoint {
    pub value: f64,
    pub probability: f64,
    pub configurations: u64,
}

/// Exact null law of a statistic over all equally likely rank interleavings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub sample_sizes: Vec<usize>,
    pub configurations: u64,
    pub support: Vec<SupportPoint>,
}

impl ExactDistribution {
    /// Index of the support point within `tol` of `value`.
    pub fn locate(&self, value: f64, tol: f64) -> Option<usize> {
        self.support.iter().position(|s| (s.value - value).abs() <= tol)
    }

    /// `P{T ≥ observed}` with the same tie tolerance used to merge the support.
    pub fn upper_tail(&self, observed: f64) -> f64 {
        self.support
            .iter()
            .filter(|s| s.value >= observed - merge_tolerance(observed))
            .map(|s| s.probability)
            .sum()
    }
}

fn merge_tolerance(v: f64) -> f64 {
    1e-12 * v.abs().max(1.0)
}

/// Number of distinct label sequences with the given group sizes.
pub fn multinomial(sizes: &[usize]) -> Option<u128> {
    let mut total: u128 = 1;
    let mut placed: u128 = 0;
    for &n in sizes {
        for i in 1..=n as u128 {
            placed += 1;
            // C(placed, i) built incrementally stays integral at every step.
            total = total.checked_mul(placed)? / i;
        }
    }
    Some(total)
}

pub fn enumerate_null(statistic: &Statistic, sizes: &[usize]) -> Result<ExactDistribution> {
    statistic.check_sizes(sizes)?;
    let count = multinomial(sizes).unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let total: usize = sizes.iter().sum();
    let mut remaining = sizes.to_vec();
    let mut labels = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(count as usize);
    visit(&mut remaining, &mut labels, total, &mut |labels: &[usize]| {
        let samples = (0..sizes.len())
            .map(|j| {
                let ranks = labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l == j)
                    .map(|(r, _)| (r + 1) as f64)
                    .collect();
                Sample::new(format!("rank{j}"), ranks)
            })
            .collect::<Result<Vec<_>>>()?;
        values.push(statistic.evaluate(&samples)?.value);
        Ok(())
    })?;

    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mut support: Vec<SupportPoint> = Vec::new();
    for v in values {
        match support.last_mut() {
            Some(last) if (v - last.value).abs() <= merge_tolerance(last.value) => {
                last.configurations += 1;
            }
            _ => support.push(SupportPoint {
                value: v,
                probability: 0.0,
                configurations: 1,
            }),
        }
    }
    for s in &mut support {
        s.probability = s.configurations as f64 / n;
    }
    Ok(ExactDistribution {
        sample_sizes: sizes.to_vec(),
        configurations: count as u64,
        support,
    })
}

fn visit(
    remaining: &mut [usize],
    labels: &mut Vec<usize>,
    total: usize,
    emit: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if labels.len() == total {
        return emit(labels);
    }
    for j in 0..remaining.len() {
        if remaining[j] > 0 {
            remaining[j] -= 1;
            labels.push(j);
            visit(remaining, labels, total, emit)?;
            labels.pop();
            remaining[j] += 1;
        }
    }
    Ok(())
}

/// One line of the verification battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryCase {
    pub id: String,
    pub check: String,
    pub generator: String,
    pub f: String,
    pub g: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl BatteryCase {
    #[allow(clippy::too_many_arguments)]
    fn near(id: String, check: &str, gen: &str, f: &str, g: &str, value: f64, expected: f64, tol: f64) -> Self {
        BatteryCase {
            id,
            check: check.into(),
            generator: gen.into(),
            f: f.into(),
            g: g.into(),
            value,
            expected,
            tolerance: tol,
            passed: (value - expected).abs() < tol,
        }
    }

    /// Passes when `value > threshold`.
    fn above(id: String, check: &str, gen: &str, f: &str, g: &str, value: f64, threshold: f64) -> Self {
        BatteryCase {
            id,
            check: check.into(),
            generator: gen.into(),
            f: f.into(),
            g: g.into(),
            value,
            expected: threshold,
            tolerance: 0.0,
            passed: value > threshold,
        }
    }
}

/// Margin a strict inequality must clear.
pub const STRICT_MARGIN: f64 = 1e-6;
/// Equality cases of the convex functional.
pub const EQUALITY_TOLERANCE: f64 = 1e-8;
/// Equality cases of the log-convex functional.
pub const LOG_EQUALITY_TOLERANCE: f64 = 1e-7;

/// Generators of the standard battery: `u²`, `u³`, `u² + u⁴`, Bernstein(`u²`, 8).
pub fn battery_generators() -> Result<Vec<ConvexGenerator>> {
    let square = power_generator(2)?;
    Ok(vec![
        square.clone(),
        power_generator(3)?,
        polynomial_generator(&[0.0, 1.0, 0.0, 1.0])?,
        bernstein_generator(&square, 8)?,
    ])
}

/// Distinct-distribution pairs of the standard battery.
pub fn battery_pairs() -> Result<Vec<(AnalyticCdf, AnalyticCdf)>> {
    Ok(vec![
        (AnalyticCdf::Uniform, AnalyticCdf::power(2.0)?),
        (AnalyticCdf::Uniform, AnalyticCdf::power(3.0)?),
        (AnalyticCdf::logistic(0.0, 1.0)?, AnalyticCdf::logistic(0.0, 2.0)?),
    ])
}

/// Runs every population-level check and returns one case per comparison.
pub fn run_battery() -> Result<Vec<BatteryCase>> {
    let gens = battery_generators()?;
    let pairs = battery_pairs()?;
    let mut cases = Vec::new();
    let mut singles: Vec<AnalyticCdf> = Vec::new();
    for (f, g) in &pairs {
        for c in [f, g] {
            if !singles.iter().any(|s| s.name() == c.name()) {
                singles.push(c.clone());
            }
        }
    }
    singles.push(AnalyticCdf::exponential(1.0)?);

    for h in &gens {
        for (f, g) in &pairs {
            let gap = two_sample_gap(h, f, g)?;
            cases.push(BatteryCase::above(
                format!("ineq/{}/{}/{}", h.name(), f.name(), g.name()),
                "strict_inequality",
                h.name(),
                &f.name(),
                &g.name(),
                gap,
                STRICT_MARGIN,
            ));
            let flipped = two_sample_gap(&h.negated(), f, g)?;
            cases.push(BatteryCase::near(
                format!("concave/{}/{}/{}", h.name(), f.name(), g.name()),
                "concave_flip",
                h.name(),
                &f.name(),
                &g.name(),
                flipped,
                -gap,
                1e-10,
            ));
        }
        for f in &singles {
            let gap = two_sample_gap(h, f, f)?;
            cases.push(BatteryCase::near(
                format!("equal/{}/{}", h.name(), f.name()),
                "equality",
                h.name(),
                &f.name(),
                &f.name(),
                gap,
                0.0,
                EQUALITY_TOLERANCE,
            ));
        }
    }

    let square = &gens[0];
    for (f, g) in &pairs {
        let lhs = two_sample_gap(square, f, g)?;
        let cvm = cvm_distance(f, g)?;
        cases.push(BatteryCase::near(
            format!("cvm/{}/{}", f.name(), g.name()),
            "cvm_identity",
            square.name(),
            &f.name(),
            &g.name(),
            lhs,
            cvm,
            EQUALITY_TOLERANCE,
        ));
    }
    let (f, g) = &pairs[0];
    cases.push(BatteryCase::near(
        "cvm/closed_form".into(),
        "cvm_identity",
        square.name(),
        &f.name(),
        &g.name(),
        cvm_distance(f, g)?,
        1.0 / 30.0,
        EQUALITY_TOLERANCE,
    ));

    // Polynomial linearity: u² + u⁴ splits into its monomials.
    let quartic = power_generator(4)?;
    for (f, g) in &pairs {
        let whole = population_functional(&gens[2], f, g)?;
        let parts = population_functional(square, f, g)? + population_functional(&quartic, f, g)?;
        cases.push(BatteryCase::near(
            format!("linear/{}/{}", f.name(), g.name()),
            "polynomial_linearity",
            gens[2].name(),
            &f.name(),
            &g.name(),
            whole,
            parts,
            1e-9,
        ));
    }

    // Bernstein approximations approach the inner generator's functional.
    for inner in [square.clone(), power_generator(3)?] {
        for (f, g) in &pairs {
            let target = population_functional(&inner, f, g)?;
            let mut previous = None;
            for m in [4u32, 8, 16, 32] {
                let b = bernstein_generator(&inner, m)?;
                let err = (population_functional(&b, f, g)? - target).abs();
                let Some(prev) = previous.replace(err) else {
                    continue;
                };
                cases.push(BatteryCase::above(
                    format!("bernstein/{}/{m}/{}/{}", inner.name(), f.name(), g.name()),
                    "bernstein_monotone",
                    b.name(),
                    &f.name(),
                    &g.name(),
                    prev - err,
                    0.0,
                ));
            }
        }
    }

    // Weighted k-sample form.
    let halves = WeightVector::uniform(2)?;
    let (f, g) = &pairs[0];
    cases.push(BatteryCase::near(
        "jensen/k2".into(),
        "jensen_gap",
        square.name(),
        &f.name(),
        &g.name(),
        jensen_gap(square, &[f.clone(), g.clone()], &halves)?,
        1.0 / 120.0,
        1e-9,
    ));
    let thirds = WeightVector::uniform(3)?;
    for h in &gens {
        let equal = jensen_gap(h, &[f.clone(), f.clone(), f.clone()], &thirds)?;
        cases.push(BatteryCase::near(
            format!("jensen/equal/{}", h.name()),
            "jensen_equality",
            h.name(),
            &f.name(),
            &f.name(),
            equal,
            0.0,
            EQUALITY_TOLERANCE,
        ));
        let mixed = jensen_gap(h, &[f.clone(), f.clone(), g.clone()], &thirds)?;
        cases.push(BatteryCase::above(
            format!("jensen/mixed/{}", h.name()),
            "jensen_strict",
            h.name(),
            &f.name(),
            &g.name(),
            mixed,
            STRICT_MARGIN,
        ));
    }

    // Log-convex functional.
    let xi = exp_sq_generator(1.0)?;
    let level = 2.0 * xi.integral_sq_0_1();
    for f in &singles {
        cases.push(BatteryCase::near(
            format!("logconvex/equal/{}", f.name()),
            "log_convex_equality",
            xi.name(),
            &f.name(),
            &f.name(),
            log_convex_functional(&xi, f, f)?,
            level,
            LOG_EQUALITY_TOLERANCE,
        ));
    }
    for (f, g) in &pairs {
        cases.push(BatteryCase::above(
            format!("logconvex/ineq/{}/{}", f.name(), g.name()),
            "log_convex_strict",
            xi.name(),
            &f.name(),
            &g.name(),
            log_convex_functional(&xi, f, g)? - level,
            STRICT_MARGIN,
        ));
    }

    // Order-statistic reading of ∫F^m dG.
    for (f, g) in [(&pairs[0].0, &pairs[0].0), (&pairs[0].0, &pairs[0].1)] {
        for m in [1u32, 2, 5] {
            let exact = cross_moment(m, f, g)?;
            let mc = max_probability(m, f, g, 100_000, 0x5eed + m as u64)?;
            cases.push(BatteryCase::near(
                format!("max/{m}/{}/{}", f.name(), g.name()),
                "max_interpretation",
                &format!("power:{m}"),
                &f.name(),
                &g.name(),
                mc.estimate,
                exact,
                4.0 * mc.std_error,
            ));
        }
    }
    Ok(cases)
}

pub fn write_battery_csv<W: Write>(cases: &[BatteryCase], mut w: W) -> std::io::Result<()> {
    writeln!(w, "case_id,check,h,F,G,value,expected,tolerance,pass")?;
    for c in cases {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&c.id),
            c.check,
            csv_field(&c.generator),
            csv_field(&c.f),
            csv_field(&c.g),
            c.value,
            c.expected,
            c.tolerance,
            if c.passed { "pass" } else { "fail" }
        )?;
    }
    w.flush()
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_round_trips() {
        for c in [
            AnalyticCdf::Uniform,
            AnalyticCdf::power(0.5).unwrap(),
            AnalyticCdf::power(3.0).unwrap(),
            AnalyticCdf::logistic(1.0, 2.0).unwrap(),
            AnalyticCdf::exponential(0.7).unwrap(),
        ] {
            c.check(1000).unwrap();
        }
        assert!(AnalyticCdf::power(0.0).is_err());
        assert!(AnalyticCdf::logistic(0.0, -1.0).is_err());
        let broken = AnalyticCdf::custom("broken", |x: f64| x.clamp(0.0, 1.0), |u| u * 0.5);
        assert!(broken.check(10).is_err());
    }

    #[test]
    fn functional_closed_forms() {
        let h = power_generator(2).unwrap();
        let f = AnalyticCdf::Uniform;
        let g = AnalyticCdf::power(2.0).unwrap();
        assert!((population_functional(&h, &f, &g).unwrap() - 0.7).abs() < 1e-12);
        assert!((population_functional(&h, &f, &f).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let h3 = power_generator(3).unwrap();
        assert!((population_functional(&h3, &g, &g).unwrap() - 0.5).abs() < 1e-9);
        assert!((cvm_distance(&f, &g).unwrap() - 1.0 / 30.0).abs() < 1e-12);
        assert!(cvm_distance(&g, &g).unwrap().abs() < 1e-12);
    }

    #[test]
    fn unit_xi_gives_equality_for_distinct_cdfs() {
        let one = LogConvexGenerator::from_fn_unchecked("one", |_| 1.0).unwrap();
        let v = log_convex_functional(&one, &AnalyticCdf::Uniform, &AnalyticCdf::power(2.0).unwrap()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn multinomial_counts() {
        assert_eq!(multinomial(&[2, 2]), Some(6));
        assert_eq!(multinomial(&[1, 1]), Some(2));
        assert_eq!(multinomial(&[2, 2, 2]), Some(90));
        assert_eq!(multinomial(&[10, 10]), Some(184_756));
        assert_eq!(multinomial(&[200, 200]), None);
    }

    #[test]
    fn enumerate_small_sizes() {
        let h = power_generator(2).unwrap();
        let stat = Statistic::two_sample(h);
        let d = enumerate_null(&stat, &[1, 1]).unwrap();
        assert_eq!(d.support.len(), 1);
        assert!((d.support[0].value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.support[0].probability, 1.0);

        let d = enumerate_null(&stat, &[2, 2]).unwrap();
        assert_eq!(d.configurations, 6);
        let alt = d.locate(1.0 / 12.0, 1e-12).unwrap();
        let sep = d.locate(1.0 / 3.0, 1e-12).unwrap();
        assert_eq!(d.support[alt].configurations, 4);
        assert_eq!(d.support[sep].configurations, 2);
        assert!((d.upper_tail(1.0 / 12.0) - 1.0).abs() < 1e-15);

        assert!(matches!(
            enumerate_null(&stat, &[15, 15]),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn max_probability_rejects_bad_args() {
        let u = AnalyticCdf::Uniform;
        assert!(max_probability(0, &u, &u, 10, 1).is_err());
        assert!(max_probability(1, &u, &u, 0, 1).is_err());
    }

    #[test]
    fn cdf_specs_parse() {
        for (spec, name) in [
            ("uniform", "uniform"),
            ("power:2", "x^2"),
            ("logistic:0,2", "logistic(0,2)"),
            ("exponential:1.5", "exponential(1.5)"),
        ] {
            assert_eq!(spec.parse::<AnalyticCdf>().unwrap().name(), name);
        }
        for bad in ["uniform:1", "power", "power:-1", "logistic:1", "gamma:2", "power:x"] {
            assert!(bad.parse::<AnalyticCdf>().is_err(), "{bad}");
        }
    }
}
