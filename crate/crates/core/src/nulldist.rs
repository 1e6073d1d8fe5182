//! Monte Carlo null calibration.
//!
//! Every statistic in this crate depends on the data only through the joint
//! ranks of the samples, so under the null hypothesis its law is the same for
//! every continuous parent distribution. Null tables are therefore simulated
//! from standard uniforms.
//!
//! Replicate `i` draws from its own ChaCha stream keyed by `(seed, i)` and
//! results are collected in index order before sorting, which makes a table a
//! pure function of its inputs regardless of how many workers produced it.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecdf::{CdfConvention, Sample};
use crate::error::{Error, Result};
use crate::statistics::{Statistic, StatisticKind, StatisticValue};

pub const DEFAULT_REPLICATES: usize = 9999;

// Power-study data sets use the upper half of the stream space so they never
// share randomness with the null table built from the same seed.
const POWER_STREAM_BASE: u64 = 1 << 63;

/// The independent random stream for replicate `index` under `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// How null replicates are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum NullSource {
    /// Independent standard-uniform samples.
    Uniform,
    /// Random re-partitions of the pooled observed data. Conditions on the
    /// observed ties, so it stays valid when the data are not continuous.
    Permutation { pooled: Vec<f64> },
}

impl NullSource {
    pub fn name(&self) -> &'static str {
        match self {
            NullSource::Uniform => "uniform",
            NullSource::Permutation { .. } => "permutation",
        }
    }
}

/// Sorted simulated null values of one statistic at fixed sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTable {
    pub statistic_kind: StatisticKind,
    pub generator_name: String,
    pub convention: CdfConvention,
    pub weights: Option<Vec<f64>>,
    pub sample_sizes: Vec<usize>,
    pub source: String,
    pub seed: u64,
    pub replicates: Vec<f64>,
}

impl NullTable {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn meta(&self) -> TableMeta {
        TableMeta {
            statistic_kind: self.statistic_kind,
            generator_name: self.generator_name.clone(),
            convention: self.convention,
            weights: self.weights.clone(),
            sample_sizes: self.sample_sizes.clone(),
            source: self.source.clone(),
            seed: self.seed,
            replicates: self.replicates.len(),
        }
    }

    /// Whether this table calibrates `statistic` at `sizes`.
    pub fn matches(&self, statistic: &Statistic, sizes: &[usize]) -> bool {
        self.statistic_kind == statistic.kind()
            && self.generator_name == statistic.generator_name()
            && self.convention == statistic.convention()
            && self.weights.as_deref() == statistic.weights().map(|w| w.as_slice())
            && self.sample_sizes == sizes
    }

    /// `(1 + #{t ≥ observed}) / (B + 1)`.
    pub fn p_value(&self, observed: f64) -> f64 {
        p_value(self, observed)
    }

    pub fn critical_value(&self, alpha: f64) -> Result<CriticalValue> {
        critical_value(self, alpha)
    }
}

/// Everything about a table except its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub statistic_kind: StatisticKind,
    pub generator_name: String,
    pub convention: CdfConvention,
    pub weights: Option<Vec<f64>>,
    pub sample_sizes: Vec<usize>,
    pub source: String,
    pub seed: u64,
    pub replicates: usize,
}

/// Add-one Monte Carlo p-value for the upper tail; ties count as exceedances.
pub fn p_value(table: &NullTable, observed: f64) -> f64 {
    let b = table.replicates.len();
    let below = table.replicates.partition_point(|&t| t < observed);
    (1 + b - below) as f64 / (b + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub level: f64,
    pub value: f64,
    /// 1-based order statistic of the table that was used.
    pub rank: usize,
    /// The requested rank fell outside `[1, B]`.
    pub clamped: bool,
}

/// Order statistic at rank `⌈(1 − α)(B + 1)⌉`, clamped to `[1, B]`.
pub fn critical_value(table: &NullTable, alpha: f64) -> Result<CriticalValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("level must lie in (0, 1), got {alpha}")));
    }
    let b = table.replicates.len();
    if b == 0 {
        return Err(Error::param("null table is empty"));
    }
    // The epsilon absorbs representation error in (1 − α)(B + 1) for round α.
    let wanted = ((1.0 - alpha) * (b + 1) as f64 - 1e-9).ceil();
    let rank = wanted.clamp(1.0, b as f64) as usize;
    Ok(CriticalValue {
        level: alpha,
        value: table.replicates[rank - 1],
        rank,
        clamped: wanted < 1.0 || wanted > b as f64,
    })
}

type Transform = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Builder for null tables.
#[derive(Clone)]
pub struct NullSimulator<'a> {
    statistic: &'a Statistic,
    sizes: Vec<usize>,
    replicates: usize,
    seed: u64,
    workers: Option<usize>,
    transform: Option<Transform>,
    source: NullSource,
}

impl fmt::Debug for NullSimulator<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NullSimulator")
            .field("statistic", &self.statistic.kind())
            .field("sizes", &self.sizes)
            .field("replicates", &self.replicates)
            .field("seed", &self.seed)
            .field("workers", &self.workers)
            .field("transformed", &self.transform.is_some())
            .field("source", &self.source.name())
            .finish()
    }
}

impl<'a> NullSimulator<'a> {
    pub fn new(statistic: &'a Statistic, sizes: &[usize]) -> Self {
        NullSimulator {
            statistic,
            sizes: sizes.to_vec(),
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            workers: None,
            transform: None,
            source: NullSource::Uniform,
        }
    }

    pub fn replicates(mut self, b: usize) -> Self {
        self.replicates = b;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Size of the worker pool; `None` uses the global rayon pool.
    pub fn workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    /// Maps every simulated uniform through `f` before the statistic sees it.
    /// For strictly increasing `f` the table is unchanged.
    pub fn transform<F>(mut self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.transform = Some(Arc::new(f));
        self
    }

    pub fn source(mut self, source: NullSource) -> Self {
        self.source = source;
        self
    }

    fn draw(&self, index: usize) -> Result<Vec<Sample>> {
        let mut rng = replicate_rng(self.seed, index as u64);
        match &self.source {
            NullSource::Uniform => self
                .sizes
                .iter()
                .map(|&n| {
                    let values = (0..n)
                        .map(|_| {
                            let u: f64 = rng.random();
                            match &self.transform {
                                Some(f) => f(u),
                                None => u,
                            }
                        })
                        .collect();
                    Sample::new("null", values)
                })
                .collect(),
            NullSource::Permutation { pooled } => {
                let mut shuffled = pooled.clone();
                shuffled.shuffle(&mut rng);
                let mut rest = shuffled.as_slice();
                self.sizes
                    .iter()
                    .map(|&n| {
                        let (head, tail) = rest.split_at(n);
                        rest = tail;
                        let values = match &self.transform {
                            Some(f) => head.iter().map(|&v| f(v)).collect(),
                            None => head.to_vec(),
                        };
                        Sample::new("null", values)
                    })
                    .collect()
            }
        }
    }

    pub fn run(&self) -> Result<NullTable> {
        if self.replicates == 0 {
            return Err(Error::param("null simulation needs at least one replicate"));
        }
        if self.sizes.is_empty() {
            return Err(Error::param("null simulation needs sample sizes"));
        }
        self.statistic.check_sizes(&self.sizes)?;
        if let NullSource::Permutation { pooled } = &self.source {
            let total: usize = self.sizes.iter().sum();
            if pooled.len() != total {
                return Err(Error::param(format!(
                    "permutation null needs {total} pooled values, got {}",
                    pooled.len()
                )));
            }
        }
        let simulate = || -> Result<Vec<f64>> {
            (0..self.replicates)
                .into_par_iter()
                .map(|i| {
                    let samples = self.draw(i)?;
                    Ok(self.statistic.evaluate(&samples)?.value)
                })
                .collect()
        };
        let mut replicates = in_pool(self.workers, simulate)??;
        replicates.sort_by(f64::total_cmp);
        Ok(NullTable {
            statistic_kind: self.statistic.kind(),
            generator_name: self.statistic.generator_name().to_string(),
            convention: self.statistic.convention(),
            weights: self.statistic.weights().map(|w| w.as_slice().to_vec()),
            sample_sizes: self.sizes.clone(),
            source: self.source.name().to_string(),
            seed: self.seed,
            replicates,
        })
    }
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(0) => Err(Error::param("worker count must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::param(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Uniform-source null table with the global worker pool.
pub fn simulate_null(
    statistic: &Statistic,
    sizes: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<NullTable> {
    NullSimulator::new(statistic, sizes)
        .replicates(replicates)
        .seed(seed)
        .run()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOptions {
    pub replicates: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub workers: Option<usize>,
    /// Calibrate by permuting the pooled data instead of simulating uniforms.
    pub permutation: bool,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            levels: vec![0.01, 0.05, 0.1],
            workers: None,
            permutation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    #[serde(flatten)]
    pub critical: CriticalValue,
    /// `p_value ≤ level`.
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: StatisticValue,
    pub p_value: f64,
    pub critical_values: Vec<LevelDecision>,
    pub table: TableMeta,
    pub warnings: Vec<String>,
}

/// Computes the statistic on `samples`, simulates its null at the observed
/// sample sizes and assembles the report.
pub fn run_test(statistic: &Statistic, samples: &[Sample], options: &TestOptions) -> Result<TestReport> {
    let sizes: Vec<usize> = samples.iter().map(Sample::len).collect();
    statistic.check_sizes(&sizes)?;
    check_levels(&options.levels)?;
    let source = if options.permutation {
        NullSource::Permutation {
            pooled: samples.iter().flat_map(|s| s.values().iter().copied()).collect(),
        }
    } else {
        NullSource::Uniform
    };
    let table = NullSimulator::new(statistic, &sizes)
        .replicates(options.replicates)
        .seed(options.seed)
        .workers(options.workers)
        .source(source)
        .run()?;
    report_against(statistic, samples, &table, &options.levels)
}

/// Like [`run_test`] but against an existing table, e.g. one loaded from a cache.
pub fn report_against(
    statistic: &Statistic,
    samples: &[Sample],
    table: &NullTable,
    levels: &[f64],
) -> Result<TestReport> {
    let sizes: Vec<usize> = samples.iter().map(Sample::len).collect();
    if !table.matches(statistic, &sizes) {
        return Err(Error::param(format!(
            "null table ({} {} {:?}) does not calibrate {} {} at sizes {:?}",
            table.statistic_kind.as_str(),
            table.generator_name,
            table.sample_sizes,
            statistic.kind().as_str(),
            statistic.generator_name(),
            sizes
        )));
    }
    check_levels(levels)?;
    let observed = statistic.evaluate(samples)?;
    let p = p_value(table, observed.value);

    let mut warnings = Vec::new();
    if observed.tie_count > 0 {
        let hint = if table.source == "uniform" {
            "; consider permutation calibration"
        } else {
            ""
        };
        warnings.push(format!(
            "{} value(s) shared across samples: continuous-distribution assumption violated{hint}",
            observed.tie_count
        ));
    }
    if !observed.characterization_guaranteed {
        warnings.push(format!(
            "characterization not guaranteed: generator {} bypassed validation",
            observed.generator_name
        ));
    }

    let mut sorted_levels = levels.to_vec();
    sorted_levels.sort_by(f64::total_cmp);
    let mut critical_values = Vec::with_capacity(sorted_levels.len());
    for &level in &sorted_levels {
        let critical = critical_value(table, level)?;
        if critical.clamped {
            warnings.push(format!(
                "table too small for level {level}: B = {} clamps the critical value to rank {}",
                table.len(),
                critical.rank
            ));
        }
        critical_values.push(LevelDecision {
            critical,
            reject: p <= level,
        });
    }

    Ok(TestReport {
        statistic: observed,
        p_value: p,
        critical_values,
        table: table.meta(),
        warnings,
    })
}

fn check_levels(levels: &[f64]) -> Result<()> {
    match levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        Some(a) => Err(Error::param(format!("level must lie in (0, 1), got {a}"))),
        None => Ok(()),
    }
}

/// Departure applied to the last sample of each power-study data set; all
/// other samples stay standard uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "parameter")]
pub enum Alternative {
    /// `U + Δ`.
    Shift(f64),
    /// `σU`.
    Scale(f64),
    /// `U^(1/κ)`, so the CDF becomes `u^κ`.
    Lehmann(f64),
}

impl Alternative {
    pub fn apply(&self, u: f64) -> f64 {
        match *self {
            Alternative::Shift(delta) => u + delta,
            Alternative::Scale(sigma) => sigma * u,
            Alternative::Lehmann(kappa) => u.powf(1.0 / kappa),
        }
    }

    fn validate(&self) -> Result<()> {
        let (name, p, ok) = match *self {
            Alternative::Shift(d) => ("shift", d, d.is_finite()),
            Alternative::Scale(s) => ("scale", s, s.is_finite() && s > 0.0),
            Alternative::Lehmann(k) => ("lehmann", k, k.is_finite() && k > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("{name}:{p}"), "alternative parameter out of range"))
        }
    }
}

impl std::str::FromStr for Alternative {
    type Err = Error;

    /// `shift:Δ`, `scale:σ` or `lehmann:κ`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, value) = s
            .split_once(':')
            .ok_or_else(|| Error::config(s, "alternative must look like `shift:0.5`"))?;
        let p: f64 = value
            .parse()
            .map_err(|_| Error::config(value, "alternative parameter must be a real number"))?;
        let alt = match head {
            "shift" => Alternative::Shift(p),
            "scale" => Alternative::Scale(p),
            "lehmann" => Alternative::Lehmann(p),
            other => return Err(Error::config(other, "unknown alternative (shift, scale, lehmann)")),
        };
        alt.validate()?;
        Ok(alt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub level: f64,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// Binomial standard error `√(r(1 − r)/B_power)`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub alternative: Alternative,
    pub statistic_kind: StatisticKind,
    pub generator_name: String,
    pub sample_sizes: Vec<usize>,
    pub null_replicates: usize,
    pub power_replicates: usize,
    pub seed: u64,
    pub estimates: Vec<PowerEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOptions {
    pub null_replicates: usize,
    pub power_replicates: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub workers: Option<usize>,
}

/// Rejection rates of the Monte Carlo test under `alternative`.
pub fn power_study(
    statistic: &Statistic,
    alternative: Alternative,
    sizes: &[usize],
    options: &PowerOptions,
) -> Result<PowerReport> {
    alternative.validate()?;
    check_levels(&options.levels)?;
    if options.power_replicates == 0 {
        return Err(Error::param("power study needs at least one data replicate"));
    }
    let table = NullSimulator::new(statistic, sizes)
        .replicates(options.null_replicates)
        .seed(options.seed)
        .workers(options.workers)
        .run()?;
    let last = sizes.len() - 1;
    let job = || -> Result<Vec<f64>> {
        (0..options.power_replicates)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_rng(options.seed, POWER_STREAM_BASE + i as u64);
                let samples = sizes
                    .iter()
                    .enumerate()
                    .map(|(j, &n)| {
                        let values = (0..n)
                            .map(|_| {
                                let u: f64 = rng.random();
                                if j == last {
                                    alternative.apply(u)
                                } else {
                                    u
                                }
                            })
                            .collect();
                        Sample::new("power", values)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(table.p_value(statistic.evaluate(&samples)?.value))
            })
            .collect()
    };
    let p_values = in_pool(options.workers, job)??;
    let b = options.power_replicates as f64;
    let estimates = options
        .levels
        .iter()
        .map(|&level| {
            let rejections = p_values.iter().filter(|&&p| p <= level).count();
            let rate = rejections as f64 / b;
            PowerEstimate {
                level,
                rejections,
                rejection_rate: rate,
                std_error: (rate * (1.0 - rate) / b).sqrt(),
            }
        })
        .collect();
    Ok(PowerReport {
        alternative,
        statistic_kind: statistic.kind(),
        generator_name: statistic.generator_name().to_string(),
        sample_sizes: sizes.to_vec(),
        null_replicates: options.null_replicates,
        power_replicates: options.power_replicates,
        seed: options.seed,
        estimates,
    })
}
