//! Command execution for the `convexdiv` binary.
//!
//! [`run`] takes a fully parsed [`RunConfig`], writes the report to the given
//! writer and maps every failure onto one of the documented exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use convexdiv::cache::{self, NullTableCache};
use convexdiv::nulldist::{report_against, LevelDecision, NullSimulator, TableMeta};
use convexdiv::oracle::{run_battery, write_battery_csv, BatteryCase};
use convexdiv::{
    parse_generator, power_study, run_test, Alternative, CdfConvention, PowerOptions, PowerReport,
    Sample, Statistic, StatisticKind, TestOptions, TestReport, WeightVector,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const SOFTWARE: &str = concat!("convexdiv ", env!("CARGO_PKG_VERSION"));

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFY_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Core(convexdiv::Error),
    Config(String),
    VerificationFailed { failed: usize, total: usize },
    Output(std::io::Error),
}

impl From<convexdiv::Error> for CliError {
    fn from(e: convexdiv::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(msg) => f.write_str(msg),
            CliError::VerificationFailed { failed, total } => {
                write!(f, "{failed} of {total} verification cases failed")
            }
            CliError::Output(e) => write!(f, "writing output: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use convexdiv::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::VerificationFailed { .. } => EXIT_VERIFY_FAILED,
            CliError::Output(_) => EXIT_DATA,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) | E::NotStrictlyConvex(_) | E::Config { .. } | E::TooLarge { .. } => {
                    EXIT_CONFIG
                }
                E::InvalidInput(_) | E::Ingest { .. } | E::Io { .. } | E::Cache { .. } => EXIT_DATA,
                E::Numerical(_) => EXIT_NUMERICAL,
            },
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Test2,
    TestK,
    Tau,
    NullTable,
    Power,
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Test2 => "test2",
            Command::TestK => "testk",
            Command::Tau => "tau",
            Command::NullTable => "null-table",
            Command::Power => "power",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    /// One line per case; `verify` only.
    Text,
    /// Binary null-table layout; `null-table` only.
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CacheMode {
    Disabled,
    Dir(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub generator_spec: Option<String>,
    pub input_paths: Vec<PathBuf>,
    pub weights: Option<Vec<f64>>,
    pub replicates: usize,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub cdf_convention: CdfConvention,
    pub output_format: OutputFormat,
    /// Suppresses the timestamp so identical runs produce identical bytes.
    pub deterministic: bool,
    pub cache: CacheMode,
    pub workers: Option<usize>,
    pub permutation: bool,
    /// Statistic kind for `null-table` and `power`.
    pub kind: Option<StatisticKind>,
    /// Sample sizes for `null-table` and `power`.
    pub sizes: Vec<usize>,
    pub alternative: Option<String>,
    pub power_replicates: usize,
    pub out_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            generator_spec: None,
            input_paths: Vec::new(),
            weights: None,
            replicates: convexdiv::nulldist::DEFAULT_REPLICATES,
            seed: 0,
            levels: vec![0.01, 0.05, 0.1],
            cdf_convention: CdfConvention::default(),
            output_format: OutputFormat::Json,
            deterministic: false,
            cache: CacheMode::Disabled,
            workers: None,
            permutation: false,
            kind: None,
            sizes: Vec::new(),
            alternative: None,
            power_replicates: 1000,
            out_path: None,
        }
    }

    fn generator_spec(&self, kind: StatisticKind) -> &str {
        match (&self.generator_spec, kind) {
            (Some(spec), _) => spec,
            (None, StatisticKind::Tau) => "expsq:1",
            (None, _) => "power:2",
        }
    }

    fn statistic(&self, kind: StatisticKind, k: usize) -> Result<Statistic, CliError> {
        let generator = parse_generator(self.generator_spec(kind))?;
        let stat = match kind {
            StatisticKind::TwoSample => Statistic::two_sample(generator.into_convex()?),
            StatisticKind::Tau => Statistic::tau(generator.into_log_convex()?),
            StatisticKind::KSample => {
                let weights = match &self.weights {
                    Some(w) if w.len() != k => {
                        return Err(config_err(format!(
                            "--weights has {} entries but there are {k} samples",
                            w.len()
                        )))
                    }
                    Some(w) => WeightVector::new(w.clone())?,
                    None => WeightVector::uniform(k)?,
                };
                Statistic::k_sample(generator.into_convex()?, weights)
            }
        };
        Ok(stat.with_convention(self.cdf_convention))
    }

    fn cache(&self) -> Option<NullTableCache> {
        match &self.cache {
            CacheMode::Disabled => None,
            CacheMode::Dir(dir) => Some(NullTableCache::new(dir)),
        }
    }

    fn timestamp(&self) -> Option<u64> {
        if self.deterministic {
            None
        } else {
            SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
        }
    }
}

/// Versioned JSON report for `test2`, `testk` and `tau`.
#[derive(Debug, Serialize)]
pub struct JsonTestReport<'a> {
    pub schema_version: u32,
    pub software: &'static str,
    pub command: &'static str,
    pub generator: &'a str,
    pub inputs: Vec<String>,
    pub sample_sizes: &'a [usize],
    pub weights: Option<&'a [f64]>,
    pub convention: CdfConvention,
    pub statistic: f64,
    pub raw_functional: f64,
    pub centering_constant: f64,
    pub tie_count: usize,
    pub characterization_guaranteed: bool,
    pub p_value: f64,
    pub critical_values: &'a [LevelDecision],
    pub null_table: &'a TableMeta,
    pub warnings: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

pub fn run<W: Write>(config: &RunConfig, out: &mut W) -> Result<(), CliError> {
    match config.command {
        Command::Test2 | Command::TestK | Command::Tau => run_test_command(config, out),
        Command::NullTable => run_null_table(config, out),
        Command::Power => run_power(config, out),
        Command::Verify => run_verify(config, out),
    }
}

fn check_levels(levels: &[f64]) -> Result<(), CliError> {
    if let Some(a) = levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(config_err(format!("--levels: {a} is not in (0, 1)")));
    }
    Ok(())
}

fn run_test_command<W: Write>(config: &RunConfig, out: &mut W) -> Result<(), CliError> {
    let kind = match config.command {
        Command::Test2 => StatisticKind::TwoSample,
        Command::Tau => StatisticKind::Tau,
        _ => StatisticKind::KSample,
    };
    match (config.command, config.input_paths.len()) {
        (Command::TestK, n) if n < 2 => return Err(config_err("testk requires at least two samples")),
        (Command::Test2 | Command::Tau, n) if n != 2 => {
            return Err(config_err(format!(
                "{} requires exactly two samples (--x and --y), got {n}",
                config.command.name()
            )))
        }
        _ => {}
    }
    if config.replicates == 0 {
        return Err(config_err("--B must be at least 1"));
    }
    check_levels(&config.levels)?;
    let statistic = config.statistic(kind, config.input_paths.len())?;
    let samples = config
        .input_paths
        .iter()
        .map(Sample::from_path)
        .collect::<convexdiv::Result<Vec<_>>>()?;
    let sizes: Vec<usize> = samples.iter().map(Sample::len).collect();

    let report: TestReport = match (config.cache(), config.permutation) {
        (Some(cache), false) => {
            let (table, hit) =
                cache.get_or_simulate(&statistic, &sizes, config.replicates, config.seed, config.workers)?;
            if hit {
                eprintln!("null table: cache hit in {}", cache.dir().display());
            }
            report_against(&statistic, &samples, &table, &config.levels)?
        }
        _ => run_test(
            &statistic,
            &samples,
            &TestOptions {
                replicates: config.replicates,
                seed: config.seed,
                levels: config.levels.clone(),
                workers: config.workers,
                permutation: config.permutation,
            },
        )?,
    };

    let inputs: Vec<String> = config.input_paths.iter().map(|p| p.display().to_string()).collect();
    match config.output_format {
        OutputFormat::Json => {
            let json = JsonTestReport {
                schema_version: SCHEMA_VERSION,
                software: SOFTWARE,
                command: config.command.name(),
                generator: statistic.generator_name(),
                inputs,
                sample_sizes: &sizes,
                weights: statistic.weights().map(|w| w.as_slice()),
                convention: statistic.convention(),
                statistic: report.statistic.value,
                raw_functional: report.statistic.raw_functional,
                centering_constant: report.statistic.centering_constant,
                tie_count: report.statistic.tie_count,
                characterization_guaranteed: report.statistic.characterization_guaranteed,
                p_value: report.p_value,
                critical_values: &report.critical_values,
                null_table: &report.table,
                warnings: &report.warnings,
                generated_at: config.timestamp(),
            };
            serde_json::to_writer_pretty(&mut *out, &json).map_err(std::io::Error::other)?;
            writeln!(out)?;
        }
        OutputFormat::Csv => {
            writeln!(
                out,
                "command,generator,sample_sizes,statistic,raw_functional,centering_constant,p_value,B,seed,tie_count,warnings"
            )?;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},\"{}\"",
                config.command.name(),
                statistic.generator_name(),
                sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";"),
                report.statistic.value,
                report.statistic.raw_functional,
                report.statistic.centering_constant,
                report.p_value,
                report.table.replicates,
                report.table.seed,
                report.statistic.tie_count,
                report.warnings.join("; ").replace('"', "\"\"")
            )?;
        }
        OutputFormat::Binary | OutputFormat::Text => return Err(unsupported_format(config)),
    }
    Ok(())
}

fn unsupported_format(config: &RunConfig) -> CliError {
    config_err(format!("{:?} output is not available for {}", config.output_format, config.command.name()))
}

fn kind_and_sizes(config: &RunConfig) -> Result<(StatisticKind, &[usize]), CliError> {
    let kind = config.kind.ok_or_else(|| config_err(format!("{} requires --kind", config.command.name())))?;
    if config.sizes.is_empty() {
        return Err(config_err(format!("{} requires --sizes", config.command.name())));
    }
    Ok((kind, &config.sizes))
}

fn run_null_table<W: Write>(config: &RunConfig, out: &mut W) -> Result<(), CliError> {
    let (kind, sizes) = kind_and_sizes(config)?;
    if config.output_format == OutputFormat::Text {
        return Err(unsupported_format(config));
    }
    let statistic = config.statistic(kind, sizes.len())?;
    let table = match config.cache() {
        Some(cache) => cache.get_or_simulate(&statistic, sizes, config.replicates, config.seed, config.workers)?.0,
        None => NullSimulator::new(&statistic, sizes)
            .replicates(config.replicates)
            .seed(config.seed)
            .workers(config.workers)
            .run()?,
    };
    let write = |w: &mut dyn Write| -> std::io::Result<()> {
        match config.output_format {
            OutputFormat::Binary => cache::write_binary(&table, w),
            OutputFormat::Csv => cache::write_csv(&table, w),
            OutputFormat::Text => Err(std::io::Error::other("text format is not available for null-table")),
            OutputFormat::Json => {
                serde_json::to_writer_pretty(&mut *w, &table).map_err(std::io::Error::other)?;
                writeln!(w)
            }
        }
    };
    match &config.out_path {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| {
                convexdiv::Error::Io {
                    context: format!("creating {}", path.display()),
                    source: e,
                }
            })?;
            write(&mut std::io::BufWriter::new(file))?;
        }
        None if config.output_format == OutputFormat::Binary => {
            return Err(config_err("--format binary requires --out"));
        }
        None => write(out)?,
    }
    Ok(())
}

/// JSON wrapper for `power`.
#[derive(Debug, Serialize)]
struct JsonPowerReport<'a> {
    schema_version: u32,
    software: &'static str,
    command: &'static str,
    #[serde(flatten)]
    report: &'a PowerReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at: Option<u64>,
}

fn run_power<W: Write>(config: &RunConfig, out: &mut W) -> Result<(), CliError> {
    let (kind, sizes) = kind_and_sizes(config)?;
    check_levels(&config.levels)?;
    let alternative: Alternative = config
        .alternative
        .as_deref()
        .ok_or_else(|| config_err("power requires --alternative (shift:Δ, scale:σ or lehmann:κ)"))?
        .parse()?;
    let statistic = config.statistic(kind, sizes.len())?;
    let report = power_study(
        &statistic,
        alternative,
        sizes,
        &PowerOptions {
            null_replicates: config.replicates,
            power_replicates: config.power_replicates,
            seed: config.seed,
            levels: config.levels.clone(),
            workers: config.workers,
        },
    )?;
    match config.output_format {
        OutputFormat::Json => {
            let json = JsonPowerReport {
                schema_version: SCHEMA_VERSION,
                software: SOFTWARE,
                command: "power",
                report: &report,
                generated_at: config.timestamp(),
            };
            serde_json::to_writer_pretty(&mut *out, &json).map_err(std::io::Error::other)?;
            writeln!(out)?;
        }
        OutputFormat::Csv => {
            writeln!(
                out,
                "kind,generator,alternative,sizes,B_null,B_power,seed,level,rejections,rejection_rate,std_error"
            )?;
            let alt = config.alternative.as_deref().unwrap_or_default();
            for e in &report.estimates {
                writeln!(
                    out,
                    "{},{},{alt},{},{},{},{},{},{},{},{}",
                    report.statistic_kind.as_str(),
                    report.generator_name,
                    report.sample_sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";"),
                    report.null_replicates,
                    report.power_replicates,
                    report.seed,
                    e.level,
                    e.rejections,
                    e.rejection_rate,
                    e.std_error
                )?;
            }
        }
        OutputFormat::Binary | OutputFormat::Text => return Err(unsupported_format(config)),
    }
    Ok(())
}

fn run_verify<W: Write>(config: &RunConfig, out: &mut W) -> Result<(), CliError> {
    let cases: Vec<BatteryCase> = run_battery()?;
    match config.output_format {
        OutputFormat::Csv => write_battery_csv(&cases, &mut *out)?,
        _ => {
            for c in &cases {
                writeln!(
                    out,
                    "{} {} value={:e} expected={:e} tol={:e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.id,
                    c.value,
                    c.expected,
                    c.tolerance
                )?;
            }
        }
    }
    let failed = cases.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::VerificationFailed {
            failed,
            total: cases.len(),
        });
    }
    Ok(())
}

/// Resolves the cache directory: explicit flag, then environment, then the
/// platform temp dir.
pub fn resolve_cache(no_cache: bool, dir: Option<&Path>) -> CacheMode {
    if no_cache {
        return CacheMode::Disabled;
    }
    match dir {
        Some(dir) => CacheMode::Dir(dir.to_path_buf()),
        None => CacheMode::Dir(NullTableCache::from_env().dir().to_path_buf()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use convexdiv::Error as E;

    #[test]
    fn exit_codes() {
        let cases = [
            (CliError::Core(E::NotStrictlyConvex("h".into())), EXIT_CONFIG),
            (CliError::Core(E::TooLarge { count: 10, limit: 1 }), EXIT_CONFIG),
            (CliError::Core(E::InvalidInput("empty".into())), EXIT_DATA),
            (CliError::Core(E::Numerical("budget".into())), EXIT_NUMERICAL),
            (CliError::Config("x".into()), EXIT_CONFIG),
            (CliError::VerificationFailed { failed: 1, total: 2 }, EXIT_VERIFY_FAILED),
        ];
        for (e, code) in cases {
            assert_eq!(e.exit_code(), code, "{e}");
        }
    }

    #[test]
    fn default_generators_follow_kind() {
        let c = RunConfig::new(Command::Tau);
        assert_eq!(c.generator_spec(StatisticKind::Tau), "expsq:1");
        assert_eq!(c.generator_spec(StatisticKind::KSample), "power:2");
        assert_eq!(resolve_cache(true, Some(Path::new("/x"))), CacheMode::Disabled);
    }
}
