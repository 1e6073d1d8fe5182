use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use convexdiv::cache::CACHE_DIR_ENV;
use convexdiv::{CdfConvention, StatisticKind};
use convexdiv_cli::{resolve_cache, run, Command, OutputFormat, RunConfig};

/// Distribution-free k-sample tests built on convex generators.
#[derive(Parser)]
#[command(name = "convexdiv", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Two-sample test of F = G.
    Test2 {
        /// Convex generator, e.g. power:2, poly:0,1,0,1, bernstein:power:3:16.
        #[arg(long = "h", value_name = "SPEC")]
        generator: Option<String>,
        #[arg(long, value_name = "FILE")]
        x: PathBuf,
        #[arg(long, value_name = "FILE")]
        y: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// k-sample test of F₁ = … = F_k.
    Testk {
        #[arg(long = "h", value_name = "SPEC")]
        generator: Option<String>,
        /// One file per sample; repeat the flag.
        #[arg(long = "input", value_name = "FILE")]
        inputs: Vec<PathBuf>,
        /// Comma-separated mixture weights summing to 1 (default uniform).
        #[arg(long, value_delimiter = ',', value_name = "P1,P2,..")]
        weights: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Two-sample test built on a log-convex generator.
    Tau {
        /// Log-convex generator, e.g. expsq:1.
        #[arg(long = "xi", alias = "h", value_name = "SPEC")]
        generator: Option<String>,
        #[arg(long, value_name = "FILE")]
        x: PathBuf,
        #[arg(long, value_name = "FILE")]
        y: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate (or load from cache) a null table and write it out.
    NullTable {
        #[arg(long, value_parser = parse_kind)]
        kind: StatisticKind,
        #[arg(long = "h", alias = "xi", value_name = "SPEC")]
        generator: Option<String>,
        #[arg(long, value_delimiter = ',', required = true, value_name = "N1,N2,..")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long = "B", default_value_t = convexdiv::nulldist::DEFAULT_REPLICATES)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_convention, default_value = "right-continuous")]
        convention: CdfConvention,
        #[arg(long, value_enum, default_value_t = TableFormat::Json)]
        format: TableFormat,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        cache: CacheArgs,
    },
    /// Monte Carlo power against a shift, scale or Lehmann alternative.
    Power {
        #[arg(long, value_parser = parse_kind)]
        kind: StatisticKind,
        #[arg(long = "h", alias = "xi", value_name = "SPEC")]
        generator: Option<String>,
        /// shift:Δ, scale:σ or lehmann:κ, applied to the last sample.
        #[arg(long)]
        alternative: String,
        #[arg(long, value_delimiter = ',', required = true, value_name = "N1,N2,..")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long = "B-null", default_value_t = 999)]
        null_replicates: usize,
        #[arg(long = "B-power", default_value_t = 1000)]
        power_replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
        levels: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        format: ReportFormat,
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the built-in numerical verification battery.
    Verify {
        #[arg(long, value_enum, default_value_t = VerifyFormat::Text)]
        format: VerifyFormat,
    },
}

#[derive(Args)]
struct Common {
    /// Number of Monte Carlo null replicates.
    #[arg(long = "B", default_value_t = convexdiv::nulldist::DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    levels: Vec<f64>,
    #[arg(long, value_parser = parse_convention, default_value = "right-continuous")]
    convention: CdfConvention,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Omit the timestamp so identical runs give identical output.
    #[arg(long)]
    deterministic: bool,
    /// Build the null by permuting the pooled sample instead of simulating uniforms.
    #[arg(long)]
    permutation: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    cache: CacheArgs,
}

#[derive(Args)]
struct CacheArgs {
    #[arg(long)]
    no_cache: bool,
    #[arg(long, env = CACHE_DIR_ENV, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Json,
    Csv,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyFormat {
    Text,
    Csv,
}

fn parse_kind(s: &str) -> Result<StatisticKind, String> {
    s.parse().map_err(|e: convexdiv::Error| e.to_string())
}

fn parse_convention(s: &str) -> Result<CdfConvention, String> {
    s.parse().map_err(|e: convexdiv::Error| e.to_string())
}

impl From<ReportFormat> for OutputFormat {
    fn from(f: ReportFormat) -> Self {
        match f {
            ReportFormat::Json => OutputFormat::Json,
            ReportFormat::Csv => OutputFormat::Csv,
        }
    }
}

impl Common {
    fn apply(self, config: &mut RunConfig) {
        config.replicates = self.replicates;
        config.seed = self.seed;
        config.levels = self.levels;
        config.cdf_convention = self.convention;
        config.output_format = self.format.into();
        config.deterministic = self.deterministic;
        config.permutation = self.permutation;
        config.workers = self.workers;
        config.cache = resolve_cache(self.cache.no_cache, self.cache.cache_dir.as_deref());
    }
}

fn into_config(cmd: Cmd) -> RunConfig {
    match cmd {
        Cmd::Test2 { generator, x, y, common } => {
            let mut c = RunConfig::new(Command::Test2);
            c.generator_spec = generator;
            c.input_paths = vec![x, y];
            common.apply(&mut c);
            c
        }
        Cmd::Tau { generator, x, y, common } => {
            let mut c = RunConfig::new(Command::Tau);
            c.generator_spec = generator;
            c.input_paths = vec![x, y];
            common.apply(&mut c);
            c
        }
        Cmd::Testk { generator, inputs, weights, common } => {
            let mut c = RunConfig::new(Command::TestK);
            c.generator_spec = generator;
            c.input_paths = inputs;
            c.weights = weights;
            common.apply(&mut c);
            c
        }
        Cmd::NullTable { kind, generator, sizes, weights, replicates, seed, convention, format, out, cache } => {
            let mut c = RunConfig::new(Command::NullTable);
            c.kind = Some(kind);
            c.generator_spec = generator;
            c.sizes = sizes;
            c.weights = weights;
            c.replicates = replicates;
            c.seed = seed;
            c.cdf_convention = convention;
            c.output_format = match format {
                TableFormat::Json => OutputFormat::Json,
                TableFormat::Csv => OutputFormat::Csv,
                TableFormat::Binary => OutputFormat::Binary,
            };
            c.out_path = out;
            c.cache = resolve_cache(cache.no_cache, cache.cache_dir.as_deref());
            c
        }
        Cmd::Power {
            kind,
            generator,
            alternative,
            sizes,
            weights,
            null_replicates,
            power_replicates,
            seed,
            levels,
            format,
            deterministic,
            workers,
        } => {
            let mut c = RunConfig::new(Command::Power);
            c.kind = Some(kind);
            c.generator_spec = generator;
            c.alternative = Some(alternative);
            c.sizes = sizes;
            c.weights = weights;
            c.replicates = null_replicates;
            c.power_replicates = power_replicates;
            c.seed = seed;
            c.levels = levels;
            c.output_format = format.into();
            c.deterministic = deterministic;
            c.workers = workers;
            c
        }
        Cmd::Verify { format } => {
            let mut c = RunConfig::new(Command::Verify);
            c.output_format = match format {
                VerifyFormat::Text => OutputFormat::Text,
                VerifyFormat::Csv => OutputFormat::Csv,
            };
            c
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = into_config(cli.command);
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let result = run(&config, &mut out);
    let flushed = out.flush();
    match (result, flushed) {
        (Ok(()), Ok(())) => ExitCode::SUCCESS,
        (Err(e), _) => {
            eprintln!("convexdiv {}: error: {e}", config.command.name());
            ExitCode::from(e.exit_code())
        }
        (Ok(()), Err(e)) => {
            eprintln!("convexdiv {}: error: writing output: {e}", config.command.name());
            ExitCode::from(convexdiv_cli::EXIT_DATA)
        }
    }
}
