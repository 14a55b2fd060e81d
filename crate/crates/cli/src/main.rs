//! `pierce`: command-line front end to `pierce-core`.
//!
//! Every subcommand writes one document (JSON by default) that starts with the
//! resolved run configuration. Exit codes: 0 success, 2 usage or validation
//! error, 3 resource cap exceeded.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pierce_core::dynamics::{frequency_experiment, UniformSampler};
use pierce_core::eta::{
    discreteness_criterion, sample_eta_batch, singularity_experiment, PurityVerdict,
    SingularityConfig, SingularityReport, StochasticMatrix,
};
use pierce_core::measure::{
    a_k_measure, cover_measure_capped, hausdorff_alpha_volume, ratio_test_threshold, AkMode,
    DigitConstraint, MeasureEstimate, VolumeKind, DEFAULT_WORK_CAP,
};
use pierce_core::rational::{format_digits, format_rational, parse_digits, parse_rational};
use pierce_core::{cylinder, encode, evaluate, Cylinder, Error, GSequence};

const DEFAULT_MAX_SAMPLES: u64 = 1_000_000;

#[derive(Parser, Debug)]
#[command(
    name = "pierce",
    version,
    about = "Exact Pierce-type expansions, cylinder measures and random-digit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Number of digits (or cover depth).
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Number of Monte Carlo samples.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Largest digit kept by truncated sums.
    #[arg(long, global = true)]
    cutoff: Option<u64>,
    /// Bits of the uniform dyadic samples, or of the enclosures in `hausdorff`.
    #[arg(long, global = true, default_value_t = 1024)]
    bits: u32,
    /// Worker threads (0 = all cores). Never changes the output.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Refuse runs with more samples than this.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_SAMPLES)]
    max_samples: u64,
    /// Refuse covers whose dynamic program exceeds this many steps.
    #[arg(long, global = true, default_value_t = DEFAULT_WORK_CAP)]
    work_cap: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Digits and partial sums of a rational in (0, 1).
    Expand {
        #[arg(allow_hyphen_values = true)]
        x: String,
    },
    /// Endpoints and length of the cylinder of a digit prefix such as `1,2,3`.
    Cylinder {
        #[arg(default_value = "")]
        prefix: String,
    },
    /// Truncated cover measure of a digit-constrained set.
    Measure {
        /// One level set per line: `range:m`, `tail:v`, `set:a,b,c` or `all`.
        #[arg(long)]
        constraint: PathBuf,
    },
    /// Table of alpha-volumes of the depth-k covers of digits in {1..n}.
    Hausdorff {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        k_max: u64,
    },
    /// Frequency of a digit among the first digits of uniform samples.
    Frequency {
        #[arg(long, default_value_t = 1)]
        digit: u64,
    },
    /// Samples of the random series with independent digits.
    Eta {
        /// One digit law per line: `p1 p2 ... [geom:r]`; the last line repeats.
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Digit frequency under eta against uniform points, plus a KS distance.
    Singularity {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1)]
        digit: u64,
    },
    /// Measure of the set where the k-th digit equals `digit`.
    #[command(name = "a-k-measure")]
    AkMeasure {
        #[arg(long, default_value_t = 1)]
        digit: u64,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::ResourceCap { .. }) => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Echo of everything that determines the output. `workers` and `out` are
/// left out on purpose: they never change it.
#[derive(Serialize)]
struct RunConfig {
    subcommand: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bits: Option<u32>,
    format: Format,
    params: BTreeMap<&'static str, String>,
}

impl RunConfig {
    fn new(subcommand: &'static str, cli: &Cli) -> Self {
        Self {
            subcommand,
            seed: cli.seed,
            depth: None,
            samples: None,
            cutoff: None,
            bits: None,
            format: cli.format,
            params: BTreeMap::new(),
        }
    }

    fn param(mut self, key: &'static str, value: impl ToString) -> Self {
        self.params.insert(key, value.to_string());
        self
    }

    fn csv_header(&self) -> String {
        let mut s = format!("# subcommand: {}\n# seed: {}\n", self.subcommand, self.seed);
        let opt = |name: &str, v: Option<String>| {
            v.map(|v| format!("# {name}: {v}\n")).unwrap_or_default()
        };
        s += &opt("depth", self.depth.map(|v| v.to_string()));
        s += &opt("samples", self.samples.map(|v| v.to_string()));
        s += &opt("cutoff", self.cutoff.map(|v| v.to_string()));
        s += &opt("bits", self.bits.map(|v| v.to_string()));
        for (k, v) in &self.params {
            for (i, line) in v.lines().enumerate() {
                let key = if i == 0 {
                    k.to_string()
                } else {
                    format!("{k}+")
                };
                s += &format!("# {key}: {line}\n");
            }
        }
        s
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    config: &'a RunConfig,
    result: T,
}

fn render<T: Serialize, R: Serialize>(
    config: &RunConfig,
    result: T,
    rows: &[R],
) -> CliResult<Vec<u8>> {
    match config.format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&Document { config, result })
                .map_err(|e| CliError::Usage(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = config.csv_header().into_bytes();
            let mut w = csv::Writer::from_writer(&mut out);
            for row in rows {
                w.serialize(row)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
            drop(w);
            Ok(out)
        }
    }
}

fn read_input(path: &PathBuf) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn check_samples(cli: &Cli, samples: u64) -> CliResult<()> {
    if samples > cli.max_samples {
        return Err(Error::ResourceCap {
            work: samples,
            cap: cli.max_samples,
        }
        .into());
    }
    Ok(())
}

fn rat(r: &pierce_core::Rational) -> String {
    format_rational(r)
}

#[derive(Serialize)]
struct ExpandResult {
    x: String,
    q: String,
    g: String,
    terminated: bool,
    partial_sums: Vec<String>,
}

#[derive(Serialize)]
struct ExpandRow {
    n: usize,
    q: String,
    g: String,
    partial_sum: String,
}

fn cmd_expand(cli: &Cli, x: &str) -> CliResult<Vec<u8>> {
    let value = parse_rational(x)?;
    let g = encode(&value)?;
    let depth = cli.depth.unwrap_or(g.len());
    if depth == 0 {
        return Err(Error::Domain("depth must be >= 1".into()).into());
    }
    if depth > g.len() {
        return Err(Error::Terminated {
            achieved: g.len(),
            requested: depth,
        }
        .into());
    }
    let mut config = RunConfig::new("expand", cli).param("x", x);
    config.depth = Some(depth);
    let q = g.to_q();
    let sums = (1..=depth)
        .map(|n| evaluate(&g, n))
        .collect::<pierce_core::Result<Vec<_>>>()?;
    let rows: Vec<ExpandRow> = (0..depth)
        .map(|i| ExpandRow {
            n: i + 1,
            q: q.digits()[i].to_string(),
            g: g.digits()[i].to_string(),
            partial_sum: rat(&sums[i]),
        })
        .collect();
    let result = ExpandResult {
        x: rat(&value),
        q: format_digits(q.digits()),
        g: format_digits(g.digits()),
        terminated: g.is_terminated(),
        partial_sums: sums.iter().map(rat).collect(),
    };
    render(&config, result, &rows)
}

#[derive(Serialize)]
struct CylinderRow {
    prefix: String,
    left: String,
    right: String,
    length: String,
}

impl From<&Cylinder> for CylinderRow {
    fn from(c: &Cylinder) -> Self {
        Self {
            prefix: format_digits(c.prefix.digits()),
            left: rat(&c.left),
            right: rat(&c.right),
            length: rat(&c.length),
        }
    }
}

fn cmd_cylinder(cli: &Cli, prefix: &str) -> CliResult<Vec<u8>> {
    let digits = parse_digits(prefix)?;
    let c = cylinder(&GSequence::prefix(digits)?);
    let config = RunConfig::new("cylinder", cli).param("prefix", prefix);
    let row = CylinderRow::from(&c);
    render(&config, &c, &[row])
}

#[derive(Serialize)]
struct MeasureRow<'a> {
    depth: usize,
    cutoff: u64,
    lower: &'a str,
    upper: &'a str,
    exact: bool,
}

fn measure_output(config: &RunConfig, est: &MeasureEstimate) -> CliResult<Vec<u8>> {
    let (lower, upper) = (rat(&est.lower), rat(&est.upper));
    let row = MeasureRow {
        depth: est.depth,
        cutoff: est.cutoff,
        lower: &lower,
        upper: &upper,
        exact: est.exact,
    };
    render(config, est, &[row])
}

fn cmd_measure(cli: &Cli, path: &PathBuf) -> CliResult<Vec<u8>> {
    let text = read_input(path)?;
    let constraint: DigitConstraint = text.parse()?;
    let depth = cli
        .depth
        .ok_or_else(|| CliError::Usage("measure needs --depth".into()))?;
    let cutoff = cli
        .cutoff
        .ok_or_else(|| CliError::Usage("measure needs --cutoff".into()))?;
    let est = cover_measure_capped(&constraint, depth, cutoff, cli.work_cap)?;
    let mut config = RunConfig::new("measure", cli)
        .param("constraint", path.display())
        .param("constraint_levels", constraint.to_string().trim_end())
        .param("work_cap", cli.work_cap);
    config.depth = Some(depth);
    config.cutoff = Some(cutoff);
    measure_output(&config, &est)
}

#[derive(Serialize)]
struct VolumeRow {
    k: u64,
    kind: VolumeKind,
    alpha_used: String,
    /// The volume is `power^(1/root)`.
    power: String,
    root: u32,
    exact: Option<String>,
    lower: String,
    upper: String,
    /// Strictly below the previous row.
    decreasing: Option<bool>,
}

#[derive(Serialize)]
struct HausdorffResult {
    n: u64,
    alpha: String,
    /// Volumes strictly decrease from this depth on.
    ratio_test_threshold: Option<u64>,
    rows: Vec<VolumeRow>,
}

fn cmd_hausdorff(cli: &Cli, n: u64, alpha: &str, k_max: u64) -> CliResult<Vec<u8>> {
    let a = parse_rational(alpha)?;
    if k_max == 0 {
        return Err(Error::Validation("k-max must be >= 1".into()).into());
    }
    let mut rows = Vec::with_capacity(k_max as usize);
    let mut prev = None;
    for k in 1..=k_max {
        let v = hausdorff_alpha_volume(n, &a, k)?;
        let decreasing = prev.as_ref().map(|p| v.cmp_volume(p).is_lt());
        rows.push(VolumeRow {
            k,
            kind: v.kind,
            alpha_used: rat(&v.alpha_used),
            power: rat(&v.power),
            root: v.root,
            exact: v.exact_value().as_ref().map(rat),
            lower: rat(&v.lower_bound(cli.bits)),
            upper: rat(&v.upper_bound(cli.bits)),
            decreasing,
        });
        prev = Some(v);
    }
    let mut config = RunConfig::new("hausdorff", cli)
        .param("n", n)
        .param("alpha", alpha)
        .param("k_max", k_max);
    config.bits = Some(cli.bits);
    let result = HausdorffResult {
        n,
        alpha: rat(&a),
        ratio_test_threshold: ratio_test_threshold(n, &a).ok(),
        rows,
    };
    match cli.format {
        Format::Json => render(&config, &result, &[] as &[VolumeRow]),
        Format::Csv => render(&config, (), &result.rows),
    }
}

fn cmd_frequency(cli: &Cli, digit: u64) -> CliResult<Vec<u8>> {
    let samples = cli.samples.unwrap_or(1000);
    let depth = cli.depth.unwrap_or(100);
    check_samples(cli, samples)?;
    let sampler = UniformSampler::new(cli.bits, cli.seed)?;
    let report = frequency_experiment(&sampler, samples, depth, digit, cli.workers)?;
    let mut config = RunConfig::new("frequency", cli).param("digit", digit);
    config.depth = Some(depth);
    config.samples = Some(samples);
    config.bits = Some(cli.bits);
    render(&config, &report, &report.records)
}

fn load_matrix(path: &PathBuf) -> CliResult<(StochasticMatrix, String)> {
    let text = read_input(path)?;
    let matrix: StochasticMatrix = text.parse()?;
    let rows = match &matrix {
        StochasticMatrix::Stationary(rows) => rows
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join("\n"),
        StochasticMatrix::Generated(_) => String::new(),
    };
    Ok((matrix, rows))
}

#[derive(Serialize)]
struct EtaRow {
    index: u64,
    digits: String,
    left: String,
    right: String,
    length: String,
}

#[derive(Serialize)]
struct EtaResult {
    verdict: PurityVerdict,
    samples: Vec<EtaRow>,
}

fn cmd_eta(cli: &Cli, path: &PathBuf) -> CliResult<Vec<u8>> {
    let (matrix, rows) = load_matrix(path)?;
    let samples = cli.samples.unwrap_or(1);
    let depth = cli.depth.unwrap_or(100);
    check_samples(cli, samples)?;
    let drawn = sample_eta_batch(&matrix, depth, cli.seed, samples, cli.workers)?;
    let verdict = discreteness_criterion(&matrix, depth)?;
    let rows_out: Vec<EtaRow> = drawn
        .iter()
        .map(|s| EtaRow {
            index: s.index,
            digits: format_digits(s.digits.digits()),
            left: rat(&s.cylinder.left),
            right: rat(&s.cylinder.right),
            length: rat(&s.cylinder.length),
        })
        .collect();
    let mut config = RunConfig::new("eta", cli)
        .param("matrix", path.display())
        .param("matrix_rows", rows);
    config.depth = Some(depth);
    config.samples = Some(samples);
    match cli.format {
        Format::Json => render(
            &config,
            EtaResult {
                verdict,
                samples: rows_out,
            },
            &[] as &[EtaRow],
        ),
        Format::Csv => render(&config, (), &rows_out),
    }
}

#[derive(Serialize)]
struct SingularityRow {
    source: &'static str,
    index: u64,
    count: u64,
    excluded: bool,
}

fn singularity_rows(report: &SingularityReport) -> Vec<SingularityRow> {
    let eta = report.eta_records.iter().map(|r| SingularityRow {
        source: "eta",
        index: r.index,
        count: r.count,
        excluded: false,
    });
    let leb = report.lebesgue_records.iter().map(|r| SingularityRow {
        source: "lebesgue",
        index: r.index,
        count: r.count,
        excluded: r.excluded,
    });
    eta.chain(leb).collect()
}

fn cmd_singularity(cli: &Cli, path: &PathBuf, digit: u64) -> CliResult<Vec<u8>> {
    let (matrix, rows) = load_matrix(path)?;
    let samples = cli.samples.unwrap_or(1000);
    let depth = cli.depth.unwrap_or(100);
    check_samples(cli, samples)?;
    let report = singularity_experiment(
        &matrix,
        &SingularityConfig {
            digit,
            samples,
            depth,
            seed: cli.seed,
            bits: cli.bits,
            workers: cli.workers,
        },
    )?;
    let mut config = RunConfig::new("singularity", cli)
        .param("matrix", path.display())
        .param("matrix_rows", rows)
        .param("digit", digit);
    config.depth = Some(depth);
    config.samples = Some(samples);
    config.bits = Some(cli.bits);
    render(&config, &report, &singularity_rows(&report))
}

fn cmd_a_k_measure(cli: &Cli, digit: u64, k: usize) -> CliResult<Vec<u8>> {
    let mode = match cli.cutoff {
        Some(c) => AkMode::Truncated(c),
        None => AkMode::Exact,
    };
    let est = a_k_measure(digit, k, mode)?;
    let mut config = RunConfig::new("a-k-measure", cli)
        .param("digit", digit)
        .param("k", k);
    config.cutoff = cli.cutoff;
    measure_output(&config, &est)
}

fn run(cli: &Cli) -> CliResult<Vec<u8>> {
    match &cli.command {
        Command::Expand { x } => cmd_expand(cli, x),
        Command::Cylinder { prefix } => cmd_cylinder(cli, prefix),
        Command::Measure { constraint } => cmd_measure(cli, constraint),
        Command::Hausdorff { n, alpha, k_max } => cmd_hausdorff(cli, *n, alpha, *k_max),
        Command::Frequency { digit } => cmd_frequency(cli, *digit),
        Command::Eta { matrix } => cmd_eta(cli, matrix),
        Command::Singularity { matrix, digit } => cmd_singularity(cli, matrix, *digit),
        Command::AkMeasure { digit, k } => cmd_a_k_measure(cli, *digit, *k),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let written = run(&cli).and_then(|bytes| match &cli.out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Usage(e.to_string())),
    });
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
