use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug, Clone)]
#[command(
    name = "lowmult",
    version,
    about = "Central binomial coefficients with few prime factors: valuations, searches, constructions and diagnostics",
    args_override_self = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Bits for certified cross-checks (construction defaults to 128).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(64..=4096))]
    pub precision_bits: Option<u32>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Result store (newline-delimited JSON).
    #[arg(long, global = true, env = "LOWMULT_STORE")]
    pub store: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// p-adic valuation of binom(2n, n) by carry counting.
    Kummer(KummerArgs),
    /// Integers whose digits respect per-prime caps in every base.
    Search(SearchArgs),
    /// The digit-density criterion for a prime set.
    Heuristic(HeuristicArgs),
    /// Block-by-block construction of n.
    Construct(ConstructArgs),
    /// Orbit diagnostics for frac(n log 2 / log p).
    #[command(subcommand)]
    Equidist(EquidistCommand),
    /// Digit sets, spectra and exceptional sets modulo a prime.
    #[command(subcommand)]
    Fourier(FourierCommand),
    /// Append-only result store.
    #[command(subcommand)]
    Store(StoreCommand),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KummerArgs {
    /// Decimal, or hexadecimal with a 0x prefix.
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub prime: u64,
    /// Also factor binom(2n, n) directly (n <= 10000).
    #[arg(long)]
    pub check: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub primes: String,
    /// Upper limit; accepts `10000`, `10^4` or `2^64`.
    #[arg(long, value_parser = parse_count)]
    pub limit: u128,
    /// `half`, `third`, or one cap per prime.
    #[arg(long, default_value = "half")]
    pub caps: String,
    /// Allow a fraction of cap violations per base.
    #[arg(long)]
    pub relax: Option<f64>,
    /// Check every n instead of walking the digit tree.
    #[arg(long)]
    pub exhaustive: bool,
    /// Stop after this many tree nodes.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Resume from and save to this checkpoint.
    #[arg(long)]
    #[serde(skip)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Also report cumulative counts at 2^k from this k.
    #[arg(long)]
    pub census: Option<u32>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct HeuristicArgs {
    #[arg(long)]
    pub primes: String,
    /// Also predict the count up to this limit.
    #[arg(long, value_parser = parse_count)]
    pub limit: Option<u128>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConstructArgs {
    #[arg(long)]
    pub primes: String,
    /// Number of blocks N.
    #[arg(long)]
    pub big_n: u64,
    /// Window length; defaults to max(2, ceil(log log N)).
    #[arg(long)]
    pub h: Option<u32>,
    /// Offset t; omitted, every t is tried and the best kept.
    #[arg(long)]
    pub t: Option<u32>,
    /// Largest multiplier s tried per block.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    /// Also require nu_p(binom(2n, n)) <= epsilon log n / log p for every p.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Print n in hexadecimal.
    #[arg(long)]
    pub hex: bool,
    /// Write n (hexadecimal) to this file instead of the report.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquidistCommand {
    /// The first points of the orbit.
    Orbit(OrbitArgs),
    /// Normalised Weyl sums.
    Weyl(WeylArgs),
    /// Largest box occupancy on the P-grid.
    Boxes(BoxesArgs),
    /// Bounded-height integer relation search.
    Relations(RelationsArgs),
    /// Curve family for a relation system, checked on synthetic data.
    Curves(CurvesArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OrbitArgs {
    #[arg(long)]
    pub primes: String,
    #[arg(long)]
    pub n: usize,
    /// Number of points to list.
    #[arg(long, default_value_t = 10)]
    pub show: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WeylArgs {
    #[arg(long)]
    pub primes: String,
    #[arg(long)]
    pub n: usize,
    /// Frequency vector such as `1,-1`; repeatable.
    #[arg(long = "k", required = true, allow_hyphen_values = true)]
    pub k: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BoxesArgs {
    #[arg(long)]
    pub primes: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub modulus: u64,
    /// Number of independent relations assumed.
    #[arg(long, default_value_t = 0)]
    pub relations: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RelationsArgs {
    #[arg(long)]
    pub primes: String,
    #[arg(long, default_value_t = 50)]
    pub height: u32,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Search every nonempty subset of the primes.
    #[arg(long)]
    pub all_subsets: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CurvesArgs {
    #[arg(long)]
    pub primes: String,
    /// Rows `a_1,..,a_r,b` meaning `sum a_j theta_j = b`, separated by `;`.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub relations: String,
    /// Orbit length for the cover check.
    #[arg(long, default_value_t = 2000)]
    pub verify_n: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourierCommand {
    /// Build an instance and report its sizes.
    Instance(InstanceArgs),
    /// Large spectrum and exceptional cells.
    Exceptional(ExceptionalArgs),
    /// Random trials of the shifted-multiple conclusion.
    Verify(VerifyArgs),
    /// Lower bound for exponential sums on a grid.
    Lemma(LemmaArgs),
    /// The alternating curve against small intervals.
    Remark(RemarkArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InstanceArgs {
    /// One prime per coordinate; digit sets are built from them.
    #[arg(long, conflicts_with = "alternating")]
    pub primes: Option<String>,
    #[arg(long)]
    pub modulus: u64,
    #[arg(long, default_value_t = 1)]
    pub h: u32,
    /// Curve scales; default `1/p_j`.
    #[arg(long, allow_hyphen_values = true)]
    pub zeta: Option<String>,
    /// Curve bases; default `p_j`.
    #[arg(long)]
    pub theta: Option<String>,
    /// Defaults to H log 10 / log P for digit sets.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Use the alternating curve in this dimension with interval sets.
    #[arg(long)]
    pub alternating: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExceptionalArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Write the exceptional cells as CSV.
    #[arg(long)]
    #[serde(skip)]
    pub dump_e: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LemmaArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub coefficients: Option<String>,
    #[arg(long)]
    pub bases: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    /// Check this many random instances instead.
    #[arg(long)]
    pub random: Option<u64>,
    #[arg(long, default_value_t = 4)]
    pub max_r: usize,
    /// Run the (1 - e^t)^(r-1) example in this dimension instead.
    #[arg(long)]
    pub tightness: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RemarkArgs {
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub modulus: u64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoreCommand {
    /// Run a subcommand and append its record.
    Append {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, required = true)]
        args: Vec<String>,
    },
    /// Records with the given fingerprint (all records if omitted).
    Query {
        #[arg(long)]
        fingerprint: Option<String>,
    },
}

/// `12345`, `10^4` or `2^64`.
pub fn parse_count(s: &str) -> Result<u128, String> {
    let s = s.trim().replace('_', "");
    if let Some((base, exp)) = s.split_once('^') {
        let base: u128 = base.parse().map_err(|_| format!("bad base in {s:?}"))?;
        let exp: u32 = exp.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
        return base.checked_pow(exp).ok_or_else(|| format!("{s} overflows 128 bits"));
    }
    s.parse().map_err(|_| format!("not a nonnegative integer: {s:?}"))
}
