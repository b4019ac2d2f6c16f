//! `splitweight` — drive the exact geometry from the command line.
//!
//! Every run prints a stream of records (JSON lines by default, CSV with
//! `--format csv`). The first record is always the resolved configuration,
//! so any report is reproducible from its own header; each later record
//! names the library operation that produced its numbers in an `op` field.
//!
//! Exit codes: 0 — all checks passed; 1 — a verification failed or an
//! oracle was inconclusive; 2 — usage or input-schema error.
//!
//! Settings resolve in order: command-line flag, then a `SPLITWEIGHT_*`
//! environment variable, then the `--config` JSON file, then the default.

mod input;
mod report;

use std::collections::BTreeSet;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use splitweight_core::exact::Rat;
use splitweight_core::finfield::{
    fibration_check, plancherel_check, AlgebraKind, FinError, FiniteInvolution, FiniteLieAlgebra,
};
use splitweight_core::latcount::{
    count_points_jobs, polynomiality_check, CountingLattice, LatError, PolyFit, StarAnchor,
};
use splitweight_core::orthoset::{
    compare_hulls_on_split_probes, hull_member, orbit_set, star_hull_member, validate, HullRoute,
    OrthoError,
};
use splitweight_core::padic::{
    cartan_exact, iwasawa_exact, GroupKind, ImTauStrategy, PadicError,
};
use splitweight_core::rootdata::{standard, FacetIndex, InvolutionSpec, RootDatum, RootDatumError};
use splitweight_core::trunc::{
    main_limit_check, nu_m_fit, omega_bar, omega_m, omega_m_asymp, theta_split_asymp,
    verify_geometric_lemma_jobs, Realization, TruncError, TruncationContext,
};

use input::*;
use report::{Emitter, Format};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files, or schemas — exit 2.
    Usage(String),
    /// A module refused or a verification could not complete — exit 1.
    Failed { module: &'static str, message: String },
}

macro_rules! provenance {
    ($err:ty, $module:literal) => {
        impl From<$err> for CliError {
            fn from(e: $err) -> Self {
                CliError::Failed { module: $module, message: e.to_string() }
            }
        }
    };
}
provenance!(RootDatumError, "rootdata");
provenance!(OrthoError, "orthoset");
provenance!(PadicError, "padic");
provenance!(LatError, "latcount");
provenance!(TruncError, "trunc");
provenance!(FinError, "finfield");

// ---------------------------------------------------------------------------
// Command line.
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "splitweight",
    version,
    about = "Exact orthogonal-set hulls, p-adic invariants, truncation weights, and finite-level identity checks"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Serialize)]
struct CommonArgs {
    /// JSON config file; flags and SPLITWEIGHT_* variables override it.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Odd prime for all p-adic computations.
    #[arg(long, global = true)]
    prime: Option<u64>,
    /// Working precision (p-adic digits) for the certified layer.
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Seed for every pseudo-random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and suites.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Coefficient box radius for brute-force symmetrization searches.
    #[arg(long, global = true)]
    search_radius: Option<i64>,
    /// Which group/involution pair the truncation commands run on.
    #[arg(long, global = true, value_enum)]
    realization: Option<RealizationArg>,
    /// How torus cosets are tested for membership in the symmetrized image.
    #[arg(long, global = true, value_enum)]
    imtau: Option<ImtauArg>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RealizationArg {
    /// GL₂ with g ↦ (gᵀ)⁻¹.
    Gl2Ti,
    /// SL₂×SL₂ with the factor swap.
    Sl2sl2Swap,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ImtauArg {
    Declared,
    Brute,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DatumArg {
    Gl2,
    Gl3,
    Sl2,
    Sl3,
    Sl2sl2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum InvolutionArg {
    MinusOne,
    Identity,
    SwapHalves,
    SwapTwo,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GroupArg {
    Gl,
    Sl,
    Sl2sl2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AlgebraArg {
    Sl2,
    Gl2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PairArg {
    /// Conjugation by diag(−1, 1).
    IntDiag,
    /// X ↦ −Xᵀ.
    NegTranspose,
}

#[derive(Subcommand, Serialize)]
enum Cmd {
    /// Describe a root datum and, optionally, an involution on it.
    Rootdata(RootdataArgs),
    /// Validate an orthogonal set; probe hulls and the θ-folded refinement.
    Orthoset(OrthosetArgs),
    /// Elementary-divisor invariant of a matrix, with multiply-back check.
    Cartan(CartanArgs),
    /// Torus part of the triangular decomposition for a chosen chamber.
    Hb(HbArgs),
    /// Symmetrization τ(g) = θ(g)⁻¹g and its invariant.
    Tau(TauArgs),
    /// All truncation weights of one element at one parameter.
    Omega(OmegaArgs),
    /// Two-route weight agreement over a sample suite.
    VerifyLemma(VerifyLemmaArgs),
    /// Fit the asymptotic weight's counting polynomial and verify it.
    NuFit(NuFitArgs),
    /// Vanishing-difference check of direct weight vs. polynomial.
    LimitCheck(LimitCheckArgs),
    /// Count slice points inside an orthogonal-set hull.
    Count(CountArgs),
    /// Fit the count of an affine vertex family as a polynomial in d.
    Fit(FitArgs),
    /// Exhaustive orbit fibration of the θ-regular locus over F_p.
    Fibration(FibrationArgs),
    /// Finite Fourier identity between 𝔥 and 𝔥⊥ sums.
    Plancherel(PlancherelArgs),
}

#[derive(Args, Serialize)]
struct RootdataArgs {
    #[arg(long, value_enum)]
    name: DatumArg,
    #[arg(long, value_enum)]
    involution: Option<InvolutionArg>,
}

#[derive(Args, Serialize)]
struct OrthosetArgs {
    #[arg(long, value_enum)]
    name: DatumArg,
    /// Point file or inline JSON; one vector per chamber.
    #[arg(long, conflicts_with = "mu")]
    points: Option<String>,
    /// Build the orbit set of this dominant vector instead.
    #[arg(long)]
    mu: Option<String>,
    /// Test hull membership of this vector.
    #[arg(long)]
    probe: Option<String>,
    /// Restrict the probe to the lattice class of the first vertex.
    #[arg(long, default_value_t = false)]
    star: bool,
    /// Fold along this involution and compare hulls on a probe grid.
    #[arg(long, value_enum)]
    fold: Option<InvolutionArg>,
    /// Probe-grid padding for the folded comparison.
    #[arg(long, default_value_t = 2)]
    pad: i128,
}

#[derive(Args, Serialize)]
struct CartanArgs {
    /// Matrix file or inline JSON; entries rational or `p^v * u`.
    #[arg(long)]
    g: String,
    #[arg(long, value_enum, default_value = "gl")]
    group: GroupArg,
}

#[derive(Args, Serialize)]
struct HbArgs {
    #[arg(long)]
    g: String,
    #[arg(long, value_enum, default_value = "gl")]
    group: GroupArg,
    /// Chamber index selecting the triangular shape.
    #[arg(long, default_value_t = 0)]
    chamber: usize,
}

#[derive(Args, Serialize)]
struct TauArgs {
    #[arg(long)]
    g: String,
}

#[derive(Args, Serialize)]
struct OmegaArgs {
    #[arg(long)]
    g: String,
    /// Dominant truncation parameter.
    #[arg(long)]
    mu: String,
    #[arg(long, default_value_t = 0)]
    chamber: usize,
    /// Wall indices the facet lies on (empty = full chamber).
    #[arg(long, default_value = "")]
    zeroed: String,
}

#[derive(Args, Serialize)]
struct VerifyLemmaArgs {
    /// Sample file (list of matrices); omit to draw random samples.
    #[arg(long)]
    samples: Option<String>,
    /// Number of random samples when no file is given.
    #[arg(long, default_value_t = 4)]
    random: usize,
    /// Valuation spread of random samples.
    #[arg(long, default_value_t = 2)]
    spread: i64,
    #[arg(long, default_value = "0,0")]
    mu1: String,
    #[arg(long)]
    mu2: String,
    #[arg(long)]
    dmax: i64,
    #[arg(long, default_value_t = 0)]
    chamber: usize,
    #[arg(long, default_value = "")]
    zeroed: String,
}

#[derive(Args, Serialize)]
struct NuFitArgs {
    #[arg(long)]
    g: String,
    #[arg(long, default_value = "0,0")]
    mu1: String,
    #[arg(long)]
    mu2: String,
    /// Fit window `a..b` of degrees.
    #[arg(long)]
    window: String,
    /// Held-out degrees, e.g. `8,10,12,14,16`.
    #[arg(long)]
    holdout: String,
    #[arg(long, default_value_t = 0)]
    chamber: usize,
    #[arg(long, default_value = "")]
    zeroed: String,
}

#[derive(Args, Serialize)]
struct LimitCheckArgs {
    #[arg(long)]
    samples: Option<String>,
    #[arg(long, default_value_t = 3)]
    random: usize,
    #[arg(long, default_value_t = 1)]
    spread: i64,
    #[arg(long, default_value = "0,0")]
    mu1: String,
    #[arg(long)]
    mu2: String,
    #[arg(long)]
    dmax: i64,
    #[arg(long, default_value_t = 0)]
    chamber: usize,
    #[arg(long, default_value = "")]
    zeroed: String,
}

#[derive(Args, Serialize)]
struct CountArgs {
    #[arg(long, value_enum)]
    name: DatumArg,
    /// Orthogonal-set point file or inline JSON.
    #[arg(long)]
    set: String,
    /// Lattice presentation file.
    #[arg(long)]
    lattice: String,
    /// Anchor the slice at this lattice point instead of the first vertex.
    #[arg(long)]
    star: Option<String>,
}

#[derive(Args, Serialize)]
struct FitArgs {
    #[arg(long, value_enum)]
    name: DatumArg,
    /// Affine family file with base and slope vertices.
    #[arg(long)]
    family: String,
    #[arg(long)]
    lattice: String,
    #[arg(long)]
    star: Option<String>,
    #[arg(long)]
    window: String,
    #[arg(long)]
    holdout: String,
    /// Degree cap; defaults to the lattice rank.
    #[arg(long)]
    max_degree: Option<usize>,
}

#[derive(Args, Serialize)]
struct FibrationArgs {
    /// Odd prime of the base field.
    #[arg(long = "p")]
    p: Option<u64>,
}

#[derive(Args, Serialize)]
struct PlancherelArgs {
    #[arg(long = "p")]
    p: Option<u64>,
    /// Level k of the coefficient ring Z/p^k.
    #[arg(long, default_value_t = 1)]
    level: u32,
    #[arg(long, value_enum, default_value = "sl2")]
    algebra: AlgebraArg,
    #[arg(long, value_enum, default_value = "int-diag")]
    pair: PairArg,
    /// Number of random function tables when none is supplied.
    #[arg(long, default_value_t = 8)]
    funcs: u64,
    /// Explicit function table (JSON array or index map).
    #[arg(long)]
    table: Option<String>,
    /// Conjugating matrix file or inline JSON (integer entries mod p^k).
    #[arg(long)]
    g: Option<String>,
}

// ---------------------------------------------------------------------------
// Config resolution.
// ---------------------------------------------------------------------------

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    prime: Option<u64>,
    precision: Option<u32>,
    seed: Option<u64>,
    jobs: Option<usize>,
    format: Option<String>,
    search_radius: Option<i64>,
    realization: Option<String>,
    imtau: Option<String>,
    power_bound: Option<u32>,
}

struct Resolved {
    prime: u64,
    precision: u32,
    seed: u64,
    jobs: usize,
    format: Format,
    search_radius: i64,
    realization: RealizationArg,
    imtau: ImtauArg,
    power_bound: u32,
}

fn env_setting(key: &str) -> Option<String> {
    std::env::var(format!("SPLITWEIGHT_{key}")).ok()
}

fn env_parse<T: std::str::FromStr>(key: &str) -> Result<Option<T>, CliError> {
    match env_setting(key) {
        None => Ok(None),
        Some(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("cli: bad SPLITWEIGHT_{key}=`{s}`"))),
    }
}

fn parse_format_name(s: &str) -> Result<FormatArg, CliError> {
    match s {
        "jsonl" => Ok(FormatArg::Jsonl),
        "csv" => Ok(FormatArg::Csv),
        _ => Err(usage(format!("cli: unknown format `{s}`"))),
    }
}

fn parse_realization_name(s: &str) -> Result<RealizationArg, CliError> {
    match s {
        "gl2-ti" => Ok(RealizationArg::Gl2Ti),
        "sl2sl2-swap" => Ok(RealizationArg::Sl2sl2Swap),
        _ => Err(usage(format!("cli: unknown realization `{s}`"))),
    }
}

fn parse_imtau_name(s: &str) -> Result<ImtauArg, CliError> {
    match s {
        "declared" => Ok(ImtauArg::Declared),
        "brute" => Ok(ImtauArg::Brute),
        _ => Err(usage(format!("cli: unknown imtau strategy `{s}`"))),
    }
}

fn resolve(common: &CommonArgs) -> Result<Resolved, CliError> {
    let file: RunConfigFile = match &common.config {
        None => RunConfigFile::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cli: cannot read config `{path}`: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| usage(format!("cli: bad config `{path}`: {e}")))?
        }
    };
    let format = match common.format {
        Some(f) => f,
        None => match env_setting("FORMAT") {
            Some(s) => parse_format_name(s.trim())?,
            None => match &file.format {
                Some(s) => parse_format_name(s)?,
                None => FormatArg::Jsonl,
            },
        },
    };
    let realization = match common.realization {
        Some(r) => r,
        None => match env_setting("REALIZATION") {
            Some(s) => parse_realization_name(s.trim())?,
            None => match &file.realization {
                Some(s) => parse_realization_name(s)?,
                None => RealizationArg::Gl2Ti,
            },
        },
    };
    let imtau = match common.imtau {
        Some(v) => v,
        None => match env_setting("IMTAU") {
            Some(s) => parse_imtau_name(s.trim())?,
            None => match &file.imtau {
                Some(s) => parse_imtau_name(s)?,
                None => ImtauArg::Declared,
            },
        },
    };
    Ok(Resolved {
        prime: common.prime.or(env_parse("PRIME")?).or(file.prime).unwrap_or(5),
        precision: common.precision.or(env_parse("PRECISION")?).or(file.precision).unwrap_or(8),
        seed: common.seed.or(env_parse("SEED")?).or(file.seed).unwrap_or(0),
        jobs: common.jobs.or(env_parse("JOBS")?).or(file.jobs).unwrap_or(1).max(1),
        format: match format {
            FormatArg::Jsonl => Format::Jsonl,
            FormatArg::Csv => Format::Csv,
        },
        search_radius: common
            .search_radius
            .or(env_parse("SEARCH_RADIUS")?)
            .or(file.search_radius)
            .unwrap_or(4),
        realization,
        imtau,
        power_bound: env_parse("POWER_BOUND")?.or(file.power_bound).unwrap_or(6),
    })
}

// ---------------------------------------------------------------------------
// Shared construction helpers.
// ---------------------------------------------------------------------------

fn datum_of(name: DatumArg) -> RootDatum {
    match name {
        DatumArg::Gl2 => standard::gl(2),
        DatumArg::Gl3 => standard::gl(3),
        DatumArg::Sl2 => standard::sl(2),
        DatumArg::Sl3 => standard::sl(3),
        DatumArg::Sl2sl2 => standard::sl2_x_sl2(),
    }
}

fn involution_of(datum: &RootDatum, arg: InvolutionArg) -> InvolutionSpec {
    match arg {
        InvolutionArg::MinusOne => standard::theta_minus_one(datum),
        InvolutionArg::Identity => standard::theta_identity(datum),
        InvolutionArg::SwapHalves => standard::theta_swap_halves(datum),
        InvolutionArg::SwapTwo => standard::theta_swap_two(datum),
    }
}

fn group_kind(group: GroupArg, n: usize) -> Result<GroupKind, CliError> {
    match group {
        GroupArg::Gl => Ok(GroupKind::Gl(n)),
        GroupArg::Sl => Ok(GroupKind::Sl(n)),
        GroupArg::Sl2sl2 => {
            if n != 4 {
                return Err(usage(format!("cli: the product group needs 4×4 matrices, got {n}×{n}")));
            }
            Ok(GroupKind::Sl2Sl2)
        }
    }
}

fn realization_of(res: &Resolved) -> Result<Realization, CliError> {
    let real = match res.realization {
        RealizationArg::Gl2Ti => Realization::gl2_transpose_inverse(res.prime)?,
        RealizationArg::Sl2sl2Swap => Realization::sl2sl2_swap(res.prime)?,
    };
    let real = real.with_precision(res.precision)?;
    Ok(match res.imtau {
        ImtauArg::Declared => real,
        ImtauArg::Brute => real.with_imtau(ImTauStrategy::BruteForce {
            radius: res.search_radius,
            power_bound: res.power_bound,
        }),
    })
}

fn context_of(
    real: &Realization,
    chamber: usize,
    zeroed: &str,
    mu: Vec<Rat>,
) -> Result<TruncationContext, CliError> {
    let zeroed: BTreeSet<usize> = parse_indices(zeroed)?;
    Ok(TruncationContext::new(real, FacetIndex { chamber, zeroed }, mu)?)
}

fn sample_suite(
    real: &Realization,
    file: &Option<String>,
    random: usize,
    spread: i64,
    res: &Resolved,
) -> Result<Vec<Vec<Vec<Rat>>>, CliError> {
    match file {
        Some(path) => samples_input(path, res.prime),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(res.seed);
            Ok((0..random).map(|_| real.random_element(-spread..=spread, &mut rng)).collect())
        }
    }
}

// Rational renderings: exact `n/d` strings.
fn rs(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn vs(v: &[Rat]) -> Vec<String> {
    v.iter().map(rs).collect()
}

fn ms(m: &[Vec<Rat>]) -> Vec<Vec<String>> {
    m.iter().map(|r| vs(r)).collect()
}

fn outcome_json(o: &splitweight_core::trunc::CountOutcome) -> Value {
    json!({"lower": o.lower, "upper": o.upper, "exact": o.exact()})
}

fn polyfit_json(op: &str, fit: &PolyFit) -> Value {
    json!({
        "record": "fit",
        "op": op,
        "start": fit.start,
        "diffs": fit.diffs.iter().map(|d| *d as i64).collect::<Vec<i64>>(),
        "degree": fit.degree,
        "counts": fit.counts.clone(),
        "checked": fit.checked.clone(),
    })
}

// ---------------------------------------------------------------------------
// Entry point and dispatch.
// ---------------------------------------------------------------------------

fn main() {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("splitweight: {msg}");
            2
        }
        Err(CliError::Failed { module, message }) => {
            // Late failure before an emitter existed; plain JSON line.
            report::out_line(
                &json!({"record": "error", "module": module, "message": message}).to_string(),
            );
            1
        }
    };
    std::process::exit(code);
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let res = resolve(&cli.common)?;
    let mut emitter = Emitter::new(res.format);
    let command = match &cli.cmd {
        Cmd::Rootdata(_) => "rootdata",
        Cmd::Orthoset(_) => "orthoset",
        Cmd::Cartan(_) => "cartan",
        Cmd::Hb(_) => "hb",
        Cmd::Tau(_) => "tau",
        Cmd::Omega(_) => "omega",
        Cmd::VerifyLemma(_) => "verify-lemma",
        Cmd::NuFit(_) => "nu-fit",
        Cmd::LimitCheck(_) => "limit-check",
        Cmd::Count(_) => "count",
        Cmd::Fit(_) => "fit",
        Cmd::Fibration(_) => "fibration",
        Cmd::Plancherel(_) => "plancherel",
    };
    let params = match &cli.cmd {
        Cmd::Rootdata(a) => serde_json::to_value(a),
        Cmd::Orthoset(a) => serde_json::to_value(a),
        Cmd::Cartan(a) => serde_json::to_value(a),
        Cmd::Hb(a) => serde_json::to_value(a),
        Cmd::Tau(a) => serde_json::to_value(a),
        Cmd::Omega(a) => serde_json::to_value(a),
        Cmd::VerifyLemma(a) => serde_json::to_value(a),
        Cmd::NuFit(a) => serde_json::to_value(a),
        Cmd::LimitCheck(a) => serde_json::to_value(a),
        Cmd::Count(a) => serde_json::to_value(a),
        Cmd::Fit(a) => serde_json::to_value(a),
        Cmd::Fibration(a) => serde_json::to_value(a),
        Cmd::Plancherel(a) => serde_json::to_value(a),
    }
    .expect("argument serialization");
    emitter.emit(json!({
        "record": "config",
        "op": "cli.run",
        "command": command,
        "prime": res.prime,
        "precision": res.precision,
        "seed": res.seed,
        "jobs": res.jobs,
        "format": if res.format == Format::Jsonl { "jsonl" } else { "csv" },
        "search_radius": res.search_radius,
        "realization": serde_json::to_value(res.realization).unwrap(),
        "imtau": serde_json::to_value(res.imtau).unwrap(),
        "params": params,
    }));
    let passed = match run(&cli.cmd, &res, &mut emitter) {
        Ok(passed) => passed,
        Err(CliError::Failed { module, message }) => {
            emitter.emit(json!({"record": "error", "module": module, "message": message}));
            return Ok(1);
        }
        Err(other) => return Err(other),
    };
    Ok(if passed { 0 } else { 1 })
}

fn run(cmd: &Cmd, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    match cmd {
        Cmd::Rootdata(a) => cmd_rootdata(a, out),
        Cmd::Orthoset(a) => cmd_orthoset(a, out),
        Cmd::Cartan(a) => cmd_cartan(a, res, out),
        Cmd::Hb(a) => cmd_hb(a, res, out),
        Cmd::Tau(a) => cmd_tau(a, res, out),
        Cmd::Omega(a) => cmd_omega(a, res, out),
        Cmd::VerifyLemma(a) => cmd_verify_lemma(a, res, out),
        Cmd::NuFit(a) => cmd_nu_fit(a, res, out),
        Cmd::LimitCheck(a) => cmd_limit_check(a, res, out),
        Cmd::Count(a) => cmd_count(a, res, out),
        Cmd::Fit(a) => cmd_fit(a, res, out),
        Cmd::Fibration(a) => cmd_fibration(a, res, out),
        Cmd::Plancherel(a) => cmd_plancherel(a, res, out),
    }
}

// ---------------------------------------------------------------------------
// Individual commands.
// ---------------------------------------------------------------------------

fn cmd_rootdata(a: &RootdataArgs, out: &mut Emitter) -> Result<bool, CliError> {
    let datum = datum_of(a.name);
    out.emit(json!({
        "record": "rootdata",
        "op": "rootdata.describe",
        "dim": datum.dim(),
        "rank": datum.rank(),
        "weyl_order": datum.weyl_order(),
        "simple_roots": datum.simple_roots(),
        "simple_coroots": datum.simple_coroots(),
        "positive_roots": datum.positive_roots(),
        "lattice_rows": datum.lattice_rows(),
    }));
    if let Some(inv) = a.involution {
        let theta = involution_of(&datum, inv);
        out.emit(json!({
            "record": "involution",
            "op": "rootdata.involution",
            "matrix": theta.matrix(),
            "split_rank": theta.split_rank(),
            "split_basis": theta
                .split_basis()
                .iter()
                .map(|v| v.iter().map(|&x| x as i64).collect::<Vec<i64>>())
                .collect::<Vec<_>>(),
            "split_chambers": theta.split_chambers(&datum),
        }));
    }
    Ok(true)
}

fn cmd_orthoset(a: &OrthosetArgs, out: &mut Emitter) -> Result<bool, CliError> {
    let datum = datum_of(a.name);
    let points = match (&a.points, &a.mu) {
        (Some(path), None) => points_input(path)?,
        (None, Some(mu)) => orbit_set(&datum, &parse_vec(mu)?)?,
        _ => return Err(usage("cli: give exactly one of --points or --mu".to_string())),
    };
    let report = validate(&datum, &points)?;
    out.emit(json!({
        "record": "orthoset",
        "op": "orthoset.validate",
        "points": ms(&points),
        "positive": report.positive,
        "special": report.special,
        "wall_coeffs": report.wall_coeffs.iter().map(|r| vs(r)).collect::<Vec<_>>(),
    }));
    let mut passed = true;
    if let Some(probe) = &a.probe {
        let x = parse_vec(probe)?;
        if a.star {
            let inside = star_hull_member(&datum, &points, &x)?;
            out.emit(json!({
                "record": "membership",
                "op": "orthoset.star_hull_member",
                "probe": vs(&x),
                "inside": inside,
            }));
        } else {
            let verdict = hull_member(&datum, &points, &x)?;
            let route = match verdict.route {
                HullRoute::ConeTest => "cone",
                HullRoute::VertexSimplex => "vertex",
            };
            out.emit(json!({
                "record": "membership",
                "op": "orthoset.hull_member",
                "probe": vs(&x),
                "inside": verdict.inside,
                "route": route,
            }));
        }
    }
    if let Some(inv) = a.fold {
        let theta = involution_of(&datum, inv);
        let cmp = compare_hulls_on_split_probes(&datum, &theta, &points, a.pad)?;
        out.emit(json!({
            "record": "fold",
            "op": "orthoset.compare_hulls_on_split_probes",
            "probes": cmp.probes,
            "mismatches": cmp.mismatches.len(),
            "agree": cmp.agree(),
        }));
        passed &= cmp.agree();
    }
    Ok(passed)
}

fn cmd_cartan(a: &CartanArgs, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let g = matrix_input(&a.g, res.prime)?;
    let kind = group_kind(a.group, g.len())?;
    let cert = cartan_exact(kind, res.prime, &g)?;
    let verified = cert.verify(res.prime, &g);
    out.emit(json!({
        "record": "cartan",
        "op": "padic.cartan_exact",
        "invariant": cert.invariant,
        "verified": verified,
    }));
    Ok(verified)
}

fn cmd_hb(a: &HbArgs, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let g = matrix_input(&a.g, res.prime)?;
    let kind = group_kind(a.group, g.len())?;
    let datum = match kind {
        GroupKind::Gl(n) => standard::gl(n),
        GroupKind::Sl(n) => standard::sl(n),
        GroupKind::Sl2Sl2 => standard::sl2_x_sl2(),
    };
    if a.chamber >= datum.weyl_order() {
        return Err(usage(format!(
            "cli: chamber {} out of range, group has {} chambers",
            a.chamber,
            datum.weyl_order()
        )));
    }
    let w = &datum.weyl()[a.chamber].mat;
    let cert = iwasawa_exact(kind, res.prime, &g, w)?;
    let verified = cert.verify(res.prime, &g, w);
    out.emit(json!({
        "record": "hb",
        "op": "padic.iwasawa_exact",
        "chamber": a.chamber,
        "h": cert.h,
        "diag": cert.diag,
        "verified": verified,
    }));
    Ok(verified)
}

fn cmd_tau(a: &TauArgs, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let real = realization_of(res)?;
    let g = matrix_input(&a.g, res.prime)?;
    let tau = real.tau(&g)?;
    let cert = cartan_exact(real.kind(), res.prime, &tau)?;
    out.emit(json!({
        "record": "tau",
        "op": "trunc.tau",
        "tau": ms(&tau),
        "invariant": cert.invariant,
        "size_bound": rs(&real.size_bound(&g)?),
    }));
    Ok(true)
}

fn cmd_omega(a: &OmegaArgs, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let real = realization_of(res)?;
    let ctx = context_of(&real, a.chamber, &a.zeroed, parse_vec(&a.mu)?)?;
    let g = matrix_input(&a.g, res.prime)?;
    let bar = omega_bar(&ctx, &g)?;
    let om = omega_m(&ctx, &g)?;
    let asy = omega_m_asymp(&ctx, &g)?;
    let split = theta_split_asymp(&ctx, &g)?;
    out.emit(json!({
        "record": "weights",
        "op": "trunc.omega_bar",
        "indicator": bar,
    }));
    out.emit(json!({"record": "weights", "op": "trunc.omega_m", "count": outcome_json(&om)}));
    out.emit(json!({
        "record": "weights",
        "op": "trunc.omega_m_asymp",
        "count": outcome_json(&asy),
    }));
    out.emit(json!({
        "record": "weights",
        "op": "trunc.theta_split_asymp",
        "count": outcome_json(&split),
    }));
    Ok(om.exact().is_some() && asy.exact().is_some() && split.exact().is_some())
}

fn cmd_verify_lemma(
    a: &VerifyLemmaArgs,
    res: &Resolved,
    out: &mut Emitter,
) -> Result<bool, CliError> {
    let real = realization_of(res)?;
    let ctx = context_of(&real, a.chamber, &a.zeroed, parse_vec(&a.mu1)?)?;
    let mu2 = parse_vec(&a.mu2)?;
    let samples = sample_suite(&real, &a.samples, a.random, a.spread, res)?;
    let report = verify_geometric_lemma_jobs(&ctx, &mu2, &samples, a.dmax, res.jobs)?;
    for (i, row) in report.rows.iter().enumerate() {
        out.emit(json!({
            "record": "lemma-row",
            "op": "trunc.verify_geometric_lemma",
            "index": i,
            "threshold": row.threshold,
            "size_bound": rs(&row.size_bound),
        }));
    }
    out.emit(json!({
        "record": "lemma-summary",
        "op": "trunc.verify_geometric_lemma",
        "samples": report.rows.len(),
        "growth": rs(&report.growth),
        "all_agree": report.all_agree(),
    }));
    Ok(report.all_agree())
}

fn cmd_nu_fit(a: &NuFitArgs, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let real = realization_of(res)?;
    let ctx = context_of(&real, a.chamber, &a.zeroed, parse_vec(&a.mu1)?)?;
    let mu2 = parse_vec(&a.mu2)?;
    let g = matrix_input(&a.g, res.prime)?;
    let (lo, hi) = parse_window(&a.window)?;
    let holdout = parse_degree_list(&a.holdout)?;
    let fit = nu_m_fit(&ctx, &mu2, &g, lo..=hi, &holdout)?;
    out.emit(polyfit_json("trunc.nu_m_fit", &fit));
    Ok(true)
}

fn cmd_limit_check(
    a: &LimitCheckArgs,
    res: &Resolved,
    out: &mut Emitter,
) -> Result<bool, CliError> {
    let real = realization_of(res)?;
    let ctx = context_of(&real, a.chamber, &a.zeroed, parse_vec(&a.mu1)?)?;
    let mu2 = parse_vec(&a.mu2)?;
    let samples = sample_suite(&real, &a.samples, a.random, a.spread, res)?;
    let report = main_limit_check(&ctx, &mu2, &samples, a.dmax, res.jobs)?;
    for (i, row) in report.rows.iter().enumerate() {
        out.emit(json!({
            "record": "limit-row",
            "op": "trunc.main_limit_check",
            "index": i,
            "settle_degree": row.settle_degree,
            "peak_deviation": row.peak_deviation as i64,
            "envelope_ratio": rs(&row.envelope_ratio),
            "size_bound": rs(&row.size_bound),
        }));
    }
    let within = report.within(&report.envelope_coeff);
    out.emit(json!({
        "record": "limit-summary",
        "op": "trunc.main_limit_check",
        "samples": report.rows.len(),
        "envelope_coeff": rs(&report.envelope_coeff),
        "envelope_power": report.envelope_power,
        "max_settle": report.max_settle(),
        "within": within,
    }));
    Ok(within)
}

fn cmd_count(a: &CountArgs, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let datum = datum_of(a.name);
    let points = points_input(&a.set)?;
    let (ambient, basis, cosets) = lattice_input(&a.lattice)?;
    let lat = CountingLattice::new(&datum, ambient, basis, cosets)?;
    let anchor = match &a.star {
        Some(v) => StarAnchor::At(parse_vec(v)?),
        None => StarAnchor::FirstVertex,
    };
    let count = count_points_jobs(&datum, &points, &lat, &anchor, res.jobs)?;
    out.emit(json!({
        "record": "count",
        "op": "latcount.count_points",
        "count": count,
        "lattice_index": lat.index(),
        "lattice_rank": lat.rank(),
        "slice_classes": lat.slice_classes(),
    }));
    Ok(true)
}

fn cmd_fit(a: &FitArgs, _res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let datum = datum_of(a.name);
    let family = family_input(&a.family)?;
    let (ambient, basis, cosets) = lattice_input(&a.lattice)?;
    let lat = CountingLattice::new(&datum, ambient, basis, cosets)?;
    let anchor = match &a.star {
        Some(v) => StarAnchor::At(parse_vec(v)?),
        None => StarAnchor::FirstVertex,
    };
    let (lo, hi) = parse_window(&a.window)?;
    let holdout = parse_degree_list(&a.holdout)?;
    let max_degree = a.max_degree.unwrap_or_else(|| lat.rank());
    let fit =
        polynomiality_check(&datum, &family, &lat, &anchor, lo..=hi, &holdout, max_degree)?;
    out.emit(polyfit_json("latcount.polynomiality_check", &fit));
    Ok(true)
}

fn cmd_fibration(a: &FibrationArgs, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let p = a.p.unwrap_or(res.prime);
    let alg = FiniteLieAlgebra::new(p, 1, AlgebraKind::Sl2, FiniteInvolution::IntDiag)?;
    let report = fibration_check(&alg)?;
    for rec in &report.records {
        out.emit(json!({
            "record": "cartan-class",
            "op": "finfield.fibration_check",
            "parameter": rec.parameter,
            "class_parameters": rec.class_parameters,
            "u_size": rec.u_size,
            "orbit_sizes": rec.orbit_sizes,
            "normalizer_size": rec.normalizer_size,
            "centralizer_size": rec.centralizer_size,
            "fiber_size": rec.fiber_size,
        }));
    }
    out.emit(json!({
        "record": "fibration-summary",
        "op": "finfield.fibration_check",
        "p": report.p,
        "theta_regular": report.theta_regular,
        "classes": report.records.len(),
        "disjoint": report.disjoint,
        "covers": report.covers,
        "fibers_uniform": report.fibers_uniform,
        "ok": report.ok(),
    }));
    Ok(report.ok())
}

fn cmd_plancherel(a: &PlancherelArgs, res: &Resolved, out: &mut Emitter) -> Result<bool, CliError> {
    let p = a.p.unwrap_or(res.prime);
    let kind = match a.algebra {
        AlgebraArg::Sl2 => AlgebraKind::Sl2,
        AlgebraArg::Gl2 => AlgebraKind::Gl2,
    };
    let pair = match a.pair {
        PairArg::IntDiag => FiniteInvolution::IntDiag,
        PairArg::NegTranspose => FiniteInvolution::NegTranspose,
    };
    let alg = FiniteLieAlgebra::new(p, a.level, kind, pair)?;
    let fixed_g = match &a.g {
        Some(arg) => {
            let m = matrix_input(arg, p)?;
            Some(to_fin_mat(&alg, &m)?)
        }
        None => None,
    };
    // Each run draws from its own seeded stream, so results are identical
    // no matter how rayon schedules them.
    let runs: Vec<(u64, Vec<i64>, splitweight_core::finfield::FinMat)> = match &a.table {
        Some(path) => {
            let table = table_input(path, alg.element_count())?;
            let g = fixed_g.unwrap_or([[1, 0], [0, 1]]);
            vec![(0, table, g)]
        }
        None => (0..a.funcs)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(res.seed.wrapping_add(i));
                let table: Vec<i64> =
                    (0..alg.element_count()).map(|_| rand::Rng::gen_range(&mut rng, -9..=9)).collect();
                let g = fixed_g.unwrap_or_else(|| random_unit_mat(&alg, &mut rng));
                (i, table, g)
            })
            .collect(),
    };
    let reports: Vec<_> = runs
        .par_iter()
        .map(|(i, table, g)| plancherel_check(&alg, table, g).map(|r| (*i, r)))
        .collect::<Result<_, _>>()?;
    let mut max_dev = 0i128;
    let mut all_ok = true;
    for (i, rep) in &reports {
        max_dev = max_dev.max(rep.deviation);
        all_ok &= rep.ok();
        out.emit(json!({
            "record": "plancherel",
            "op": "finfield.plancherel_check",
            "index": i,
            "deviation": rep.deviation as f64,
            "equivariance_checked": rep.equivariance_checked,
            "equivariance_ok": rep.equivariance_ok,
            "ok": rep.ok(),
        }));
    }
    out.emit(json!({
        "record": "plancherel-summary",
        "op": "finfield.plancherel_check",
        "p": p,
        "level": a.level,
        "functions": reports.len(),
        "max_deviation": max_dev as f64,
        "all_ok": all_ok,
    }));
    Ok(all_ok)
}

fn to_fin_mat(
    alg: &FiniteLieAlgebra,
    m: &[Vec<Rat>],
) -> Result<splitweight_core::finfield::FinMat, CliError> {
    if m.len() != 2 || m.iter().any(|r| r.len() != 2) {
        return Err(usage("finfield: conjugating matrix must be 2×2".to_string()));
    }
    let modulus = alg.modulus() as i128;
    let mut out = [[0u64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let e = &m[i][j];
            if !e.is_integer() {
                return Err(usage(format!("finfield: entry {} is not integral", rs(e))));
            }
            out[i][j] = e.numer().rem_euclid(modulus) as u64;
        }
    }
    Ok(out)
}

fn random_unit_mat<R: rand::Rng>(
    alg: &FiniteLieAlgebra,
    rng: &mut R,
) -> splitweight_core::finfield::FinMat {
    loop {
        let m = alg.modulus();
        let g = [[rng.gen_range(0..m), rng.gen_range(0..m)], [rng.gen_range(0..m), rng.gen_range(0..m)]];
        if alg.mat_inverse(&g).is_ok() {
            return g;
        }
    }
}
