use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rpw_urn::approx::{
    approx_rn_pmf, choose_k_clamped, drift_variance_bound, log_density_on_bins, stage_one_factors,
    Composition, DriftTable,
};
use rpw_urn::data::ingest_tsv;
use rpw_urn::fit::{fit_pb, overlay, FitConfig};
use rpw_urn::martingale::{moments_mn, RpwCoeffs};
use rpw_urn::output::{
    write_atoms_csv, write_density_csv, write_histogram_csv, write_json, write_overlay_csv,
};
use rpw_urn::simulate::{run_ensemble, Method, SimConfig};
use rpw_urn::{published, BinSpec, Error, Result, UrnParams};

#[derive(Debug, Parser)]
#[command(
    name = "rpw",
    version,
    about = "Randomized play-the-winner urn toolkit",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact mean and variance of the white count after n steps
    Moments(MomentsArgs),
    /// Two-stage approximate law of R_n with its error bounds
    Pmf(PmfArgs),
    /// Monte Carlo ensemble of R_n as a histogram
    Simulate(SimulateArgs),
    /// Fit p_b to per-site read counts
    Fit(FitArgs),
    /// Compare the published closed-form variance with the exact one
    MrCheck(MrCheckArgs),
}

#[derive(Debug, Args)]
struct UrnArgs {
    /// Initial white balls
    #[arg(long, default_value_t = 1)]
    u: u64,
    /// Initial black balls
    #[arg(long, default_value_t = 1)]
    v: u64,
    /// Probability a drawn white adds a black
    #[arg(long, default_value_t = 0.5)]
    pw: f64,
    /// Probability a drawn black adds a white
    #[arg(long, default_value_t = 0.5)]
    pb: f64,
}

impl UrnArgs {
    fn params(&self) -> Result<UrnParams> {
        UrnParams::new(self.u, self.v, self.pw, self.pb)
    }
}

#[derive(Debug, Args)]
struct BinArgs {
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    #[arg(long, default_value_t = 100)]
    bins: usize,
}

impl BinArgs {
    fn spec(&self) -> Result<BinSpec> {
        BinSpec::new(self.lo, self.hi, self.bins)
    }
}

#[derive(Debug, Args)]
struct MomentsArgs {
    #[command(flatten)]
    urn: UrnArgs,
    #[arg(long)]
    n: u64,
}

#[derive(Debug, Args)]
struct PmfArgs {
    #[command(flatten)]
    urn: UrnArgs,
    #[arg(long)]
    n: u64,
    /// Cut step; defaults to round(p_max^(-2/3)) clamped below n
    #[arg(long)]
    k: Option<u64>,
    #[command(flatten)]
    bins: BinArgs,
    /// Restart the second stage from (u + M_k, v + k - M_k) rather than (M_k, k - M_k)
    #[arg(long)]
    exact_composition: bool,
    /// Normalise binned densities by the in-range mass
    #[arg(long)]
    renormalize: bool,
    #[arg(long, default_value = "atoms.csv")]
    atoms_out: PathBuf,
    #[arg(long, default_value = "density.csv")]
    density_out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    urn: UrnArgs,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// naive, event_skip or auto
    #[arg(long, default_value = "auto")]
    method: Method,
    #[command(flatten)]
    bins: BinArgs,
    /// Run replications on one thread
    #[arg(long)]
    sequential: bool,
    /// Histogram CSV destination; `-` for stdout
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Tab-separated per-site table
    #[arg(long)]
    input: PathBuf,
    /// p_b / p_w
    #[arg(long, default_value_t = 3.0)]
    ratio: f64,
    #[arg(long, default_value_t = 1_000_000)]
    n: u64,
    /// Fixed cut step; defaults to round(p_b^(-2/3)) per candidate
    #[arg(long)]
    k: Option<u64>,
    #[arg(long, default_value_t = 0)]
    u: u64,
    #[arg(long, default_value_t = 1)]
    v: u64,
    #[arg(long, default_value_t = 1000)]
    min_depth: u64,
    #[arg(long, default_value_t = 10.0)]
    max_strand_bias: f64,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 0.002)]
    hi: f64,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Lower end of the log10 p_b search range
    #[arg(long, default_value_t = -8.0, allow_negative_numbers = true)]
    search_lo: f64,
    /// Upper end of the log10 p_b search range
    #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
    search_hi: f64,
    #[arg(long, default_value_t = 41)]
    grid: usize,
    #[arg(long)]
    exact_composition: bool,
    #[arg(long)]
    renormalize: bool,
    /// FitResult JSON destination; `-` for stdout
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long, default_value = "overlay.csv")]
    overlay_out: PathBuf,
}

#[derive(Debug, Args)]
struct MrCheckArgs {
    #[command(flatten)]
    urn: UrnArgs,
    #[arg(long, default_value_t = 25)]
    n: u64,
}

fn composition(exact: bool) -> Composition {
    if exact {
        Composition::Exact
    } else {
        Composition::CutOnly
    }
}

fn open_out(path: &Path) -> Result<Box<dyn Write>> {
    Ok(if path == Path::new("-") {
        Box::new(BufWriter::new(io::stdout().lock()))
    } else {
        Box::new(BufWriter::new(File::create(path)?))
    })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct MomentsReport {
    n: u64,
    mean_Mn: f64,
    var_Mn: f64,
    mean_Rn: f64,
    var_Rn: f64,
    sd_Rn: f64,
}

fn moments(args: &MomentsArgs) -> Result<()> {
    let params = args.urn.params()?;
    if args.n == 0 {
        return Err(Error::InvalidParams("n must be positive".into()));
    }
    let (mean, var) = moments_mn(&RpwCoeffs::new(&params), args.n)?;
    let nf = args.n as f64;
    let report = MomentsReport {
        n: args.n,
        mean_Mn: mean,
        var_Mn: var,
        mean_Rn: mean / nf,
        var_Rn: var / (nf * nf),
        sd_Rn: var.sqrt() / nf,
    };
    write_json(io::stdout().lock(), &report)
}

#[derive(Serialize)]
struct BoundReport {
    n: u64,
    k: u64,
    lower_factor: f64,
    upper_factor: f64,
    slack: f64,
    drift_variance_bound: f64,
    max_drift_variance: f64,
    chebyshev_radius_per_t: f64,
    total_mass: f64,
    mean_rn: f64,
}

fn pmf(args: &PmfArgs) -> Result<()> {
    let params = args.urn.params()?;
    if args.n < 2 {
        return Err(Error::InvalidParams("n must be at least 2".into()));
    }
    let k = args
        .k
        .unwrap_or_else(|| choose_k_clamped(params.p_max(), args.n));
    let comp = composition(args.exact_composition);
    let bins = args.bins.spec()?;
    let pmf = approx_rn_pmf(&params, args.n, k, comp)?;
    let table = DriftTable::new(&params, args.n, k, comp)?;

    write_atoms_csv(File::create(&args.atoms_out)?, &pmf)?;
    let density = log_density_on_bins(&pmf, &bins, args.renormalize);
    write_density_csv(File::create(&args.density_out)?, &bins, &density)?;

    let nf = args.n as f64;
    let max_sigma2 = table.sigma2.iter().fold(0.0f64, |m, &s| m.max(s)) / (nf * nf);
    let factors = stage_one_factors(&params, k);
    let bound = drift_variance_bound(k);
    let report = BoundReport {
        n: args.n,
        k,
        lower_factor: factors.lower_factor,
        upper_factor: factors.upper_factor,
        slack: factors.slack,
        drift_variance_bound: bound,
        max_drift_variance: max_sigma2,
        chebyshev_radius_per_t: bound.sqrt(),
        total_mass: pmf.total_mass(),
        mean_rn: pmf.mean(),
    };
    write_json(io::stdout().lock(), &report)
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let params = args.urn.params()?;
    let mut config = SimConfig::new(params, args.n, args.reps, args.seed)
        .with_method(args.method)
        .with_bins(args.bins.spec()?);
    if args.sequential {
        config = config.with_exec(rpw_urn::Exec::Sequential);
    }
    let result = run_ensemble(&config)?;
    log::info!(
        "{} replications via {}: mean R_n {:.6}, var R_n {:.3e}, {} below / {} above range",
        result.replications,
        result.method,
        result.sample_mean,
        result.sample_var,
        result.histogram.underflow,
        result.histogram.overflow
    );
    write_histogram_csv(open_out(&args.out)?, &result)
}

fn fit(args: &FitArgs) -> Result<()> {
    let rows = ingest_tsv(&args.input)?;
    let config = FitConfig {
        ratio: args.ratio,
        n: args.n,
        k: args.k,
        u: args.u,
        v: args.v,
        min_depth: args.min_depth,
        max_strand_bias: args.max_strand_bias,
        bins: BinSpec::new(args.lo, args.hi, args.bins)?,
        log10_range: (args.search_lo, args.search_hi),
        grid_points: args.grid,
        composition: composition(args.exact_composition),
        renormalize: args.renormalize,
        ..FitConfig::default()
    };
    let result = fit_pb(&rows, &config)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let freqs: Vec<f64> =
        rpw_urn::data::filter_observations(&rows, config.min_depth, config.max_strand_bias)
            .iter()
            .map(|o| o.frequency())
            .collect();
    write_overlay_csv(
        File::create(&args.overlay_out)?,
        &overlay(&freqs, &config, result.p_b_hat)?,
    )?;
    write_json(open_out(&args.out)?, &result)
}

fn mr_check(args: &MrCheckArgs) -> Result<()> {
    let cmp = published::compare(&args.urn.params()?, args.n)?;
    write_json(io::stdout().lock(), &cmp)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Moments(a) => moments(a),
        Command::Pmf(a) => pmf(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::MrCheck(a) => mr_check(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Ingest { errors, .. } = &e {
                for row in errors {
                    eprintln!("  {row}");
                }
            }
            match e {
                Error::InvalidParams(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
