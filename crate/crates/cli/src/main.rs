//! `gcir`: pricing, calibration, simulation and analysis of generalized
//! CIR short-rate models from the command line.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.

mod svg;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use gcir::analysis::{growth_envelope, moment_ode, stationary_verdict};
use gcir::calibration::{calibrate, CalibrationConfig, ModelFamily};
use gcir::classification::{classify, verify_2d, GeneratingPair, ProbeGrid};
use gcir::format::sig12;
use gcir::market_data::{parse_curve, standard_grid};
use gcir::model::GcirParams;
use gcir::simulation::{hill_report, martingale_check, mean_check, simulate, SchemeConfig, DEFAULT_DT};
use gcir::term_structure::{spot_rate_from_price, PricingProblem};
use gcir::Error;

#[derive(Parser)]
#[command(name = "gcir", version, about = "Generalized CIR short-rate models with stable noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Output directory for result files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed for simulation and optimizer restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Bond prices and spot rates at a list of maturities.
    Price {
        #[arg(long)]
        params: PathBuf,
        /// Comma-separated maturities in years; the 13-point standard grid when omitted.
        #[arg(long, value_delimiter = ',')]
        maturities: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        r0: f64,
        #[command(flatten)]
        common: Common,
    },
    /// A(v) and B(v) on the dense maturity grid.
    Curve {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a model family to an observed spot-rate curve.
    Calibrate {
        /// CIR, stable-CIR, alpha-CIR or GCIR(k).
        #[arg(long)]
        family: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 2000)]
        max_iterations: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate paths of the canonical SDE.
    Simulate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        r0: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        /// Store every n-th step; by default at most 64 intervals are stored.
        #[arg(long)]
        record_every: Option<usize>,
        /// Write the ensemble as a binary dump instead of CSV.
        #[arg(long)]
        binary: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Moment envelope and long-run behaviour.
    Analyze {
        #[arg(long)]
        params: PathBuf,
        /// Moment order in (1, alpha_g); defaults to (1 + alpha_g)/2.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.0)]
        r0: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Reduce a generating pair to its canonical class.
    Classify {
        #[arg(long)]
        pair: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gcir: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> gcir::Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn out_dir(common: &Common) -> gcir::Result<Option<&Path>> {
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
    }
    Ok(common.out.as_deref())
}

fn json_string<T: Serialize>(value: &T) -> gcir::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Prints `text` and, with `--out`, also writes it to `dir/name`.
fn emit(common: &Common, name: &str, text: &str) -> gcir::Result<()> {
    if let Some(dir) = out_dir(common)? {
        fs::write(dir.join(name), text)?;
    }
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn run(command: Command) -> gcir::Result<()> {
    match command {
        Command::Price { params, maturities, r0, common } => price(&params, maturities, r0, &common),
        Command::Curve { params, horizon, common } => curve(&params, horizon, &common),
        Command::Calibrate { family, data, restarts, max_iterations, common } => {
            run_calibration(&family, &data, restarts, max_iterations, &common)
        }
        Command::Simulate { params, r0, horizon, paths, dt, record_every, binary, common } => {
            run_simulation(&params, r0, horizon, paths, dt, record_every, binary, &common)
        }
        Command::Analyze { params, p, horizon, r0, common } => analyze(&params, p, horizon, r0, &common),
        Command::Classify { pair, common } => run_classify(&pair, &common),
    }
}

#[derive(Serialize)]
struct PriceRow {
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "P")]
    p: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "A")]
    a: f64,
    y: f64,
}

fn price(params: &Path, maturities: Vec<f64>, r0: f64, common: &Common) -> gcir::Result<()> {
    let params: GcirParams = read_json(params)?;
    if !(r0 >= 0.0 && r0.is_finite()) {
        return Err(Error::Domain(format!("r0 must be nonnegative, got {r0}")));
    }
    let maturities = if maturities.is_empty() { standard_grid() } else { maturities };
    if maturities.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::Domain("maturities must be positive".into()));
    }
    let horizon = maturities.iter().cloned().fold(0.0, f64::max);
    let coeffs = PricingProblem::new(params, horizon)?.with_maturities(&maturities).sparse().solve()?;
    let rows = maturities
        .iter()
        .map(|&t| {
            let (a, b) = coeffs.at(t)?;
            let p = (-a - b * r0).exp();
            Ok(PriceRow { t, p, b, a, y: spot_rate_from_price(p, t) })
        })
        .collect::<gcir::Result<Vec<_>>>()?;
    match common.format {
        Format::Json => emit(common, "price.json", &json_string(&rows)?),
        Format::Csv => {
            let mut text = String::from("T,P,B,A,y\n");
            for r in &rows {
                text.push_str(&format!("{},{},{},{},{}\n", sig12(r.t), sig12(r.p), sig12(r.b), sig12(r.a), sig12(r.y)));
            }
            emit(common, "price.csv", &text)
        }
    }
}

fn curve(params: &Path, horizon: f64, common: &Common) -> gcir::Result<()> {
    let params: GcirParams = read_json(params)?;
    let coeffs = PricingProblem::new(params, horizon)?.solve()?;
    match common.format {
        Format::Json => emit(common, "curve.json", &json_string(&coeffs)?),
        Format::Csv => emit(common, "curve.csv", &coeffs.to_csv()),
    }
}

fn run_calibration(family: &str, data: &Path, restarts: usize, max_iterations: usize, common: &Common) -> gcir::Result<()> {
    let family: ModelFamily = family.parse()?;
    let curve = parse_curve(&fs::read_to_string(data)?)?;
    let config = CalibrationConfig {
        restarts,
        seed: common.seed,
        max_iterations,
        threads: common.threads,
        ..Default::default()
    };
    let report = calibrate(family, &curve, &config)?;
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("report.json"), json_string(&report)?)?;

    let mut fit = String::from("T,market_y,model_y,residual\n");
    for r in &report.residuals {
        fit.push_str(&format!("{},{},{},{}\n", sig12(r.maturity), sig12(r.market), sig12(r.model), sig12(r.residual)));
    }
    fs::write(dir.join("fit.csv"), fit)?;
    let plot = svg::line_plot(
        &format!("{} fit", report.family),
        "maturity (years)",
        "spot rate",
        &[
            svg::Series { label: "market", colour: "black", points: report.residuals.iter().map(|r| (r.maturity, r.market)).collect() },
            svg::Series { label: "model", colour: "crimson", points: report.residuals.iter().map(|r| (r.maturity, r.model)).collect() },
        ],
    );
    fs::write(dir.join("fit.svg"), plot)?;
    println!("error x100: {}", sig12(report.error_x100));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_simulation(
    params: &Path,
    r0: f64,
    horizon: f64,
    paths: usize,
    dt: f64,
    record_every: Option<usize>,
    binary: bool,
    common: &Common,
) -> gcir::Result<()> {
    let params: GcirParams = read_json(params)?;
    let mut cfg = SchemeConfig::new(horizon, dt, paths, common.seed)?;
    cfg.record_every = record_every.unwrap_or_else(|| cfg.n_steps.div_ceil(64));
    cfg.threads = common.threads;
    let ensemble = simulate(&params, r0, &cfg)?;

    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    if binary {
        let mut w = BufWriter::new(fs::File::create(dir.join("ensemble.bin"))?);
        ensemble.write_binary(&mut w)?;
        w.flush()?;
    } else {
        let mut w = BufWriter::new(fs::File::create(dir.join("ensemble.csv"))?);
        ensemble.write_csv(&mut w)?;
        w.flush()?;
    }

    let terminal = ensemble.terminal();
    let k = paths / 100;
    let hill = if k >= 2 { hill_report(&terminal, k).ok() } else { None };
    let means = mean_check(&ensemble);
    let max_abs_z = means.iter().fold(0.0f64, |m, c| m.max(c.z.abs()));
    let summary = json!({
        "params": params,
        "r0": r0,
        "config": cfg,
        "mean_checks": means,
        "max_abs_mean_z": max_abs_z,
        "martingale_max_abs_z": martingale_check(&ensemble).max_abs_z,
        "hill": hill,
    });
    let text = json_string(&summary)?;
    fs::write(dir.join("summary.json"), &text)?;
    if common.format == Format::Json {
        io::stdout().write_all(text.as_bytes())?;
    } else {
        println!("mean z-score max |z|: {}", sig12(max_abs_z));
        if let Some(h) = hill {
            println!("Hill index at t = {}: {}", sig12(horizon), sig12(h.estimate));
        }
    }
    Ok(())
}

fn analyze(params: &Path, p: Option<f64>, horizon: f64, r0: f64, common: &Common) -> gcir::Result<()> {
    let params: GcirParams = read_json(params)?;
    let p = p.unwrap_or_else(|| 0.5 * (1.0 + params.alpha_min()));
    let bound = moment_ode(&params, r0, p, horizon)?;
    let envelope = growth_envelope(&params, p)?;
    let verdict = stationary_verdict(&params);
    if let Some(dir) = out_dir(common)? {
        let mut w = BufWriter::new(fs::File::create(dir.join("moment.csv"))?);
        bound.write_csv(&mut w)?;
        w.flush()?;
    }
    let report = json!({
        "p": p,
        "moment_bound": bound,
        "growth_envelope": envelope,
        "stationary": verdict,
    });
    emit(common, "analysis.json", &json_string(&report)?)
}

fn run_classify(pair: &Path, common: &Common) -> gcir::Result<()> {
    let pair: GeneratingPair = read_json(pair)?;
    let verdict = classify(&pair, &ProbeGrid::for_pair(&pair))?;
    let mut report = serde_json::to_value(&verdict)?;
    if pair.dimension() == 2 {
        report["case_2d"] = serde_json::to_value(verify_2d(&pair)?)?;
    }
    emit(common, "classification.json", &json_string(&report)?)
}
