use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use meta_smooth::bench::{run_benchmark, BenchmarkConfig, ModelSpec};
use meta_smooth::error::{Error, Result};
use meta_smooth::estimator::Estimator;
use meta_smooth::forecast::{forecast_after, forecast_experiment, ForecastExperimentConfig};
use meta_smooth::meta::{meta_fit, mom_fit};
use meta_smooth::ml::{ml_fit, MlConfig, MlInit};
use meta_smooth::model::{matrix_to_rows, reduced_to_structural_unchecked, ReducedParams, StructuralParams};
use meta_smooth::series::{SeriesKind, SeriesMatrix};
use meta_smooth::simulate::{difference, preset, simulate, SimulationSpec};

#[derive(Parser)]
#[command(name = "meta-smooth", version, about = "Estimate, simulate and forecast multivariate local-level models")]
struct Cli {
    /// Worker threads for parallel work (default: all cores)
    #[arg(long, global = true, env = "META_SMOOTH_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a local-level series and write it as CSV
    Simulate {
        /// Preset model 1-4
        #[arg(long, conflicts_with = "params", required_unless_present = "params")]
        model: Option<u32>,
        /// Structural parameters as JSON ({"n", "sigma_eta", "sigma_eps"})
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long = "T", value_name = "T")]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model to a CSV series and print a JSON report
    Estimate {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Input holds levels; difference before fitting
        #[arg(long)]
        difference: bool,
        #[arg(long, value_enum, default_value = "meta")]
        estimator: FitEstimator,
        /// Starting point for --estimator ml
        #[arg(long, value_enum, default_value = "moment")]
        init: InitChoice,
        /// Use the sample-moment estimate if META fails
        #[arg(long)]
        fallback: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-step-ahead EWMA forecast of the next observation
    Forecast {
        /// Level series
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Reduced-form parameters as JSON ({"n", "theta", "sigma_u"})
        #[arg(long, conflicts_with = "estimator")]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "meta")]
        estimator: FitEstimator,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-replication one-step forecast errors for several estimators, as CSV
    ForecastExperiment {
        #[arg(long, default_value_t = 1)]
        model: u32,
        #[arg(long = "T", value_name = "T", default_value_t = 200)]
        len: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, value_delimiter = ',', default_value = "true,meta,ml")]
        estimators: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo accuracy and timing comparison
    Benchmark {
        /// Benchmark configuration JSON; the flags below are ignored when given
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        models: Vec<u32>,
        #[arg(long = "T", value_name = "T", value_delimiter = ',', default_value = "200,1000")]
        sample_sizes: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, value_delimiter = ',', default_value = "meta,mom")]
        estimators: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        fallback: bool,
        /// Accuracy CSV (stdout if omitted; the table then goes to stderr)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-estimator mean fit time CSV
        #[arg(long)]
        timing: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitEstimator {
    Meta,
    Ml,
    Mom,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitChoice {
    Moment,
    Meta,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(Error),
    Estimation(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e)
    }
}

fn parse_estimators(list: &[String]) -> Result<Vec<Estimator>> {
    list.iter().map(|s| s.parse()).collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn read_series(path: &Path) -> Result<SeriesMatrix> {
    SeriesMatrix::read_csv(open(path)?).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PlainReport<'a> {
    estimator: &'static str,
    theta: Vec<Vec<f64>>,
    sigma_u: Vec<Vec<f64>>,
    sigma_eta: Vec<Vec<f64>>,
    sigma_eps: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
}

impl<'a> PlainReport<'a> {
    fn new(estimator: &'static str, r: &ReducedParams, note: Option<&'a str>) -> Self {
        let s = reduced_to_structural_unchecked(r);
        PlainReport {
            estimator,
            theta: matrix_to_rows(&r.theta),
            sigma_u: matrix_to_rows(&r.sigma_u),
            sigma_eta: matrix_to_rows(&s.sigma_eta),
            sigma_eps: matrix_to_rows(&s.sigma_eps),
            note,
        }
    }
}

#[derive(Serialize)]
struct MlReport<'a> {
    estimator: &'static str,
    #[serde(flatten)]
    fit: &'a meta_smooth::ml::MlFit,
    sigma_eta: Vec<Vec<f64>>,
    sigma_eps: Vec<Vec<f64>>,
}

fn differences_of(series: SeriesMatrix, take_difference: bool) -> Result<SeriesMatrix> {
    if take_difference {
        series.require_kind(SeriesKind::Levels)?;
        difference(&series)
    } else {
        series.require_kind(SeriesKind::Differences).map_err(|e| {
            Error::Invalid(format!("{e}; pass --difference for level data"))
        })?;
        Ok(series)
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Invalid("--jobs must be at least 1".into()).into());
        }
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }

    match cli.command {
        Command::Simulate {
            model,
            params,
            len,
            seed,
            out,
        } => {
            let params: StructuralParams = match (model, params) {
                (Some(id), _) => preset(id)?,
                (None, Some(p)) => read_json(&p)?,
                (None, None) => unreachable!("clap enforces one of --model/--params"),
            };
            let y = simulate(&SimulationSpec::new(params, len, seed))?;
            let mut w = sink(out.as_deref())?;
            y.write_csv(&mut w)?;
            w.flush().map_err(Error::from)?;
        }

        Command::Estimate {
            input,
            difference,
            estimator,
            init,
            fallback,
            out,
        } => {
            let z = differences_of(read_series(&input)?, difference)?;
            match estimator {
                FitEstimator::Meta => match meta_fit(&z) {
                    Ok(report) => write_json(out.as_deref(), &report)?,
                    Err(e) if fallback => {
                        let r = mom_fit(&z).map_err(|_| Failure::Estimation(e))?;
                        write_json(out.as_deref(), &PlainReport::new("mom", &r, Some("meta failed; sample-moment fallback")))?;
                    }
                    Err(e) => return Err(Failure::Estimation(e)),
                },
                FitEstimator::Ml => {
                    let cfg = MlConfig {
                        init: match init {
                            InitChoice::Moment => MlInit::Moment,
                            InitChoice::Meta => MlInit::Meta,
                        },
                        ..MlConfig::default()
                    };
                    let fit = ml_fit(&z, &cfg).map_err(Failure::Estimation)?;
                    let s = reduced_to_structural_unchecked(&fit.reduced);
                    write_json(
                        out.as_deref(),
                        &MlReport {
                            estimator: "ml",
                            fit: &fit,
                            sigma_eta: matrix_to_rows(&s.sigma_eta),
                            sigma_eps: matrix_to_rows(&s.sigma_eps),
                        },
                    )?;
                }
                FitEstimator::Mom => {
                    let r = mom_fit(&z).map_err(Failure::Estimation)?;
                    write_json(out.as_deref(), &PlainReport::new("mom", &r, None))?;
                }
            }
        }

        Command::Forecast {
            input,
            params,
            estimator,
            out,
        } => {
            let levels = read_series(&input)?;
            levels.require_kind(SeriesKind::Levels)?;
            let (theta, source) = match params {
                Some(p) => (read_json::<ReducedParams>(&p)?.theta, "params"),
                None => {
                    let est = match estimator {
                        FitEstimator::Meta => Estimator::Meta,
                        FitEstimator::Ml => Estimator::Ml,
                        FitEstimator::Mom => Estimator::Mom,
                    };
                    let (r, _) = est.fit(&difference(&levels)?, &MlConfig::default(), false)?;
                    (r.theta, est.as_str())
                }
            };
            let f = forecast_after(&theta, &levels)?;
            #[derive(Serialize)]
            struct Out {
                source: &'static str,
                observations: usize,
                theta: Vec<Vec<f64>>,
                forecast: Vec<f64>,
            }
            write_json(
                out.as_deref(),
                &Out {
                    source,
                    observations: levels.rows(),
                    theta: matrix_to_rows(&theta),
                    forecast: f,
                },
            )?;
        }

        Command::ForecastExperiment {
            model,
            len,
            reps,
            estimators,
            seed,
            out,
        } => {
            let cfg = ForecastExperimentConfig {
                params: preset(model)?,
                model_key: u64::from(model),
                len,
                replications: reps,
                estimators: parse_estimators(&estimators)?,
                seed,
                ml: MlConfig::default(),
            };
            let exp = forecast_experiment(&cfg)?;
            let mut w = sink(out.as_deref())?;
            exp.write_csv(&mut w)?;
            w.flush().map_err(Error::from)?;
            let mut err = io::stderr().lock();
            for s in exp.summary() {
                let _ = writeln!(
                    err,
                    "{:<5} y{}  mean {:>9.4}  sd {:>8.4}  iqr {:>8.4}  n {}",
                    s.estimator.as_str(),
                    s.component,
                    s.mean,
                    s.std_dev,
                    s.iqr,
                    s.count
                );
            }
        }

        Command::Benchmark {
            config,
            models,
            sample_sizes,
            reps,
            estimators,
            seed,
            fallback,
            out,
            timing,
        } => {
            let mut cfg: BenchmarkConfig = match config {
                Some(p) => read_json(&p)?,
                None => BenchmarkConfig {
                    models: models.into_iter().map(ModelSpec::Preset).collect(),
                    sample_sizes,
                    replications: reps,
                    estimators: parse_estimators(&estimators)?,
                    master_seed: seed,
                    output: None,
                    fallback,
                    jobs: None,
                },
            };
            if out.is_some() {
                cfg.output = out;
            }
            let result = run_benchmark(&cfg)?;
            let table = result.render_table();
            match &cfg.output {
                Some(p) => {
                    result.write_csv(BufWriter::new(File::create(p).map_err(Error::from)?))?;
                    print!("{table}");
                }
                None => {
                    result.write_csv(io::stdout().lock())?;
                    eprint!("{table}");
                }
            }
            if let Some(p) = timing {
                result.write_timing_csv(BufWriter::new(File::create(p).map_err(Error::from)?))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Estimation(e)) => {
            eprintln!("estimation failed: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}
