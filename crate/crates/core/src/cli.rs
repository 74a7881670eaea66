//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, parse_feature_label, DesignMatrix, Mode, Month, Panel, PipelineSpec, SeriesFrame};
use crate::error::{Error, ErrorClass, Result};
use crate::explain::{impurity_importance, pdp_1d, pdp_2d, GridSpec, DEFAULT_GRID_POINTS};
use crate::forecast::{
    compare_models, forecast_month, load_consensus, rolling_backtest, CompareConfig, ForestModel, Protocol,
};
use crate::rf::{fit_forest, Aggregation, Forest, ForestParams};
use crate::simdata::{default_pipeline, generate_panel, SimConfig};
use crate::svg;
use crate::tuning::{grid_search, TuneGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nowcast", version, about = "Monthly inflation nowcasts with MAE random forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Default, Args)]
struct Flags {
    /// TOML file predefining any of the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Monthly panel CSV (`date` column plus one column per variable).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Lag/transform spec (TOML).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Resampling iterations per forecast.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// nowcast or forecast; overrides the spec file.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Backtest window in months.
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    n_trees: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    #[arg(long, global = true)]
    feature_fraction: Option<f64>,
    #[arg(long, global = true)]
    min_leaf: Option<usize>,
    /// median or mean.
    #[arg(long, global = true)]
    aggregation: Option<Aggregation>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validated grid search over forest hyperparameters.
    Tune {
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Resampled forecast for one month of the panel.
    Forecast {
        /// Target month (YYYY-MM); defaults to the last panel month.
        #[arg(long)]
        month: Option<Month>,
    },
    /// Rolling one-step backtest of the forest.
    Backtest,
    /// Forest against ARMA, lasso, ridge and an external consensus.
    Compare {
        /// `date,forecast` CSV of external forecasts.
        #[arg(long)]
        consensus: Option<PathBuf>,
    },
    /// Impurity importance of a forest fitted on the full panel.
    Importance,
    /// Partial dependence on one or more features.
    Pdp {
        /// Feature labels or variable names, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<String>,
        /// Joint dependence on exactly two features.
        #[arg(long = "2d")]
        two_d: bool,
        /// Quantile grid size.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Writes a synthetic panel and a matching spec.
    Simulate {
        #[arg(long)]
        months: Option<usize>,
    },
}

/// Settings resolved from the config file and the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub mode: Option<Mode>,
    pub window: Option<usize>,
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub feature_fraction: Option<f64>,
    pub min_leaf: Option<usize>,
    pub aggregation: Option<Aggregation>,
    pub consensus: Option<PathBuf>,
    pub tune: Option<TuneGrid>,
    pub simulate: Option<SimConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    fn apply(&mut self, f: &Flags) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if f.$field.is_some() { self.$field = f.$field.clone(); })*
            };
        }
        take!(data, spec, out, seed, iterations, mode, window, n_trees, max_depth, feature_fraction, min_leaf, aggregation);
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    pub fn forest_params(&self) -> Result<ForestParams> {
        let d = ForestParams::default();
        let p = ForestParams {
            n_trees: self.n_trees.unwrap_or(d.n_trees),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            feature_fraction: self.feature_fraction.unwrap_or(d.feature_fraction),
            min_leaf: self.min_leaf.unwrap_or(d.min_leaf),
            aggregation: self.aggregation.unwrap_or(d.aggregation),
            seed: self.seed(),
            ..d
        };
        p.validate()?;
        Ok(p)
    }

    pub fn protocol(&self) -> Protocol {
        Protocol {
            iterations: self.iterations.unwrap_or(Protocol::default().iterations),
            base_seed: self.seed(),
            ..Protocol::default()
        }
    }

    fn require(path: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
        let p = path
            .clone()
            .ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))?;
        if !p.exists() {
            return Err(Error::io(&p, std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
        Ok(p)
    }

    /// Loads the panel and the spec, with `--mode` applied and transforms run.
    pub fn inputs(&self) -> Result<(SeriesFrame<f64>, PipelineSpec)> {
        let data = Self::require(&self.data, "data")?;
        let spec_path = Self::require(&self.spec, "spec")?;
        let mut spec = PipelineSpec::load(spec_path)?;
        if let Some(mode) = self.mode {
            spec.mode = mode;
        }
        let raw: SeriesFrame<f64> = load_csv(data)?;
        let frame = spec.prepare(&raw)?;
        Ok((frame, spec))
    }
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn write_csv_with(path: PathBuf, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write(path, buf)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Accepts an exact feature label, or a variable name (case-insensitive)
/// which picks that variable's smallest lag.
fn resolve_feature(design: &DesignMatrix<f64>, name: &str) -> Result<String> {
    if design.feature_index(name).is_some() {
        return Ok(name.to_string());
    }
    design
        .feature_names()
        .iter()
        .filter_map(|f| parse_feature_label(f).map(|(v, lag)| (f, v, lag)))
        .filter(|(_, v, _)| v.eq_ignore_ascii_case(name))
        .min_by_key(|&(_, _, lag)| lag)
        .map(|(f, _, _)| f.clone())
        .ok_or_else(|| Error::UnknownFeature(name.to_string()))
}

fn full_fit(config: &RunConfig) -> Result<(DesignMatrix<f64>, Forest<f64>)> {
    let (frame, spec) = config.inputs()?;
    let design = spec.design(&frame)?;
    let forest = fit_forest(&design, &config.forest_params()?)?;
    Ok((design, forest))
}

fn cmd_tune(config: &RunConfig, folds: Option<usize>) -> Result<()> {
    let (frame, spec) = config.inputs()?;
    let design = spec.design(&frame)?;
    let mut grid = config.tune.clone().unwrap_or_default();
    grid.seed = config.seed();
    if let Some(k) = folds {
        grid.folds = k;
    }
    let report = grid_search(&design, &grid)?;
    report.save(config.out_dir()?)?;
    let w = &report.winner;
    println!(
        "winner: n_trees={} max_depth={} feature_fraction={} min_leaf={}",
        w.n_trees, w.max_depth, w.feature_fraction, w.min_leaf
    );
    Ok(())
}

fn cmd_forecast(config: &RunConfig, month: Option<Month>) -> Result<()> {
    let (frame, spec) = config.inputs()?;
    let months = frame.months();
    let index = match month {
        Some(m) => months
            .iter()
            .position(|&x| x == m)
            .ok_or_else(|| Error::InsufficientData(format!("month {m} is not in the panel")))?,
        None => months
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::InsufficientData("empty panel".into()))?,
    };
    let model = ForestModel {
        params: config.forest_params()?,
    };
    let (result, _) = forecast_month(&frame, &spec, &spec.lags, index, &model, &config.protocol())?;
    let out = config.out_dir()?;
    write_csv_with(out.join("forecast.csv"), |b| result.write_csv(b))?;
    write(out.join("forecast.json"), result.to_json()?)?;
    println!("{}: {:.4} (std {:.4})", months[index], result.point, result.std);
    Ok(())
}

fn cmd_backtest(config: &RunConfig) -> Result<()> {
    let (frame, spec) = config.inputs()?;
    let model = ForestModel {
        params: config.forest_params()?,
    };
    let window = config.window.unwrap_or(CompareConfig::default().window);
    let report = rolling_backtest(&frame, &spec, window, &model, &config.protocol())?;
    let out = config.out_dir()?;
    write_csv_with(out.join("backtest.csv"), |b| report.write_csv(b))?;
    write(out.join("backtest.json"), report.to_json()?)?;
    let xs: Vec<f64> = (0..report.records.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = report.records.iter().map(|r| r.abs_error).collect();
    write(
        out.join("backtest.svg"),
        svg::line_chart("Absolute one-step error", "month in window", "abs. error", &xs, &ys),
    )?;
    println!("mae {:.4} (std {:.4}) over {} months", report.mae, report.oos_std, report.records.len());
    Ok(())
}

fn cmd_compare(config: &RunConfig, consensus: Option<PathBuf>) -> Result<()> {
    let (frame, spec) = config.inputs()?;
    let consensus = match consensus.or_else(|| config.consensus.clone()) {
        Some(p) => Some(load_consensus::<f64>(RunConfig::require(&Some(p), "consensus")?)?),
        None => None,
    };
    let defaults = CompareConfig::default();
    let compare = CompareConfig {
        window: config.window.unwrap_or(defaults.window),
        protocol: config.protocol(),
        forest: config.forest_params()?,
        ..defaults
    };
    let report = compare_models(&frame, &spec, &compare, consensus.as_deref())?;
    let out = config.out_dir()?;
    write_csv_with(out.join("comparison.csv"), |b| report.write_csv(b))?;
    write(out.join("comparison.json"), report.to_json()?)?;
    print!("{}", report.render());
    Ok(())
}

fn cmd_importance(config: &RunConfig) -> Result<()> {
    let (design, forest) = full_fit(config)?;
    let report = impurity_importance(&forest, &design)?;
    let out = config.out_dir()?;
    report.save_csv(out.join("importance.csv"))?;
    write(out.join("importance.json"), serde_json::to_string_pretty(&report)?)?;
    let bars: Vec<(String, f64)> = report.ranked().into_iter().map(|(n, s)| (n.to_string(), s)).collect();
    write(out.join("importance.svg"), svg::bar_chart("Relative importance", &bars))?;
    for (name, share) in report.ranked() {
        println!("{name:>24} {share:.4}");
    }
    Ok(())
}

fn cmd_pdp(config: &RunConfig, features: &[String], two_d: bool, points: Option<usize>) -> Result<()> {
    let grid = GridSpec::Quantiles(points.unwrap_or(DEFAULT_GRID_POINTS));
    if two_d && features.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "--2d needs exactly two features, got {}",
            features.len()
        )));
    }
    let (design, forest) = full_fit(config)?;
    let names = features
        .iter()
        .map(|f| resolve_feature(&design, f))
        .collect::<Result<Vec<_>>>()?;
    let out = config.out_dir()?;
    if two_d {
        let p = pdp_2d(&forest, &design, &names[0], &names[1], &grid, &grid)?;
        let stem = format!("pdp2d_{}_{}", sanitize(&names[0]), sanitize(&names[1]));
        write_csv_with(out.join(format!("{stem}.csv")), |b| p.write_csv(b))?;
        write(
            out.join(format!("{stem}.svg")),
            svg::heatmap("Partial dependence", &names[0], &names[1], &p.grid_a, &p.grid_b, &p.response),
        )?;
        println!("wrote {stem}.csv");
    } else {
        for name in &names {
            let p = pdp_1d(&forest, &design, name, &grid)?;
            let stem = format!("pdp_{}", sanitize(name));
            write_csv_with(out.join(format!("{stem}.csv")), |b| p.write_csv(b))?;
            write(
                out.join(format!("{stem}.svg")),
                svg::line_chart("Partial dependence", name, "inflation (% per month)", &p.grid, &p.response),
            )?;
            println!("wrote {stem}.csv");
        }
    }
    Ok(())
}

fn cmd_simulate(config: &RunConfig, months: Option<usize>) -> Result<()> {
    let mut sim = config.simulate.clone().unwrap_or_default();
    sim.seed = config.seed();
    if let Some(m) = months {
        sim.months = m;
    }
    let frame: SeriesFrame<f64> = generate_panel(&sim)?;
    let mut spec = default_pipeline();
    if let Some(mode) = config.mode {
        spec.mode = mode;
        if mode == Mode::Forecast {
            for set in spec.lags.values_mut() {
                if set.remove(&0) {
                    set.insert(1);
                }
            }
        }
    }
    let out = config.out_dir()?;
    frame.save_csv(out.join("simdata.csv"))?;
    write(out.join("spec.toml"), spec.to_toml_string()?)?;
    write(out.join("simconfig.toml"), toml::to_string(&sim).map_err(|e| Error::Serialization(e.to_string()))?)?;
    println!("wrote {} months to simdata.csv", frame.len());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.flags.config {
        Some(path) => RunConfig::load(&RunConfig::require(&Some(path.clone()), "config")?)?,
        None => RunConfig::default(),
    };
    config.apply(&cli.flags);
    match cli.command {
        Command::Tune { folds } => cmd_tune(&config, folds),
        Command::Forecast { month } => cmd_forecast(&config, month),
        Command::Backtest => cmd_backtest(&config),
        Command::Compare { consensus } => cmd_compare(&config, consensus),
        Command::Importance => cmd_importance(&config),
        Command::Pdp { features, two_d, points } => cmd_pdp(&config, &features, two_d, points),
        Command::Simulate { months } => cmd_simulate(&config, months),
    }
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code; messages go to stderr.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.class())
        }
    }
}
