//! Command-line surface: argument parsing and orchestration.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use hte_mediation_core::estimators::{
    attenuation_corrected, bces_bootstrap, bces_estimate, naive_fit, simex_estimate, BootstrapMode, SimexVariance,
};
use hte_mediation_core::inference::{analyze, heterogeneity_stats};
use hte_mediation_core::simulation::{
    power_curve, run_calibration, run_table2, CalibrationConfig, CalibrationEstimator, PowerConfig, Table2Config,
};
use hte_mediation_core::subgroups::{discover, estimate_group_effects, group_by_rules, TreeConfig};
use hte_mediation_core::{CiMode, EffectDataset, GammaAggregate, SimexConfig, SimexFit, SlopeFit};

use crate::error::CliError;
use crate::io::{apply_weights_csv, parse_aggregate_csv, parse_individual_csv, write_aggregate};
use crate::plot::emit_plot_data;
use crate::report::{emit_result, fmt6, Format, Outcome, Report, RunEcho};

pub const TOOL: &str = "hte-mediation";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = TOOL, about = "Causal mediation effects from heterogeneous treatment effects", disable_version_flag = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Test level, in (0, 0.5].
    #[arg(long, global = true, default_value_t = 0.05, value_parser = parse_alpha)]
    alpha: f64,
    #[arg(long = "ci-mode", global = true, value_enum, default_value_t = CiModeArg::Product)]
    ci_mode: CiModeArg,
    #[arg(long, global = true, value_enum, default_value_t = EstimatorArg::Simex)]
    estimator: EstimatorArg,
    /// Directory for result, plot and table files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV with `group_id, weight` overriding the sample-size weights.
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// SIMEX standard error method.
    #[arg(long = "simex-se", global = true, value_enum, default_value_t = SimexSeArg::Jackknife)]
    simex_se: SimexSeArg,
    #[arg(long = "simex-replicates", global = true, default_value_t = 200)]
    simex_replicates: usize,
    /// Outer pairs-bootstrap replicates, used with `--simex-se bootstrap`.
    #[arg(long = "simex-outer", global = true, default_value_t = 100)]
    simex_outer: usize,
    #[arg(long = "simex-grid", global = true, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
    simex_grid: Vec<f64>,
    /// Replicates for the BCES bootstraps.
    #[arg(long = "bootstrap-replicates", global = true, default_value_t = 999)]
    bootstrap_replicates: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the mediation model to subgroup effects.
    Estimate { input: PathBuf },
    /// Find subgroups in unit-level data, then fit the mediation model.
    Discover {
        input: PathBuf,
        #[command(flatten)]
        tree: TreeArgs,
    },
    /// Run a simulation study and print its table as CSV.
    Simulate {
        #[command(subcommand)]
        study: Study,
    },
    /// Print the version.
    Version,
}

#[derive(Debug, Args)]
struct TreeArgs {
    #[arg(long = "min-leaf", default_value_t = 50)]
    min_leaf: usize,
    #[arg(long = "max-depth", default_value_t = 4)]
    max_depth: usize,
    #[arg(long = "honest-fraction", default_value_t = 0.5)]
    honest_fraction: f64,
    #[arg(long = "split-penalty", default_value_t = 16.0)]
    split_penalty: f64,
    /// Estimate subgroup effects on the tree's own estimation half instead of
    /// a held-out third.
    #[arg(long = "same-sample")]
    same_sample: bool,
}

#[derive(Debug, Subcommand)]
enum Study {
    /// HTE against the traditional estimator under confounding.
    Table2 {
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        kappas: Vec<f64>,
        #[arg(long = "n-per-group", default_value_t = 500)]
        n_per_group: usize,
        #[arg(long = "traditional-replicates", default_value_t = 499)]
        traditional_replicates: usize,
    },
    /// Rejection rates on the aggregate design.
    Calibrate {
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, value_delimiter = ',', default_value = "5,10,30,50,100")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        reps: usize,
    },
    /// Power of adding groups against growing the existing ones.
    Power {
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long = "k-max", default_value_t = 10)]
        k_max: usize,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CiModeArg {
    Paper,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Naive,
    Bces,
    Simex,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimexSeArg {
    Jackknife,
    Bootstrap,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("invalid alpha {s}"))?;
    if a > 0.0 && a <= 0.5 {
        Ok(a)
    } else {
        Err(format!("alpha must lie in (0, 0.5], got {s}"))
    }
}

impl EstimatorArg {
    fn name(self) -> &'static str {
        match self {
            EstimatorArg::Naive => "naive",
            EstimatorArg::Bces => "bces",
            EstimatorArg::Simex => "simex",
            EstimatorArg::All => "all",
        }
    }

    /// `bces` selects the sandwich fit and both bootstraps.
    fn methods(self) -> &'static [Fitter] {
        use Fitter::*;
        match self {
            EstimatorArg::Naive => &[Naive],
            EstimatorArg::Bces => &[Bces, BcesPairs, BcesWild],
            EstimatorArg::Simex => &[Simex],
            EstimatorArg::All => &[Naive, Attenuation, Bces, BcesPairs, BcesWild, Simex],
        }
    }

    fn calibration(self) -> Vec<CalibrationEstimator> {
        match self {
            EstimatorArg::Naive => vec![CalibrationEstimator::Naive],
            EstimatorArg::Bces => {
                vec![CalibrationEstimator::Bces, CalibrationEstimator::BcesPairs, CalibrationEstimator::BcesWild]
            }
            EstimatorArg::Simex => vec![CalibrationEstimator::Simex],
            EstimatorArg::All => CalibrationEstimator::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Fitter {
    Naive,
    Attenuation,
    Bces,
    BcesPairs,
    BcesWild,
    Simex,
}

impl Fitter {
    fn name(self) -> &'static str {
        match self {
            Fitter::Naive => "naive_ols",
            Fitter::Attenuation => "attenuation",
            Fitter::Bces => "bces",
            Fitter::BcesPairs => "bces_pairs_boot",
            Fitter::BcesWild => "bces_wild_boot",
            Fitter::Simex => "simex",
        }
    }
}

struct Settings {
    seed: u64,
    alpha: f64,
    ci_mode: CiMode,
    estimator: EstimatorArg,
    out: Option<PathBuf>,
    weights: Option<PathBuf>,
    format: Format,
    simex: SimexConfig,
    bootstrap_replicates: usize,
}

impl Settings {
    fn new(g: GlobalArgs) -> Result<Self, CliError> {
        let simex = SimexConfig {
            zeta_grid: g.simex_grid,
            replicates: g.simex_replicates,
            seed: g.seed,
            outer_bootstrap: g.simex_outer,
            variance: match g.simex_se {
                SimexSeArg::Jackknife => SimexVariance::Jackknife,
                SimexSeArg::Bootstrap => SimexVariance::PairsBootstrap,
            },
            ..SimexConfig::default()
        };
        simex.validate()?;
        if let Some(w) = &g.weights {
            if !w.is_file() {
                return Err(CliError::Input(format!("{}: weights file not found", w.display())));
            }
        }
        Ok(Self {
            seed: g.seed,
            alpha: g.alpha,
            ci_mode: match g.ci_mode {
                CiModeArg::Paper => CiMode::PaperLiteral,
                CiModeArg::Product => CiMode::EndpointProduct,
            },
            estimator: g.estimator,
            out: g.out,
            weights: g.weights,
            format: match g.format {
                FormatArg::Json => Format::Json,
                FormatArg::Table => Format::Table,
            },
            simex,
            bootstrap_replicates: g.bootstrap_replicates,
        })
    }

    fn echo(&self, command: &str, input: Option<&Path>) -> RunEcho {
        RunEcho {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            input: input.map(|p| p.display().to_string()),
            weights: self.weights.as_ref().map(|p| p.display().to_string()),
            seed: self.seed,
            alpha: self.alpha,
            ci_mode: self.ci_mode.as_str().into(),
            estimator: self.estimator.name().into(),
            simex_zeta_grid: self.simex.zeta_grid.clone(),
            simex_replicates: self.simex.replicates,
            simex_outer_bootstrap: self.simex.outer_bootstrap,
            simex_variance: self.simex.variance.as_str().into(),
            bootstrap_replicates: self.bootstrap_replicates,
        }
    }

    fn fit(&self, f: Fitter, data: &EffectDataset) -> hte_mediation_core::Result<(SlopeFit, Option<SimexFit>)> {
        let b = self.bootstrap_replicates;
        Ok(match f {
            Fitter::Naive => (naive_fit(data)?, None),
            Fitter::Attenuation => (attenuation_corrected(data)?, None),
            Fitter::Bces => (bces_estimate(data)?, None),
            Fitter::BcesPairs => (bces_bootstrap(data, BootstrapMode::Pairs, b, self.seed)?, None),
            Fitter::BcesWild => (bces_bootstrap(data, BootstrapMode::WildRestricted, b, self.seed)?, None),
            Fitter::Simex => {
                let s = simex_estimate(data, &self.simex)?;
                (s.fit.clone(), Some(s))
            }
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    /// Fits every selected estimator, prints the report and writes result
    /// and plot files. Fails only if no estimator succeeds.
    fn report(&self, command: &str, input: &Path, data: &EffectDataset) -> Result<String, CliError> {
        let mut outcomes = Vec::new();
        let mut first_error = None;
        let mut plot: Option<(SlopeFit, Option<SimexFit>)> = None;
        for &f in self.estimator.methods() {
            match self.fit(f, data).and_then(|(fit, s)| Ok((analyze(data, fit.clone(), self.alpha, self.ci_mode)?, fit, s))) {
                Ok((result, fit, simex)) => {
                    if plot.is_none() || simex.is_some() {
                        plot = Some((fit, simex));
                    }
                    outcomes.push(Outcome::Fitted(Box::new(result)));
                }
                Err(e) => {
                    outcomes.push(Outcome::Failed { method: f.name().into(), error: e.to_string() });
                    first_error.get_or_insert(e);
                }
            }
        }
        let Some((fit, simex)) = plot else {
            return Err(first_error.expect("at least one estimator runs").into());
        };
        let report = Report {
            echo: self.echo(command, Some(input)),
            k: data.len(),
            gamma: GammaAggregate::from_dataset(data),
            heterogeneity: heterogeneity_stats(&data.gamma_hats(), &data.se_gammas()).ok(),
            outcomes,
        };
        let text = emit_result(&report, self.format);
        if let Some(dir) = &self.out {
            let name = match self.format {
                Format::Json => "result.json",
                Format::Table => "result.txt",
            };
            self.write(name, &text)?;
            emit_plot_data(data, &fit, simex.as_ref(), dir)?;
        }
        Ok(text)
    }
}

/// Parses `args` (including the program name) and runs the command; the
/// report or table goes to standard output.
pub fn run(args: &[String]) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return Err(CliError::Input(first.trim_start_matches("error: ").to_string()));
        }
    };
    let settings = Settings::new(cli.global)?;
    let text = execute(&settings, cli.command)?;
    print!("{text}");
    Ok(())
}

fn execute(s: &Settings, command: Command) -> Result<String, CliError> {
    match command {
        Command::Version => Ok(format!("{TOOL} {VERSION}\n")),
        Command::Estimate { input } => {
            let mut data = parse_aggregate_csv(&input)?;
            if let Some(w) = &s.weights {
                data = apply_weights_csv(data, w)?;
            }
            s.report("estimate", &input, &data)
        }
        Command::Discover { input, tree } => {
            let units = parse_individual_csv(&input)?;
            let mut data = if units.group_labels().is_some() {
                estimate_group_effects(&units, &group_by_rules(&units, &[])?)?
            } else {
                let config = TreeConfig {
                    min_leaf: tree.min_leaf,
                    max_depth: tree.max_depth,
                    honest_fraction: tree.honest_fraction,
                    seed: s.seed,
                    split_penalty: tree.split_penalty,
                };
                let found = discover(&units, &config, !tree.same_sample)?;
                s.write("tree.txt", &found.tree.to_text())?;
                found.effects
            };
            if let Some(w) = &s.weights {
                data = apply_weights_csv(data, w)?;
            }
            let mut effects = Vec::new();
            write_aggregate(&data, &mut effects)?;
            s.write("effects.csv", &String::from_utf8(effects).expect("csv output is UTF-8"))?;
            s.report("discover", &input, &data)
        }
        Command::Simulate { study } => {
            let (name, table) = simulate(s, study)?;
            s.write(name, &table)?;
            Ok(table)
        }
    }
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

fn simulate(s: &Settings, study: Study) -> Result<(&'static str, String), CliError> {
    match study {
        Study::Table2 { reps, kappas, n_per_group, traditional_replicates } => {
            let rows = run_table2(&Table2Config {
                kappas,
                reps,
                n_per_group,
                alpha: s.alpha,
                ci_mode: s.ci_mode,
                simex: s.simex.clone(),
                traditional_replicates,
                seed: s.seed,
                ..Table2Config::default()
            })?;
            let header = [
                "kappa", "true_acme", "reps", "hte_acme", "hte_ci_lower", "hte_ci_upper", "hte_coverage", "hte_failures",
                "trad_acme", "trad_ci_lower", "trad_ci_upper", "trad_coverage", "trad_failures",
            ];
            let body = rows
                .iter()
                .map(|r| {
                    vec![
                        fmt6(r.kappa),
                        fmt6(r.true_acme),
                        r.reps.to_string(),
                        fmt6(r.hte_acme),
                        fmt6(r.hte_ci_lower),
                        fmt6(r.hte_ci_upper),
                        fmt6(r.hte_coverage),
                        r.hte_failures.to_string(),
                        fmt6(r.trad_acme),
                        fmt6(r.trad_ci_lower),
                        fmt6(r.trad_ci_upper),
                        fmt6(r.trad_coverage),
                        r.trad_failures.to_string(),
                    ]
                })
                .collect();
            Ok(("table2.csv", csv_text(&header, body)))
        }
        Study::Calibrate { beta, ks, reps } => {
            let rows = run_calibration(&CalibrationConfig {
                beta,
                ks,
                reps,
                estimators: s.estimator.calibration(),
                alpha: s.alpha,
                simex: s.simex.clone(),
                bootstrap_replicates: s.bootstrap_replicates,
                seed: s.seed,
            })?;
            let body = rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.estimator.as_str().into(),
                        fmt6(r.beta),
                        r.reps.to_string(),
                        fmt6(r.rejection_rate),
                        r.failures.to_string(),
                    ]
                })
                .collect();
            Ok(("calibration.csv", csv_text(&["k", "estimator", "beta", "reps", "rejection_rate", "failures"], body)))
        }
        Study::Power { reps, k_max, n, beta } => {
            let points = power_curve(&PowerConfig {
                n,
                k_max,
                reps,
                beta,
                alpha: s.alpha,
                simex: s.simex.clone(),
                seed: s.seed,
                ..PowerConfig::default()
            })?;
            let body = points
                .iter()
                .map(|p| {
                    vec![
                        p.k.to_string(),
                        fmt6(p.add_power),
                        fmt6(p.grow_power),
                        p.add_failures.to_string(),
                        p.grow_failures.to_string(),
                    ]
                })
                .collect();
            Ok(("power.csv", csv_text(&["k", "add_power", "grow_power", "add_failures", "grow_failures"], body)))
        }
    }
}
