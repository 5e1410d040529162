use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rankmin_cli::commands::{self, CliError, DominanceArgs, SweepArgs};
use rankmin_cli::{examples, parse_market_spec, Report, Status};
use rankmin_core::{Budget, Market, MechanismKind, Profile, Property};

#[derive(Parser)]
#[command(name = "rankmin", version)]
#[command(about = "Fair rank-minimizing random assignment: evaluation, dominance checks and sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Uniform,
    Modified,
}

impl From<MechanismArg> for MechanismKind {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Uniform => MechanismKind::Uniform,
            MechanismArg::Modified => MechanismKind::Modified,
        }
    }
}

#[derive(Args)]
struct BudgetArgs {
    /// Largest agent count accepted for exhaustive enumeration
    #[arg(long, default_value_t = Budget::default().max_agents)]
    budget_agents: usize,
    /// Largest type count accepted for exhaustive enumeration
    #[arg(long, default_value_t = Budget::default().max_types)]
    budget_types: usize,
    /// Largest number of profiles visited by a dominance check or sweep
    #[arg(long, default_value_t = Budget::default().max_profiles)]
    budget_profiles: usize,
}

impl BudgetArgs {
    fn budget(&self) -> Budget {
        Budget {
            max_agents: self.budget_agents,
            max_types: self.budget_types,
            max_profiles: self.budget_profiles,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a mechanism at the profile in a spec file
    Assign {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "uniform")]
        mechanism: MechanismArg,
        /// Apply the refusal transform against true orders
        #[arg(long)]
        refusal: bool,
        /// Spec file holding the true orders (defaults to the revealed ones)
        #[arg(long)]
        truth_spec: Option<PathBuf>,
        /// Write the final matrix as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Decide whether a report dominates truth-telling over all opponent profiles
    Dominance {
        #[arg(long)]
        spec: PathBuf,
        /// Agent name
        #[arg(long)]
        agent: String,
        /// True order such as "o1 > n > o2" (defaults to the agent's spec order)
        #[arg(long)]
        truth: Option<String>,
        /// Candidate order, or "ods" for every outside-option-demotion order
        #[arg(long, default_value = "ods")]
        candidate: String,
        #[arg(long, value_enum, default_value = "uniform")]
        mechanism: MechanismArg,
        #[arg(long)]
        refusal: bool,
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Check a named property over every profile or truth/report pair
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// ete-uniform, ete-modified, truth-undominated-uniform,
        /// truth-undominated-modified, ods-weak-dominance,
        /// ods-strict-dominance or ods-waste
        #[arg(long)]
        property: Property,
        #[arg(long)]
        parallel: bool,
        /// Check this many random profiles instead of all (equal-treatment sweeps)
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Recompute the bundled worked examples and compare with their expected values
    ReproduceExamples,
    /// Split a random assignment into weighted deterministic assignments
    Decompose {
        #[arg(long)]
        spec: PathBuf,
        /// Matrix file, one row of fractions per agent (defaults to the
        /// mechanism output at the spec profile)
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "uniform")]
        mechanism: MechanismArg,
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load(path: &Path) -> Result<(Market, Profile), CliError> {
    parse_market_spec(&read(path)?).map_err(|source| CliError::Spec {
        path: path.display().to_string(),
        source,
    })
}

fn run(command: Command) -> Result<(Report, Option<PathBuf>), CliError> {
    use rankmin_core::Mechanism;
    Ok(match command {
        Command::Assign {
            spec,
            mechanism,
            refusal,
            truth_spec,
            csv,
            budget,
        } => {
            let (market, revealed) = load(&spec)?;
            let truths = match truth_spec {
                Some(path) => {
                    let (m, p) = load(&path)?;
                    if m != market {
                        return Err(CliError::Usage(format!(
                            "{} declares a different market than {}",
                            path.display(),
                            spec.display()
                        )));
                    }
                    Some(p)
                }
                None => None,
            };
            if truths.is_some() && !refusal {
                return Err(CliError::Usage("--truth-spec requires --refusal".into()));
            }
            let truths = refusal.then(|| truths.unwrap_or_else(|| revealed.clone()));
            let report = commands::assign(&market, &revealed, mechanism.into(), budget.budget(), truths.as_ref())?;
            (report, csv)
        }
        Command::Dominance {
            spec,
            agent,
            truth,
            candidate,
            mechanism,
            refusal,
            parallel,
            budget,
        } => {
            let (market, profile) = load(&spec)?;
            let args = DominanceArgs {
                agent: &agent,
                truth: truth.as_deref(),
                candidate: &candidate,
                kind: mechanism.into(),
                refusal,
                parallel,
                budget: budget.budget(),
            };
            (commands::dominance(&market, &profile, &args)?, None)
        }
        Command::Sweep {
            spec,
            property,
            parallel,
            sample,
            seed,
            budget,
        } => {
            let (market, _) = load(&spec)?;
            let args = SweepArgs {
                parallel,
                budget: budget.budget(),
                sample: sample.map(|n| (n, seed)),
            };
            (commands::sweep(&market, property, &args)?, None)
        }
        Command::ReproduceExamples => (examples::reproduce_examples(), None),
        Command::Decompose {
            spec,
            matrix,
            mechanism,
            budget,
        } => {
            let (market, profile) = load(&spec)?;
            let x = match matrix {
                Some(path) => commands::parse_matrix(&market, &read(&path)?)?,
                None => rankmin_core::Rule::with_budget(mechanism.into(), budget.budget())
                    .assign(&market, &profile)?,
            };
            (commands::decompose_matrix(&market, &x, Some(&profile))?, None)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((report, csv_path)) => {
            print!("{}", report.text);
            if let (Some(path), Some(csv)) = (csv_path, &report.csv) {
                if let Err(e) = std::fs::write(&path, csv) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            match report.status {
                Status::Passed => ExitCode::SUCCESS,
                Status::Failed => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = e.hint() {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
