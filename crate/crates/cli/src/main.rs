mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmfg_core::n_player::Caps;
use cmfg_core::Arithmetic;

use crate::output::Outputs;

#[derive(Parser, Debug)]
#[command(name = "cmfg", version, about = "Correlated equilibria of finite N-player games and their mean-field limit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output directory; without it the main JSON report goes to stdout.
    #[arg(short = 'o', long = "out", global = true)]
    pub out: Option<PathBuf>,

    /// Master seed for every Monte Carlo estimate.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for parallel loops.
    #[arg(long, global = true, env = "CMFG_THREADS")]
    pub threads: Option<usize>,

    /// Override the arithmetic declared in the game file (exact or float).
    #[arg(long, global = true)]
    pub arithmetic: Option<Arithmetic>,

    /// Largest number of restricted strategies to enumerate.
    #[arg(long, global = true)]
    pub enum_cap: Option<usize>,

    /// Largest joint state space for exact N-player propagation.
    #[arg(long, global = true)]
    pub joint_cap: Option<usize>,

    /// Largest number of variables in the equilibrium program.
    #[arg(long, global = true)]
    pub lp_cap: Option<usize>,

    /// Largest number of atoms in an expanded profile.
    #[arg(long, global = true)]
    pub atom_cap: Option<usize>,

    /// Work budget of an exact deviation gain before switching to simulation.
    #[arg(long, global = true)]
    pub work_cap: Option<u128>,
}

impl Common {
    pub fn caps(&self) -> Caps {
        let d = Caps::default();
        Caps {
            enumeration: self.enum_cap.unwrap_or(d.enumeration),
            joint: self.joint_cap.unwrap_or(d.joint),
            lp: self.lp_cap.unwrap_or(d.lp),
            atoms: self.atom_cap.unwrap_or(d.atoms),
            exact_work: self.work_cap.unwrap_or(d.exact_work),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check that a game file describes a valid model.
    Validate {
        game: PathBuf,
    },
    /// Mean-field game operations on a correlated flow.
    #[command(subcommand)]
    Mfg(MfgCommand),
    /// Worked examples.
    #[command(subcommand)]
    Example(ExampleCommand),
    /// N-player game operations.
    #[command(subcommand)]
    Nplayer(NplayerCommand),
    /// Lift a correlated flow to an N-player profile.
    Lift {
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(short = 'N', value_name = "N", value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
    },
    /// Experiments along a sequence of N.
    #[command(subcommand)]
    Limits(LimitsCommand),
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long)]
    pub flow: PathBuf,
    /// Initial law such as `1/2,1/2`; defaults to the time-0 measure of the flow.
    #[arg(long)]
    pub m0: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum MfgCommand {
    /// Optimality gap and consistency residuals of a correlated flow.
    Verify(FlowArgs),
    /// Best responses to each recommendation and dynamic-programming values per flow.
    BestResponse(FlowArgs),
    /// Forward propagation of each flow's conditional strategy law.
    Propagate(FlowArgs),
}

#[derive(Subcommand, Debug)]
pub enum ExampleCommand {
    /// The two-state example with four strategy/flow atoms.
    Section5(Section5Args),
}

#[derive(Args, Debug)]
pub struct Section5Args {
    /// Weight split: beta = (alpha/4, alpha/4, (1-alpha)/4, (1-alpha)/4).
    #[arg(long, conflicts_with = "beta")]
    pub alpha: Option<String>,
    /// The four atom weights, comma separated.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long, default_value = "1/32")]
    pub c0: String,
    #[arg(long, default_value = "1/16")]
    pub c1: String,
}

#[derive(Subcommand, Debug)]
pub enum NplayerCommand {
    /// Solve for a symmetric correlated equilibrium with exact arithmetic.
    SolveCe {
        #[arg(long)]
        game: PathBuf,
        #[arg(short = 'N', value_name = "N", value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        /// Initial law of each player; uniform by default.
        #[arg(long)]
        m0: Option<String>,
        /// Pick the equilibrium with the smallest expected total cost.
        #[arg(long)]
        min_cost: bool,
        /// Also write the constraint matrix to lp.txt.
        #[arg(long)]
        dump_lp: bool,
    },
    /// Deviation gain of a correlated profile.
    Epsilon {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        m0: Option<String>,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Only this player; by default player 0 for symmetric profiles and every player otherwise.
        #[arg(long)]
        player: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Mc,
    Auto,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    #[command(flatten)]
    pub flow: FlowArgs,
    #[arg(long = "Ns", value_name = "N,...", value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
}

#[derive(Subcommand, Debug)]
pub enum LimitsCommand {
    /// Deviation gain of the lifted profile for each N.
    EpsilonCurve(CurveArgs),
    /// Distance between the simulated N-player correlated flow and the limit.
    Converge(CurveArgs),
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CAPACITY: u8 = 3;
const EXIT_ERROR: u8 = 4;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    let mut out = match Outputs::new(cli.common.out.clone(), argv, cli.common.threads) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    out.set_seed(cli.common.seed);
    let code = match commands::run(&cli, &mut out) {
        Ok(Status::Pass) => 0,
        Ok(Status::Fail) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_capacity() {
                EXIT_CAPACITY
            } else {
                EXIT_ERROR
            }
        }
    };
    if let Err(e) = out.finish(code) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_ERROR);
    }
    ExitCode::from(code)
}
