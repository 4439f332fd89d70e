use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use crewpair::config::Config;
use crewpair::engine;
use crewpair::files::{read_schedule, write_airports, write_flights};
use crewpair::ifs::{self, IfsError, IfsMethod};
use crewpair::netgen::{generate, NetSpec};
use crewpair::oracle::{self, OracleError};
use crewpair::pairgen::{self, PairgenError};
use crewpair::report::{features, read_pairings, write_pairings};
use crewpair::rules::Instance;

#[derive(Parser)]
#[command(name = "crewpair", version, about = "Crew pairing optimization")]
struct Cli {
    /// Flight schedule CSV.
    #[arg(long, global = true, default_value = "schedule.csv")]
    schedule: PathBuf,
    /// Airport CSV.
    #[arg(long, global = true, default_value = "airports.csv")]
    airports: PathBuf,
    /// Configuration file; defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Ipdch,
    Artificial,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic schedule and airport file.
    Gen {
        #[arg(long, default_value_t = 60)]
        flights: usize,
    },
    /// Count legal duties and pairings per crew base.
    Enumerate,
    /// Build an initial feasible solution.
    Ifs {
        #[arg(long, default_value = "ifs.pairings")]
        out: PathBuf,
        #[arg(long, value_enum)]
        init: Option<Init>,
    },
    /// Run the full optimizer.
    Solve {
        /// Directory for solution.pairings, trace.csv and report.txt.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, value_enum)]
        init: Option<Init>,
        /// Start from a pairing file instead of building an initial solution.
        #[arg(long)]
        initial: Option<PathBuf>,
    },
    /// Validate a pairing file and print its features.
    Report {
        solution: PathBuf,
    },
    /// Exact optimum by full enumeration, for small schedules only.
    Oracle {
        /// Also write the optimal pairings here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Infeasible(String),
}

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::input(e)
    }
}

impl From<PairgenError> for Failure {
    fn from(e: PairgenError) -> Self {
        match e {
            PairgenError::UncoverableFlights(_) => Failure::Infeasible(e.to_string()),
            e => Failure::input(e),
        }
    }
}

impl From<IfsError> for Failure {
    fn from(e: IfsError) -> Self {
        match e {
            IfsError::Pairgen(e) => e.into(),
            e @ IfsError::NoProgress { .. } => Failure::Infeasible(e.to_string()),
            e => Failure::input(e),
        }
    }
}

fn spec_for(flights: usize, seed: u64) -> NetSpec {
    if flights < 60 {
        NetSpec::tiny(flights, seed)
    } else if flights < 600 {
        NetSpec {
            n_flights: flights,
            n_tails: (flights / 12).max(5),
            ..NetSpec::small(seed)
        }
    } else {
        NetSpec {
            n_flights: flights,
            n_tails: flights / 15,
            ..NetSpec::medium(seed)
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            Config::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?
        }
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn load_instance(cli: &Cli, cfg: &Config) -> Result<Instance, Failure> {
    let schedule = read_schedule(open(&cli.schedule)?, open(&cli.airports)?).map_err(Failure::input)?;
    info!("{} flights, {} airports", schedule.len(), schedule.airports().len());
    Ok(Instance::new(schedule, cfg.rules.clone(), cfg.cost.clone()))
}

fn apply_init(cfg: &mut Config, init: Option<Init>) {
    match init {
        Some(Init::Ipdch) => cfg.ifs.method = IfsMethod::Ipdch,
        Some(Init::Artificial) => cfg.ifs.method = IfsMethod::Artificial,
        None => {}
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = load_config(cli)?;
    let mut out = io::stdout().lock();
    match &cli.cmd {
        Cmd::Gen { flights } => {
            let (fl, ap) = generate(&spec_for(*flights, cfg.engine.seed)).map_err(Failure::input)?;
            write_flights(create(&cli.schedule)?, &fl)?;
            write_airports(create(&cli.airports)?, &ap)?;
            writeln!(out, "wrote {} flights to {}", fl.len(), cli.schedule.display())?;
        }
        Cmd::Enumerate => {
            let inst = load_instance(cli, &cfg)?;
            let net = pairgen::build_duty_network(&inst)?;
            writeln!(out, "{:<6} {:>10} {:>12} {:>12}", "base", "duties", "overnights", "pairings")?;
            for c in pairgen::base_counts(&net, &inst) {
                writeln!(out, "{:<6} {:>10} {:>12} {:>12}", c.base, c.duties, c.overnight_edges, c.pairings)?;
            }
            let missing = pairgen::uncoverable_flights(&net, &inst);
            if !missing.is_empty() {
                return Err(PairgenError::UncoverableFlights(missing).into());
            }
        }
        Cmd::Ifs { out: path, init } => {
            apply_init(&mut cfg, *init);
            let inst = load_instance(cli, &cfg)?;
            let net = pairgen::build_duty_network(&inst)?;
            let sol = ifs::initial_solution(&net, &inst, &cfg.ifs)?;
            write_pairings(create(path)?, &sol)?;
            let rep = features(&sol, &inst).map_err(Failure::input)?;
            writeln!(out, "{rep}")?;
        }
        Cmd::Solve { out_dir, init, initial } => {
            apply_init(&mut cfg, *init);
            let inst = load_instance(cli, &cfg)?;
            let net = pairgen::build_duty_network(&inst)?;
            let start = match initial {
                Some(p) => read_pairings(open(p)?, &inst).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
                None => ifs::initial_solution(&net, &inst, &cfg.ifs)?,
            };
            let res = engine::run(&net, &inst, start, &cfg.engine).map_err(|e| match e {
                engine::EngineError::Uncovered(_) => Failure::Infeasible(e.to_string()),
                e => Failure::input(e),
            })?;
            fs::create_dir_all(out_dir)?;
            let mut w = create(&out_dir.join("solution.pairings"))?;
            write_pairings(&mut w, &res.solution)?;
            w.flush()?;
            let mut w = create(&out_dir.join("trace.csv"))?;
            res.trace.write_csv(&mut w)?;
            w.flush()?;
            let rep = features(&res.solution, &inst).map_err(Failure::input)?;
            fs::write(out_dir.join("report.txt"), rep.to_string())?;
            writeln!(out, "{}", res.trace.table())?;
            writeln!(out, "{rep}")?;
            writeln!(out, "objective {:.6} ({:?})", res.objective, res.stop)?;
        }
        Cmd::Report { solution } => {
            let inst = load_instance(cli, &cfg)?;
            let sol = read_pairings(open(solution)?, &inst)
                .map_err(|e| Failure::Input(format!("{}: {e}", solution.display())))?;
            let rep = features(&sol, &inst).map_err(|e| Failure::Infeasible(e.to_string()))?;
            writeln!(out, "{rep}")?;
            writeln!(out, "objective {:.6}", rep.objective())?;
        }
        Cmd::Oracle { out: path } => {
            let inst = load_instance(cli, &cfg)?;
            let sol = oracle::solve_exact(&inst).map_err(|e| match e {
                OracleError::Uncoverable(_) => Failure::Infeasible(e.to_string()),
                e => Failure::input(e),
            })?;
            writeln!(out, "candidates {}", sol.n_candidates)?;
            for p in &sol.pairings {
                writeln!(out, "  {p}")?;
            }
            writeln!(out, "optimum {:.6}", sol.objective)?;
            if let Some(path) = path {
                write_pairings(create(path)?, &sol.pairings)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(3)
        }
    }
}
