use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use medr::dataset::{bids_csv, calendar_row, generate_instance, load_bids, GenerationParams};
use medr::harness::{
    bes_comparison, ratio_csv, sweep, utility_report, write_bes_csv, write_utility_csv, SweepAxis,
    DEFAULT_ALPHA,
};
use medr::service::{AuctionService, ServiceOptions};
use medr::{
    format_rational, parse_rational, run_mechanism, Allocator, AllocatorTag, AuctionConfig, Error,
    Instance, Rational,
};

#[derive(Parser)]
#[command(
    name = "medr",
    version,
    about = "Reverse auctions for emergency demand response"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear one auction from a bid file.
    Solve {
        #[arg(long)]
        bids: PathBuf,
        /// Required reduction W in MW.
        #[arg(long)]
        target: String,
        /// BES unit cost in $/MWh.
        #[arg(long)]
        alpha: String,
        /// Facility PUE.
        #[arg(long)]
        gamma: String,
        #[arg(long, default_value = "0.5")]
        epsilon: String,
        #[arg(long, value_enum, default_value_t = Algorithm::Fptas)]
        algorithm: Algorithm,
        /// Also compute critical-value payments.
        #[arg(long)]
        payments: bool,
    },
    /// Approximation ratio over one parameter grid for every published hour.
    Sweep {
        #[arg(value_enum)]
        axis: Axis,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Winner utilities or the BES-only comparison.
    Report {
        #[arg(value_enum)]
        kind: ReportKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded bid file for one published hour.
    Gen {
        #[arg(long)]
        hour: u32,
        #[arg(long)]
        seed: u64,
        /// Draw each tenant's reduction ratio instead of using the published ones.
        #[arg(long)]
        random_ratios: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the auction HTTP service.
    Serve {
        #[arg(long, env = "MEDR_LISTEN", default_value = "127.0.0.1:8080")]
        listen: String,
        /// Directory for auction logs; in-memory when omitted.
        #[arg(long, env = "MEDR_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        max_bids: usize,
        /// Let a repeated bid replace the tenant's earlier one.
        #[arg(long)]
        allow_replace: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Dopt,
    Fptas,
    Bes,
}

impl From<Algorithm> for AllocatorTag {
    fn from(a: Algorithm) -> Self {
        match a {
            Algorithm::Dopt => AllocatorTag::Dopt,
            Algorithm::Fptas => AllocatorTag::Fptas,
            Algorithm::Bes => AllocatorTag::Bes,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Alpha,
    Gamma,
    Epsilon,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Utility,
    Bes,
}

enum Failure {
    Validation(String),
    Parse(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Parse(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Parse(m) | Failure::Other(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Validation(_) | Error::UnknownTenant(_) | Error::TooManyBids { .. } => {
                Failure::Validation(err.to_string())
            }
            Error::Parse { .. } | Error::Json(_) => Failure::Parse(err.to_string()),
            _ => Failure::Other(err.to_string()),
        }
    }
}

fn number(flag: &str, text: &str) -> Result<Rational, Failure> {
    parse_rational(text).map_err(|e| Failure::Parse(format!("--{flag}: {e}")))
}

fn emit(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
        }
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Other(e.to_string())),
    }
}

fn solve(
    bids: &PathBuf,
    target: &str,
    alpha: &str,
    gamma: &str,
    epsilon: &str,
    algorithm: AllocatorTag,
    payments: bool,
) -> Result<(), Failure> {
    let target = target
        .trim()
        .parse::<i64>()
        .map_err(|e| Failure::Parse(format!("--target: {e}")))?;
    let config = AuctionConfig::new(
        target,
        number("alpha", alpha)?,
        number("gamma", gamma)?,
        number("epsilon", epsilon)?,
    );
    let instance = Instance::checked(config, load_bids(bids)?)?;
    let mut text = if payments {
        run_mechanism(&instance, &algorithm)?.to_json()
    } else {
        let allocation = algorithm.allocate(&instance)?;
        json!({
            "allocator": algorithm,
            "winners": allocation.winners,
            "bes_usage_mwh": format_rational(&allocation.bes_usage),
            "social_cost_usd": format_rational(&allocation.social_cost),
        })
        .to_string()
    };
    text.push('\n');
    emit(None, text.as_bytes())
}

fn serve(
    listen: &str,
    data_dir: Option<PathBuf>,
    max_bids: usize,
    allow_replace: bool,
) -> Result<(), Failure> {
    let service = AuctionService::open(ServiceOptions {
        data_dir,
        max_bids,
        allow_bid_replacement: allow_replace,
    })
    .map_err(|e| Failure::Other(e.to_string()))?;
    let app = medr_cli::router(Arc::new(service));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Other(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(listen)
            .await
            .map_err(|e| Failure::Other(format!("{listen}: {e}")))?;
        eprintln!(
            "listening on {}",
            listener
                .local_addr()
                .map_err(|e| Failure::Other(e.to_string()))?
        );
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure::Other(e.to_string()))
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve {
            bids,
            target,
            alpha,
            gamma,
            epsilon,
            algorithm,
            payments,
        } => solve(
            &bids,
            &target,
            &alpha,
            &gamma,
            &epsilon,
            algorithm.into(),
            payments,
        ),
        Command::Sweep { axis, out } => {
            let axis = match axis {
                Axis::Alpha => SweepAxis::Alpha,
                Axis::Gamma => SweepAxis::Gamma,
                Axis::Epsilon => SweepAxis::Epsilon,
            };
            emit(out.as_ref(), ratio_csv(&sweep(axis)?).as_bytes())
        }
        Command::Report { kind, out } => {
            let mut buf = Vec::new();
            match kind {
                ReportKind::Utility => {
                    let records = utility_report(
                        Rational::from_integer(DEFAULT_ALPHA),
                        Rational::new(8, 5),
                        Rational::new(1, 2),
                    )?;
                    write_utility_csv(&mut buf, &records)?;
                }
                ReportKind::Bes => write_bes_csv(&mut buf, &bes_comparison()?)?,
            }
            emit(out.as_ref(), &buf)
        }
        Command::Gen {
            hour,
            seed,
            random_ratios,
            out,
        } => {
            let row = calendar_row(hour)
                .ok_or_else(|| Failure::Validation(format!("no EDR event at hour {hour}")))?;
            let params = if random_ratios {
                GenerationParams::random_ratios(seed)
            } else {
                GenerationParams::published(seed)
            };
            emit(
                out.as_ref(),
                bids_csv(&generate_instance(&row, &params).bids).as_bytes(),
            )
        }
        Command::Serve {
            listen,
            data_dir,
            max_bids,
            allow_replace,
        } => serve(&listen, data_dir, max_bids, allow_replace),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("medr: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
