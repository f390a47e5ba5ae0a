mod commands;

use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ratqual_core::taxonomy::CharacteristicId;

#[derive(Debug, Parser)]
#[command(name = "ratqual", version, about = "Assess, plan and monitor quality ratios of collaborative information systems")]
pub struct Cli {
    /// Data directory for stored scopes and snapshot histories.
    #[arg(long, global = true, env = "RATQUAL_HOME", value_name = "DIR")]
    pub home: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Rounded, aligned text.
    #[default]
    Human,
    /// JSON at full precision.
    Machine,
}

#[derive(Debug, Args)]
pub struct Selection {
    /// Scope document to read.
    #[arg(long, value_name = "FILE")]
    pub scope: PathBuf,

    #[arg(long, short = 'c', value_name = "ID", value_parser = parse_characteristic)]
    pub characteristic: CharacteristicId,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a commented scope template.
    InitScope {
        /// Destination file; the template goes to stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, default_value = "my-scope")]
        id: String,
        #[arg(long, default_value = "New collaboration scope")]
        name: String,
        #[arg(long, short = 'c', default_value = "Interoperability", value_parser = parse_characteristic)]
        characteristic: CharacteristicId,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Check a scope document and report every violation.
    Validate {
        #[arg(long, value_name = "FILE")]
        scope: PathBuf,
    },
    /// Compute QP, DC, PO and the aggregated ratio for one characteristic.
    Assess {
        #[command(flatten)]
        selection: Selection,
        /// Append the result to the scope's snapshot history.
        #[arg(long)]
        record: bool,
        /// Snapshot label, e.g. "as-is" or "to-be".
        #[arg(long, requires = "record")]
        label: Option<String>,
        /// Snapshot timestamp (RFC 3339); defaults to now.
        #[arg(long, requires = "record", value_name = "TIME")]
        taken_at: Option<DateTime<Utc>>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Propose the cheapest set of improvements reaching a target ratio.
    Plan {
        #[command(flatten)]
        selection: Selection,
        /// Ratio the scenario must reach, in [0, 1].
        #[arg(long, value_name = "RATIO")]
        target: f64,
        /// Cost model document (TOML); defaults apply when omitted.
        #[arg(long, value_name = "FILE")]
        costs: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Trend report over the recorded snapshots of one characteristic.
    Report {
        #[command(flatten)]
        selection: Selection,
        #[arg(long, value_name = "TIME")]
        from: Option<DateTime<Utc>>,
        #[arg(long, value_name = "TIME")]
        to: Option<DateTime<Utc>>,
        /// Print CSV instead of a table.
        #[arg(long, conflicts_with = "format")]
        csv: bool,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// List quality characteristics, their categories and maturity models.
    Catalog {
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run the HTTP API until interrupted.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
    },
}

fn parse_characteristic(s: &str) -> Result<CharacteristicId, String> {
    s.parse().map_err(|e: ratqual_core::error::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_USAGE } else { 0 });
        }
    };
    commands::run(cli)
}
