use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::Utc;
use ratqual_core::assessment::{assess, AssessmentResult};
use ratqual_core::error::{Error, ErrorKind};
use ratqual_core::monitoring::{
    export_csv, format_timestamp, record_snapshot, trend_report, Snapshot, TrendReport,
};
use ratqual_core::planner::{explain_scenario, load_cost_model, plan, ActionCostModel, Scenario};
use ratqual_core::scope::{load_scope, scope_template, write_atomically, CollaborationScope};
use ratqual_core::taxonomy::{catalog, CharacteristicId};
use ratqual_service::Repository;
use serde_json::json;

use crate::{Cli, Command, Format, Selection};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

pub const DEFAULT_HOME: &str = ".ratqual";

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: Error },
    #[error("{0} already exists (use --force to overwrite)")]
    Exists(PathBuf),
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) | Failure::File { source: e, .. } => match e.kind() {
                ErrorKind::Io => EXIT_IO,
                ErrorKind::Validation | ErrorKind::Infeasible | ErrorKind::Ordering => EXIT_FAILURE,
            },
            Failure::Exists(_) | Failure::Serve(_) => EXIT_IO,
        }
    }

    fn report(&self) {
        let violations = match self {
            Failure::Core(Error::Scope(r)) | Failure::File { source: Error::Scope(r), .. } => r,
            other => {
                eprintln!("error: {other}");
                return;
            }
        };
        if let Failure::File { path, .. } = self {
            eprintln!("error: {} is not a valid scope:", path.display());
        } else {
            eprintln!("error: invalid scope:");
        }
        for v in &violations.violations {
            eprintln!("  {}: {}", v.path, v.message);
        }
    }
}

type Outcome = Result<(), Failure>;

pub fn run(cli: Cli) -> ExitCode {
    let home = cli.home.unwrap_or_else(|| PathBuf::from(DEFAULT_HOME));
    match dispatch(&home, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            failure.report();
            ExitCode::from(failure.exit_code())
        }
    }
}

fn dispatch(home: &Path, command: Command) -> Outcome {
    match command {
        Command::InitScope {
            out,
            id,
            name,
            characteristic,
            force,
        } => init_scope(out, &id, &name, characteristic, force),
        Command::Validate { scope } => validate(&scope),
        Command::Assess {
            selection,
            record,
            label,
            taken_at,
            format,
        } => {
            let (scope, c) = open(&selection)?;
            let input = scope.assessment_input(c)?;
            let result = assess(&input)?;
            let snapshot = if record {
                let store = Repository::new(home).snapshots(&scope.scope_id);
                let snap = record_snapshot(&store, &scope.scope_id, c, &input, label, taken_at)
                    .map_err(|e| with_path(store.path(), e))?;
                Some(snap)
            } else {
                None
            };
            print_assessment(&scope, c, &result, snapshot.as_ref(), format);
            Ok(())
        }
        Command::Plan {
            selection,
            target,
            costs,
            format,
        } => {
            let (scope, c) = open(&selection)?;
            let input = scope.assessment_input(c)?;
            let costs = match costs {
                Some(path) => load_cost_model(&path).map_err(|e| with_path(&path, e))?,
                None => ActionCostModel::default(),
            };
            let scenario = plan(&input, target, &costs)?;
            print_scenario(&scope, &scenario, format);
            Ok(())
        }
        Command::Report {
            selection,
            from,
            to,
            csv,
            format,
        } => {
            let (scope, c) = open(&selection)?;
            let store = Repository::new(home).snapshots(&scope.scope_id);
            let report = trend_report(&store, &scope.scope_id, c, from, to)
                .map_err(|e| with_path(store.path(), e))?;
            if csv {
                print!("{}", export_csv(&report));
            } else {
                print_report(&report, format);
            }
            Ok(())
        }
        Command::Catalog { format } => {
            print_catalog(format);
            Ok(())
        }
        Command::Serve { port, bind } => serve(home, SocketAddr::new(bind, port)),
    }
}

fn with_path(path: &Path, source: Error) -> Failure {
    Failure::File {
        path: path.to_path_buf(),
        source,
    }
}

fn open(selection: &Selection) -> Result<(CollaborationScope, CharacteristicId), Failure> {
    let scope = load_scope(&selection.scope).map_err(|e| with_path(&selection.scope, e))?;
    Ok((scope, selection.characteristic))
}

fn init_scope(
    out: Option<PathBuf>,
    id: &str,
    name: &str,
    characteristic: CharacteristicId,
    force: bool,
) -> Outcome {
    let text = scope_template(id, name, characteristic, Utc::now());
    match out {
        None => print!("{text}"),
        Some(path) => {
            if path.exists() && !force {
                return Err(Failure::Exists(path));
            }
            write_atomically(&path, text.as_bytes()).map_err(|e| with_path(&path, e))?;
            eprintln!("wrote scope template to {}", path.display());
        }
    }
    Ok(())
}

fn validate(path: &Path) -> Outcome {
    let scope = load_scope(path).map_err(|e| with_path(path, e))?;
    println!(
        "{}: scope `{}` is valid ({} organizations, {} assessments)",
        path.display(),
        scope.scope_id,
        scope.organizations.len(),
        scope.assessments.len()
    );
    Ok(())
}

fn machine(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
}

fn print_assessment(
    scope: &CollaborationScope,
    c: CharacteristicId,
    result: &AssessmentResult,
    snapshot: Option<&Snapshot>,
    format: Format,
) {
    match format {
        Format::Machine => machine(json!({
            "scope_id": scope.scope_id,
            "characteristic": c,
            "result": result,
            "snapshot": snapshot,
        })),
        Format::Human => {
            println!("{} / {}", scope.scope_id, c.display_name());
            println!("  QP       {:.4}", result.qp);
            println!("  DC       {:.4}", result.dc);
            println!("  PO       {:.4}", result.po);
            println!("  RatQual  {:.4}", result.ratqual);
            if let Some(s) = snapshot {
                println!("recorded snapshot at {}", format_timestamp(&s.taken_at));
            }
        }
    }
}

fn print_scenario(scope: &CollaborationScope, scenario: &Scenario, format: Format) {
    let explanation = explain_scenario(scenario);
    match format {
        Format::Machine => machine(json!({
            "scope_id": scope.scope_id,
            "scenario": scenario,
            "explanation": explanation,
        })),
        Format::Human if scenario.is_empty() => println!(
            "already satisfied: current RatQual {:.4} meets target {:.4}; no actions needed",
            scenario.baseline.ratqual, scenario.target
        ),
        Format::Human => {
            println!(
                "{} / {}: RatQual {:.4} -> {:.4} (target {:.4}), total cost {}",
                scope.scope_id,
                scenario.characteristic.display_name(),
                scenario.baseline.ratqual,
                scenario.projected.ratqual,
                scenario.target,
                scenario.total_cost
            );
            for (i, line) in explanation.iter().enumerate() {
                println!("  {}. {line}", i + 1);
            }
        }
    }
}

fn print_report(report: &TrendReport, format: Format) {
    if format == Format::Machine {
        machine(serde_json::to_value(report).expect("reports serialize"));
        return;
    }
    println!(
        "{} / {}: {} snapshot(s)",
        report.scope_id,
        report.characteristic.display_name(),
        report.series.len()
    );
    if report.series.is_empty() {
        return;
    }
    println!("  {:<30} {:>8} {:>8} {:>8} {:>8}", "taken_at", "QP", "DC", "PO", "RatQual");
    for p in &report.series {
        println!(
            "  {:<30} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            format_timestamp(&p.taken_at),
            p.qp,
            p.dc,
            p.po,
            p.ratqual
        );
    }
    let d = &report.deltas;
    println!(
        "  {:<30} {:>+8.4} {:>+8.4} {:>+8.4} {:>+8.4}",
        "change", d.qp, d.dc, d.po, d.ratqual
    );
    if report.flags.is_empty() {
        println!("no regressions");
    }
    for f in &report.flags {
        println!(
            "regression: {} fell from {:.4} to {:.4} between {} and {}",
            f.aspect,
            f.before,
            f.after,
            format_timestamp(&f.from),
            format_timestamp(&f.to)
        );
    }
}

fn print_catalog(format: Format) {
    let cat = catalog();
    if format == Format::Machine {
        machine(serde_json::to_value(&cat).expect("catalog serializes"));
        return;
    }
    for category in &cat.categories {
        println!("{:?}: {}", category.name, category.description);
        for entry in cat.characteristics.iter().filter(|e| e.category == category.name) {
            let models: Vec<&str> = entry.maturity_models.iter().map(|m| m.short_name).collect();
            println!(
                "  {:<24} {:<28} {}",
                entry.id.to_string(),
                entry.display_name,
                models.join(", ")
            );
        }
    }
}

fn serve(home: &Path, addr: SocketAddr) -> Outcome {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::Serve)?;
    runtime.block_on(async {
        let listener = ratqual_service::bind(addr).await.map_err(Failure::Serve)?;
        let local = listener.local_addr().map_err(Failure::Serve)?;
        eprintln!(
            "serving {} on http://{local}{}",
            home.display(),
            ratqual_service::API_PREFIX
        );
        ratqual_service::serve(listener, home).await.map_err(Failure::Serve)
    })?;
    Ok(())
}
