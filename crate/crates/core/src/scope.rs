//! Collaboration scope documents.
//!
//! A scope names the organizations taking part in a collaboration, their
//! sub-processes, the information systems supporting those processes and the
//! application services linking them. The same document carries the raw
//! assessment inputs for each characteristic under study.
//!
//! Documents are TOML. Serialization is canonical: fields are written in
//! declaration order, collections in stored order and assessments sorted by
//! characteristic, so equal scopes produce identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::assessment::{
    AggregationWeights, AssessmentInput, CellMode, Cells, CompatibilityMatrix, MaturityLevel,
    OperationalRates, OrgMaturity,
};
use crate::error::{Error, Result, ValidationReport};
use crate::taxonomy::CharacteristicId;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Organization {
    pub org_id: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubProcess {
    pub process_id: String,
    pub owner_org: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoSystem {
    pub system_id: String,
    pub owner_org: String,
    pub name: String,
    #[serde(default)]
    pub supports: Vec<String>,
}

/// Directed link between two sub-processes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppService {
    pub service_id: String,
    pub from: String,
    pub to: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaturityEntry {
    pub org_id: String,
    pub qmml: i64,
}

/// Rates as written by the assessor. Absent values stay absent; they are never imputed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RatesRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qos: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsRecord {
    pub qp: f64,
    pub dc: f64,
    pub po: f64,
}

/// Assessment data for one characteristic, possibly incomplete while being edited.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    #[serde(default)]
    pub org_maturities: Vec<MaturityEntry>,
    #[serde(default)]
    pub matrix_mode: CellMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Cells>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsRecord>,
}

impl AssessmentRecord {
    pub fn from_input(input: &AssessmentInput) -> Self {
        let w = input.weights;
        AssessmentRecord {
            org_maturities: input
                .org_maturities
                .iter()
                .map(|m| MaturityEntry {
                    org_id: m.org_id.clone(),
                    qmml: i64::from(m.qmml.get()),
                })
                .collect(),
            matrix_mode: input.matrix.mode(),
            matrix: Some(*input.matrix.cells()),
            rates: Some(RatesRecord {
                ds: Some(input.rates.ds()),
                qos: Some(input.rates.qos()),
                ts: Some(input.rates.ts()),
            }),
            weights: (w != AggregationWeights::EQUAL).then_some(WeightsRecord {
                qp: w.qp(),
                dc: w.dc(),
                po: w.po(),
            }),
        }
    }

    /// Converts to a complete input. Field paths in errors are relative to the record.
    pub fn to_input(&self, characteristic: CharacteristicId) -> Result<AssessmentInput> {
        if self.org_maturities.is_empty() {
            return Err(Error::missing("org_maturities"));
        }
        let org_maturities = self
            .org_maturities
            .iter()
            .enumerate()
            .map(|(i, e)| {
                Ok(OrgMaturity {
                    org_id: e.org_id.clone(),
                    characteristic,
                    qmml: MaturityLevel::new(e.qmml)
                        .map_err(|err| err.within(&format!("org_maturities[{i}]")))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cells = self.matrix.ok_or_else(|| Error::missing("matrix"))?;
        let matrix = CompatibilityMatrix::new(cells, self.matrix_mode)?;
        let rates = self.rates.as_ref().ok_or_else(|| Error::missing("rates"))?;
        let rates = OperationalRates::new(
            rates.ds.ok_or_else(|| Error::missing("rates.ds"))?,
            rates.qos.ok_or_else(|| Error::missing("rates.qos"))?,
            rates.ts.ok_or_else(|| Error::missing("rates.ts"))?,
        )?;
        let weights = match self.weights {
            Some(w) => AggregationWeights::new(w.qp, w.dc, w.po)?,
            None => AggregationWeights::default(),
        };
        let input = AssessmentInput {
            characteristic,
            org_maturities,
            matrix,
            rates,
            weights,
        };
        input.validate()?;
        Ok(input)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollaborationScope {
    pub schema_version: u32,
    pub scope_id: String,
    pub name: String,
    /// Bumped on every accepted update; used for compare-and-swap.
    #[serde(default = "first_revision")]
    pub revision: u64,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub organizations: Vec<Organization>,
    #[serde(default)]
    pub sub_processes: Vec<SubProcess>,
    #[serde(default)]
    pub info_systems: Vec<InfoSystem>,
    #[serde(default)]
    pub app_services: Vec<AppService>,
    #[serde(default)]
    pub assessments: BTreeMap<CharacteristicId, AssessmentRecord>,
}

fn first_revision() -> u64 {
    1
}

impl CollaborationScope {
    pub fn new(scope_id: impl Into<String>, name: impl Into<String>, created_at: DateTime<Utc>) -> Self {
        CollaborationScope {
            schema_version: SCHEMA_VERSION,
            scope_id: scope_id.into(),
            name: name.into(),
            revision: first_revision(),
            created_at,
            organizations: Vec::new(),
            sub_processes: Vec::new(),
            info_systems: Vec::new(),
            app_services: Vec::new(),
            assessments: BTreeMap::new(),
        }
    }

    /// Builds the complete assessment input for `characteristic`.
    ///
    /// Every organization of the scope must have exactly one maturity level, and
    /// no entry may name an organization outside the scope.
    pub fn assessment_input(&self, characteristic: CharacteristicId) -> Result<AssessmentInput> {
        let prefix = format!("assessments.{characteristic}");
        let record = self
            .assessments
            .get(&characteristic)
            .ok_or_else(|| Error::missing(prefix.clone()))?;
        let input = record
            .to_input(characteristic)
            .map_err(|e| e.within(&prefix))?;
        check_coverage(self, &input.org_maturities).map_err(|e| e.within(&prefix))?;
        Ok(input)
    }

    pub fn set_assessment(&mut self, input: &AssessmentInput) {
        self.assessments
            .insert(input.characteristic, AssessmentRecord::from_input(input));
    }
}

/// Checks that maturity entries cover exactly the scope's organizations.
pub fn check_coverage(scope: &CollaborationScope, entries: &[OrgMaturity]) -> Result<()> {
    for (i, m) in entries.iter().enumerate() {
        if !scope.organizations.iter().any(|o| o.org_id == m.org_id) {
            return Err(Error::invalid(
                format!("org_maturities[{i}].org_id"),
                format!("organization `{}` is not part of the scope", m.org_id),
            ));
        }
    }
    for org in &scope.organizations {
        if !entries.iter().any(|m| m.org_id == org.org_id) {
            return Err(Error::missing(format!("org_maturities entry for `{}`", org.org_id)));
        }
    }
    Ok(())
}

/// Scope ids double as file names in a data directory.
pub fn is_file_safe_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

pub fn validate_scope(scope: &CollaborationScope) -> ValidationReport {
    let mut report = ValidationReport::default();

    if scope.schema_version != SCHEMA_VERSION {
        report.push(
            "schema_version",
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", scope.schema_version),
        );
    }
    if scope.scope_id.trim().is_empty() {
        report.push("scope_id", "identifier must not be empty");
    } else if !is_file_safe_id(&scope.scope_id) {
        report.push(
            "scope_id",
            "identifier may only contain ASCII letters, digits, '.', '_' and '-', and must not start with '.'",
        );
    }
    if scope.organizations.len() < 2 {
        report.push(
            "organizations",
            format!("fewer than two organizations ({} given)", scope.organizations.len()),
        );
    }

    let orgs = unique_ids(
        &mut report,
        "organizations",
        scope.organizations.iter().map(|o| o.org_id.as_str()),
    );
    let processes = unique_ids(
        &mut report,
        "sub_processes",
        scope.sub_processes.iter().map(|p| p.process_id.as_str()),
    );
    unique_ids(
        &mut report,
        "info_systems",
        scope.info_systems.iter().map(|s| s.system_id.as_str()),
    );
    unique_ids(
        &mut report,
        "app_services",
        scope.app_services.iter().map(|s| s.service_id.as_str()),
    );

    for (i, p) in scope.sub_processes.iter().enumerate() {
        if !orgs.contains(p.owner_org.as_str()) {
            report.push(
                format!("sub_processes[{i}].owner_org"),
                format!("dangling reference to organization `{}`", p.owner_org),
            );
        }
    }
    for (i, s) in scope.info_systems.iter().enumerate() {
        if !orgs.contains(s.owner_org.as_str()) {
            report.push(
                format!("info_systems[{i}].owner_org"),
                format!("dangling reference to organization `{}`", s.owner_org),
            );
        }
        let mut seen = BTreeSet::new();
        for (j, p) in s.supports.iter().enumerate() {
            if !processes.contains(p.as_str()) {
                report.push(
                    format!("info_systems[{i}].supports[{j}]"),
                    format!("dangling reference to sub-process `{p}`"),
                );
            } else if !seen.insert(p.as_str()) {
                report.push(
                    format!("info_systems[{i}].supports[{j}]"),
                    format!("sub-process `{p}` listed twice"),
                );
            }
        }
    }
    for (i, s) in scope.app_services.iter().enumerate() {
        for (field, p) in [("from", &s.from), ("to", &s.to)] {
            if !processes.contains(p.as_str()) {
                report.push(
                    format!("app_services[{i}].{field}"),
                    format!("dangling reference to sub-process `{p}`"),
                );
            }
        }
        if s.from == s.to {
            report.push(
                format!("app_services[{i}]"),
                format!("service connects sub-process `{}` to itself", s.from),
            );
        }
    }

    for (c, record) in &scope.assessments {
        validate_record(&mut report, &format!("assessments.{c}"), record, &orgs);
    }

    report
}

fn unique_ids<'a>(
    report: &mut ValidationReport,
    collection: &str,
    ids: impl Iterator<Item = &'a str>,
) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    for (i, id) in ids.enumerate() {
        if id.trim().is_empty() {
            report.push(format!("{collection}[{i}]"), "identifier must not be empty");
        } else if !seen.insert(id) {
            report.push(format!("{collection}[{i}]"), format!("duplicate identifier `{id}`"));
        }
    }
    seen
}

fn validate_record(
    report: &mut ValidationReport,
    prefix: &str,
    record: &AssessmentRecord,
    orgs: &BTreeSet<&str>,
) {
    let mut seen = BTreeSet::new();
    for (i, e) in record.org_maturities.iter().enumerate() {
        let path = format!("{prefix}.org_maturities[{i}]");
        if !orgs.contains(e.org_id.as_str()) {
            report.push(
                format!("{path}.org_id"),
                format!("dangling reference to organization `{}`", e.org_id),
            );
        }
        if !seen.insert(e.org_id.as_str()) {
            report.push(
                format!("{path}.org_id"),
                format!("organization `{}` listed twice", e.org_id),
            );
        }
        if let Err(err) = MaturityLevel::new(e.qmml) {
            report.push(format!("{path}.qmml"), err.to_string());
        }
    }
    if let Some(cells) = record.matrix {
        if let Err(err) = CompatibilityMatrix::new(cells, record.matrix_mode) {
            report.push(format!("{prefix}.matrix"), err.to_string());
        }
    }
    if let Some(rates) = &record.rates {
        for (name, v) in [("ds", rates.ds), ("qos", rates.qos), ("ts", rates.ts)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    report.push(format!("{prefix}.rates.{name}"), format!("rate {v} is outside [0, 1]"));
                }
            }
        }
    }
    if let Some(w) = record.weights {
        if let Err(err) = AggregationWeights::new(w.qp, w.dc, w.po) {
            report.push(format!("{prefix}.weights"), err.to_string());
        }
    }
}

/// Parses a scope document without validating it.
pub fn parse_scope_unchecked(text: &str) -> Result<CollaborationScope> {
    toml::from_str(text).map_err(|err| {
        let (line, column) = err
            .span()
            .map(|span| line_col(text, span.start))
            .unwrap_or((0, 0));
        Error::Format {
            line,
            column,
            message: err.message().to_string(),
        }
    })
}

/// Parses and validates a scope document.
pub fn parse_scope(text: &str) -> Result<CollaborationScope> {
    let scope = parse_scope_unchecked(text)?;
    validate_scope(&scope).into_result()?;
    Ok(scope)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Canonical text form of a valid scope.
pub fn to_canonical_string(scope: &CollaborationScope) -> Result<String> {
    validate_scope(scope).into_result()?;
    toml::to_string(scope).map_err(|err| Error::invalid("scope", err.to_string()))
}

pub fn load_scope(path: &Path) -> Result<CollaborationScope> {
    parse_scope(&fs::read_to_string(path)?)
}

/// Writes the canonical form through a temporary file and an atomic rename.
pub fn save_scope(scope: &CollaborationScope, path: &Path) -> Result<()> {
    let text = to_canonical_string(scope)?;
    write_atomically(path, text.as_bytes())
}

pub fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Commented starting document: two organizations, one service between their
/// sub-processes, and an assessment section with a fully compatible matrix.
/// Rates are left commented out; assessing fails until they are filled in.
pub fn scope_template(
    scope_id: &str,
    name: &str,
    characteristic: CharacteristicId,
    created_at: DateTime<Utc>,
) -> String {
    let created = created_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    format!(
        r#"# Collaboration scope document (schema version {SCHEMA_VERSION}).
#
# Identifiers are free-form strings chosen by the assessor. Every reference
# (owner_org, supports, from/to, org_id) must name an element declared here.

schema_version = {SCHEMA_VERSION}
scope_id = "{scope_id}"
name = "{name}"
revision = 1
created_at = "{created}"

# Organizations involved in the cooperation (at least two).
[[organizations]]
org_id = "org-a"
name = "Organization A"

[[organizations]]
org_id = "org-b"
name = "Organization B"

# Sub-processes run within each organization.
[[sub_processes]]
process_id = "proc-a"
owner_org = "org-a"
name = "Sub-process of A"

[[sub_processes]]
process_id = "proc-b"
owner_org = "org-b"
name = "Sub-process of B"

# Information systems supporting the sub-processes.
[[info_systems]]
system_id = "sys-a"
owner_org = "org-a"
name = "System of A"
supports = ["proc-a"]

[[info_systems]]
system_id = "sys-b"
owner_org = "org-b"
name = "System of B"
supports = ["proc-b"]

# Application services linking sub-processes.
[[app_services]]
service_id = "svc-a-b"
from = "proc-a"
to = "proc-b"
name = "Exchange from A to B"

# Assessment inputs for {display}.
[assessments.{token}]
# Maturity level (1-5) of every organization for this characteristic.
org_maturities = [
    {{ org_id = "org-a", qmml = 1 }},
    {{ org_id = "org-b", qmml = 1 }},
]
# "binary" (0 or 1 per cell) or "fractional" (any value in [0, 1]).
matrix_mode = "binary"
# Rows: process, service, data, infrastructure.
# Columns: syntactic, semantic | responsibilities, organization | platform, communication.
# 0 = compatible, 1 = incompatible.
matrix = [
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0],
]
# Optional weights of QP, DC and PO; equal weights when omitted.
# weights = {{ qp = 1.0, dc = 1.0, po = 1.0 }}

# Operational rates in [0, 1]: server availability, network quality of
# service and end-user satisfaction. All three are required to assess.
# [assessments.{token}.rates]
# ds = 0.95
# qos = 0.95
# ts = 0.80
"#,
        display = characteristic.display_name(),
        token = characteristic.token(),
    )
}
