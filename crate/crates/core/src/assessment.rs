//! The quality-ratio computation.
//!
//! A characteristic is scored on three aspects, each in `[0, 1]`:
//!
//! * **QP**, quality potentiality (internal): the least mature organization's
//!   maturity level mapped onto `{0.2, 0.4, 0.6, 0.8, 1.0}`.
//! * **DC**, compatibility degree (external): one minus the share of
//!   incompatible cells in the 4 x 6 layer/barrier matrix.
//! * **PO**, operational performance (in use): geometric mean of server
//!   availability, network quality of service and end-user satisfaction.
//!
//! The ratio is the (optionally weighted) arithmetic mean of the three.
//! Everything here is pure.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::CharacteristicId;

/// Maturity level on the five-stage scale, `1..=5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct MaturityLevel(u8);

impl MaturityLevel {
    pub const MIN: MaturityLevel = MaturityLevel(1);
    pub const MAX: MaturityLevel = MaturityLevel(5);

    pub fn new(level: i64) -> Result<Self> {
        if (1..=5).contains(&level) {
            Ok(MaturityLevel(level as u8))
        } else {
            Err(Error::invalid(
                "qmml",
                format!("maturity level must be an integer in 1..=5, got {level}"),
            ))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Levels strictly above this one, ascending.
    pub fn above(self) -> impl Iterator<Item = MaturityLevel> {
        (self.0 + 1..=5).map(MaturityLevel)
    }
}

impl TryFrom<i64> for MaturityLevel {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        MaturityLevel::new(value)
    }
}

impl From<MaturityLevel> for u8 {
    fn from(level: MaturityLevel) -> u8 {
        level.0
    }
}

impl fmt::Display for MaturityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgMaturity {
    pub org_id: String,
    pub characteristic: CharacteristicId,
    pub qmml: MaturityLevel,
}

/// Collaboration layer, the row of the compatibility matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    Process,
    Service,
    Data,
    Infrastructure,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Process, Layer::Service, Layer::Data, Layer::Infrastructure];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Layer::Process => "process",
            Layer::Service => "service",
            Layer::Data => "data",
            Layer::Infrastructure => "infrastructure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BarrierGroup {
    Conceptual,
    Organizational,
    Technology,
}

/// Collaboration barrier, the column of the compatibility matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Barrier {
    Syntactic,
    Semantic,
    Responsibilities,
    Organization,
    Platform,
    Communication,
}

impl Barrier {
    pub const ALL: [Barrier; 6] = [
        Barrier::Syntactic,
        Barrier::Semantic,
        Barrier::Responsibilities,
        Barrier::Organization,
        Barrier::Platform,
        Barrier::Communication,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn group(self) -> BarrierGroup {
        match self {
            Barrier::Syntactic | Barrier::Semantic => BarrierGroup::Conceptual,
            Barrier::Responsibilities | Barrier::Organization => BarrierGroup::Organizational,
            Barrier::Platform | Barrier::Communication => BarrierGroup::Technology,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Barrier::Syntactic => "syntactic",
            Barrier::Semantic => "semantic",
            Barrier::Responsibilities => "responsibilities",
            Barrier::Organization => "organization",
            Barrier::Platform => "platform",
            Barrier::Communication => "communication",
        }
    }
}

/// Accepted values for matrix cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    /// Cells are 0 (compatible) or 1 (incompatible).
    #[default]
    Binary,
    /// Cells are graded anywhere in `[0, 1]`.
    Fractional,
}

pub const MATRIX_ROWS: usize = 4;
pub const MATRIX_COLS: usize = 6;
pub const MATRIX_CELLS: usize = MATRIX_ROWS * MATRIX_COLS;

pub type Cells = [[f64; MATRIX_COLS]; MATRIX_ROWS];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct CompatibilityMatrix {
    mode: CellMode,
    cells: Cells,
}

#[derive(Deserialize)]
struct RawMatrix {
    #[serde(default)]
    mode: CellMode,
    cells: Cells,
}

impl TryFrom<RawMatrix> for CompatibilityMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        CompatibilityMatrix::new(raw.cells, raw.mode)
    }
}

impl CompatibilityMatrix {
    pub fn new(cells: Cells, mode: CellMode) -> Result<Self> {
        for layer in Layer::ALL {
            for barrier in Barrier::ALL {
                check_cell(mode, layer, barrier, cells[layer.index()][barrier.index()])?;
            }
        }
        Ok(CompatibilityMatrix { mode, cells })
    }

    /// Fully compatible binary matrix.
    pub fn compatible() -> Self {
        CompatibilityMatrix {
            mode: CellMode::Binary,
            cells: [[0.0; MATRIX_COLS]; MATRIX_ROWS],
        }
    }

    pub fn mode(&self) -> CellMode {
        self.mode
    }

    pub fn cells(&self) -> &Cells {
        &self.cells
    }

    pub fn get(&self, layer: Layer, barrier: Barrier) -> f64 {
        self.cells[layer.index()][barrier.index()]
    }

    pub fn set(&mut self, layer: Layer, barrier: Barrier, value: f64) -> Result<()> {
        check_cell(self.mode, layer, barrier, value)?;
        self.cells[layer.index()][barrier.index()] = value;
        Ok(())
    }

    /// Cells with a non-zero value, in row-major order.
    pub fn incompatible_cells(&self) -> impl Iterator<Item = (Layer, Barrier, f64)> + '_ {
        Layer::ALL.into_iter().flat_map(move |layer| {
            Barrier::ALL.into_iter().filter_map(move |barrier| {
                let v = self.get(layer, barrier);
                (v > 0.0).then_some((layer, barrier, v))
            })
        })
    }
}

fn check_cell(mode: CellMode, layer: Layer, barrier: Barrier, value: f64) -> Result<()> {
    let field = || format!("matrix.{}.{}", layer.label(), barrier.label());
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(field(), format!("cell value {value} is outside [0, 1]")));
    }
    if mode == CellMode::Binary && value != 0.0 && value != 1.0 {
        return Err(Error::invalid(
            field(),
            format!("cell value {value} is not 0 or 1 (binary mode)"),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RateKind {
    #[serde(rename = "DS")]
    ServerAvailability,
    #[serde(rename = "QoS")]
    NetworkQuality,
    #[serde(rename = "TS")]
    UserSatisfaction,
}

impl RateKind {
    pub const ALL: [RateKind; 3] = [
        RateKind::ServerAvailability,
        RateKind::NetworkQuality,
        RateKind::UserSatisfaction,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            RateKind::ServerAvailability => "DS",
            RateKind::NetworkQuality => "QoS",
            RateKind::UserSatisfaction => "TS",
        }
    }

    fn field(self) -> &'static str {
        match self {
            RateKind::ServerAvailability => "ds",
            RateKind::NetworkQuality => "qos",
            RateKind::UserSatisfaction => "ts",
        }
    }
}

/// The in-use rates, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRates")]
pub struct OperationalRates {
    ds: f64,
    qos: f64,
    ts: f64,
}

#[derive(Deserialize)]
struct RawRates {
    ds: f64,
    qos: f64,
    ts: f64,
}

impl TryFrom<RawRates> for OperationalRates {
    type Error = Error;

    fn try_from(raw: RawRates) -> Result<Self> {
        OperationalRates::new(raw.ds, raw.qos, raw.ts)
    }
}

impl OperationalRates {
    pub fn new(ds: f64, qos: f64, ts: f64) -> Result<Self> {
        for (kind, v) in RateKind::ALL.into_iter().zip([ds, qos, ts]) {
            check_rate(kind, v)?;
        }
        Ok(OperationalRates { ds, qos, ts })
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn qos(&self) -> f64 {
        self.qos
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn get(&self, kind: RateKind) -> f64 {
        match kind {
            RateKind::ServerAvailability => self.ds,
            RateKind::NetworkQuality => self.qos,
            RateKind::UserSatisfaction => self.ts,
        }
    }

    pub fn set(&mut self, kind: RateKind, value: f64) -> Result<()> {
        check_rate(kind, value)?;
        match kind {
            RateKind::ServerAvailability => self.ds = value,
            RateKind::NetworkQuality => self.qos = value,
            RateKind::UserSatisfaction => self.ts = value,
        }
        Ok(())
    }
}

fn check_rate(kind: RateKind, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(
            format!("rates.{}", kind.field()),
            format!("rate {value} is outside [0, 1]"),
        ))
    }
}

/// Relative weights of QP, DC and PO in the ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct AggregationWeights {
    qp: f64,
    dc: f64,
    po: f64,
}

#[derive(Deserialize)]
struct RawWeights {
    qp: f64,
    dc: f64,
    po: f64,
}

impl TryFrom<RawWeights> for AggregationWeights {
    type Error = Error;

    fn try_from(raw: RawWeights) -> Result<Self> {
        AggregationWeights::new(raw.qp, raw.dc, raw.po)
    }
}

impl Default for AggregationWeights {
    fn default() -> Self {
        AggregationWeights::EQUAL
    }
}

impl AggregationWeights {
    pub const EQUAL: AggregationWeights = AggregationWeights {
        qp: 1.0,
        dc: 1.0,
        po: 1.0,
    };

    pub fn new(qp: f64, dc: f64, po: f64) -> Result<Self> {
        for (name, w) in [("qp", qp), ("dc", dc), ("po", po)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(
                    format!("weights.{name}"),
                    format!("weight {w} must be a finite non-negative number"),
                ));
            }
        }
        if qp + dc + po <= 0.0 {
            return Err(Error::invalid("weights", "at least one weight must be positive"));
        }
        Ok(AggregationWeights { qp, dc, po })
    }

    pub fn qp(&self) -> f64 {
        self.qp
    }

    pub fn dc(&self) -> f64 {
        self.dc
    }

    pub fn po(&self) -> f64 {
        self.po
    }
}

/// Everything needed to score one characteristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentInput {
    pub characteristic: CharacteristicId,
    pub org_maturities: Vec<OrgMaturity>,
    pub matrix: CompatibilityMatrix,
    pub rates: OperationalRates,
    #[serde(default)]
    pub weights: AggregationWeights,
}

impl AssessmentInput {
    /// Checks the cross-field invariants the component types cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.org_maturities.is_empty() {
            return Err(Error::invalid(
                "org_maturities",
                "at least one organization maturity level is required",
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, m) in self.org_maturities.iter().enumerate() {
            if m.characteristic != self.characteristic {
                return Err(Error::invalid(
                    format!("org_maturities[{i}].characteristic"),
                    format!(
                        "entry for `{}` refers to {} but the input assesses {}",
                        m.org_id, m.characteristic, self.characteristic
                    ),
                ));
            }
            if !seen.insert(m.org_id.as_str()) {
                return Err(Error::invalid(
                    format!("org_maturities[{i}].org_id"),
                    format!("organization `{}` is listed more than once", m.org_id),
                ));
            }
        }
        Ok(())
    }

    pub fn maturity_of(&self, org_id: &str) -> Option<MaturityLevel> {
        self.org_maturities
            .iter()
            .find(|m| m.org_id == org_id)
            .map(|m| m.qmml)
    }
}

/// The three aspect scores and their aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentResult {
    pub qp: f64,
    pub dc: f64,
    pub po: f64,
    pub ratqual: f64,
}

impl AssessmentResult {
    pub fn get(&self, aspect: Aspect) -> f64 {
        match aspect {
            Aspect::Qp => self.qp,
            Aspect::Dc => self.dc,
            Aspect::Po => self.po,
            Aspect::RatQual => self.ratqual,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    Qp,
    Dc,
    Po,
    RatQual,
}

impl Aspect {
    pub const ALL: [Aspect; 4] = [Aspect::Qp, Aspect::Dc, Aspect::Po, Aspect::RatQual];

    pub fn label(self) -> &'static str {
        match self {
            Aspect::Qp => "QP",
            Aspect::Dc => "DC",
            Aspect::Po => "PO",
            Aspect::RatQual => "RatQual",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Potentiality of a single organization: level / 5.
pub fn potentiality_of_org(qmml: MaturityLevel) -> f64 {
    // Dividing by 5 yields the correctly rounded 0.2, 0.4, ..., 1.0;
    // multiplying by 0.2 does not (0.2 * 3.0 != 0.6).
    f64::from(qmml.get()) / 5.0
}

/// Potentiality of the collaboration: the least prepared organization bounds it.
pub fn potentiality(orgs: &[OrgMaturity]) -> Result<f64> {
    orgs.iter()
        .map(|m| m.qmml)
        .min()
        .map(potentiality_of_org)
        .ok_or_else(|| {
            Error::invalid(
                "org_maturities",
                "at least one organization maturity level is required",
            )
        })
}

pub fn compatibility_degree(matrix: &CompatibilityMatrix) -> f64 {
    let incompatibility: f64 = matrix.cells.iter().flatten().sum();
    1.0 - incompatibility / MATRIX_CELLS as f64
}

/// Geometric mean of the three rates.
pub fn operational_performance(rates: &OperationalRates) -> f64 {
    let values = [rates.ds, rates.qos, rates.ts];
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // The rounded product can push the cube root an ulp past the extreme rates.
    (rates.ds * rates.qos * rates.ts).cbrt().clamp(lo, hi)
}

pub fn aggregate(qp: f64, dc: f64, po: f64, weights: &AggregationWeights) -> Result<f64> {
    for (aspect, v) in [(Aspect::Qp, qp), (Aspect::Dc, dc), (Aspect::Po, po)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(
                aspect.label().to_lowercase(),
                format!("{aspect} value {v} is outside [0, 1]"),
            ));
        }
    }
    let total = weights.qp + weights.dc + weights.po;
    Ok((weights.qp * qp + weights.dc * dc + weights.po * po) / total)
}

pub fn assess(input: &AssessmentInput) -> Result<AssessmentResult> {
    input.validate()?;
    let qp = potentiality(&input.org_maturities)?;
    let dc = compatibility_degree(&input.matrix);
    let po = operational_performance(&input.rates);
    let ratqual = aggregate(qp, dc, po, &input.weights)?;
    Ok(AssessmentResult { qp, dc, po, ratqual })
}
