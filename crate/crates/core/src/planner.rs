//! Minimum-cost improvement planning.
//!
//! Given the current assessment of a characteristic and a target ratio, the
//! planner picks improvement actions (raise an organization's maturity, fix an
//! incompatible matrix cell, improve an operational rate) whose projected ratio
//! reaches the target at the lowest total cost.
//!
//! The search space is a finite lattice: maturity levels `1..=5`, each
//! incompatible cell fixed or not, and each rate kept or raised to a multiple of
//! the configured rate step. [`plan`] solves it by branch and bound;
//! [`brute_force_plan`] enumerates it completely and serves as the reference.
//!
//! Scenarios are ranked by total cost, then by number of actions, then by the
//! canonical order of their sorted action lists. Total cost is the sum of the
//! action costs taken in ascending order, so two action sets with the same cost
//! multiset always compare equal on cost.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assessment::{
    aggregate, assess, compatibility_degree, operational_performance, potentiality_of_org, Aspect,
    AssessmentInput, AssessmentResult, Barrier, CellMode, Cells, CompatibilityMatrix, Layer,
    MaturityLevel, RateKind, MATRIX_COLS, MATRIX_ROWS,
};
use crate::error::{Error, Result};
use crate::taxonomy::CharacteristicId;

/// Largest lattice [`brute_force_plan`] agrees to enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ImprovementAction {
    RaiseMaturity {
        org_id: String,
        to_level: MaturityLevel,
    },
    /// Marks the cell compatible (sets it to 0).
    FixCompatibilityCell { layer: Layer, barrier: Barrier },
    ImproveRate { rate: RateKind, to_value: f64 },
}

// Rate values are validated finite before an action is built, so the total
// order on f64 agrees with equality here.
impl Eq for ImprovementAction {}

impl Ord for ImprovementAction {
    fn cmp(&self, other: &Self) -> Ordering {
        use ImprovementAction::*;
        match (self, other) {
            (
                RaiseMaturity { org_id: a, to_level: la },
                RaiseMaturity { org_id: b, to_level: lb },
            ) => a.cmp(b).then(la.cmp(lb)),
            (
                FixCompatibilityCell { layer: ra, barrier: ca },
                FixCompatibilityCell { layer: rb, barrier: cb },
            ) => ra.cmp(rb).then(ca.cmp(cb)),
            (ImproveRate { rate: a, to_value: va }, ImproveRate { rate: b, to_value: vb }) => {
                a.cmp(b).then(va.total_cmp(vb))
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for ImprovementAction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The state variable an action changes. One action per lever.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Lever {
    Org(String),
    Cell(Layer, Barrier),
    Rate(RateKind),
}

impl ImprovementAction {
    fn rank(&self) -> u8 {
        match self {
            ImprovementAction::RaiseMaturity { .. } => 0,
            ImprovementAction::FixCompatibilityCell { .. } => 1,
            ImprovementAction::ImproveRate { .. } => 2,
        }
    }

    fn lever(&self) -> Lever {
        match self {
            ImprovementAction::RaiseMaturity { org_id, .. } => Lever::Org(org_id.clone()),
            ImprovementAction::FixCompatibilityCell { layer, barrier } => Lever::Cell(*layer, *barrier),
            ImprovementAction::ImproveRate { rate, .. } => Lever::Rate(*rate),
        }
    }

    /// Aspect the action moves.
    pub fn aspect(&self) -> Aspect {
        match self {
            ImprovementAction::RaiseMaturity { .. } => Aspect::Qp,
            ImprovementAction::FixCompatibilityCell { .. } => Aspect::Dc,
            ImprovementAction::ImproveRate { .. } => Aspect::Po,
        }
    }

    /// Current value of the lever this action changes.
    fn lever_value(&self, state: &AssessmentInput) -> Result<f64> {
        match self {
            ImprovementAction::RaiseMaturity { org_id, .. } => state
                .maturity_of(org_id)
                .map(|l| f64::from(l.get()))
                .ok_or_else(|| self.rejected(format!("organization `{org_id}` is not assessed"))),
            ImprovementAction::FixCompatibilityCell { layer, barrier } => {
                Ok(state.matrix.get(*layer, *barrier))
            }
            ImprovementAction::ImproveRate { rate, .. } => Ok(state.rates.get(*rate)),
        }
    }

    fn rejected(&self, reason: impl Into<String>) -> Error {
        Error::invalid(format!("action `{self}`"), reason)
    }

    /// Applies the action in place after checking it improves its lever.
    pub fn apply(&self, state: &mut AssessmentInput) -> Result<()> {
        match self {
            ImprovementAction::RaiseMaturity { org_id, to_level } => {
                let entry = state
                    .org_maturities
                    .iter_mut()
                    .find(|m| &m.org_id == org_id)
                    .ok_or_else(|| self.rejected(format!("organization `{org_id}` is not assessed")))?;
                if *to_level <= entry.qmml {
                    return Err(self.rejected(format!(
                        "target level {to_level} does not exceed current level {}",
                        entry.qmml
                    )));
                }
                entry.qmml = *to_level;
            }
            ImprovementAction::FixCompatibilityCell { layer, barrier } => {
                if state.matrix.get(*layer, *barrier) <= 0.0 {
                    return Err(self.rejected("cell is already compatible"));
                }
                state.matrix.set(*layer, *barrier, 0.0)?;
            }
            ImprovementAction::ImproveRate { rate, to_value } => {
                let current = state.rates.get(*rate);
                if !(to_value.is_finite() && *to_value > current) {
                    return Err(self.rejected(format!(
                        "target value {to_value} does not exceed current value {current}"
                    )));
                }
                state.rates.set(*rate, *to_value).map_err(|e| self.rejected(e.to_string()))?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for ImprovementAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImprovementAction::RaiseMaturity { org_id, to_level } => {
                write!(f, "RaiseMaturity({org_id}, {to_level})")
            }
            ImprovementAction::FixCompatibilityCell { layer, barrier } => {
                write!(f, "FixCompatibilityCell({layer:?}, {barrier:?})")
            }
            ImprovementAction::ImproveRate { rate, to_value } => {
                write!(f, "ImproveRate({}, {to_value})", rate.short_name())
            }
        }
    }
}

/// Projects the assessment after applying `actions` to a copy of `state`.
pub fn project(state: &AssessmentInput, actions: &[ImprovementAction]) -> Result<AssessmentResult> {
    assess(&apply_all(state, actions)?)
}

/// Applies `actions` to a copy of `state`, rejecting two actions on the same lever.
pub fn apply_all(state: &AssessmentInput, actions: &[ImprovementAction]) -> Result<AssessmentInput> {
    let mut levers = BTreeSet::new();
    let mut next = state.clone();
    for action in actions {
        if !levers.insert(action.lever()) {
            return Err(action.rejected("another action already targets the same lever"));
        }
        action.apply(&mut next)?;
    }
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCosts {
    pub ds: f64,
    pub qos: f64,
    pub ts: f64,
}

impl RateCosts {
    pub fn get(&self, kind: RateKind) -> f64 {
        match kind {
            RateKind::ServerAvailability => self.ds,
            RateKind::NetworkQuality => self.qos,
            RateKind::UserSatisfaction => self.ts,
        }
    }
}

/// Prices of improvement actions, in arbitrary monetary units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionCostModel {
    /// Cost of raising one organization by one maturity level.
    pub maturity_step_cost: f64,
    /// Per-organization overrides of `maturity_step_cost`.
    pub org_step_cost: BTreeMap<String, f64>,
    /// Cost of fixing each matrix cell, rows by layer and columns by barrier.
    pub cell_cost: Cells,
    /// Cost of improving each rate by 1.0; partial improvements are prorated.
    pub rate_unit_cost: RateCosts,
    /// Granularity of rate targets. `1 / rate_step` must be an integer.
    pub rate_step: f64,
}

impl Default for ActionCostModel {
    fn default() -> Self {
        ActionCostModel {
            maturity_step_cost: 1.0,
            org_step_cost: BTreeMap::new(),
            cell_cost: [[1.0; MATRIX_COLS]; MATRIX_ROWS],
            rate_unit_cost: RateCosts {
                ds: 10.0,
                qos: 10.0,
                ts: 10.0,
            },
            rate_step: 0.05,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("cost {v} must be a finite positive number")))
    }
}

impl ActionCostModel {
    pub fn validate(&self) -> Result<()> {
        positive("maturity_step_cost", self.maturity_step_cost)?;
        for (org, c) in &self.org_step_cost {
            positive(&format!("org_step_cost.{org}"), *c)?;
        }
        for layer in Layer::ALL {
            for barrier in Barrier::ALL {
                positive(
                    &format!("cell_cost.{}.{}", layer.label(), barrier.label()),
                    self.cell_cost[layer.index()][barrier.index()],
                )?;
            }
        }
        for kind in RateKind::ALL {
            positive(
                &format!("rate_unit_cost.{}", kind.short_name().to_lowercase()),
                self.rate_unit_cost.get(kind),
            )?;
        }
        self.rate_divisions().map(|_| ())
    }

    /// Number of rate steps in `[0, 1]`.
    pub fn rate_divisions(&self) -> Result<u32> {
        let step = self.rate_step;
        if !(step.is_finite() && step > 0.0 && step <= 1.0) {
            return Err(Error::invalid("rate_step", format!("step {step} is outside (0, 1]")));
        }
        let n = (1.0 / step).round();
        if (n * step - 1.0).abs() > 1e-9 || n > 1e6 {
            return Err(Error::invalid(
                "rate_step",
                format!("step {step} does not divide 1 evenly"),
            ));
        }
        Ok(n as u32)
    }

    pub fn org_step(&self, org_id: &str) -> f64 {
        self.org_step_cost
            .get(org_id)
            .copied()
            .unwrap_or(self.maturity_step_cost)
    }

    /// Cost of `action` taken from `state`, checking it lies on the lattice.
    pub fn cost_of(&self, state: &AssessmentInput, action: &ImprovementAction) -> Result<f64> {
        let current = action.lever_value(state)?;
        match action {
            ImprovementAction::RaiseMaturity { org_id, to_level } => {
                Ok(self.org_step(org_id) * (f64::from(to_level.get()) - current))
            }
            ImprovementAction::FixCompatibilityCell { layer, barrier } => {
                Ok(self.cell_cost[layer.index()][barrier.index()])
            }
            ImprovementAction::ImproveRate { rate, to_value } => {
                let n = f64::from(self.rate_divisions()?);
                if ((to_value * n).round() - to_value * n).abs() > 1e-9 {
                    return Err(action.rejected(format!(
                        "value {to_value} is not a multiple of the rate step {}",
                        self.rate_step
                    )));
                }
                Ok(self.rate_unit_cost.get(*rate) * (to_value - current))
            }
        }
    }
}

pub fn parse_cost_model(text: &str) -> Result<ActionCostModel> {
    let model: ActionCostModel = toml::from_str(text).map_err(|err| {
        let offset = err.span().map_or(0, |s| s.start);
        let before = &text[..offset.min(text.len())];
        Error::Format {
            line: before.matches('\n').count() + 1,
            column: before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1,
            message: err.message().to_string(),
        }
    })?;
    model.validate()?;
    Ok(model)
}

pub fn load_cost_model(path: &Path) -> Result<ActionCostModel> {
    parse_cost_model(&std::fs::read_to_string(path)?)
}

/// One action of a scenario with its cost and its effect on the aspect it moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedStep {
    pub action: ImprovementAction,
    pub cost: f64,
    /// Lever value before the action: maturity level, cell value or rate.
    pub lever_before: f64,
    pub aspect: Aspect,
    pub aspect_before: f64,
    pub aspect_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub characteristic: CharacteristicId,
    pub target: f64,
    pub baseline: AssessmentResult,
    pub projected: AssessmentResult,
    pub total_cost: f64,
    pub steps: Vec<PlannedStep>,
}

impl Scenario {
    pub fn actions(&self) -> impl Iterator<Item = &ImprovementAction> {
        self.steps.iter().map(|s| &s.action)
    }

    pub fn action_list(&self) -> Vec<ImprovementAction> {
        self.actions().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Builds the scenario for an action set, sorting the actions canonically.
    pub fn from_actions(
        state: &AssessmentInput,
        target: f64,
        costs: &ActionCostModel,
        mut actions: Vec<ImprovementAction>,
    ) -> Result<Self> {
        actions.sort();
        let baseline = assess(state)?;
        let mut current = state.clone();
        let mut current_result = baseline;
        let mut steps = Vec::with_capacity(actions.len());
        let mut levers = BTreeSet::new();
        for action in actions {
            if !levers.insert(action.lever()) {
                return Err(action.rejected("another action already targets the same lever"));
            }
            let cost = costs.cost_of(&current, &action)?;
            let lever_before = action.lever_value(&current)?;
            action.apply(&mut current)?;
            let next = assess(&current)?;
            let aspect = action.aspect();
            steps.push(PlannedStep {
                aspect,
                aspect_before: current_result.get(aspect),
                aspect_after: next.get(aspect),
                action,
                cost,
                lever_before,
            });
            current_result = next;
        }
        Ok(Scenario {
            characteristic: state.characteristic,
            target,
            baseline,
            projected: current_result,
            total_cost: canonical_total(steps.iter().map(|s| s.cost)),
            steps,
        })
    }
}

/// Sum of costs in ascending order.
fn canonical_total(costs: impl Iterator<Item = f64>) -> f64 {
    let mut costs: Vec<f64> = costs.collect();
    costs.sort_by(f64::total_cmp);
    costs.into_iter().fold(0.0, |acc, c| acc + c)
}

/// A candidate solution during search.
#[derive(Clone, Debug)]
struct Candidate {
    cost: f64,
    actions: Vec<ImprovementAction>,
}

impl Candidate {
    fn new(mut priced: Vec<(ImprovementAction, f64)>) -> Self {
        priced.sort_by(|a, b| a.0.cmp(&b.0));
        let cost = canonical_total(priced.iter().map(|(_, c)| *c));
        Candidate {
            cost,
            actions: priced.into_iter().map(|(a, _)| a).collect(),
        }
    }

    fn rank(&self, other: &Candidate) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.actions.len().cmp(&other.actions.len()))
            .then_with(|| self.actions.cmp(&other.actions))
    }
}

fn offer(best: &mut Option<Candidate>, candidate: Candidate) {
    if best.as_ref().is_none_or(|b| candidate.rank(b) == Ordering::Less) {
        *best = Some(candidate);
    }
}

/// Costs within this margin of the incumbent are still explored; the margin
/// absorbs rounding differences between running sums and canonical totals.
fn prune_bound(best: &Option<Candidate>) -> f64 {
    best.as_ref()
        .map_or(f64::INFINITY, |b| b.cost + 1e-9 * b.cost.max(1.0))
}

struct OrgLever {
    org_id: String,
    level: MaturityLevel,
    step_cost: f64,
}

struct CellLever {
    layer: Layer,
    barrier: Barrier,
    cost: f64,
}

struct RateLever {
    kind: RateKind,
    /// Candidate values strictly above the current one, ascending, with their costs.
    options: Vec<(f64, f64)>,
}

/// The discretized action space around one state.
struct Lattice<'a> {
    state: &'a AssessmentInput,
    orgs: Vec<OrgLever>,
    cells: Vec<CellLever>,
    rates: Vec<RateLever>,
}

impl<'a> Lattice<'a> {
    fn new(state: &'a AssessmentInput, costs: &ActionCostModel) -> Result<Self> {
        state.validate()?;
        costs.validate()?;
        let n = costs.rate_divisions()?;
        let orgs = state
            .org_maturities
            .iter()
            .map(|m| OrgLever {
                org_id: m.org_id.clone(),
                level: m.qmml,
                step_cost: costs.org_step(&m.org_id),
            })
            .collect();
        let cells = state
            .matrix
            .incompatible_cells()
            .map(|(layer, barrier, _)| CellLever {
                layer,
                barrier,
                cost: costs.cell_cost[layer.index()][barrier.index()],
            })
            .collect();
        let rates = RateKind::ALL
            .into_iter()
            .map(|kind| {
                let current = state.rates.get(kind);
                let unit = costs.rate_unit_cost.get(kind);
                let options = (0..=n)
                    .map(|k| f64::from(k) / f64::from(n))
                    .filter(|v| *v > current)
                    .map(|v| (v, unit * (v - current)))
                    .collect();
                RateLever { kind, options }
            })
            .collect();
        Ok(Lattice {
            state,
            orgs,
            cells,
            rates,
        })
    }

    fn size(&self) -> u128 {
        let orgs: u128 = self
            .orgs
            .iter()
            .map(|o| 6 - u128::from(o.level.get()))
            .product();
        let rates: u128 = self.rates.iter().map(|r| r.options.len() as u128 + 1).product();
        orgs.saturating_mul(rates)
            .saturating_mul(1u128 << self.cells.len())
    }

    fn qp_for_min_level(&self, level: MaturityLevel) -> f64 {
        potentiality_of_org(level)
    }

    fn dc_for(&self, fixed: impl Iterator<Item = usize>) -> f64 {
        let mut cells = *self.state.matrix.cells();
        for i in fixed {
            let c = &self.cells[i];
            cells[c.layer.index()][c.barrier.index()] = 0.0;
        }
        let matrix = CompatibilityMatrix::new(cells, self.state.matrix.mode())
            .expect("zeroing cells keeps the matrix valid");
        compatibility_degree(&matrix)
    }

    /// `choice[i]` is 0 to keep rate `i`, or `k` to take option `k - 1`.
    fn po_for(&self, choice: &[usize; 3]) -> f64 {
        let mut rates = self.state.rates;
        for (lever, &c) in self.rates.iter().zip(choice) {
            if c > 0 {
                rates
                    .set(lever.kind, lever.options[c - 1].0)
                    .expect("lattice values lie in [0, 1]");
            }
        }
        operational_performance(&rates)
    }

    fn ratio(&self, qp: f64, dc: f64, po: f64) -> f64 {
        aggregate(qp, dc, po, &self.state.weights).expect("aspect values lie in [0, 1]")
    }

    fn rate_actions(&self, choice: &[usize; 3]) -> Vec<(ImprovementAction, f64)> {
        self.rates
            .iter()
            .zip(choice)
            .filter(|(_, &c)| c > 0)
            .map(|(lever, &c)| {
                let (to_value, cost) = lever.options[c - 1];
                (
                    ImprovementAction::ImproveRate {
                        rate: lever.kind,
                        to_value,
                    },
                    cost,
                )
            })
            .collect()
    }

    fn cell_action(&self, i: usize) -> (ImprovementAction, f64) {
        let c = &self.cells[i];
        (
            ImprovementAction::FixCompatibilityCell {
                layer: c.layer,
                barrier: c.barrier,
            },
            c.cost,
        )
    }

    fn raise_action(&self, i: usize, to: MaturityLevel) -> (ImprovementAction, f64) {
        let o = &self.orgs[i];
        (
            ImprovementAction::RaiseMaturity {
                org_id: o.org_id.clone(),
                to_level: to,
            },
            o.step_cost * f64::from(to.get() - o.level.get()),
        )
    }

    /// Every rate combination, as option indices (0 = keep).
    fn rate_choices(&self) -> Vec<[usize; 3]> {
        let lens: Vec<usize> = self.rates.iter().map(|r| r.options.len() + 1).collect();
        let mut out = Vec::with_capacity(lens.iter().product());
        for a in 0..lens[0] {
            for b in 0..lens[1] {
                for c in 0..lens[2] {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }

    fn rate_choice_cost(&self, choice: &[usize; 3]) -> f64 {
        self.rates
            .iter()
            .zip(choice)
            .filter(|(_, &c)| c > 0)
            .map(|(lever, &c)| lever.options[c - 1].1)
            .sum()
    }

    /// Ratio with every lever at its best value.
    fn max_ratio(&self) -> f64 {
        let qp = self.qp_for_min_level(MaturityLevel::MAX);
        let dc = self.dc_for(0..self.cells.len());
        let best = [0, 1, 2].map(|i| self.rates[i].options.len());
        let po = self.po_for(&best);
        self.ratio(qp, dc, po)
    }
}

fn check_target(target: f64) -> Result<()> {
    if (0.0..=1.0).contains(&target) {
        Ok(())
    } else {
        Err(Error::invalid("target", format!("target {target} is outside [0, 1]")))
    }
}

/// Cheapest scenario whose projected ratio reaches `target`.
///
/// Returns the empty scenario when the current ratio already meets the target,
/// and [`Error::Infeasible`] when even the best lattice point falls short.
pub fn plan(state: &AssessmentInput, target: f64, costs: &ActionCostModel) -> Result<Scenario> {
    check_target(target)?;
    let lattice = Lattice::new(state, costs)?;
    let best = match solve_preamble(&lattice, target)? {
        Some(best) => best,
        None => branch_and_bound(&lattice, target),
    };
    let best = best.expect("a feasible lattice point exists");
    Scenario::from_actions(state, target, costs, best.actions)
}

/// Reference solver enumerating the whole lattice; refuses lattices larger
/// than [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_plan(
    state: &AssessmentInput,
    target: f64,
    costs: &ActionCostModel,
) -> Result<Scenario> {
    check_target(target)?;
    let lattice = Lattice::new(state, costs)?;
    let size = lattice.size();
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let best = match solve_preamble(&lattice, target)? {
        Some(best) => best,
        None => enumerate(&lattice, target),
    };
    let best = best.expect("a feasible lattice point exists");
    Scenario::from_actions(state, target, costs, best.actions)
}

/// Handles the already-satisfied and infeasible cases shared by both solvers.
fn solve_preamble(lattice: &Lattice<'_>, target: f64) -> Result<Option<Option<Candidate>>> {
    if assess(lattice.state)?.ratqual >= target {
        return Ok(Some(Some(Candidate::new(Vec::new()))));
    }
    let max = lattice.max_ratio();
    if max < target {
        return Err(Error::Infeasible {
            target,
            max_achievable: max,
        });
    }
    Ok(None)
}

fn branch_and_bound(lattice: &Lattice<'_>, target: f64) -> Option<Candidate> {
    let min_level = lattice.orgs.iter().map(|o| o.level).min().expect("validated non-empty");
    let rate_choices = lattice.rate_choices();
    let po_by_choice: Vec<f64> = rate_choices.iter().map(|c| lattice.po_for(c)).collect();
    let rate_costs: Vec<f64> = rate_choices.iter().map(|c| lattice.rate_choice_cost(c)).collect();

    // Cells in the order they are worth fixing: cheapest first, ties row-major.
    let mut cell_order: Vec<usize> = (0..lattice.cells.len()).collect();
    cell_order.sort_by(|&a, &b| {
        lattice.cells[a]
            .cost
            .total_cmp(&lattice.cells[b].cost)
            .then(a.cmp(&b))
    });
    let binary = lattice.state.matrix.mode() == CellMode::Binary;
    // With binary cells every fix adds the same 1/24, so the k cheapest fixes
    // dominate every other set of k fixes.
    let greedy_dc: Vec<f64> = if binary {
        (0..=cell_order.len())
            .map(|k| lattice.dc_for(cell_order[..k].iter().copied()))
            .collect()
    } else {
        Vec::new()
    };

    let mut best: Option<Candidate> = None;
    for level in std::iter::once(min_level).chain(min_level.above()) {
        // Raising every organization below `level` to exactly `level` is the
        // only non-dominated way to reach this potentiality.
        let raises: Vec<(ImprovementAction, f64)> = lattice
            .orgs
            .iter()
            .enumerate()
            .filter(|(_, o)| o.level < level)
            .map(|(i, _)| lattice.raise_action(i, level))
            .collect();
        let raise_cost: f64 = raises.iter().map(|(_, c)| c).sum();
        if raise_cost > prune_bound(&best) {
            break;
        }
        let qp = lattice.qp_for_min_level(level);

        for (ci, choice) in rate_choices.iter().enumerate() {
            let partial = raise_cost + rate_costs[ci];
            if partial > prune_bound(&best) {
                continue;
            }
            let po = po_by_choice[ci];
            let feasible_sets: Vec<Vec<usize>> = if binary {
                let mut spent = partial;
                let mut found = Vec::new();
                for (k, dc) in greedy_dc.iter().enumerate() {
                    if k > 0 {
                        spent += lattice.cells[cell_order[k - 1]].cost;
                    }
                    if spent > prune_bound(&best) {
                        break;
                    }
                    if lattice.ratio(qp, *dc, po) >= target {
                        found.push(cell_order[..k].to_vec());
                        break;
                    }
                }
                found
            } else {
                let mut search = CellSearch {
                    lattice,
                    order: &cell_order,
                    qp,
                    po,
                    target,
                    fixed: Vec::new(),
                    found: Vec::new(),
                };
                search.run(0, partial, prune_bound(&best));
                search.found
            };
            for cells in feasible_sets {
                let mut priced = raises.clone();
                priced.extend(lattice.rate_actions(choice));
                priced.extend(cells.into_iter().map(|i| lattice.cell_action(i)));
                offer(&mut best, Candidate::new(priced));
            }
        }
    }
    best
}

/// Depth-first search over fractional cells for one (potentiality, rates) pair.
/// Collects every minimal feasible set within the cost bound.
struct CellSearch<'l, 'a> {
    lattice: &'l Lattice<'a>,
    order: &'l [usize],
    qp: f64,
    po: f64,
    target: f64,
    fixed: Vec<usize>,
    found: Vec<Vec<usize>>,
}

impl CellSearch<'_, '_> {
    fn meets(&self, fixed: &[usize]) -> bool {
        let dc = self.lattice.dc_for(fixed.iter().copied());
        self.lattice.ratio(self.qp, dc, self.po) >= self.target
    }

    fn run(&mut self, next: usize, spent: f64, bound: f64) {
        if spent > bound {
            return;
        }
        if self.meets(&self.fixed) {
            self.found.push(self.fixed.clone());
            return;
        }
        if next == self.order.len() {
            return;
        }
        let mut all = self.fixed.clone();
        all.extend_from_slice(&self.order[next..]);
        if !self.meets(&all) {
            return;
        }
        let cell = self.order[next];
        self.fixed.push(cell);
        self.run(next + 1, spent + self.lattice.cells[cell].cost, bound);
        self.fixed.pop();
        self.run(next + 1, spent, bound);
    }
}

fn enumerate(lattice: &Lattice<'_>, target: f64) -> Option<Candidate> {
    // Per-organization options: None keeps the level, Some(l) raises to l.
    let org_options: Vec<Vec<Option<MaturityLevel>>> = lattice
        .orgs
        .iter()
        .map(|o| std::iter::once(None).chain(o.level.above().map(Some)).collect())
        .collect();
    let org_combos = cartesian(&org_options.iter().map(Vec::len).collect::<Vec<_>>());
    let rate_choices = lattice.rate_choices();
    let cell_count = lattice.cells.len();

    let dc_by_mask: Vec<f64> = (0..1usize << cell_count)
        .map(|mask| lattice.dc_for((0..cell_count).filter(|i| mask & (1 << i) != 0)))
        .collect();
    let cost_by_mask: Vec<f64> = (0..1usize << cell_count)
        .map(|mask| {
            (0..cell_count)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| lattice.cells[i].cost)
                .sum()
        })
        .collect();

    let mut best: Option<Candidate> = None;
    for combo in &org_combos {
        let mut raises = Vec::new();
        let mut min_level = MaturityLevel::MAX;
        for (i, &pick) in combo.iter().enumerate() {
            let level = match org_options[i][pick] {
                Some(to) => {
                    raises.push(lattice.raise_action(i, to));
                    to
                }
                None => lattice.orgs[i].level,
            };
            min_level = min_level.min(level);
        }
        let qp = lattice.qp_for_min_level(min_level);
        let raise_cost: f64 = raises.iter().map(|(_, c)| c).sum();

        for choice in &rate_choices {
            let po = lattice.po_for(choice);
            let partial = raise_cost + lattice.rate_choice_cost(choice);
            for mask in 0..1usize << cell_count {
                if partial + cost_by_mask[mask] > prune_bound(&best) {
                    continue;
                }
                if lattice.ratio(qp, dc_by_mask[mask], po) < target {
                    continue;
                }
                let mut priced = raises.clone();
                priced.extend(lattice.rate_actions(choice));
                priced.extend(
                    (0..cell_count)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| lattice.cell_action(i)),
                );
                offer(&mut best, Candidate::new(priced));
            }
        }
    }
    best
}

/// All index tuples of a mixed-radix counter with the given radices.
fn cartesian(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &r in radices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..r).map(move |i| {
                    let mut next = prefix.clone();
                    next.push(i);
                    next
                })
            })
            .collect();
    }
    out
}

/// One recommendation line per action.
pub fn explain_scenario(scenario: &Scenario) -> Vec<String> {
    scenario
        .steps
        .iter()
        .map(|step| {
            let effect = format!(
                "{} {:.4} -> {:.4}",
                step.aspect, step.aspect_before, step.aspect_after
            );
            match &step.action {
                ImprovementAction::RaiseMaturity { org_id, to_level } => format!(
                    "Improve {} maturity of organization `{org_id}` from level {} to level {to_level} ({effect}, cost {:.2})",
                    scenario.characteristic.display_name(),
                    step.lever_before,
                    step.cost
                ),
                ImprovementAction::FixCompatibilityCell { layer, barrier } => format!(
                    "Resolve {} incompatibilities at the {} layer ({:?} barrier) ({effect}, cost {:.2})",
                    barrier.label(),
                    layer.label(),
                    barrier.group(),
                    step.cost
                ),
                ImprovementAction::ImproveRate { rate, to_value } => {
                    let what = match rate {
                        RateKind::ServerAvailability => {
                            "Optimize the availability of application servers"
                        }
                        RateKind::NetworkQuality => {
                            "Improve network availability and quality of service"
                        }
                        RateKind::UserSatisfaction => "Better meet end-user expectations",
                    };
                    format!(
                        "{what}: {} {:.2} -> {:.2} ({effect}, cost {:.2})",
                        rate.short_name(),
                        step.lever_before,
                        to_value,
                        step.cost
                    )
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessment::{AggregationWeights, OperationalRates, OrgMaturity};

    fn state(levels: &[i64], ones: &[(Layer, Barrier)], rates: (f64, f64, f64)) -> AssessmentInput {
        let mut matrix = CompatibilityMatrix::compatible();
        for &(l, b) in ones {
            matrix.set(l, b, 1.0).unwrap();
        }
        AssessmentInput {
            characteristic: CharacteristicId::Interoperability,
            org_maturities: levels
                .iter()
                .enumerate()
                .map(|(i, &l)| OrgMaturity {
                    org_id: format!("org{}", i + 1),
                    characteristic: CharacteristicId::Interoperability,
                    qmml: MaturityLevel::new(l).unwrap(),
                })
                .collect(),
            matrix,
            rates: OperationalRates::new(rates.0, rates.1, rates.2).unwrap(),
            weights: AggregationWeights::default(),
        }
    }

    fn raise(org: &str, to: i64) -> ImprovementAction {
        ImprovementAction::RaiseMaturity {
            org_id: org.into(),
            to_level: MaturityLevel::new(to).unwrap(),
        }
    }

    const THREE_CELLS: [(Layer, Barrier); 3] = [
        (Layer::Process, Barrier::Semantic),
        (Layer::Data, Barrier::Syntactic),
        (Layer::Infrastructure, Barrier::Platform),
    ];

    #[test]
    fn empty_projection_is_identity() {
        let s = state(&[2, 4], &THREE_CELLS, (0.9, 0.8, 0.7));
        assert_eq!(project(&s, &[]).unwrap(), assess(&s).unwrap());
    }

    #[test]
    fn fixing_a_cell_adds_one_twenty_fourth() {
        let s = state(&[2, 4], &THREE_CELLS, (0.9, 0.8, 0.7));
        let before = assess(&s).unwrap();
        let fix = ImprovementAction::FixCompatibilityCell {
            layer: Layer::Process,
            barrier: Barrier::Semantic,
        };
        let after = project(&s, &[fix]).unwrap();
        assert!((after.dc - before.dc - 1.0 / 24.0).abs() < 1e-12);
        assert_eq!(s, state(&[2, 4], &THREE_CELLS, (0.9, 0.8, 0.7)));
    }

    #[test]
    fn raising_the_weakest_organization_lifts_potentiality() {
        let s = state(&[2, 4], &[], (1.0, 1.0, 1.0));
        assert_eq!(assess(&s).unwrap().qp, 0.4);
        assert_eq!(project(&s, &[raise("org1", 3)]).unwrap().qp, 0.6);
    }

    #[test]
    fn invalid_and_conflicting_actions_are_rejected() {
        let s = state(&[2, 4], &THREE_CELLS, (0.9, 0.8, 0.7));
        let err = project(&s, &[raise("org1", 3), raise("org1", 4)]).unwrap_err();
        assert!(err.to_string().contains("RaiseMaturity(org1, 4)"), "{err}");
        assert!(project(&s, &[raise("org2", 3)]).is_err());
        assert!(project(&s, &[raise("nobody", 5)]).is_err());
        let clean = ImprovementAction::FixCompatibilityCell {
            layer: Layer::Service,
            barrier: Barrier::Platform,
        };
        assert!(project(&s, &[clean]).is_err());
        let lower = ImprovementAction::ImproveRate {
            rate: RateKind::ServerAvailability,
            to_value: 0.5,
        };
        assert!(project(&s, &[lower]).is_err());
    }

    #[test]
    fn off_lattice_rate_has_no_cost() {
        let s = state(&[2, 4], &[], (0.9, 0.8, 0.7));
        let action = ImprovementAction::ImproveRate {
            rate: RateKind::NetworkQuality,
            to_value: 0.93,
        };
        assert!(ActionCostModel::default().cost_of(&s, &action).is_err());
        let on = ImprovementAction::ImproveRate {
            rate: RateKind::NetworkQuality,
            to_value: 0.95,
        };
        let cost = ActionCostModel::default().cost_of(&s, &on).unwrap();
        assert!((cost - 1.5).abs() < 1e-12);
    }

    #[test]
    fn satisfied_target_yields_empty_scenario() {
        let s = state(&[5, 5], &[], (0.7, 0.7, 0.7));
        assert!(assess(&s).unwrap().ratqual >= 0.8);
        let scenario = plan(&s, 0.8, &ActionCostModel::default()).unwrap();
        assert!(scenario.is_empty());
        assert_eq!(scenario.total_cost, 0.0);
        assert!(explain_scenario(&scenario).is_empty());
    }

    #[test]
    fn perfect_target_drives_every_lever_to_the_top() {
        let s = state(&[3, 4], &THREE_CELLS, (0.9, 0.85, 1.0));
        let scenario = plan(&s, 1.0, &ActionCostModel::default()).unwrap();
        assert_eq!(scenario.projected.ratqual, 1.0);
        assert_eq!(scenario.steps.len(), 2 + 3 + 2);
        let brute = brute_force_plan(&s, 1.0, &ActionCostModel::default()).unwrap();
        assert_eq!(brute, scenario);
    }

    #[test]
    fn one_seventy_second_above_current_buys_the_cheapest_cell() {
        let s = state(&[5, 5], &THREE_CELLS, (0.9, 0.9, 0.9));
        let mut costs = ActionCostModel::default();
        costs.cell_cost[Layer::Data.index()][Barrier::Syntactic.index()] = 0.5;
        let target = assess(&s).unwrap().ratqual + 1.0 / 72.0;
        let scenario = plan(&s, target, &costs).unwrap();
        assert_eq!(
            scenario.action_list(),
            [ImprovementAction::FixCompatibilityCell {
                layer: Layer::Data,
                barrier: Barrier::Syntactic
            }]
        );
        assert_eq!(scenario.total_cost, 0.5);
        assert_eq!(brute_force_plan(&s, target, &costs).unwrap(), scenario);

        // Uniform costs: the first incompatible cell in row-major order wins the tie.
        let uniform = plan(&s, target, &ActionCostModel::default()).unwrap();
        assert_eq!(
            uniform.action_list(),
            [ImprovementAction::FixCompatibilityCell {
                layer: Layer::Process,
                barrier: Barrier::Semantic
            }]
        );
    }

    #[test]
    fn target_outside_unit_interval_is_rejected() {
        let s = state(&[3, 3], &[], (0.5, 0.5, 0.5));
        assert!(matches!(
            plan(&s, 1.1, &ActionCostModel::default()),
            Err(Error::Invalid { .. })
        ));
        assert!(plan(&s, -0.1, &ActionCostModel::default()).is_err());
    }

    #[test]
    fn unreachable_target_reports_the_maximum() {
        // A lattice with the rates frozen cannot lift PO above its current value.
        let s = state(&[5, 5], &[], (0.5, 0.5, 0.5));
        let mut lattice = Lattice::new(&s, &ActionCostModel::default()).unwrap();
        for r in &mut lattice.rates {
            r.options.clear();
        }
        let max = lattice.max_ratio();
        assert!((max - 2.5 / 3.0).abs() < 1e-12);
        match solve_preamble(&lattice, 0.9) {
            Err(Error::Infeasible { max_achievable, .. }) => assert_eq!(max_achievable, max),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn brute_force_refuses_huge_lattices() {
        let all: Vec<_> = Layer::ALL
            .into_iter()
            .flat_map(|l| Barrier::ALL.map(|b| (l, b)))
            .collect();
        let s = state(&[1, 1], &all, (0.0, 0.0, 0.0));
        assert!(matches!(
            brute_force_plan(&s, 0.9, &ActionCostModel::default()),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn fractional_cells_are_planned_exactly() {
        let mut s = state(&[4, 4], &[], (0.9, 0.9, 0.9));
        let mut cells = [[0.0; MATRIX_COLS]; MATRIX_ROWS];
        cells[0][0] = 0.9;
        cells[0][1] = 0.3;
        cells[1][2] = 0.5;
        cells[2][3] = 0.6;
        cells[3][5] = 0.2;
        s.matrix = CompatibilityMatrix::new(cells, CellMode::Fractional).unwrap();
        let mut costs = ActionCostModel::default();
        costs.cell_cost[0][0] = 1.6;
        costs.cell_cost[1][2] = 0.7;
        costs.cell_cost[2][3] = 0.9;
        costs.cell_cost[3][5] = 0.25;
        let base = assess(&s).unwrap().ratqual;
        for bump in [0.005, 0.01, 0.02, 0.03, 0.05] {
            let target = (base + bump).min(1.0);
            let fast = plan(&s, target, &costs).unwrap();
            let slow = brute_force_plan(&s, target, &costs).unwrap();
            assert_eq!(fast, slow, "target {target}");
            assert!(fast.projected.ratqual >= target);
        }
    }

    #[test]
    fn cost_model_parses_partial_documents() {
        let model = parse_cost_model("rate_step = 0.1\nmaturity_step_cost = 3.0\n").unwrap();
        assert_eq!(model.rate_divisions().unwrap(), 10);
        assert_eq!(model.maturity_step_cost, 3.0);
        assert_eq!(model.cell_cost, ActionCostModel::default().cell_cost);
        assert!(parse_cost_model("rate_step = 0.3\n").is_err());
        assert!(parse_cost_model("maturity_step_cost = 0\n").is_err());
        assert!(matches!(
            parse_cost_model("rate_step = [\n"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn explanation_names_the_lever() {
        let s = state(&[2, 4], &[(Layer::Process, Barrier::Semantic)], (0.8, 1.0, 0.8));
        let actions = vec![
            raise("org1", 3),
            ImprovementAction::FixCompatibilityCell {
                layer: Layer::Process,
                barrier: Barrier::Semantic,
            },
            ImprovementAction::ImproveRate {
                rate: RateKind::ServerAvailability,
                to_value: 0.95,
            },
        ];
        let scenario =
            Scenario::from_actions(&s, 0.9, &ActionCostModel::default(), actions).unwrap();
        let lines = explain_scenario(&scenario);
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("maturity") && lines[0].contains("level 3"), "{}", lines[0]);
        assert!(lines[0].contains("QP 0.4000 -> 0.6000"), "{}", lines[0]);
        assert!(lines[1].contains("semantic"), "{}", lines[1]);
        assert!(lines[2].contains("availability"), "{}", lines[2]);
        assert!((scenario.total_cost - 3.5).abs() < 1e-9);
    }

    #[test]
    fn canonical_action_order() {
        let mut actions = [
            ImprovementAction::ImproveRate {
                rate: RateKind::UserSatisfaction,
                to_value: 0.9,
            },
            ImprovementAction::FixCompatibilityCell {
                layer: Layer::Data,
                barrier: Barrier::Syntactic,
            },
            raise("b", 3),
            ImprovementAction::FixCompatibilityCell {
                layer: Layer::Process,
                barrier: Barrier::Platform,
            },
            raise("a", 4),
        ];
        actions.sort();
        let shown: Vec<String> = actions.iter().map(ToString::to_string).collect();
        assert_eq!(
            shown,
            [
                "RaiseMaturity(a, 4)",
                "RaiseMaturity(b, 3)",
                "FixCompatibilityCell(Process, Platform)",
                "FixCompatibilityCell(Data, Syntactic)",
                "ImproveRate(TS, 0.9)",
            ]
        );
    }
}
