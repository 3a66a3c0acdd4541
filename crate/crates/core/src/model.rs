//! Domain model shared by every solver: bids, auction parameters, instances,
//! allocation results, and the social-cost objective.
//!
//! The EDR period is one hour, so MW and MWh are interchangeable throughout.

use std::collections::HashSet;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{format_rational, serde_text, Rational};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TenantId(pub String);

impl TenantId {
    pub fn new(id: impl Into<String>) -> Self {
        TenantId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TenantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TenantId {
    fn from(s: &str) -> Self {
        TenantId(s.to_string())
    }
}

/// A tenant's declared reduction: `size` MW for `cost` dollars.
///
/// A zero size means the tenant declines to participate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bid {
    pub tenant_id: TenantId,
    #[serde(rename = "size_mw")]
    pub size: i64,
    #[serde(rename = "cost_usd")]
    pub cost: i64,
}

impl Bid {
    pub fn new(tenant_id: impl Into<String>, size: i64, cost: i64) -> Self {
        Bid {
            tenant_id: TenantId::new(tenant_id),
            size,
            cost,
        }
    }

    pub fn participates(&self) -> bool {
        self.size > 0
    }
}

/// What a tenant can actually deliver and what it really costs them.
/// Only simulation and property checks read this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrueType {
    pub true_size: i64,
    pub true_cost: i64,
}

impl TrueType {
    pub fn new(true_size: i64, true_cost: i64) -> Self {
        TrueType {
            true_size,
            true_cost,
        }
    }

    pub fn truthful_bid(&self, tenant_id: &TenantId) -> Bid {
        Bid {
            tenant_id: tenant_id.clone(),
            size: self.true_size,
            cost: self.true_cost,
        }
    }
}

fn default_epsilon() -> Rational {
    Rational::new(1, 2)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionConfig {
    /// Required reduction W, in MW.
    #[serde(rename = "target_mw")]
    pub target: i64,
    /// BES price α, dollars per MWh.
    #[serde(rename = "alpha_usd_per_mwh", with = "serde_text")]
    pub bes_unit_cost: Rational,
    /// Power usage effectiveness γ: each MW shed by a tenant sheds γ MW at the facility.
    #[serde(rename = "gamma_pue", with = "serde_text")]
    pub pue: Rational,
    /// FPTAS accuracy ε.
    #[serde(with = "serde_text", default = "default_epsilon")]
    pub epsilon: Rational,
}

impl AuctionConfig {
    pub fn new(target: i64, bes_unit_cost: Rational, pue: Rational, epsilon: Rational) -> Self {
        AuctionConfig {
            target,
            bes_unit_cost,
            pue,
            epsilon,
        }
    }

    /// Integer-parameter shorthand: `pue` and `epsilon` are given in tenths.
    pub fn from_tenths(target: i64, alpha: i64, pue_tenths: i64, epsilon_tenths: i64) -> Self {
        AuctionConfig::new(
            target,
            Rational::from_integer(i128::from(alpha)),
            Rational::new(i128::from(pue_tenths), 10),
            Rational::new(i128::from(epsilon_tenths), 10),
        )
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.target < 0 {
            out.push(Violation::NegativeTarget(self.target));
        }
        if self.bes_unit_cost < Rational::zero() {
            out.push(Violation::NegativeBesCost(self.bes_unit_cost));
        }
        if self.pue < Rational::from_integer(1) {
            out.push(Violation::PueBelowOne(self.pue));
        }
        if self.epsilon <= Rational::zero() {
            out.push(Violation::NonPositiveEpsilon(self.epsilon));
        }
        out
    }

    pub fn with_target(&self, target: i64) -> Self {
        AuctionConfig {
            target,
            ..self.clone()
        }
    }
}

/// One breached invariant of an [`Instance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId(TenantId),
    NegativeSize(TenantId, i64),
    NegativeCost(TenantId, i64),
    NegativeTarget(i64),
    NegativeBesCost(Rational),
    PueBelowOne(Rational),
    NonPositiveEpsilon(Rational),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "duplicate id {id}"),
            Violation::NegativeSize(id, s) => write!(f, "negative size {s} for {id}"),
            Violation::NegativeCost(id, c) => write!(f, "negative cost {c} for {id}"),
            Violation::NegativeTarget(w) => write!(f, "negative target {w}"),
            Violation::NegativeBesCost(a) => {
                write!(f, "negative BES unit cost {}", format_rational(a))
            }
            Violation::PueBelowOne(g) => write!(f, "pue {} is below 1", format_rational(g)),
            Violation::NonPositiveEpsilon(e) => {
                write!(f, "epsilon {} is not positive", format_rational(e))
            }
        }
    }
}

/// Auction parameters plus the roster of bids, in canonical index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub config: AuctionConfig,
    pub bids: Vec<Bid>,
}

impl Instance {
    pub fn new(config: AuctionConfig, bids: Vec<Bid>) -> Self {
        Instance { config, bids }
    }

    /// Builds the instance, rejecting it if any invariant is breached.
    pub fn checked(config: AuctionConfig, bids: Vec<Bid>) -> Result<Self> {
        let instance = Instance::new(config, bids);
        instance.ensure_valid()?;
        Ok(instance)
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_instance(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(violations))
        }
    }

    pub fn index_of(&self, tenant: &TenantId) -> Result<usize> {
        self.bids
            .iter()
            .position(|b| &b.tenant_id == tenant)
            .ok_or_else(|| Error::UnknownTenant(tenant.clone()))
    }

    /// Indices of bids with positive size; the only ones a solver may select.
    pub fn participants(&self) -> Vec<usize> {
        (0..self.bids.len())
            .filter(|&i| self.bids[i].participates())
            .collect()
    }

    /// Copy of this instance with bid `index` replaced.
    pub fn with_bid(&self, index: usize, size: i64, cost: i64) -> Instance {
        let mut next = self.clone();
        next.bids[index].size = size;
        next.bids[index].cost = cost;
        next
    }

    /// Build the allocation result for a set of selected bid indices.
    pub fn allocation_for(&self, selected: &[usize]) -> AllocationResult {
        let scale = CostScale::new(&self.config);
        let size: i64 = selected.iter().map(|&i| self.bids[i].size).sum();
        let cost: i64 = selected.iter().map(|&i| self.bids[i].cost).sum();
        AllocationResult {
            winners: selected
                .iter()
                .map(|&i| self.bids[i].tenant_id.clone())
                .collect(),
            bes_usage: scale.bes_usage(size),
            social_cost: scale.social_cost(cost, size),
        }
    }
}

pub fn validate_instance(instance: &Instance) -> Vec<Violation> {
    let mut out = instance.config.violations();
    let mut seen = HashSet::new();
    for bid in &instance.bids {
        if !seen.insert(&bid.tenant_id) {
            out.push(Violation::DuplicateId(bid.tenant_id.clone()));
        }
        if bid.size < 0 {
            out.push(Violation::NegativeSize(bid.tenant_id.clone(), bid.size));
        }
        if bid.cost < 0 {
            out.push(Violation::NegativeCost(bid.tenant_id.clone(), bid.cost));
        }
    }
    out
}

/// Winners (in roster order), BES energy used, and the resulting social cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationResult {
    pub winners: Vec<TenantId>,
    pub bes_usage: Rational,
    pub social_cost: Rational,
}

impl AllocationResult {
    pub fn is_winner(&self, tenant: &TenantId) -> bool {
        self.winners.contains(tenant)
    }
}

/// Integer view of the objective. With α = a/d and γ = g/h, BES shortfall is
/// kept in units of 1/h MW and social cost in units of 1/(d·h) dollars, so
/// every comparison inside the solvers is exact integer arithmetic.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CostScale {
    pub alpha_num: i128,
    pub alpha_den: i128,
    pub pue_num: i128,
    pub pue_den: i128,
    pub target: i128,
}

impl CostScale {
    pub fn new(config: &AuctionConfig) -> Self {
        CostScale {
            alpha_num: *config.bes_unit_cost.numer(),
            alpha_den: *config.bes_unit_cost.denom(),
            pue_num: *config.pue.numer(),
            pue_den: *config.pue.denom(),
            target: i128::from(config.target),
        }
    }

    /// `max(0, W − γ·size)` scaled by the PUE denominator.
    pub fn shortfall(&self, size: i64) -> i128 {
        (self.target * self.pue_den - self.pue_num * i128::from(size)).max(0)
    }

    /// Social cost scaled by `alpha_den · pue_den`.
    pub fn scaled_cost(&self, cost: i64, size: i64) -> i128 {
        i128::from(cost) * self.alpha_den * self.pue_den + self.alpha_num * self.shortfall(size)
    }

    pub fn bes_usage(&self, size: i64) -> Rational {
        Rational::new(self.shortfall(size), self.pue_den)
    }

    pub fn social_cost(&self, cost: i64, size: i64) -> Rational {
        Rational::new(self.scaled_cost(cost, size), self.alpha_den * self.pue_den)
    }
}

/// BES usage and social cost of serving the target with `selection` plus BES.
pub fn social_cost(selection: &[TenantId], instance: &Instance) -> Result<(Rational, Rational)> {
    let mut indices = selection
        .iter()
        .map(|id| instance.index_of(id))
        .collect::<Result<Vec<_>>>()?;
    indices.sort_unstable();
    indices.dedup();
    let result = instance.allocation_for(&indices);
    Ok((result.bes_usage, result.social_cost))
}

/// Quasi-linear utility: payment minus true cost for a winner, zero otherwise.
pub fn utility(payment: i64, truth: &TrueType, won: bool) -> i64 {
    if won {
        payment - truth.true_cost
    } else {
        0
    }
}

/// Dollars paid to each tenant in roster order. Losers are paid zero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PaymentSchedule {
    pub payments: Vec<(TenantId, i64)>,
}

impl PaymentSchedule {
    pub fn get(&self, tenant: &TenantId) -> Option<i64> {
        self.payments
            .iter()
            .find(|(id, _)| id == tenant)
            .map(|&(_, p)| p)
    }

    pub fn total(&self) -> i64 {
        self.payments.iter().map(|&(_, p)| p).sum()
    }
}
