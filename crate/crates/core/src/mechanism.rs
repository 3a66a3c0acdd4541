//! Critical-value payments on top of a monotone allocator, plus the
//! truthfulness and individual-rationality checks that go with them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dopt::dopt_select;
use crate::error::{Error, Result};
use crate::fptas::fptas_select;
use crate::model::{
    utility, AllocationResult, AuctionConfig, Bid, Instance, PaymentSchedule, TenantId, TrueType,
};
use crate::numeric::{floor_int, format_rational, Rational};

/// An allocation rule: given bids, which roster indices win.
pub trait Allocator: Sync {
    fn tag(&self) -> AllocatorTag;

    /// Winning roster indices, ascending. The instance is assumed valid.
    fn select(&self, instance: &Instance) -> Result<Vec<usize>>;

    /// A bid value at which any tenant is certain to lose, holding the rest
    /// of the instance fixed.
    fn losing_bid_bound(&self, instance: &Instance) -> i64;

    fn allocate(&self, instance: &Instance) -> Result<AllocationResult> {
        instance.ensure_valid()?;
        Ok(instance.allocation_for(&self.select(instance)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocatorTag {
    Dopt,
    Fptas,
    Bes,
}

impl AllocatorTag {
    pub fn as_str(self) -> &'static str {
        match self {
            AllocatorTag::Dopt => "dopt",
            AllocatorTag::Fptas => "fptas",
            AllocatorTag::Bes => "bes",
        }
    }
}

impl fmt::Display for AllocatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllocatorTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dopt" => Ok(AllocatorTag::Dopt),
            "fptas" => Ok(AllocatorTag::Fptas),
            "bes" => Ok(AllocatorTag::Bes),
            other => Err(format!(
                "unknown algorithm {other:?} (expected dopt, fptas or bes)"
            )),
        }
    }
}

impl Allocator for AllocatorTag {
    fn tag(&self) -> AllocatorTag {
        *self
    }

    fn select(&self, instance: &Instance) -> Result<Vec<usize>> {
        match self {
            AllocatorTag::Dopt => dopt_select(instance),
            AllocatorTag::Fptas => fptas_select(instance),
            AllocatorTag::Bes => Ok(Vec::new()),
        }
    }

    fn losing_bid_bound(&self, instance: &Instance) -> i64 {
        let cfg = &instance.config;
        let pure_bes = cfg.bes_unit_cost * Rational::from_integer(cfg.target.into());
        let bound = match self {
            // A bid above αW is costlier than covering everything with BES.
            AllocatorTag::Dopt | AllocatorTag::Bes => pure_bes,
            // The FPTAS cost never exceeds (1 + 2ε)·OPT ≤ (1 + 2ε)·αW.
            AllocatorTag::Fptas => {
                pure_bes * (Rational::from_integer(1) + cfg.epsilon * Rational::from_integer(2))
            }
        };
        floor_int(&bound) as i64 + 1
    }
}

fn wins_with(
    allocator: &dyn Allocator,
    instance: &Instance,
    index: usize,
    cost: i64,
) -> Result<bool> {
    let probe = instance.with_bid(index, instance.bids[index].size, cost);
    Ok(allocator.select(&probe)?.contains(&index))
}

/// Largest integer bid at which `tenant` still wins, all other bids fixed.
///
/// The search starts from the declared cost (winning) and `⌊αγs⌋ + 1`
/// (expected to lose). If that upper probe still wins it doubles until the
/// allocator's losing bound.
pub fn critical_payment(
    instance: &Instance,
    tenant: &TenantId,
    allocator: &dyn Allocator,
) -> Result<i64> {
    instance.ensure_valid()?;
    let index = instance.index_of(tenant)?;
    critical_payment_at(instance, index, allocator)
}

fn critical_payment_at(
    instance: &Instance,
    index: usize,
    allocator: &dyn Allocator,
) -> Result<i64> {
    let bid = &instance.bids[index];
    if !allocator.select(instance)?.contains(&index) {
        return Err(Error::NotAWinner(bid.tenant_id.clone()));
    }
    let cfg = &instance.config;
    let bes_equivalent = cfg.bes_unit_cost * cfg.pue * Rational::from_integer(bid.size.into());

    let mut low = bid.cost;
    let mut high = (floor_int(&bes_equivalent) as i64 + 1).max(low + 1);
    let cap = allocator.losing_bid_bound(instance).max(high);
    while wins_with(allocator, instance, index, high)? {
        if high >= cap {
            return Err(Error::PaymentUnbounded {
                tenant: bid.tenant_id.clone(),
                bid: high,
            });
        }
        low = high;
        high = high.saturating_mul(2).min(cap);
    }
    while high - low > 1 {
        let mid = low + (high - low) / 2;
        if wins_with(allocator, instance, index, mid)? {
            low = mid;
        } else {
            high = mid;
        }
    }
    Ok(low)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismOutcome {
    pub allocation: AllocationResult,
    pub payments: PaymentSchedule,
    pub allocator: AllocatorTag,
}

#[derive(Serialize)]
struct OutcomeRecord<'a> {
    allocator: AllocatorTag,
    winners: &'a [TenantId],
    bes_usage_mwh: String,
    social_cost_usd: String,
    payments: Vec<PaymentRecord<'a>>,
}

#[derive(Serialize)]
struct PaymentRecord<'a> {
    tenant_id: &'a TenantId,
    payment_usd: i64,
}

impl MechanismOutcome {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.record()).expect("outcome is always serializable")
    }

    /// Canonical JSON encoding shared by the CLI and the auction service.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.record()).expect("outcome is always serializable")
    }

    fn record(&self) -> OutcomeRecord<'_> {
        OutcomeRecord {
            allocator: self.allocator,
            winners: &self.allocation.winners,
            bes_usage_mwh: format_rational(&self.allocation.bes_usage),
            social_cost_usd: format_rational(&self.allocation.social_cost),
            payments: self
                .payments
                .payments
                .iter()
                .map(|(tenant_id, payment_usd)| PaymentRecord {
                    tenant_id,
                    payment_usd: *payment_usd,
                })
                .collect(),
        }
    }
}

/// Allocates with `allocator` and pays each winner its critical value.
pub fn run_mechanism(instance: &Instance, allocator: &dyn Allocator) -> Result<MechanismOutcome> {
    instance.ensure_valid()?;
    let selected = allocator.select(instance)?;
    let paid: Vec<i64> = (0..instance.len())
        .into_par_iter()
        .map(|i| {
            if selected.contains(&i) {
                critical_payment_at(instance, i, allocator)
            } else {
                Ok(0)
            }
        })
        .collect::<Result<_>>()?;
    Ok(MechanismOutcome {
        allocation: instance.allocation_for(&selected),
        payments: PaymentSchedule {
            payments: instance
                .bids
                .iter()
                .zip(paid)
                .map(|(b, p)| (b.tenant_id.clone(), p))
                .collect(),
        },
        allocator: allocator.tag(),
    })
}

/// A tenant with its private type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tenant {
    pub id: TenantId,
    pub truth: TrueType,
}

impl Tenant {
    pub fn new(id: impl Into<String>, true_size: i64, true_cost: i64) -> Self {
        Tenant {
            id: TenantId::new(id),
            truth: TrueType::new(true_size, true_cost),
        }
    }
}

/// Tenants whose true types equal the bids of `instance`.
pub fn truthful_tenants(instance: &Instance) -> Vec<Tenant> {
    instance
        .bids
        .iter()
        .map(|b| Tenant {
            id: b.tenant_id.clone(),
            truth: TrueType::new(b.size, b.cost),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthViolation {
    pub tenant: TenantId,
    pub truthful_utility: i64,
    pub misreport: Bid,
    pub misreport_utility: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthfulnessReport {
    pub misreports: usize,
    pub violations: Vec<TruthViolation>,
}

impl TruthfulnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Utility a tenant of type `truth` realises when its declared bid at
/// `index` is allocated. Delivering more than the true size is impossible,
/// which we encode as `None` (unbounded cost).
fn realised_utility(
    instance: &Instance,
    index: usize,
    truth: &TrueType,
    allocator: &dyn Allocator,
) -> Result<Option<i64>> {
    if !allocator.select(instance)?.contains(&index) {
        return Ok(Some(0));
    }
    if instance.bids[index].size > truth.true_size {
        return Ok(None);
    }
    let payment = critical_payment_at(instance, index, allocator)?;
    Ok(Some(utility(payment, truth, true)))
}

/// Seeded misreport for a tenant of type `truth`: cost uniform on `[0, 2c]`,
/// size one of `e−1, e, e+1, ⌊e/2⌋, 2e`.
pub fn sample_misreport(rng: &mut ChaCha8Rng, truth: &TrueType) -> (i64, i64) {
    let e = truth.true_size;
    let sizes = [(e - 1).max(0), e, e + 1, e / 2, 2 * e];
    let size = sizes[rng.random_range(0..sizes.len())];
    let cost = rng.random_range(0..=2 * truth.true_cost);
    (size, cost)
}

/// For every tenant, compares its truthful utility with `trials` seeded
/// misreports while everyone else bids truthfully.
pub fn check_truthful(
    tenants: &[Tenant],
    config: &AuctionConfig,
    allocator: &dyn Allocator,
    trials: usize,
    seed: u64,
) -> Result<TruthfulnessReport> {
    let truthful = Instance::checked(
        config.clone(),
        tenants
            .iter()
            .map(|t| t.truth.truthful_bid(&t.id))
            .collect(),
    )?;
    let per_tenant: Vec<Vec<TruthViolation>> = (0..tenants.len())
        .into_par_iter()
        .map(|j| {
            let tenant = &tenants[j];
            let honest = realised_utility(&truthful, j, &tenant.truth, allocator)?
                .expect("a truthful bid is always deliverable");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut found = Vec::new();
            for _ in 0..trials {
                let (size, cost) = sample_misreport(&mut rng, &tenant.truth);
                let lie = truthful.with_bid(j, size, cost);
                if let Some(gain) = realised_utility(&lie, j, &tenant.truth, allocator)? {
                    if gain > honest {
                        found.push(TruthViolation {
                            tenant: tenant.id.clone(),
                            truthful_utility: honest,
                            misreport: lie.bids[j].clone(),
                            misreport_utility: gain,
                        });
                    }
                }
            }
            Ok(found)
        })
        .collect::<Result<_>>()?;
    Ok(TruthfulnessReport {
        misreports: tenants.len() * trials,
        violations: per_tenant.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrViolation {
    pub tenant: TenantId,
    pub payment: i64,
    pub true_cost: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalityReport {
    /// Utility of every tenant in roster order.
    pub utilities: Vec<(TenantId, i64)>,
    pub violations: Vec<IrViolation>,
}

impl RationalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that no tenant of a truthful run ends with negative utility.
pub fn check_individual_rationality(
    outcome: &MechanismOutcome,
    tenants: &[Tenant],
) -> Result<RationalityReport> {
    let mut utilities = Vec::with_capacity(tenants.len());
    let mut violations = Vec::new();
    for tenant in tenants {
        let payment = outcome
            .payments
            .get(&tenant.id)
            .ok_or_else(|| Error::UnknownTenant(tenant.id.clone()))?;
        let won = outcome.allocation.is_winner(&tenant.id);
        let u = utility(payment, &tenant.truth, won);
        if u < 0 || (!won && payment != 0) {
            violations.push(IrViolation {
                tenant: tenant.id.clone(),
                payment,
                true_cost: tenant.truth.true_cost,
            });
        }
        utilities.push((tenant.id.clone(), u));
    }
    Ok(RationalityReport {
        utilities,
        violations,
    })
}
