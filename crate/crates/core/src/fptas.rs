//! Monotone FPTAS allocator.
//!
//! For each scale `k` the bids costing at most `2^k` have their costs
//! rounded down to multiples of `a_k = ε·2^k/(n+1)` and the rounded problem
//! is solved exactly with [`crate::dopt::DpTable`]. The per-scale answers
//! are then combined by keeping the one with the lowest true social cost.
//!
//! Rounding depends only on a bid's own cost and on `(n, ε, k)`, never on
//! the other bids, which is what makes the allocation monotone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dopt::build_table;
use crate::error::{Error, Result};
use crate::model::{AllocationResult, Bid, CostScale, Instance, TenantId};
use crate::numeric::Rational;

/// Integer pieces of `a_k = ε·2^k/(n+1)` as `num/den`.
#[derive(Debug, Clone, Copy)]
struct Granularity {
    num: i128,
    den: i128,
}

impl Granularity {
    fn new(instance: &Instance, k: u32) -> Self {
        let eps = instance.config.epsilon;
        let n_plus_one = instance.len() as i128 + 1;
        Granularity {
            num: *eps.numer() << k,
            den: *eps.denom() * n_plus_one,
        }
    }

    /// `⌊value_num / (value_den · a_k)⌋` for non-negative values.
    fn units(&self, value_num: i128, value_den: i128) -> i128 {
        (value_num * self.den) / (value_den * self.num)
    }
}

/// Bids admitted at scale `k`, with costs expressed in units of `a_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundedInstance {
    pub k: u32,
    pub granularity: Rational,
    /// Roster indices of participating bids with cost at most `2^k`.
    pub kept: Vec<usize>,
    /// `⌊cost / a_k⌋` for each kept bid, aligned with `kept`.
    pub rounded_costs: Vec<i64>,
}

pub fn round_instance(instance: &Instance, k: u32) -> RoundedInstance {
    let g = Granularity::new(instance, k);
    let limit = 1i128 << k;
    let kept: Vec<usize> = instance
        .participants()
        .into_iter()
        .filter(|&i| i128::from(instance.bids[i].cost) <= limit)
        .collect();
    let rounded_costs = kept
        .iter()
        .map(|&i| g.units(i128::from(instance.bids[i].cost), 1) as i64)
        .collect();
    RoundedInstance {
        k,
        granularity: Rational::new(g.num, g.den),
        kept,
        rounded_costs,
    }
}

/// One scale's answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub k: u32,
    pub winners: Vec<TenantId>,
    /// Rounded objective in units of `a_k`.
    pub rounded_objective: i128,
    /// Social cost of `winners` under the declared costs.
    pub true_cost: Rational,
}

#[derive(Debug, Clone)]
struct ScaledCandidate {
    selected: Vec<usize>,
    rounded_objective: i128,
    scaled_cost: i128,
}

fn solve_scale(instance: &Instance, k: u32) -> Result<ScaledCandidate> {
    let rounded = round_instance(instance, k);
    let g = Granularity::new(instance, k);
    let scale = CostScale::new(&instance.config);
    let items: Vec<(i64, i64)> = rounded
        .kept
        .iter()
        .zip(&rounded.rounded_costs)
        .map(|(&i, &c)| (instance.bids[i].size, c))
        .collect();
    let table = build_table(&items)?;
    let n = items.len();

    // The BES branch test uses the exact shortfall; only its cost is floored.
    let bes_den = scale.alpha_den * scale.pue_den;
    let mut best: Option<((i128, i128), usize)> = None;
    for c in 0..=table.cost_bound() {
        let Some(size) = table.max_size(n, c) else {
            continue;
        };
        let shortfall = scale.shortfall(size);
        let bes_units = if shortfall > 0 {
            g.units(scale.alpha_num * shortfall, bes_den)
        } else {
            0
        };
        let key = (c as i128 + bes_units, shortfall);
        if best.is_none_or(|(b, _)| key < b) {
            best = Some((key, c));
        }
    }
    let ((rounded_objective, _), c) = best.expect("the empty set always has cost 0");
    let selected: Vec<usize> = table
        .reconstruct(&items, c)
        .into_iter()
        .map(|p| rounded.kept[p])
        .collect();
    let (size, cost) = selected.iter().fold((0, 0), |(s, k), &i| {
        (s + instance.bids[i].size, k + instance.bids[i].cost)
    });
    Ok(ScaledCandidate {
        selected,
        rounded_objective,
        scaled_cost: scale.scaled_cost(cost, size),
    })
}

/// Solves the rounded problem at scale `k`.
pub fn a_r_solve(instance: &Instance, k: u32) -> Result<Candidate> {
    instance.ensure_valid()?;
    let raw = solve_scale(instance, k)?;
    Ok(candidate_from(instance, k, raw))
}

fn candidate_from(instance: &Instance, k: u32, raw: ScaledCandidate) -> Candidate {
    let allocation = instance.allocation_for(&raw.selected);
    Candidate {
        k,
        winners: allocation.winners,
        rounded_objective: raw.rounded_objective,
        true_cost: allocation.social_cost,
    }
}

/// Lowest true cost wins; ties keep the earlier candidate.
pub fn min_compose(candidates: &[Candidate]) -> Result<&Candidate> {
    let mut iter = candidates.iter();
    let first = iter.next().ok_or(Error::NoCandidates)?;
    Ok(iter.fold(first, |best, c| {
        if c.true_cost < best.true_cost {
            c
        } else {
            best
        }
    }))
}

/// `⌈log2 c_max⌉`, at least 1, over participating bids; `None` when every
/// participating bid is free (or there are none).
pub fn max_scale(instance: &Instance) -> Option<u32> {
    let c_max = instance
        .participants()
        .into_iter()
        .map(|i| instance.bids[i].cost)
        .max()?;
    match c_max {
        0 => None,
        1 => Some(1),
        c => Some(64 - ((c - 1) as u64).leading_zeros()),
    }
}

/// Every candidate of the sweep `k = 1..=⌈log2 c_max⌉`, in ascending `k`.
pub fn sweep_candidates(instance: &Instance) -> Result<Vec<Candidate>> {
    instance.ensure_valid()?;
    let Some(top) = max_scale(instance) else {
        return Ok(Vec::new());
    };
    (1..=top)
        .map(|k| Ok(candidate_from(instance, k, solve_scale(instance, k)?)))
        .collect()
}

pub(crate) fn fptas_select(instance: &Instance) -> Result<Vec<usize>> {
    let Some(top) = max_scale(instance) else {
        return Ok(instance.participants());
    };
    let mut best: Option<ScaledCandidate> = None;
    for k in 1..=top {
        let cand = solve_scale(instance, k)?;
        if best
            .as_ref()
            .is_none_or(|b| cand.scaled_cost < b.scaled_cost)
        {
            best = Some(cand);
        }
    }
    Ok(best.map(|b| b.selected).unwrap_or_default())
}

pub fn fptas_solve(instance: &Instance) -> Result<AllocationResult> {
    instance.ensure_valid()?;
    let selected = fptas_select(instance)?;
    Ok(instance.allocation_for(&selected))
}

/// Outcome of probing a winner with higher declarations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneReport {
    pub tenant: TenantId,
    pub trials: usize,
    /// Declarations at least as good as the original under which the tenant lost.
    pub violations: Vec<Bid>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-runs the FPTAS with `trials` seeded declarations `(s' ≥ s, b' ≤ b)` for
/// `tenant`, which must currently win.
pub fn check_monotone(
    instance: &Instance,
    tenant: &TenantId,
    trials: usize,
    seed: u64,
) -> Result<MonotoneReport> {
    instance.ensure_valid()?;
    let index = instance.index_of(tenant)?;
    if !fptas_select(instance)?.contains(&index) {
        return Err(Error::NotAWinner(tenant.clone()));
    }
    let bid = &instance.bids[index];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    for _ in 0..trials {
        let size = bid.size + rng.random_range(0..=bid.size);
        let cost = rng.random_range(0..=bid.cost);
        if !declaration_wins(instance, index, size, cost)? {
            violations.push(Bid {
                tenant_id: tenant.clone(),
                size,
                cost,
            });
        }
    }
    Ok(MonotoneReport {
        tenant: tenant.clone(),
        trials,
        violations,
    })
}

fn declaration_wins(instance: &Instance, index: usize, size: i64, cost: i64) -> Result<bool> {
    Ok(fptas_select(&instance.with_bid(index, size, cost))?.contains(&index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::published_instance;
    use crate::dopt::{brute_force_solve, dopt_solve};
    use crate::model::AuctionConfig;
    use crate::numeric::floor_int;
    use proptest::prelude::*;

    fn hour5() -> Instance {
        published_instance(5, AuctionConfig::from_tenths(0, 180, 16, 5))
    }

    #[test]
    fn granularity_formula() {
        let r = round_instance(&hour5(), 12);
        assert_eq!(r.granularity, Rational::new(1024, 5));
        // tenant1 costs 2737: floor(2737 / 204.8) = 13
        assert_eq!(r.kept[0], 0);
        assert_eq!(r.rounded_costs[0], 13);
    }

    #[test]
    fn rounded_costs_use_exact_floor() {
        let inst = hour5();
        for k in 1..=14 {
            let r = round_instance(&inst, k);
            for (&i, &c) in r.kept.iter().zip(&r.rounded_costs) {
                let cost = Rational::from_integer(inst.bids[i].cost.into());
                assert_eq!(i128::from(c), floor_int(&(cost / r.granularity)));
                assert!(inst.bids[i].cost <= 1 << k);
                // c' ≤ (n+1)/ε = 20
                assert!(c <= 20);
            }
        }
    }

    #[test]
    fn small_scale_keeps_nothing() {
        assert!(round_instance(&hour5(), 1).kept.is_empty());
    }

    #[test]
    fn empty_scale_is_pure_bes() {
        let inst = Instance::new(hour5().config.with_target(68), hour5().bids);
        let none = a_r_solve(&inst, 1).unwrap();
        assert!(none.winners.is_empty());
        // floor(12240 / (0.5 * 2 / 10)) at k = 1
        assert_eq!(none.rounded_objective, 122_400);
    }

    #[test]
    fn empty_scale_objective_at_k12() {
        // Same arithmetic as the k = 12 BES-only branch: floor(12240 / 204.8) = 59.
        let bids = hour5()
            .bids
            .into_iter()
            .map(|mut b| {
                b.cost = 5000;
                b
            })
            .collect();
        let inst = Instance::new(hour5().config, bids);
        let cand = a_r_solve(&inst, 12).unwrap();
        assert!(cand.winners.is_empty());
        assert_eq!(cand.rounded_objective, 59);
    }

    #[test]
    fn zero_target_keeps_only_free_rounded_bids() {
        // a_13 = 409.6, so only tenant3 (352) rounds to zero units.
        let inst = Instance::new(hour5().config.with_target(0), hour5().bids);
        let cand = a_r_solve(&inst, 13).unwrap();
        assert_eq!(cand.rounded_objective, 0);
        assert_eq!(cand.winners, vec![TenantId::from("tenant3")]);
        assert!(fptas_solve(&inst).unwrap().winners.is_empty());
    }

    #[test]
    fn hour5_full_scale_adds_zero_unit_bid() {
        let cand = a_r_solve(&hour5(), 13).unwrap();
        assert_eq!(round_instance(&hour5(), 13).kept.len(), 9);
        assert_eq!(
            cand.winners,
            vec![TenantId::from("tenant3"), TenantId::from("tenant7")]
        );
        assert_eq!(cand.true_cost, Rational::from_integer(3569 + 352));
    }

    /// Oracle for one scale: enumerate kept subsets with rounded costs.
    fn brute_rounded_objective(inst: &Instance, k: u32) -> i128 {
        let r = round_instance(inst, k);
        let a = r.granularity;
        let cfg = &inst.config;
        let w = Rational::from_integer(cfg.target.into());
        (0u32..1 << r.kept.len())
            .map(|mask| {
                let (mut s, mut c) = (0i64, 0i64);
                for (b, (&i, &rc)) in r.kept.iter().zip(&r.rounded_costs).enumerate() {
                    if mask >> b & 1 == 1 {
                        s += inst.bids[i].size;
                        c += rc;
                    }
                }
                let cover = cfg.pue * Rational::from_integer(s.into());
                let bes = if cover < w {
                    floor_int(&(cfg.bes_unit_cost * (w - cover) / a))
                } else {
                    0
                };
                i128::from(c) + bes
            })
            .min()
            .unwrap()
    }

    #[test]
    fn hour5_scales_match_rounded_enumeration() {
        let inst = hour5();
        for k in 1..=max_scale(&inst).unwrap() {
            let cand = a_r_solve(&inst, k).unwrap();
            assert_eq!(
                cand.rounded_objective,
                brute_rounded_objective(&inst, k),
                "k={k}"
            );
        }
    }

    #[test]
    fn min_compose_keeps_earliest_tie() {
        let mk = |k, cost| Candidate {
            k,
            winners: vec![],
            rounded_objective: 0,
            true_cost: Rational::from_integer(cost),
        };
        let cands = [mk(1, 10), mk(2, 7), mk(3, 7)];
        assert_eq!(min_compose(&cands).unwrap().k, 2);
        assert_eq!(min_compose(&cands[..1]).unwrap(), &cands[0]);
        assert!(matches!(min_compose(&[]), Err(Error::NoCandidates)));
    }

    #[test]
    fn sweep_minimum_matches_oracle_on_hour5() {
        let inst = hour5();
        let cands = sweep_candidates(&inst).unwrap();
        assert_eq!(cands.len(), 13);
        let best = min_compose(&cands).unwrap();
        assert_eq!(best.winners, vec![TenantId::from("tenant7")]);
        assert_eq!(
            best.true_cost,
            brute_force_solve(&inst).unwrap().social_cost
        );
        assert_eq!(fptas_solve(&inst).unwrap().winners, best.winners);
    }

    #[test]
    fn hour5_ratio_within_one_plus_eps() {
        let inst = hour5();
        let ratio =
            fptas_solve(&inst).unwrap().social_cost / dopt_solve(&inst).unwrap().social_cost;
        assert!(ratio >= Rational::from_integer(1));
        assert!(ratio <= Rational::new(3, 2));
    }

    #[test]
    fn trivial_cover_at_cost_one() {
        let inst = Instance::new(
            AuctionConfig::from_tenths(50, 180, 16, 5),
            vec![
                Bid::new("a", 10, 900),
                Bid::new("cheap", 40, 1),
                Bid::new("b", 20, 700),
            ],
        );
        let res = fptas_solve(&inst).unwrap();
        assert_eq!(res.winners, vec![TenantId::from("cheap")]);
        assert_eq!(res.social_cost, dopt_solve(&inst).unwrap().social_cost);
    }

    #[test]
    fn all_free_bids_are_taken() {
        let inst = Instance::new(
            AuctionConfig::from_tenths(50, 180, 16, 5),
            vec![
                Bid::new("a", 10, 0),
                Bid::new("idle", 0, 0),
                Bid::new("b", 5, 0),
            ],
        );
        assert_eq!(max_scale(&inst), None);
        let res = fptas_solve(&inst).unwrap();
        assert_eq!(res.winners, vec![TenantId::from("a"), TenantId::from("b")]);
        assert_eq!(res.bes_usage, Rational::from_integer(26));
    }

    #[test]
    fn scale_bounds() {
        let inst = |c| {
            Instance::new(
                AuctionConfig::from_tenths(5, 10, 10, 5),
                vec![Bid::new("a", 1, c)],
            )
        };
        assert_eq!(max_scale(&inst(1)), Some(1));
        assert_eq!(max_scale(&inst(2)), Some(1));
        assert_eq!(max_scale(&inst(3)), Some(2));
        assert_eq!(max_scale(&inst(4096)), Some(12));
        assert_eq!(max_scale(&inst(4097)), Some(13));
    }

    #[test]
    fn monotone_hour5_winner() {
        let report = check_monotone(&hour5(), &"tenant7".into(), 50, 7).unwrap();
        assert_eq!(report.trials, 50);
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn identity_and_free_declarations_still_win() {
        let inst = hour5();
        let i = inst.index_of(&"tenant7".into()).unwrap();
        assert!(declaration_wins(&inst, i, 43, 3569).unwrap());
        assert!(declaration_wins(&inst, i, 43, 0).unwrap());
    }

    #[test]
    fn monotone_requires_a_winner() {
        let err = check_monotone(&hour5(), &"tenant1".into(), 5, 1).unwrap_err();
        assert!(matches!(err, Error::NotAWinner(_)));
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        (
            1i64..250,
            100i64..=320,
            11i64..=20,
            prop::sample::select(vec![1i64, 5, 10]),
            prop::collection::vec((0i64..60, 0i64..3000), 1..8),
        )
            .prop_map(|(w, a, g, e, bids)| {
                let bids = bids
                    .into_iter()
                    .enumerate()
                    .map(|(i, (s, c))| Bid::new(format!("t{i}"), s, c))
                    .collect();
                Instance::new(AuctionConfig::from_tenths(w, a, g, e), bids)
            })
    }

    proptest! {
        #[test]
        fn rounding_ignores_other_bids(inst in arb_instance(), k in 1u32..14, other in 0i64..5000) {
            prop_assume!(inst.len() >= 2);
            let changed = inst.with_bid(1, inst.bids[1].size, other);
            let a = round_instance(&inst, k);
            let b = round_instance(&changed, k);
            prop_assert_eq!(a.granularity, b.granularity);
            let first = |r: &RoundedInstance| r.kept.iter().position(|&i| i == 0).map(|p| r.rounded_costs[p]);
            prop_assert_eq!(first(&a), first(&b));
        }

        #[test]
        fn ratio_within_proven_bound(inst in arb_instance()) {
            let opt = dopt_solve(&inst).unwrap().social_cost;
            let approx = fptas_solve(&inst).unwrap().social_cost;
            let bound = Rational::from_integer(1) + inst.config.epsilon * Rational::from_integer(2);
            prop_assert!(approx >= opt);
            prop_assert!(approx <= opt * bound);
        }

        #[test]
        fn winners_stay_winners(inst in arb_instance(), pick in 0usize..8, ds in 0i64..30, dc in 0i64..3000) {
            let selected = fptas_select(&inst).unwrap();
            prop_assume!(!selected.is_empty());
            let i = selected[pick % selected.len()];
            let bid = &inst.bids[i];
            prop_assert!(declaration_wins(&inst, i, bid.size + ds, (bid.cost - dc).max(0)).unwrap());
        }
    }
}
