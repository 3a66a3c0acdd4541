//! Exact pseudo-polynomial solver.
//!
//! The table stores, for every prefix of items and every exact total cost,
//! the largest total size any subset can reach. The optimum then follows
//! from one scan over the full-prefix row: each achievable cost `c` is
//! topped up with BES to the target.

use crate::error::{Error, Result};
use crate::model::{AllocationResult, CostScale, Instance};

/// Cell value for "no subset has exactly this cost".
const NO_SET: i64 = -1;

/// Exhaustive search refuses rosters with more participants than this.
pub const BRUTE_FORCE_LIMIT: usize = 25;

#[derive(Debug, Clone)]
pub struct DpTable {
    items: usize,
    cost_bound: usize,
    max_size: Vec<i64>,
    took_item: Vec<bool>,
}

impl DpTable {
    /// Fills the table for `items` given as `(size, cost)` pairs, with costs
    /// ranging over `0..=cost_bound`.
    pub fn build(items: &[(i64, i64)], cost_bound: usize) -> Result<Self> {
        let rows = items.len() + 1;
        let columns = cost_bound.checked_add(1).ok_or(Error::TableTooLarge {
            rows,
            columns: cost_bound as u128 + 1,
        })?;
        let too_large = || Error::TableTooLarge {
            rows,
            columns: columns as u128,
        };
        let cells = rows.checked_mul(columns).ok_or_else(too_large)?;

        let mut max_size = Vec::new();
        max_size.try_reserve_exact(cells).map_err(|_| too_large())?;
        let mut took_item = Vec::new();
        took_item
            .try_reserve_exact(cells)
            .map_err(|_| too_large())?;

        max_size.push(0);
        max_size.resize(columns, NO_SET);
        took_item.resize(columns, false);

        for (i, &(size, cost)) in items.iter().enumerate() {
            let prev = i * columns;
            let cost = usize::try_from(cost).unwrap_or(usize::MAX);
            for c in 0..columns {
                let skip = max_size[prev + c];
                let take = if cost <= c && max_size[prev + c - cost] != NO_SET {
                    max_size[prev + c - cost] + size
                } else {
                    NO_SET
                };
                // Ties keep the skip branch.
                if take != NO_SET && take > skip {
                    max_size.push(take);
                    took_item.push(true);
                } else {
                    max_size.push(skip);
                    took_item.push(false);
                }
            }
        }

        Ok(DpTable {
            items: items.len(),
            cost_bound,
            max_size,
            took_item,
        })
    }

    pub fn item_count(&self) -> usize {
        self.items
    }

    pub fn cost_bound(&self) -> usize {
        self.cost_bound
    }

    /// Largest total size of a subset of the first `prefix` items whose cost is
    /// exactly `cost`, or `None` when no such subset exists.
    pub fn max_size(&self, prefix: usize, cost: usize) -> Option<i64> {
        let v = self.max_size[prefix * (self.cost_bound + 1) + cost];
        (v != NO_SET).then_some(v)
    }

    pub fn took_item(&self, prefix: usize, cost: usize) -> bool {
        self.took_item[prefix * (self.cost_bound + 1) + cost]
    }

    /// Positions (into the item list) of the subset realising `max_size(n, cost)`.
    pub fn reconstruct(&self, items: &[(i64, i64)], cost: usize) -> Vec<usize> {
        let mut chosen = Vec::new();
        let mut c = cost;
        for i in (1..=self.items).rev() {
            if self.took_item(i, c) {
                chosen.push(i - 1);
                c -= items[i - 1].1 as usize;
            }
        }
        chosen.reverse();
        chosen
    }
}

/// Builds the table for the given items with cost horizon `Σ cost`.
pub fn build_table(items: &[(i64, i64)]) -> Result<DpTable> {
    let bound: i64 = items.iter().map(|&(_, c)| c).sum();
    DpTable::build(items, bound as usize)
}

/// Exact optimum as selected roster indices.
pub(crate) fn dopt_select(instance: &Instance) -> Result<Vec<usize>> {
    let participants = instance.participants();
    let items: Vec<(i64, i64)> = participants
        .iter()
        .map(|&i| (instance.bids[i].size, instance.bids[i].cost))
        .collect();
    let table = build_table(&items)?;
    let scale = CostScale::new(&instance.config);
    let n = items.len();

    // Minimise (social cost, BES shortfall); scanning c upwards keeps the
    // smallest c among exact ties.
    let mut best: Option<((i128, i128), usize)> = None;
    for c in 0..=table.cost_bound() {
        let Some(size) = table.max_size(n, c) else {
            continue;
        };
        let key = (scale.scaled_cost(c as i64, size), scale.shortfall(size));
        if best.is_none_or(|(k, _)| key < k) {
            best = Some((key, c));
        }
    }
    let (_, cost) = best.expect("the empty set always has cost 0");
    Ok(table
        .reconstruct(&items, cost)
        .into_iter()
        .map(|p| participants[p])
        .collect())
}

/// Minimum-social-cost allocation computed exactly by dynamic programming.
pub fn dopt_solve(instance: &Instance) -> Result<AllocationResult> {
    instance.ensure_valid()?;
    let selected = dopt_select(instance)?;
    Ok(instance.allocation_for(&selected))
}

/// Enumerates every subset of participating bids. Ties on social cost are
/// broken the same way as [`dopt_solve`]: less BES, then lower tenant cost,
/// then larger size, then the subset avoiding later roster entries.
pub fn brute_force_solve(instance: &Instance) -> Result<AllocationResult> {
    instance.ensure_valid()?;
    let participants = instance.participants();
    if participants.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::TooManyBids {
            count: participants.len(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let scale = CostScale::new(&instance.config);
    let mut best: Option<((i128, i128, i64, i64), u64)> = None;
    for mask in 0u64..(1u64 << participants.len()) {
        let (mut size, mut cost) = (0i64, 0i64);
        for (bit, &i) in participants.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                size += instance.bids[i].size;
                cost += instance.bids[i].cost;
            }
        }
        let key = (
            scale.scaled_cost(cost, size),
            scale.shortfall(size),
            cost,
            -size,
        );
        // Masks ascend, so strict improvement keeps the smallest mask.
        if best.is_none_or(|(k, _)| key < k) {
            best = Some((key, mask));
        }
    }
    let (_, mask) = best.expect("at least the empty subset");
    let selected: Vec<usize> = participants
        .iter()
        .enumerate()
        .filter(|(bit, _)| mask >> bit & 1 == 1)
        .map(|(_, &i)| i)
        .collect();
    Ok(instance.allocation_for(&selected))
}
