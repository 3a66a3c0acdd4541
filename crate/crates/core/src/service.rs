//! Auction lifecycle behind the HTTP front end: open an auction, collect one
//! bid per tenant, clear it with a chosen allocator, and report results.
//!
//! With a data directory configured, every auction is an append-only JSON
//! lines log (`auction-<id>.jsonl`) of `created`, `bid` and `closed` events;
//! [`AuctionService::open`] replays those logs on start-up.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::mechanism::{run_mechanism, AllocatorTag, MechanismOutcome};
use crate::model::{AuctionConfig, Bid, Instance, TenantId, Violation};

pub type AuctionId = u64;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid config: {0:?}")]
    InvalidConfig(Vec<Violation>),
    #[error("invalid bid: {0:?}")]
    InvalidBid(Vec<Violation>),
    #[error("unsupported clearing algorithm {0}")]
    UnsupportedAlgorithm(AllocatorTag),
    #[error("{0}")]
    Conflict(String),
    #[error("auction {0} not found")]
    NotFound(AuctionId),
    #[error("{bids} bids exceed the clearing limit of {limit}")]
    TooLarge { bids: usize, limit: usize },
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("auction log {path}: {message}")]
    Storage { path: PathBuf, message: String },
}

impl ServiceError {
    /// HTTP status class for this error.
    pub fn status_code(&self) -> u16 {
        match self {
            ServiceError::InvalidConfig(_)
            | ServiceError::InvalidBid(_)
            | ServiceError::UnsupportedAlgorithm(_) => 422,
            ServiceError::Conflict(_) => 409,
            ServiceError::NotFound(_) => 404,
            ServiceError::TooLarge { .. } => 413,
            ServiceError::Solver(Error::Validation(_)) => 422,
            ServiceError::Solver(_) | ServiceError::Storage { .. } => 500,
        }
    }
}

type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Where auction logs live; `None` keeps everything in memory.
    pub data_dir: Option<PathBuf>,
    /// Largest roster a close request will clear.
    pub max_bids: usize,
    /// Let a tenant's second bid replace its first instead of rejecting it.
    pub allow_bid_replacement: bool,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions {
            data_dir: None,
            max_bids: 64,
            allow_bid_replacement: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuctionState {
    Open,
    Closed,
}

#[derive(Debug, Clone)]
pub struct Auction {
    pub id: AuctionId,
    pub config: AuctionConfig,
    pub bids: Vec<Bid>,
    pub outcome: Option<MechanismOutcome>,
}

impl Auction {
    pub fn state(&self) -> AuctionState {
        if self.outcome.is_some() {
            AuctionState::Closed
        } else {
            AuctionState::Open
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum Event {
    Created {
        id: AuctionId,
        config: AuctionConfig,
    },
    Bid {
        bid: Bid,
    },
    Closed {
        algorithm: AllocatorTag,
    },
}

/// Public view of an auction. Open auctions only reveal how many bids they hold.
#[derive(Debug, Clone)]
pub enum AuctionView {
    Open {
        id: AuctionId,
        bids: usize,
    },
    Closed {
        id: AuctionId,
        outcome: MechanismOutcome,
    },
}

impl AuctionView {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AuctionView::Open { id, bids } => json!({"id": id, "state": "open", "bids": bids}),
            AuctionView::Closed { id, outcome } => {
                json!({"id": id, "state": "closed", "outcome": outcome.to_json_value()})
            }
        }
    }
}

/// What one tenant may learn about an auction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TenantView {
    pub id: AuctionId,
    pub tenant: TenantId,
    pub state: AuctionState,
    pub submitted: bool,
    /// `Some(payment)` once closed; zero for losers.
    pub payment: Option<i64>,
    pub won: bool,
}

impl TenantView {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "id": self.id,
            "state": self.state,
            "tenant_id": self.tenant,
            "submitted": self.submitted,
        });
        if let Some(p) = self.payment {
            v["won"] = json!(self.won);
            v["payment_usd"] = json!(p);
        }
        v
    }
}

#[derive(Debug, Default)]
struct Registry {
    next_id: AuctionId,
    auctions: BTreeMap<AuctionId, Arc<Mutex<Auction>>>,
}

#[derive(Debug, Default)]
pub struct AuctionService {
    options: ServiceOptions,
    registry: Mutex<Registry>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl AuctionService {
    pub fn in_memory() -> Self {
        AuctionService::default()
    }

    /// Opens the service, replaying any auction logs under `options.data_dir`.
    pub fn open(options: ServiceOptions) -> ServiceResult<Self> {
        let service = AuctionService {
            options,
            registry: Mutex::new(Registry {
                next_id: 1,
                auctions: BTreeMap::new(),
            }),
        };
        if let Some(dir) = service.options.data_dir.clone() {
            fs::create_dir_all(&dir).map_err(|e| storage(&dir, e))?;
            let mut logs: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| storage(&dir, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("auction-") && n.ends_with(".jsonl"))
                })
                .collect();
            logs.sort();
            for path in logs {
                let auction = replay(&path)?;
                let mut reg = lock(&service.registry);
                reg.next_id = reg.next_id.max(auction.id + 1);
                reg.auctions
                    .insert(auction.id, Arc::new(Mutex::new(auction)));
            }
        }
        Ok(service)
    }

    pub fn options(&self) -> &ServiceOptions {
        &self.options
    }

    fn log_path(&self, id: AuctionId) -> Option<PathBuf> {
        self.options
            .data_dir
            .as_ref()
            .map(|d| d.join(format!("auction-{id:08}.jsonl")))
    }

    fn append(&self, id: AuctionId, event: &Event) -> ServiceResult<()> {
        let Some(path) = self.log_path(id) else {
            return Ok(());
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| storage(&path, e))?;
        let mut line = serde_json::to_string(event).map_err(|e| storage(&path, e))?;
        line.push('\n');
        file.write_all(line.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|e| storage(&path, e))
    }

    fn auction(&self, id: AuctionId) -> ServiceResult<Arc<Mutex<Auction>>> {
        lock(&self.registry)
            .auctions
            .get(&id)
            .cloned()
            .ok_or(ServiceError::NotFound(id))
    }

    pub fn create_auction(&self, config: AuctionConfig) -> ServiceResult<AuctionId> {
        let violations = config.violations();
        if !violations.is_empty() {
            return Err(ServiceError::InvalidConfig(violations));
        }
        let mut reg = lock(&self.registry);
        let id = reg.next_id.max(1);
        self.append(
            id,
            &Event::Created {
                id,
                config: config.clone(),
            },
        )?;
        reg.next_id = id + 1;
        reg.auctions.insert(
            id,
            Arc::new(Mutex::new(Auction {
                id,
                config,
                bids: Vec::new(),
                outcome: None,
            })),
        );
        Ok(id)
    }

    pub fn submit_bid(&self, id: AuctionId, bid: Bid) -> ServiceResult<()> {
        let mut bid_violations = Vec::new();
        if bid.size < 0 {
            bid_violations.push(Violation::NegativeSize(bid.tenant_id.clone(), bid.size));
        }
        if bid.cost < 0 {
            bid_violations.push(Violation::NegativeCost(bid.tenant_id.clone(), bid.cost));
        }
        if !bid_violations.is_empty() {
            return Err(ServiceError::InvalidBid(bid_violations));
        }

        let handle = self.auction(id)?;
        let mut auction = lock(&handle);
        if auction.outcome.is_some() {
            return Err(ServiceError::Conflict(format!("auction {id} is closed")));
        }
        let existing = auction
            .bids
            .iter()
            .position(|b| b.tenant_id == bid.tenant_id);
        if existing.is_some() && !self.options.allow_bid_replacement {
            return Err(ServiceError::Conflict(format!(
                "tenant {} already bid in auction {id}",
                bid.tenant_id
            )));
        }
        self.append(id, &Event::Bid { bid: bid.clone() })?;
        apply_bid(&mut auction, bid);
        Ok(())
    }

    pub fn close_auction(
        &self,
        id: AuctionId,
        algorithm: AllocatorTag,
    ) -> ServiceResult<MechanismOutcome> {
        if algorithm == AllocatorTag::Bes {
            return Err(ServiceError::UnsupportedAlgorithm(algorithm));
        }
        let handle = self.auction(id)?;
        let mut auction = lock(&handle);
        if auction.outcome.is_some() {
            return Err(ServiceError::Conflict(format!(
                "auction {id} is already closed"
            )));
        }
        if auction.bids.len() > self.options.max_bids {
            return Err(ServiceError::TooLarge {
                bids: auction.bids.len(),
                limit: self.options.max_bids,
            });
        }
        let outcome = clear(&auction, algorithm)?;
        self.append(id, &Event::Closed { algorithm })?;
        auction.outcome = Some(outcome.clone());
        Ok(outcome)
    }

    pub fn get_results(&self, id: AuctionId) -> ServiceResult<AuctionView> {
        let handle = self.auction(id)?;
        let auction = lock(&handle);
        Ok(match &auction.outcome {
            Some(outcome) => AuctionView::Closed {
                id,
                outcome: outcome.clone(),
            },
            None => AuctionView::Open {
                id,
                bids: auction.bids.len(),
            },
        })
    }

    pub fn tenant_status(&self, id: AuctionId, tenant: &TenantId) -> ServiceResult<TenantView> {
        let handle = self.auction(id)?;
        let auction = lock(&handle);
        let submitted = auction.bids.iter().any(|b| &b.tenant_id == tenant);
        let (payment, won) = match &auction.outcome {
            Some(o) => (
                Some(o.payments.get(tenant).unwrap_or(0)),
                o.allocation.is_winner(tenant),
            ),
            None => (None, false),
        };
        Ok(TenantView {
            id,
            tenant: tenant.clone(),
            state: auction.state(),
            submitted,
            payment,
            won,
        })
    }
}

fn apply_bid(auction: &mut Auction, bid: Bid) {
    match auction
        .bids
        .iter_mut()
        .find(|b| b.tenant_id == bid.tenant_id)
    {
        Some(slot) => *slot = bid,
        None => auction.bids.push(bid),
    }
}

fn clear(auction: &Auction, algorithm: AllocatorTag) -> ServiceResult<MechanismOutcome> {
    let instance = Instance::checked(auction.config.clone(), auction.bids.clone())?;
    Ok(run_mechanism(&instance, &algorithm)?)
}

fn storage(path: &Path, err: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage {
        path: path.to_path_buf(),
        message: err.to_string(),
    }
}

fn replay(path: &Path) -> ServiceResult<Auction> {
    let file = fs::File::open(path).map_err(|e| storage(path, e))?;
    let mut auction: Option<Auction> = None;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| storage(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| storage(path, format!("line {}: {e}", n + 1)))?;
        match (event, auction.as_mut()) {
            (Event::Created { id, config }, None) => {
                auction = Some(Auction {
                    id,
                    config,
                    bids: Vec::new(),
                    outcome: None,
                })
            }
            (Event::Bid { bid }, Some(a)) if a.outcome.is_none() => apply_bid(a, bid),
            (Event::Closed { algorithm }, Some(a)) if a.outcome.is_none() => {
                a.outcome = Some(clear(a, algorithm)?);
            }
            (_, _) => {
                return Err(storage(path, format!("line {}: event out of order", n + 1)));
            }
        }
    }
    auction.ok_or_else(|| storage(path, "no created event"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::published_bids;
    use crate::numeric::Rational;

    fn hour5_config() -> AuctionConfig {
        AuctionConfig::from_tenths(68, 180, 16, 5)
    }

    #[test]
    fn create_accepts_degenerate_and_rejects_bad_pue() {
        let svc = AuctionService::in_memory();
        let id = svc.create_auction(hour5_config()).unwrap();
        assert!(matches!(
            svc.get_results(id).unwrap(),
            AuctionView::Open { bids: 0, .. }
        ));
        assert!(svc.create_auction(hour5_config().with_target(0)).is_ok());
        let err = svc
            .create_auction(AuctionConfig::from_tenths(68, 180, 5, 5))
            .unwrap_err();
        assert_eq!(err.status_code(), 422);
        let a = svc.create_auction(hour5_config()).unwrap();
        assert_ne!(a, id);
    }

    #[test]
    fn one_bid_per_tenant() {
        let svc = AuctionService::in_memory();
        let id = svc.create_auction(hour5_config()).unwrap();
        svc.submit_bid(id, Bid::new("tenant7", 43, 3569)).unwrap();
        let err = svc
            .submit_bid(id, Bid::new("tenant7", 40, 3000))
            .unwrap_err();
        assert_eq!(err.status_code(), 409);
        let err = svc
            .submit_bid(id, Bid::new("tenant8", -1, 3000))
            .unwrap_err();
        assert_eq!(err.status_code(), 422);
    }

    #[test]
    fn replacement_policy() {
        let svc = AuctionService::open(ServiceOptions {
            allow_bid_replacement: true,
            ..ServiceOptions::default()
        })
        .unwrap();
        let id = svc.create_auction(hour5_config()).unwrap();
        svc.submit_bid(id, Bid::new("tenant7", 43, 3569)).unwrap();
        svc.submit_bid(id, Bid::new("tenant7", 40, 3000)).unwrap();
        assert!(matches!(
            svc.get_results(id).unwrap(),
            AuctionView::Open { bids: 1, .. }
        ));
    }

    #[test]
    fn close_matches_offline_mechanism() {
        let svc = AuctionService::in_memory();
        let id = svc.create_auction(hour5_config()).unwrap();
        for bid in published_bids(5).unwrap() {
            svc.submit_bid(id, bid).unwrap();
        }
        let outcome = svc.close_auction(id, AllocatorTag::Fptas).unwrap();
        let offline = run_mechanism(
            &Instance::new(hour5_config(), published_bids(5).unwrap()),
            &AllocatorTag::Fptas,
        )
        .unwrap();
        assert_eq!(outcome.to_json(), offline.to_json());

        let err = svc.close_auction(id, AllocatorTag::Fptas).unwrap_err();
        assert_eq!(err.status_code(), 409);
        let err = svc.submit_bid(id, Bid::new("late", 1, 1)).unwrap_err();
        assert_eq!(err.status_code(), 409);
        match svc.get_results(id).unwrap() {
            AuctionView::Closed { outcome: o, .. } => assert_eq!(o, outcome),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_auction_clears_to_pure_bes() {
        let svc = AuctionService::in_memory();
        let id = svc.create_auction(hour5_config()).unwrap();
        let out = svc.close_auction(id, AllocatorTag::Fptas).unwrap();
        assert!(out.allocation.winners.is_empty());
        assert_eq!(out.allocation.bes_usage, Rational::from_integer(68));
        assert_eq!(out.allocation.social_cost, Rational::from_integer(12240));
    }

    #[test]
    fn unknown_auction() {
        let svc = AuctionService::in_memory();
        assert_eq!(svc.get_results(99).unwrap_err().status_code(), 404);
        assert_eq!(
            svc.submit_bid(99, Bid::new("a", 1, 1))
                .unwrap_err()
                .status_code(),
            404
        );
    }

    #[test]
    fn size_limit() {
        let svc = AuctionService::open(ServiceOptions {
            max_bids: 2,
            ..ServiceOptions::default()
        })
        .unwrap();
        let id = svc.create_auction(hour5_config()).unwrap();
        for i in 0..3 {
            svc.submit_bid(id, Bid::new(format!("t{i}"), 1, 1)).unwrap();
        }
        assert_eq!(
            svc.close_auction(id, AllocatorTag::Dopt)
                .unwrap_err()
                .status_code(),
            413
        );
    }

    #[test]
    fn open_view_hides_bids() {
        let svc = AuctionService::in_memory();
        let id = svc.create_auction(hour5_config()).unwrap();
        svc.submit_bid(id, Bid::new("tenant7", 43, 3569)).unwrap();
        let text = svc.get_results(id).unwrap().to_json().to_string();
        assert!(
            !text.contains("3569") && !text.contains("tenant7"),
            "{text}"
        );
        let view = svc.tenant_status(id, &"tenant7".into()).unwrap();
        assert!(view.submitted && view.payment.is_none());
    }

    #[test]
    fn restart_replays_the_log() {
        let dir = tempfile::tempdir().unwrap();
        let options = ServiceOptions {
            data_dir: Some(dir.path().to_path_buf()),
            ..ServiceOptions::default()
        };
        let (closed, open, outcome) = {
            let svc = AuctionService::open(options.clone()).unwrap();
            let closed = svc.create_auction(hour5_config()).unwrap();
            for bid in published_bids(5).unwrap() {
                svc.submit_bid(closed, bid).unwrap();
            }
            let outcome = svc.close_auction(closed, AllocatorTag::Dopt).unwrap();
            let open = svc.create_auction(hour5_config()).unwrap();
            svc.submit_bid(open, Bid::new("x", 10, 100)).unwrap();
            (closed, open, outcome)
        };
        let svc = AuctionService::open(options).unwrap();
        match svc.get_results(closed).unwrap() {
            AuctionView::Closed { outcome: o, .. } => assert_eq!(o, outcome),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            svc.get_results(open).unwrap(),
            AuctionView::Open { bids: 1, .. }
        ));
        let next = svc.create_auction(hour5_config()).unwrap();
        assert!(next > open);
        let t7 = svc.tenant_status(closed, &"tenant7".into()).unwrap();
        assert!(t7.won);
        assert_eq!(t7.payment, Some(4484));
    }
}
