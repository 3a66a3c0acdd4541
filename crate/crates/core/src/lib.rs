//! Reverse-auction engine for emergency demand response in multi-tenant
//! colocation data centers.
//!
//! Tenants bid an energy reduction and an asking price; the operator covers
//! any remaining shortfall from backup generation (BES). Allocation is either
//! exact ([`dopt`]) or a monotone FPTAS ([`fptas`]), and winners are paid
//! their critical value ([`mechanism`]).

pub mod dataset;
pub mod dopt;
pub mod error;
pub mod fptas;
pub mod harness;
pub mod mechanism;
pub mod model;
pub mod numeric;
pub mod service;

pub use dopt::{brute_force_solve, dopt_solve, DpTable};
pub use error::{Error, Result};
pub use fptas::{a_r_solve, check_monotone, fptas_solve, min_compose, Candidate, MonotoneReport};
pub use mechanism::{
    check_individual_rationality, check_truthful, critical_payment, run_mechanism, Allocator,
    AllocatorTag, MechanismOutcome, Tenant,
};
pub use model::{
    social_cost, utility, validate_instance, AllocationResult, AuctionConfig, Bid, Instance,
    PaymentSchedule, TenantId, TrueType, Violation,
};
pub use numeric::{format_rational, parse_rational, Rational};
pub use service::{AuctionService, ServiceError, ServiceOptions};
