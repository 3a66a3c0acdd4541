//! Experiment driver over the published instances: approximation-ratio
//! sweeps, winner utilities, and the comparison against BES-only coverage.
//!
//! Every table is computed with exact arithmetic and written as CSV whose
//! numeric cells use the decimal-or-`p/q` encoding of [`format_rational`].

use std::io::{Read, Write};

use num_traits::Zero;
use rayon::prelude::*;

use crate::dataset::{published_instances, HourInstance};
use crate::dopt::dopt_solve;
use crate::error::{Error, Result};
use crate::fptas::fptas_solve;
use crate::mechanism::{run_mechanism, AllocatorTag};
use crate::model::AuctionConfig;
use crate::numeric::{format_rational, parse_rational, Rational};

pub const DEFAULT_ALPHA: i128 = 180;

pub fn default_gamma() -> Rational {
    Rational::new(8, 5)
}

pub fn default_epsilon() -> Rational {
    Rational::new(1, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Alpha,
    Gamma,
    Epsilon,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Epsilon => "epsilon",
        }
    }

    /// α ∈ {140, 160, …, 320}; γ ∈ {1.1, …, 2.0}; ε ∈ {0.1, …, 1.0}.
    pub fn grid(self) -> Vec<Rational> {
        match self {
            SweepAxis::Alpha => (140..=320)
                .step_by(20)
                .map(Rational::from_integer)
                .collect(),
            SweepAxis::Gamma => (11..=20).map(|g| Rational::new(g, 10)).collect(),
            SweepAxis::Epsilon => (1..=10).map(|e| Rational::new(e, 10)).collect(),
        }
    }

    /// Default α = 180, γ = 1.6, ε = 0.5 with this axis set to `value`.
    pub fn params(self, value: Rational) -> (Rational, Rational, Rational) {
        let (mut a, mut g, mut e) = (
            Rational::from_integer(DEFAULT_ALPHA),
            default_gamma(),
            default_epsilon(),
        );
        match self {
            SweepAxis::Alpha => a = value,
            SweepAxis::Gamma => g = value,
            SweepAxis::Epsilon => e = value,
        }
        (a, g, e)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha" => Ok(SweepAxis::Alpha),
            "gamma" => Ok(SweepAxis::Gamma),
            "epsilon" => Ok(SweepAxis::Epsilon),
            other => Err(format!("unknown sweep axis {other:?}")),
        }
    }
}

/// Runs `f` on every (hour, grid value) pair, ordered by hour then value.
fn over_grid<T: Send>(
    axis: SweepAxis,
    f: impl Fn(&HourInstance, Rational) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let points: Vec<(HourInstance, Rational)> = {
        let (a, g, e) = axis.params(Rational::zero());
        let base = published_instances(a, g, e);
        base.into_iter()
            .flat_map(|p| axis.grid().into_iter().map(move |v| (p.clone(), v)))
            .collect()
    };
    points
        .par_iter()
        .map(|(p, value)| {
            let (alpha, gamma, epsilon) = axis.params(*value);
            let config = AuctionConfig::new(p.instance.config.target, alpha, gamma, epsilon);
            let instance = crate::model::Instance::new(config, p.instance.bids.clone());
            f(
                &HourInstance {
                    hour: p.hour,
                    instance,
                },
                *value,
            )
        })
        .collect()
}

fn ratio_or_one(num: Rational, den: Rational) -> Rational {
    if den.is_zero() {
        Rational::from_integer(1)
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioRecord {
    pub hour: u32,
    pub alpha: Rational,
    pub gamma: Rational,
    pub epsilon: Rational,
    pub cost_fptas: Rational,
    pub cost_dopt: Rational,
    /// `cost_fptas / cost_dopt`, or 1 when both are zero.
    pub ratio: Rational,
}

pub fn sweep(axis: SweepAxis) -> Result<Vec<RatioRecord>> {
    over_grid(axis, |p, _| {
        let cfg = &p.instance.config;
        let cost_fptas = fptas_solve(&p.instance)?.social_cost;
        let cost_dopt = dopt_solve(&p.instance)?.social_cost;
        Ok(RatioRecord {
            hour: p.hour,
            alpha: cfg.bes_unit_cost,
            gamma: cfg.pue,
            epsilon: cfg.epsilon,
            cost_fptas,
            cost_dopt,
            ratio: ratio_or_one(cost_fptas, cost_dopt),
        })
    })
}

pub fn sweep_alpha() -> Result<Vec<RatioRecord>> {
    sweep(SweepAxis::Alpha)
}

pub fn sweep_gamma() -> Result<Vec<RatioRecord>> {
    sweep(SweepAxis::Gamma)
}

pub fn sweep_epsilon() -> Result<Vec<RatioRecord>> {
    sweep(SweepAxis::Epsilon)
}

const RATIO_HEADER: [&str; 7] = [
    "hour",
    "alpha",
    "gamma",
    "epsilon",
    "cost_fptas",
    "cost_dopt",
    "ratio",
];

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::parse(line, e.to_string())
}

fn write_table<W: Write>(writer: W, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_ratio_csv<W: Write>(writer: W, records: &[RatioRecord]) -> Result<()> {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.hour.to_string(),
                format_rational(&r.alpha),
                format_rational(&r.gamma),
                format_rational(&r.epsilon),
                format_rational(&r.cost_fptas),
                format_rational(&r.cost_dopt),
                format_rational(&r.ratio),
            ]
        })
        .collect();
    write_table(writer, &RATIO_HEADER, rows)
}

pub fn read_ratio_csv<R: Read>(reader: R) -> Result<Vec<RatioRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != RATIO_HEADER {
        return Err(Error::parse(1, "unexpected ratio table header"));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            let num =
                |i: usize| parse_rational(&rec[i]).map_err(|e| Error::parse(line, e.to_string()));
            Ok(RatioRecord {
                hour: rec[0]
                    .parse()
                    .map_err(|_| Error::parse(line, "hour is not an integer"))?,
                alpha: num(1)?,
                gamma: num(2)?,
                epsilon: num(3)?,
                cost_fptas: num(4)?,
                cost_dopt: num(5)?,
                ratio: num(6)?,
            })
        })
        .collect()
}

pub fn ratio_csv(records: &[RatioRecord]) -> String {
    let mut buf = Vec::new();
    write_ratio_csv(&mut buf, records).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

/// One winner of a truthful FPTAS run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityRecord {
    pub hour: u32,
    pub tenant_id: String,
    pub payment: i64,
    pub cost: i64,
    pub utility: i64,
}

/// Winner payments and utilities on every published instance, bidding truthfully.
pub fn utility_report(
    alpha: Rational,
    gamma: Rational,
    epsilon: Rational,
) -> Result<Vec<UtilityRecord>> {
    let per_hour: Vec<Vec<UtilityRecord>> = published_instances(alpha, gamma, epsilon)
        .par_iter()
        .map(|p| {
            let out = run_mechanism(&p.instance, &AllocatorTag::Fptas)?;
            Ok(p.instance
                .bids
                .iter()
                .filter(|b| out.allocation.is_winner(&b.tenant_id))
                .map(|b| {
                    let payment = out.payments.get(&b.tenant_id).unwrap_or(0);
                    UtilityRecord {
                        hour: p.hour,
                        tenant_id: b.tenant_id.to_string(),
                        payment,
                        cost: b.cost,
                        utility: payment - b.cost,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_hour.into_iter().flatten().collect())
}

pub fn write_utility_csv<W: Write>(writer: W, records: &[UtilityRecord]) -> Result<()> {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.hour.to_string(),
                r.tenant_id.clone(),
                r.payment.to_string(),
                r.cost.to_string(),
                r.utility.to_string(),
            ]
        })
        .collect();
    write_table(
        writer,
        &["hour", "tenant_id", "payment", "cost", "utility"],
        rows,
    )
}

/// FPTAS social cost against covering the whole target with BES.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BesRecord {
    pub axis: SweepAxis,
    pub hour: u32,
    pub alpha: Rational,
    pub gamma: Rational,
    pub epsilon: Rational,
    pub cost_fptas: Rational,
    pub cost_bes: Rational,
    /// `cost_fptas / cost_bes`, or 1 when the target is zero.
    pub ratio: Rational,
}

/// Runs the comparison along the α sweep, then along the γ sweep.
pub fn bes_comparison() -> Result<Vec<BesRecord>> {
    let mut out = Vec::new();
    for axis in [SweepAxis::Alpha, SweepAxis::Gamma] {
        out.extend(over_grid(axis, |p, _| {
            let cfg = &p.instance.config;
            let cost_fptas = fptas_solve(&p.instance)?.social_cost;
            let cost_bes = cfg.bes_unit_cost * Rational::from_integer(cfg.target.into());
            Ok(BesRecord {
                axis,
                hour: p.hour,
                alpha: cfg.bes_unit_cost,
                gamma: cfg.pue,
                epsilon: cfg.epsilon,
                cost_fptas,
                cost_bes,
                ratio: ratio_or_one(cost_fptas, cost_bes),
            })
        })?);
    }
    Ok(out)
}

pub fn write_bes_csv<W: Write>(writer: W, records: &[BesRecord]) -> Result<()> {
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.axis.name().to_string(),
                r.hour.to_string(),
                format_rational(&r.alpha),
                format_rational(&r.gamma),
                format_rational(&r.epsilon),
                format_rational(&r.cost_fptas),
                format_rational(&r.cost_bes),
                format_rational(&r.ratio),
            ]
        })
        .collect();
    write_table(
        writer,
        &[
            "axis",
            "hour",
            "alpha",
            "gamma",
            "epsilon",
            "cost_fptas",
            "cost_bes",
            "ratio",
        ],
        rows,
    )
}
