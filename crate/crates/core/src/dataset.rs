//! Simulation data: the published EDR calendar and tenant bids, a seeded
//! generator following the same recipe, and the bid/config file formats.
//!
//! Bid files are UTF-8 CSV with the header `tenant_id,size_mw,cost_usd`.
//! Config files are either a JSON object or `key=value` lines using the keys
//! `target_mw`, `alpha_usd_per_mwh`, `gamma_pue` and `epsilon`.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{AuctionConfig, Bid, Instance, Violation};
use crate::numeric::{parse_rational, Rational};

/// Hours of the eleven EDR events, in calendar order.
pub const EVENT_HOURS: [u32; 11] = [5, 6, 7, 8, 9, 10, 11, 16, 17, 18, 19];

pub const WORKLOAD_NAMES: [&str; 3] = ["hotmail", "msr", "wikipedia"];

/// (hour, total EDR in MW, Hotmail/MSR/Wikipedia workload in hundredths)
const EDR_EVENTS: [(u32, i64, [i64; 3]); 11] = [
    (5, 450, [21, 52, 29]),
    (6, 800, [30, 52, 20]),
    (7, 1350, [33, 52, 20]),
    (8, 1750, [42, 51, 25]),
    (9, 2100, [44, 49, 21]),
    (10, 2080, [45, 45, 22]),
    (11, 1850, [46, 41, 22]),
    (16, 1250, [50, 30, 50]),
    (17, 1800, [48, 28, 40]),
    (18, 2350, [52, 29, 40]),
    (19, 2250, [43, 30, 50]),
];

/// Published (size MW, cost $) of tenants 1..9 for each EDR hour.
const TENANT_BIDS: [(u32, [(i64, i64); 9]); 11] = [
    (
        5,
        [
            (23, 2737),
            (12, 1284),
            (4, 352),
            (67, 4623),
            (26, 2704),
            (5, 555),
            (43, 3569),
            (46, 5888),
            (5, 570),
        ],
    ),
    (
        6,
        [
            (33, 3531),
            (18, 1782),
            (6, 648),
            (67, 8710),
            (26, 2392),
            (5, 470),
            (57, 4617),
            (60, 5100),
            (7, 588),
        ],
    ),
    (
        7,
        [
            (36, 3960),
            (19, 1653),
            (6, 462),
            (67, 6700),
            (26, 1976),
            (5, 605),
            (30, 3960),
            (32, 3136),
            (4, 364),
        ],
    ),
    (
        8,
        [
            (46, 5336),
            (25, 1950),
            (8, 784),
            (66, 6864),
            (25, 2350),
            (5, 585),
            (37, 4440),
            (40, 4240),
            (5, 565),
        ],
    ),
    (
        9,
        [
            (48, 3600),
            (26, 2262),
            (8, 960),
            (63, 8064),
            (24, 1656),
            (4, 476),
            (31, 3162),
            (33, 3564),
            (4, 516),
        ],
    ),
    (
        10,
        [
            (49, 4018),
            (27, 3159),
            (9, 792),
            (58, 5510),
            (22, 2112),
            (4, 332),
            (33, 3267),
            (35, 2590),
            (4, 456),
        ],
    ),
    (
        11,
        [
            (50, 6000),
            (27, 3078),
            (9, 693),
            (53, 5353),
            (20, 2440),
            (4, 340),
            (33, 3102),
            (35, 3115),
            (4, 384),
        ],
    ),
    (
        16,
        [
            (55, 3960),
            (30, 2160),
            (10, 1150),
            (39, 3159),
            (15, 1995),
            (3, 399),
            (75, 7950),
            (80, 8320),
            (10, 1290),
        ],
    ),
    (
        17,
        [
            (52, 4420),
            (28, 2016),
            (9, 1170),
            (36, 4068),
            (14, 1484),
            (2, 178),
            (60, 7620),
            (64, 4352),
            (8, 952),
        ],
    ),
    (
        18,
        [
            (57, 7581),
            (31, 3100),
            (10, 1030),
            (37, 4144),
            (14, 1358),
            (2, 212),
            (60, 6540),
            (64, 7360),
            (8, 712),
        ],
    ),
    (
        19,
        [
            (47, 4136),
            (25, 3275),
            (8, 744),
            (39, 5031),
            (15, 1380),
            (3, 270),
            (75, 7725),
            (80, 5760),
            (10, 930),
        ],
    ),
];

/// Reduction target for an EDR event: 15% of the total, rounded up.
pub fn edr_target(edr_total: i64) -> i64 {
    Integer::div_ceil(&(15 * edr_total), &100)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarRow {
    pub hour: u32,
    pub edr_total: i64,
    pub target: i64,
    /// Normalized Hotmail, MSR and Wikipedia workloads.
    pub workloads: [Rational; 3],
}

pub fn calendar() -> Vec<CalendarRow> {
    EDR_EVENTS
        .iter()
        .map(|&(hour, edr_total, w)| CalendarRow {
            hour,
            edr_total,
            target: edr_target(edr_total),
            workloads: w.map(|p| Rational::new(p.into(), 100)),
        })
        .collect()
}

pub fn calendar_row(hour: u32) -> Option<CalendarRow> {
    calendar().into_iter().find(|r| r.hour == hour)
}

/// The calendar in the `edr_calendar.csv` fixture layout.
pub fn calendar_csv() -> String {
    let mut out = String::from("hour,edr_mw,target_mw,hotmail,msr,wikipedia\n");
    for &(hour, edr, w) in &EDR_EVENTS {
        out.push_str(&format!(
            "{hour},{edr},{},0.{:02},0.{:02},0.{:02}\n",
            edr_target(edr),
            w[0],
            w[1],
            w[2]
        ));
    }
    out
}

/// Published bids for `hour`, as tenants `tenant1..tenant9`.
pub fn published_bids(hour: u32) -> Option<Vec<Bid>> {
    TENANT_BIDS
        .iter()
        .find(|(h, _)| *h == hour)
        .map(|(_, bids)| {
            bids.iter()
                .enumerate()
                .map(|(i, &(s, c))| Bid::new(format!("tenant{}", i + 1), s, c))
                .collect()
        })
}

/// Published instance for `hour`; the target in `config` is replaced by the
/// calendar target.
///
/// # Panics
/// If `hour` is not one of [`EVENT_HOURS`].
pub fn published_instance(hour: u32, config: AuctionConfig) -> Instance {
    let row = calendar_row(hour).unwrap_or_else(|| panic!("no EDR event at hour {hour}"));
    let bids = published_bids(hour).expect("every calendar hour has bids");
    Instance::new(config.with_target(row.target), bids)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HourInstance {
    pub hour: u32,
    pub instance: Instance,
}

/// The eleven published instances, in calendar order.
pub fn published_instances(
    alpha: Rational,
    gamma: Rational,
    epsilon: Rational,
) -> Vec<HourInstance> {
    let config = AuctionConfig::new(0, alpha, gamma, epsilon);
    EVENT_HOURS
        .iter()
        .map(|&hour| HourInstance {
            hour,
            instance: published_instance(hour, config.clone()),
        })
        .collect()
}

/// Inputs of the bid generator.
///
/// Sizes follow `s = workload · M · r · d0 / 10^6 · scale` MW, rounded to the
/// nearest integer. With `scale = 1` this is the formula as stated; the
/// default `scale = 100` lands sizes in the 10–80 MW range of the published
/// bids. Costs are `round(s · rb)` with `rb` drawn uniformly (in cents) from
/// `price_range` using a ChaCha8 stream seeded by `seed`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationParams {
    pub servers_per_tenant: i64,
    pub idle_power_w: i64,
    /// Per-tenant server ratios in hundredths, each within 1..=20.
    pub ratios_pct: Vec<i64>,
    /// Dollars per MWh, inclusive.
    pub price_range: (i64, i64),
    pub scale: i64,
    pub seed: u64,
    pub bes_unit_cost: Rational,
    pub pue: Rational,
    pub epsilon: Rational,
}

/// The published ratio vector 0.11, 0.06, 0.02, 0.13, 0.05, 0.01, 0.15, 0.16, 0.02.
pub const PUBLISHED_RATIOS_PCT: [i64; 9] = [11, 6, 2, 13, 5, 1, 15, 16, 2];

impl GenerationParams {
    pub fn published(seed: u64) -> Self {
        GenerationParams {
            servers_per_tenant: 100_000,
            idle_power_w: 100,
            ratios_pct: PUBLISHED_RATIOS_PCT.to_vec(),
            price_range: (67, 133),
            scale: 100,
            seed,
            bes_unit_cost: Rational::from_integer(180),
            pue: Rational::new(8, 5),
            epsilon: Rational::new(1, 2),
        }
    }

    /// Same as [`GenerationParams::published`] but with nine ratios drawn from
    /// 0.01..=0.20 using the seed.
    pub fn random_ratios(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        GenerationParams {
            ratios_pct: (0..9).map(|_| rng.random_range(1..=20)).collect(),
            ..GenerationParams::published(seed)
        }
    }

    /// Unrounded size formula for one tenant.
    pub fn exact_size(&self, workload: Rational, ratio_pct: i64) -> Rational {
        workload
            * Rational::from_integer(self.servers_per_tenant.into())
            * Rational::new(ratio_pct.into(), 100)
            * Rational::from_integer(self.idle_power_w.into())
            * Rational::from_integer(self.scale.into())
            / Rational::from_integer(1_000_000)
    }
}

fn round_half_up(value: Rational) -> i64 {
    (value + Rational::new(1, 2)).floor().to_integer() as i64
}

/// Generates one instance for an EDR event. Tenants are split into three
/// equal groups running the Hotmail, MSR and Wikipedia workloads.
pub fn generate_instance(row: &CalendarRow, params: &GenerationParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // Each hour draws prices from its own stream.
    rng.set_stream(u64::from(row.hour) << 8);
    let n = params.ratios_pct.len();
    let (lo, hi) = params.price_range;
    let bids = params
        .ratios_pct
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let group = (i * 3 / n.max(1)).min(2);
            let size = round_half_up(params.exact_size(row.workloads[group], ratio));
            let price_cents = rng.random_range(lo * 100..=hi * 100);
            let cost = round_half_up(Rational::new(
                i128::from(size) * i128::from(price_cents),
                100,
            ));
            if size == 0 {
                Bid::new(format!("tenant{}", i + 1), 0, 0)
            } else {
                Bid::new(format!("tenant{}", i + 1), size, cost)
            }
        })
        .collect();
    let config = AuctionConfig::new(row.target, params.bes_unit_cost, params.pue, params.epsilon);
    Instance::new(config, bids)
}

const BID_HEADER: [&str; 3] = ["tenant_id", "size_mw", "cost_usd"];

pub fn write_bids<W: Write>(writer: W, bids: &[Bid]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::parse(0, e.to_string());
    w.write_record(BID_HEADER).map_err(to_err)?;
    for bid in bids {
        w.write_record([
            bid.tenant_id.as_str(),
            &bid.size.to_string(),
            &bid.cost.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io("<bids>", e))
}

pub fn bids_csv(bids: &[Bid]) -> String {
    let mut buf = Vec::new();
    write_bids(&mut buf, bids).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// Reads a bid file, rejecting malformed rows (with their line number) and
/// duplicate or negative entries.
pub fn read_bids<R: Read>(reader: R) -> Result<Vec<Bid>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::parse(1, e.to_string()))?,
        None => return Err(Error::parse(1, "empty file, expected header")),
    };
    if header.iter().collect::<Vec<_>>() != BID_HEADER {
        return Err(Error::parse(
            1,
            format!("expected header {:?}", BID_HEADER.join(",")),
        ));
    }

    let mut bids = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let int_field = |idx: usize| -> Result<i64> {
            rec[idx].parse().map_err(|_| {
                Error::parse(
                    line,
                    format!(
                        "field {}: {:?} is not an integer",
                        BID_HEADER[idx], &rec[idx]
                    ),
                )
            })
        };
        if rec[0].is_empty() {
            return Err(Error::parse(line, "field tenant_id: empty"));
        }
        bids.push(Bid::new(&rec[0], int_field(1)?, int_field(2)?));
    }

    let mut seen = HashSet::new();
    let mut violations = Vec::new();
    for bid in &bids {
        if !seen.insert(bid.tenant_id.clone()) {
            violations.push(Violation::DuplicateId(bid.tenant_id.clone()));
        }
        if bid.size < 0 {
            violations.push(Violation::NegativeSize(bid.tenant_id.clone(), bid.size));
        }
        if bid.cost < 0 {
            violations.push(Violation::NegativeCost(bid.tenant_id.clone(), bid.cost));
        }
    }
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(bids)
}

pub fn load_bids(path: impl AsRef<Path>) -> Result<Vec<Bid>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_bids(file)
}

pub fn save_bids(bids: &[Bid], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_bids(file, bids)
}

/// Parses a config given as a JSON object or as `key=value` lines.
pub fn parse_config(text: &str) -> Result<AuctionConfig> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line() as u64, e.to_string()));
    }
    let mut target = None;
    let mut alpha = None;
    let mut gamma = None;
    let mut epsilon = Rational::new(1, 2);
    for (n, raw) in text.lines().enumerate() {
        let line_no = n as u64 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, "expected key=value"))?;
        let number = |v: &str| parse_rational(v).map_err(|e| Error::parse(line_no, e.to_string()));
        match key.trim() {
            "target_mw" => {
                target = Some(value.trim().parse::<i64>().map_err(|_| {
                    Error::parse(
                        line_no,
                        format!("target_mw: {:?} is not an integer", value.trim()),
                    )
                })?)
            }
            "alpha_usd_per_mwh" => alpha = Some(number(value)?),
            "gamma_pue" => gamma = Some(number(value)?),
            "epsilon" => epsilon = number(value)?,
            other => return Err(Error::parse(line_no, format!("unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::parse(0, format!("missing key {k}"));
    Ok(AuctionConfig::new(
        target.ok_or_else(|| missing("target_mw"))?,
        alpha.ok_or_else(|| missing("alpha_usd_per_mwh"))?,
        gamma.ok_or_else(|| missing("gamma_pue"))?,
        epsilon,
    ))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<AuctionConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
