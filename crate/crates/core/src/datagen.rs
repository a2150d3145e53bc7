//! Seeded synthetic `lineitem` and `part` tables.
//!
//! Distributions loosely follow TPC-H dbgen but rows are not dbgen rows.
//! All randomness comes from [`SplitMix64`], so output depends only on
//! `(scale, seed)`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::store::{date, encode_string_column, EncodedColumn, EncodedTable, LogicalType, Schema};
use crate::tensor::Tensor;

/// SplitMix64 (Steele, Lea and Flood 2014).
///
/// `state += 0x9E3779B97F4A7C15`, then the output mix
/// `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
/// `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`,
/// all in wrapping 64-bit arithmetic.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    pub const MIX1: u64 = 0xBF58_476D_1CE4_E5B9;
    pub const MIX2: u64 = 0x94D0_49BB_1331_11EB;

    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(Self::MIX1);
        z = (z ^ (z >> 27)).wrapping_mul(Self::MIX2);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n` by the high half of a 128-bit product.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform in `lo..=hi`.
    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }
}

pub const TYPE_PREFIXES: [&str; 6] = ["PROMO", "STANDARD", "SMALL", "MEDIUM", "ECONOMY", "LARGE"];
const TYPE_MIDDLES: [&str; 5] = ["ANODIZED", "BURNISHED", "PLATED", "POLISHED", "BRUSHED"];
const TYPE_FINISHES: [&str; 5] = ["TIN", "NICKEL", "BRASS", "STEEL", "COPPER"];
const RETURN_FLAGS: [&str; 3] = ["A", "N", "R"];

// Per-table stream salts so the two tables draw independent sequences.
const LINEITEM_SALT: u64 = 0x6C69_6E65_6974_656D;
const PART_SALT: u64 = 0x7061_7274;

fn first_ship_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(1992, 1, 1).unwrap()
}

fn ship_day_span() -> i64 {
    (NaiveDate::from_ymd_opt(1998, 12, 1).unwrap() - first_ship_day()).num_days()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenConfig {
    /// Fraction of SF1 cardinalities.
    pub scale: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(scale: f64, seed: u64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
        }
        Ok(GenConfig { scale, seed })
    }

    pub fn lineitem_rows(&self) -> usize {
        (6_000_000.0 * self.scale).round() as usize
    }

    /// At least one part so every `l_partkey` has a match.
    pub fn part_rows(&self) -> usize {
        ((200_000.0 * self.scale).round() as usize).max(1)
    }
}

/// One generated `lineitem` row. Money and rates are kept in hundredths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LineitemRow {
    pub orderkey: i64,
    pub partkey: i64,
    pub quantity: i64,
    pub price_cents: i64,
    pub discount_pct: i64,
    pub tax_pct: i64,
    pub returnflag: &'static str,
    pub shipdate: NaiveDate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartRow {
    pub partkey: i64,
    pub ptype: String,
    pub size: i64,
    pub retail_cents: i64,
}

pub fn lineitem_schema() -> Schema {
    Schema::of(&[
        ("l_orderkey", LogicalType::Int64),
        ("l_partkey", LogicalType::Int64),
        ("l_quantity", LogicalType::Int64),
        ("l_extendedprice", LogicalType::Float64),
        ("l_discount", LogicalType::Float64),
        ("l_tax", LogicalType::Float64),
        ("l_returnflag", LogicalType::Utf8),
        ("l_shipdate", LogicalType::Date),
    ])
}

pub fn part_schema() -> Schema {
    Schema::of(&[
        ("p_partkey", LogicalType::Int64),
        ("p_type", LogicalType::Utf8),
        ("p_size", LogicalType::Int64),
        ("p_retailprice", LogicalType::Float64),
    ])
}

/// Rows in generation order; four lines per order.
pub fn lineitem_rows(cfg: &GenConfig) -> impl Iterator<Item = LineitemRow> {
    let mut rng = SplitMix64::new(cfg.seed ^ LINEITEM_SALT);
    let parts = cfg.part_rows() as i64;
    let (start, span) = (first_ship_day(), ship_day_span());
    (0..cfg.lineitem_rows()).map(move |i| LineitemRow {
        orderkey: i as i64 / 4 + 1,
        partkey: rng.range(1, parts),
        quantity: rng.range(1, 50),
        price_cents: rng.range(90_000, 10_500_000),
        discount_pct: rng.range(0, 10),
        tax_pct: rng.range(0, 8),
        returnflag: RETURN_FLAGS[rng.below(3) as usize],
        shipdate: start + chrono::Duration::days(rng.range(0, span)),
    })
}

pub fn part_rows(cfg: &GenConfig) -> impl Iterator<Item = PartRow> {
    let mut rng = SplitMix64::new(cfg.seed ^ PART_SALT);
    (0..cfg.part_rows()).map(move |i| {
        let prefix = TYPE_PREFIXES[rng.below(6) as usize];
        let middle = TYPE_MIDDLES[rng.below(5) as usize];
        let finish = TYPE_FINISHES[rng.below(5) as usize];
        PartRow {
            partkey: i as i64 + 1,
            ptype: format!("{prefix} {middle} {finish}"),
            size: rng.range(1, 50),
            retail_cents: rng.range(90_000, 200_000),
        }
    })
}

fn cents(v: i64) -> String {
    format!("{}.{:02}", v / 100, v % 100)
}

fn nanos(d: NaiveDate) -> i64 {
    date::from_civil(d).expect("generated dates are in range")
}

fn f64_column(name: &str, v: Vec<f64>) -> Result<EncodedColumn> {
    EncodedColumn::new(name, LogicalType::Float64, Tensor::from_f64(v))
}

fn i64_column(name: &str, ty: LogicalType, v: Vec<i64>) -> Result<EncodedColumn> {
    EncodedColumn::new(name, ty, Tensor::from_i64(v))
}

/// Builds the `lineitem` table in memory, keeping only `columns` (all when
/// empty). Values equal what loading the CSV from [`write_dataset`] gives.
pub fn lineitem_table(cfg: &GenConfig, columns: &[&str]) -> Result<EncodedTable> {
    let schema = lineitem_schema();
    let want = |c: &str| columns.is_empty() || columns.contains(&c);
    if let Some(c) = columns.iter().find(|c| schema.index_of(c).is_none()) {
        return Err(Error::Schema(format!("lineitem has no column `{c}`")));
    }
    let n = cfg.lineitem_rows();
    let (mut ok, mut pk, mut qty) = (Vec::new(), Vec::new(), Vec::new());
    let (mut price, mut disc, mut tax) = (Vec::new(), Vec::new(), Vec::new());
    let (mut flag, mut ship) = (Vec::new(), Vec::new());
    for r in lineitem_rows(cfg) {
        if want("l_orderkey") {
            ok.push(r.orderkey);
        }
        if want("l_partkey") {
            pk.push(r.partkey);
        }
        if want("l_quantity") {
            qty.push(r.quantity);
        }
        if want("l_extendedprice") {
            price.push(r.price_cents as f64 / 100.0);
        }
        if want("l_discount") {
            disc.push(r.discount_pct as f64 / 100.0);
        }
        if want("l_tax") {
            tax.push(r.tax_pct as f64 / 100.0);
        }
        if want("l_returnflag") {
            flag.push(r.returnflag);
        }
        if want("l_shipdate") {
            ship.push(nanos(r.shipdate));
        }
    }
    let mut out = Vec::new();
    for name in schema.names().filter(|c| want(c)) {
        out.push(match name {
            "l_orderkey" => i64_column(name, LogicalType::Int64, std::mem::take(&mut ok))?,
            "l_partkey" => i64_column(name, LogicalType::Int64, std::mem::take(&mut pk))?,
            "l_quantity" => i64_column(name, LogicalType::Int64, std::mem::take(&mut qty))?,
            "l_extendedprice" => f64_column(name, std::mem::take(&mut price))?,
            "l_discount" => f64_column(name, std::mem::take(&mut disc))?,
            "l_tax" => f64_column(name, std::mem::take(&mut tax))?,
            "l_returnflag" => encode_string_column(name, &flag)?,
            _ => i64_column(name, LogicalType::Date, std::mem::take(&mut ship))?,
        });
    }
    EncodedTable::new(out, n)
}

pub fn part_table(cfg: &GenConfig) -> Result<EncodedTable> {
    let rows: Vec<PartRow> = part_rows(cfg).collect();
    let types: Vec<&str> = rows.iter().map(|r| r.ptype.as_str()).collect();
    EncodedTable::new(
        vec![
            i64_column("p_partkey", LogicalType::Int64, rows.iter().map(|r| r.partkey).collect())?,
            encode_string_column("p_type", &types)?,
            i64_column("p_size", LogicalType::Int64, rows.iter().map(|r| r.size).collect())?,
            f64_column("p_retailprice", rows.iter().map(|r| r.retail_cents as f64 / 100.0).collect())?,
        ],
        rows.len(),
    )
}

fn write_table<R>(
    dir: &Path,
    name: &str,
    schema: &Schema,
    rows: impl Iterator<Item = R>,
    line: impl Fn(&mut BufWriter<File>, R) -> std::io::Result<()>,
) -> Result<Vec<PathBuf>> {
    let csv = dir.join(format!("{name}.csv"));
    let sidecar = dir.join(format!("{name}.schema.json"));
    let mut w = BufWriter::new(File::create(&csv)?);
    let header: Vec<&str> = schema.names().collect();
    writeln!(w, "{}", header.join("|"))?;
    for r in rows {
        line(&mut w, r)?;
    }
    w.flush()?;
    std::fs::write(&sidecar, schema.to_json() + "\n")?;
    Ok(vec![csv, sidecar])
}

/// Writes `lineitem.csv`, `part.csv` and their `.schema.json` sidecars into
/// `dir` (`|`-delimited, one header line). Returns the written paths.
pub fn write_dataset(dir: &Path, cfg: &GenConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = write_table(dir, "lineitem", &lineitem_schema(), lineitem_rows(cfg), |w, r| {
        writeln!(
            w,
            "{}|{}|{}|{}|{}|{}|{}|{}",
            r.orderkey,
            r.partkey,
            r.quantity,
            cents(r.price_cents),
            cents(r.discount_pct),
            cents(r.tax_pct),
            r.returnflag,
            r.shipdate.format("%Y-%m-%d"),
        )
    })?;
    paths.extend(write_table(dir, "part", &part_schema(), part_rows(cfg), |w, r| {
        writeln!(w, "{}|{}|{}|{}", r.partkey, r.ptype, r.size, cents(r.retail_cents))
    })?);
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::csv::{load_table_dir, DEFAULT_DELIMITER};

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0 from the published C implementation.
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(r.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = SplitMix64::new(42);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let v = r.below(7);
            seen[v as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn cardinalities() {
        let cfg = GenConfig::new(0.001, 7).unwrap();
        assert_eq!(cfg.lineitem_rows(), 6000);
        assert_eq!(cfg.part_rows(), 200);
        assert_eq!(lineitem_rows(&cfg).count(), 6000);
        assert!(GenConfig::new(0.0, 1).is_err());
        assert!(GenConfig::new(f64::NAN, 1).is_err());
    }

    #[test]
    fn value_ranges() {
        let cfg = GenConfig::new(0.001, 3).unwrap();
        let last = NaiveDate::from_ymd_opt(1998, 12, 1).unwrap();
        for r in lineitem_rows(&cfg) {
            assert!((1..=200).contains(&r.partkey));
            assert!((1..=50).contains(&r.quantity));
            assert!((90_000..=10_500_000).contains(&r.price_cents));
            assert!((0..=10).contains(&r.discount_pct));
            assert!(r.shipdate >= first_ship_day() && r.shipdate <= last);
        }
    }

    #[test]
    fn csv_and_memory_tables_agree() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GenConfig::new(0.0005, 11).unwrap();
        write_dataset(dir.path(), &cfg).unwrap();
        let li = load_table_dir(dir.path(), "lineitem", DEFAULT_DELIMITER).unwrap();
        assert_eq!(li, lineitem_table(&cfg, &[]).unwrap());
        let part = load_table_dir(dir.path(), "part", DEFAULT_DELIMITER).unwrap();
        assert_eq!(part, part_table(&cfg).unwrap());
        let some = lineitem_table(&cfg, &["l_shipdate", "l_discount"]).unwrap();
        assert_eq!(some.schema().names().collect::<Vec<_>>(), ["l_discount", "l_shipdate"]);
    }
}
