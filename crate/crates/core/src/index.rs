//! Market-cap weighted sectoral stock indices and market-depth ratios.
//!
//! The index is a chained cap-weighted return:
//! `I_t = I_{t-1} · Σ_j w_{j,t-1} · P_{j,t} / P_{j,t-1}`, with `I_base = 100`
//! and weights taken over the constituents priced in both months.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::YearMonth;

/// NACE Rev.2 sector groups covered by the regional indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sector {
    #[serde(rename = "ELEC")]
    Electricity,
    #[serde(rename = "FIN")]
    Finance,
    #[serde(rename = "TELECOM")]
    Telecom,
    #[serde(rename = "MAN")]
    Manufacturing,
}

impl Sector {
    pub const ALL: [Sector; 4] = [
        Sector::Telecom,
        Sector::Manufacturing,
        Sector::Electricity,
        Sector::Finance,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Sector::Electricity => "ELEC",
            Sector::Finance => "FIN",
            Sector::Telecom => "TELECOM",
            Sector::Manufacturing => "MAN",
        }
    }

    /// Panel variable name, e.g. `index_fin`.
    pub fn variable_name(self) -> String {
        format!("index_{}", self.code().to_ascii_lowercase())
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Sector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ELEC" => Ok(Sector::Electricity),
            "FIN" => Ok(Sector::Finance),
            "TELECOM" => Ok(Sector::Telecom),
            "MAN" => Ok(Sector::Manufacturing),
            other => Err(format!(
                "unknown sector '{other}', expected one of ELEC, FIN, TELECOM, MAN"
            )),
        }
    }
}

/// One listed company: monthly closes and step-function share counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstituentSeries {
    pub ticker: String,
    pub country: String,
    pub sector: Sector,
    prices: BTreeMap<YearMonth, f64>,
    shares: BTreeMap<YearMonth, u64>,
}

impl ConstituentSeries {
    /// `shares` holds the months where a new share count was reported; the
    /// latest report is carried forward. Months before the first report use
    /// the first reported count.
    pub fn new(
        ticker: impl Into<String>,
        country: impl Into<String>,
        sector: Sector,
        prices: BTreeMap<YearMonth, f64>,
        shares: BTreeMap<YearMonth, u64>,
    ) -> Result<Self> {
        let ticker = ticker.into();
        if let Some((m, p)) = prices.iter().find(|(_, p)| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::Invalid(format!(
                "{ticker}: price {p} at {m} is not strictly positive"
            )));
        }
        if let Some((m, _)) = shares.iter().find(|(_, s)| **s == 0) {
            return Err(Error::Invalid(format!("{ticker}: zero shares outstanding at {m}")));
        }
        if shares.is_empty() && !prices.is_empty() {
            return Err(Error::Invalid(format!("{ticker}: no shares outstanding reported")));
        }
        Ok(Self {
            ticker,
            country: country.into(),
            sector,
            prices,
            shares,
        })
    }

    pub fn price(&self, month: YearMonth) -> Option<f64> {
        self.prices.get(&month).copied()
    }

    pub fn prices(&self) -> &BTreeMap<YearMonth, f64> {
        &self.prices
    }

    pub fn shares_at(&self, month: YearMonth) -> Option<u64> {
        self.shares
            .range(..=month)
            .next_back()
            .or_else(|| self.shares.iter().next())
            .map(|(_, s)| *s)
    }

    /// Months with a newly reported share count.
    pub fn share_reports(&self) -> &BTreeMap<YearMonth, u64> {
        &self.shares
    }

    pub fn market_cap(&self, month: YearMonth) -> Option<f64> {
        Some(self.price(month)? * self.shares_at(month)? as f64)
    }

    pub fn first_month(&self) -> Option<YearMonth> {
        self.prices.keys().next().copied()
    }

    pub fn last_month(&self) -> Option<YearMonth> {
        self.prices.keys().next_back().copied()
    }
}

/// Cap weights over constituents priced in `month`. Weights sum to one.
pub fn compute_weights(
    constituents: &[ConstituentSeries],
    month: YearMonth,
) -> Result<BTreeMap<String, f64>> {
    let caps: Vec<(&str, f64)> = constituents
        .iter()
        .filter_map(|c| c.market_cap(month).map(|m| (c.ticker.as_str(), m)))
        .collect();
    normalize(caps).ok_or(Error::EmptySectorMonth(month))
}

fn normalize(caps: Vec<(&str, f64)>) -> Option<BTreeMap<String, f64>> {
    let total: f64 = caps.iter().map(|(_, c)| c).sum();
    if caps.is_empty() || total <= 0.0 {
        return None;
    }
    Some(
        caps.into_iter()
            .map(|(t, c)| (t.to_string(), c / total))
            .collect(),
    )
}

/// How constituent weights evolve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reweighting {
    /// Prior-month market caps.
    #[default]
    Monthly,
    /// Each constituent's cap in its first priced month of the index window,
    /// held fixed and renormalized over the active set.
    FixedBase,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexConfig {
    #[serde(default)]
    pub reweighting: Reweighting,
}

/// A sector index normalized to 100 at `base_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorIndexSeries {
    pub sector: Sector,
    pub base_period: YearMonth,
    /// Index levels, one per month from `base_period`.
    pub values: Vec<f64>,
    /// Tickers contributing to each month's value.
    pub constituents_per_month: Vec<BTreeSet<String>>,
    /// Weights applied to each month's returns (at the base, the base-month
    /// cap weights).
    pub weights_per_month: Vec<BTreeMap<String, f64>>,
}

impl SectorIndexSeries {
    pub fn month(&self, i: usize) -> YearMonth {
        self.base_period.add_months(i as i64)
    }

    pub fn last_month(&self) -> YearMonth {
        self.month(self.values.len() - 1)
    }

    pub fn value_at(&self, month: YearMonth) -> Option<f64> {
        let d = self.base_period.months_until(month);
        (d >= 0).then(|| self.values.get(d as usize).copied()).flatten()
    }
}

/// Builds one sector index from its constituents.
pub fn build_index(
    constituents: &[ConstituentSeries],
    base_period: YearMonth,
    config: IndexConfig,
) -> Result<SectorIndexSeries> {
    let sector = match constituents.first() {
        None => return Err(Error::EmptySectorMonth(base_period)),
        Some(c) => c.sector,
    };
    if let Some(c) = constituents.iter().find(|c| c.sector != sector) {
        return Err(Error::Invalid(format!(
            "constituent {} is in sector {}, expected {}",
            c.ticker, c.sector, sector
        )));
    }
    let last = constituents
        .iter()
        .filter_map(ConstituentSeries::last_month)
        .max()
        .ok_or(Error::EmptySectorMonth(base_period))?;
    if last < base_period {
        return Err(Error::EmptySectorMonth(base_period));
    }

    let base_weights = compute_weights(constituents, base_period)?;
    let fixed_caps: BTreeMap<&str, f64> = constituents
        .iter()
        .filter_map(|c| {
            let first = c.prices.range(base_period..).next()?.0;
            Some((c.ticker.as_str(), c.market_cap(*first)?))
        })
        .collect();

    let mut values = vec![100.0];
    let mut constituents_per_month = vec![base_weights.keys().cloned().collect()];
    let mut weights_per_month = vec![base_weights];

    let mut prev = base_period;
    while prev < last {
        let month = prev.succ();
        let overlap: Vec<&ConstituentSeries> = constituents
            .iter()
            .filter(|c| c.price(prev).is_some() && c.price(month).is_some())
            .collect();
        let caps: Vec<(&str, f64)> = overlap
            .iter()
            .map(|c| {
                let cap = match config.reweighting {
                    Reweighting::Monthly => c.market_cap(prev).unwrap_or(0.0),
                    Reweighting::FixedBase => fixed_caps.get(c.ticker.as_str()).copied().unwrap_or(0.0),
                };
                (c.ticker.as_str(), cap)
            })
            .collect();
        let weights = normalize(caps).ok_or(Error::EmptySectorMonth(month))?;
        let gross: f64 = overlap
            .iter()
            .map(|c| weights[&c.ticker] * c.price(month).unwrap() / c.price(prev).unwrap())
            .sum();
        values.push(values.last().unwrap() * gross);
        constituents_per_month.push(weights.keys().cloned().collect());
        weights_per_month.push(weights);
        prev = month;
    }

    Ok(SectorIndexSeries {
        sector,
        base_period,
        values,
        constituents_per_month,
        weights_per_month,
    })
}

/// Builds every sector present in `constituents`.
pub fn build_sector_indices(
    constituents: &[ConstituentSeries],
    base_period: YearMonth,
    config: IndexConfig,
) -> Result<BTreeMap<Sector, SectorIndexSeries>> {
    let mut by_sector: BTreeMap<Sector, Vec<ConstituentSeries>> = BTreeMap::new();
    for c in constituents {
        by_sector.entry(c.sector).or_default().push(c.clone());
    }
    by_sector
        .into_iter()
        .map(|(s, cs)| Ok((s, build_index(&cs, base_period, config)?)))
        .collect()
}

/// Stock-market depth ratios for one country-year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketDepth {
    /// Market capitalization / GDP, as a fraction.
    pub cap_to_gdp: f64,
    /// Turnover / GDP, as a fraction.
    pub turnover_to_gdp: f64,
    /// Listed firms per 10 000 inhabitants.
    pub firms_per_10k: f64,
}

pub fn market_depth_indicators(
    mcap: f64,
    turnover: f64,
    gdp: f64,
    listings: u64,
    population: u64,
) -> Result<MarketDepth> {
    if !(gdp > 0.0) {
        return Err(Error::Invalid(format!("gdp must be positive, got {gdp}")));
    }
    if population == 0 {
        return Err(Error::Invalid("population must be positive".into()));
    }
    if !(mcap >= 0.0) || !(turnover >= 0.0) {
        return Err(Error::Invalid(
            "market capitalization and turnover must be non-negative".into(),
        ));
    }
    Ok(MarketDepth {
        cap_to_gdp: mcap / gdp,
        turnover_to_gdp: turnover / gdp,
        firms_per_10k: listings as f64 / (population as f64 / 10_000.0),
    })
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    ticker: String,
    date: String,
    price: f64,
}

#[derive(Debug, Deserialize)]
struct SharesRow {
    ticker: String,
    date: String,
    shares_outstanding: u64,
}

#[derive(Debug, Deserialize)]
struct SectorRow {
    ticker: String,
    country: String,
    sector: String,
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn parse_month(path: &Path, line: u64, s: &str) -> Result<YearMonth> {
    YearMonth::parse_date(s)
        .map(|p| p.month)
        .map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
}

/// Reads the three constituent CSVs (`ticker,date,price`;
/// `ticker,date,shares_outstanding`; `ticker,country,sector`).
pub fn read_constituents<P: Read, S: Read, M: Read>(
    prices: P,
    shares: S,
    sector_map: M,
) -> Result<Vec<ConstituentSeries>> {
    let origin = Path::new("<constituents>");
    let mut map: BTreeMap<String, (String, Sector)> = BTreeMap::new();
    let mut order = Vec::new();
    let mut rdr = csv_reader(sector_map);
    for rec in rdr.deserialize::<SectorRow>() {
        let row = rec?;
        let sector: Sector = row.sector.parse().map_err(|message| Error::Parse {
            path: Path::new("<sector map>").to_path_buf(),
            line: 0,
            message,
        })?;
        if map.insert(row.ticker.clone(), (row.country, sector)).is_some() {
            return Err(Error::Invalid(format!(
                "ticker '{}' listed twice in sector map",
                row.ticker
            )));
        }
        order.push(row.ticker);
    }

    let mut price_map: BTreeMap<String, BTreeMap<YearMonth, f64>> = BTreeMap::new();
    let mut rdr = csv_reader(prices);
    for rec in rdr.deserialize::<PriceRow>() {
        let row = rec.map_err(Error::from)?;
        let m = parse_month(origin, 0, &row.date)?;
        if !map.contains_key(&row.ticker) {
            return Err(Error::Invalid(format!(
                "ticker '{}' has prices but no sector assignment",
                row.ticker
            )));
        }
        if price_map
            .entry(row.ticker.clone())
            .or_default()
            .insert(m, row.price)
            .is_some()
        {
            return Err(Error::Invalid(format!("duplicate price for {} at {m}", row.ticker)));
        }
    }

    let mut share_map: BTreeMap<String, BTreeMap<YearMonth, u64>> = BTreeMap::new();
    let mut rdr = csv_reader(shares);
    for rec in rdr.deserialize::<SharesRow>() {
        let row = rec?;
        let m = parse_month(origin, 0, &row.date)?;
        share_map
            .entry(row.ticker.clone())
            .or_default()
            .insert(m, row.shares_outstanding);
    }

    order
        .into_iter()
        .filter_map(|t| {
            let prices = price_map.remove(&t)?;
            let (country, sector) = map[&t].clone();
            let shares = share_map.remove(&t).unwrap_or_default();
            Some(ConstituentSeries::new(t, country, sector, prices, shares))
        })
        .collect()
}

pub fn load_constituents(
    prices: impl AsRef<Path>,
    shares: impl AsRef<Path>,
    sector_map: impl AsRef<Path>,
) -> Result<Vec<ConstituentSeries>> {
    read_constituents(
        std::fs::File::open(prices)?,
        std::fs::File::open(shares)?,
        std::fs::File::open(sector_map)?,
    )
}

/// Writes `sector,date,value` rows, preceded by `# ` comment lines.
pub fn write_index_csv<W: Write>(
    writer: W,
    indices: &[&SectorIndexSeries],
    comments: &[String],
) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["sector", "date", "value"])?;
    for s in indices {
        for (i, v) in s.values.iter().enumerate() {
            cw.write_record([s.sector.code(), &s.month(i).to_string(), &v.to_string()])?;
        }
    }
    cw.flush()?;
    Ok(())
}
