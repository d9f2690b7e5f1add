//! Synthetic stock-exchange and macro panel shaped like a six-country
//! regional study: 165 months of constituent prices and share counts for
//! four sectors, plus country policy rates, exchange rates, industrial
//! production and consumer prices.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{uniform, TruthRow, GENERATOR};
use crate::error::Result;
use crate::index::{ConstituentSeries, Sector};
use crate::panel::PanelDataset;
use crate::time::YearMonth;

pub const FIXTURE_COUNTRIES: [&str; 6] = ["BA", "HR", "ME", "MK", "RS", "SI"];
const N_PERIODS: usize = 165;
const BURN_IN: usize = 200;

/// Per-sector constituent count and long-run loadings on the regional
/// policy rate and the common activity trend, with adjustment speed and
/// short-run response to the current rate change.
struct SectorParams {
    sector: Sector,
    count: usize,
    theta_rate: f64,
    theta_ip: f64,
    phi: f64,
    rate_impulse: f64,
}

const SECTORS: [SectorParams; 4] = [
    SectorParams { sector: Sector::Telecom, count: 6, theta_rate: -0.05, theta_ip: 0.8, phi: -0.04, rate_impulse: 0.0 },
    SectorParams { sector: Sector::Manufacturing, count: 13, theta_rate: -0.08, theta_ip: 0.8, phi: -0.0301, rate_impulse: -0.05 },
    SectorParams { sector: Sector::Electricity, count: 5, theta_rate: -0.04, theta_ip: 0.8, phi: -0.0549, rate_impulse: 0.0 },
    SectorParams { sector: Sector::Finance, count: 12, theta_rate: 0.097, theta_ip: 0.8, phi: -0.0486, rate_impulse: 0.25 },
];

#[derive(Debug, Clone)]
pub struct SectorFixture {
    pub constituents: Vec<ConstituentSeries>,
    /// Country panel with `irs` (percent), `err`, `ip` and `cpi` (levels).
    pub macro_panel: PanelDataset,
    pub truth: Vec<TruthRow>,
    pub seed: u64,
}

fn gauss(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn start() -> YearMonth {
    YearMonth::new(2010, 1).expect("valid month")
}

pub fn sector_fixture(seed: u64) -> Result<SectorFixture> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut n = || gauss(&mut rng);
    let total = BURN_IN + N_PERIODS;

    // Regional rate with persistent changes and a common activity trend.
    let mut rate = vec![0.0; total];
    let mut trend = vec![0.0; total];
    let mut d_prev = 0.0;
    let mut r = 3.0;
    let mut c = 0.0;
    for t in 0..total {
        let d = 0.4 * d_prev + 0.15 * n();
        r += d;
        d_prev = d;
        c += 0.002 + 0.01 * n();
        rate[t] = r;
        trend[t] = c;
    }

    // Sector fundamentals error-correct towards their long-run relation.
    let mut fundamentals = Vec::with_capacity(SECTORS.len());
    for sp in &SECTORS {
        let mut f = vec![0.0; total];
        f[0] = sp.theta_rate * rate[0] + sp.theta_ip * trend[0];
        for t in 1..total {
            let gap = f[t - 1] - sp.theta_rate * rate[t - 1] - sp.theta_ip * trend[t - 1];
            let dr = rate[t] - rate[t - 1];
            f[t] = f[t - 1] + sp.phi * gap + sp.rate_impulse * dr + 0.01 * n();
        }
        fundamentals.push(f);
    }

    let months: Vec<YearMonth> = (0..N_PERIODS).map(|t| start().add_months(t as i64)).collect();

    let mut constituents = Vec::new();
    for (s, sp) in SECTORS.iter().enumerate() {
        for j in 0..sp.count {
            let country = FIXTURE_COUNTRIES[(j + s) % FIXTURE_COUNTRIES.len()];
            let ticker = format!("{}{}{:02}", country, sp.sector.code().chars().next().unwrap_or('X'), j + 1);
            let a = uniform(&mut rng, 1.0, 4.0);
            let mut idio = 0.0;
            // One late entrant and one delisting per sector with enough members.
            let first = if j == 1 && sp.count > 3 { 29 } else { 0 };
            let last = if j == 2 && sp.count > 3 { 131 } else { N_PERIODS - 1 };
            let mut prices = BTreeMap::new();
            for t in 0..total {
                idio = 0.5 * idio + 0.01 * gauss(&mut rng);
                if t >= BURN_IN {
                    let k = t - BURN_IN;
                    if k >= first && k <= last {
                        let price = (a + fundamentals[s][t] + idio).exp();
                        prices.insert(months[k], (price * 1e4).round() / 1e4);
                    }
                }
            }
            let base_shares = uniform(&mut rng, 1e6, 5e7).round() as u64;
            let change_at = first + (uniform(&mut rng, 0.2, 0.8) * (last - first) as f64) as usize;
            let factor = if uniform(&mut rng, 0.0, 1.0) < 0.5 { 1.1 } else { 0.95 };
            let mut shares = BTreeMap::new();
            shares.insert(months[first], base_shares);
            shares.insert(months[change_at], (base_shares as f64 * factor).round() as u64);
            constituents.push(ConstituentSeries::new(ticker, country, sp.sector, prices, shares)?);
        }
    }

    let n_units = FIXTURE_COUNTRIES.len();
    let mut cells: Vec<Vec<Vec<Option<f64>>>> = vec![vec![vec![None; N_PERIODS]; n_units]; 4];
    for u in 0..n_units {
        let spread = uniform(&mut rng, 0.0, 2.0);
        let log_fx = uniform(&mut rng, 0.0, 4.5);
        let inflation = uniform(&mut rng, 0.001, 0.004);
        let (mut ar_rate, mut ar_ip, mut fx, mut price_level) = (0.0, 0.0, log_fx, 0.0);
        for t in 0..total {
            ar_rate = 0.7 * ar_rate + 0.02 * gauss(&mut rng);
            ar_ip = 0.8 * ar_ip + 0.003 * gauss(&mut rng);
            fx += 0.01 * gauss(&mut rng);
            price_level += inflation + 0.003 * gauss(&mut rng);
            if t >= BURN_IN {
                let k = t - BURN_IN;
                let values = [
                    rate[t] + spread + ar_rate,
                    fx.exp(),
                    100.0 * (trend[t] - trend[BURN_IN] + ar_ip).exp(),
                    100.0 * (price_level).exp(),
                ];
                for (v, x) in values.iter().enumerate() {
                    cells[v][u][k] = Some((x * 1e6).round() / 1e6);
                }
            }
        }
    }
    let names = ["irs", "err", "ip", "cpi"];
    let macro_panel = PanelDataset::from_cells(
        FIXTURE_COUNTRIES.iter().map(|c| c.to_string()).collect(),
        start(),
        N_PERIODS,
        names.iter().map(|s| s.to_string()).zip(cells).collect(),
    )?;

    let mut truth = Vec::new();
    for sp in &SECTORS {
        for (name, value) in [
            ("theta_rate", sp.theta_rate),
            ("theta_ip", sp.theta_ip),
            ("phi", sp.phi),
            ("rate_impulse", sp.rate_impulse),
        ] {
            truth.push(TruthRow {
                parameter: format!("{name}_{}", sp.sector.code()),
                unit: String::new(),
                value,
            });
        }
    }
    Ok(SectorFixture {
        constituents,
        macro_panel,
        truth,
        seed,
    })
}

/// Writes `prices.csv`, `shares.csv`, `sectors.csv`, `macro.csv` and
/// `truth.csv` into `dir`, returning the paths in that order.
pub fn write_sector_fixture(dir: impl AsRef<Path>, seed: u64) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let fx = sector_fixture(seed)?;
    let header = [
        format!("generator: {GENERATOR}"),
        format!("synthetic sector fixture, seed {seed}"),
    ];
    let open = |name: &str| -> Result<(PathBuf, csv::Writer<std::io::BufWriter<std::fs::File>>)> {
        let path = dir.join(name);
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        for line in &header {
            writeln!(w, "# {line}")?;
        }
        Ok((path, csv::Writer::from_writer(w)))
    };

    let (prices_path, mut w) = open("prices.csv")?;
    w.write_record(["ticker", "date", "price"])?;
    for c in &fx.constituents {
        for (m, p) in c.prices() {
            w.write_record([c.ticker.as_str(), &m.to_string(), &p.to_string()])?;
        }
    }
    w.flush()?;

    let (shares_path, mut w) = open("shares.csv")?;
    w.write_record(["ticker", "date", "shares_outstanding"])?;
    for c in &fx.constituents {
        for (m, s) in c.share_reports() {
            w.write_record([c.ticker.as_str(), &m.to_string(), &s.to_string()])?;
        }
    }
    w.flush()?;

    let (sectors_path, mut w) = open("sectors.csv")?;
    w.write_record(["ticker", "country", "sector"])?;
    for c in &fx.constituents {
        w.write_record([c.ticker.as_str(), c.country.as_str(), c.sector.code()])?;
    }
    w.flush()?;

    let macro_path = dir.join("macro.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&macro_path)?);
        for line in &header {
            writeln!(f, "# {line}")?;
        }
        fx.macro_panel.write_csv(&mut f)?;
        f.flush()?;
    }

    let truth_path = dir.join("truth.csv");
    let (_, mut w) = open("truth.csv")?;
    for row in &fx.truth {
        w.serialize(row)?;
    }
    w.flush()?;

    Ok(vec![prices_path, shares_path, sectors_path, macro_path, truth_path])
}
