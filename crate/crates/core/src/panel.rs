//! The panel data model: units × months × named variables.
//!
//! Cells are `Option<f64>`; an absent observation is `None`, never a sentinel.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::YearMonth;

/// Column names of the long-format CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub unit: String,
    pub date: String,
    pub variable: String,
    pub value: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            unit: "unit".into(),
            date: "date".into(),
            variable: "variable".into(),
            value: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Variable {
    name: String,
    /// `[unit][period]`
    cells: Vec<Vec<Option<f64>>>,
}

/// Monthly panel. Immutable once built; every operation returns a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    units: Vec<String>,
    start: YearMonth,
    n_periods: usize,
    variables: Vec<Variable>,
}

impl PanelDataset {
    /// Builds a dataset from `[unit][period]` cell arrays.
    ///
    /// Periods run contiguously from `start`. Each unit's observed months
    /// (across all variables) must form one gap-free run.
    pub fn from_cells(
        units: Vec<String>,
        start: YearMonth,
        n_periods: usize,
        variables: Vec<(String, Vec<Vec<Option<f64>>>)>,
    ) -> Result<Self> {
        if units.is_empty() || n_periods == 0 || variables.is_empty() {
            return Err(Error::NoObservations);
        }
        let mut seen = BTreeSet::new();
        for u in &units {
            if !seen.insert(u.as_str()) {
                return Err(Error::Invalid(format!("duplicate unit '{u}'")));
            }
        }
        let mut names = BTreeSet::new();
        for (name, cells) in &variables {
            if !names.insert(name.as_str()) {
                return Err(Error::DuplicateVariable(name.clone()));
            }
            if cells.len() != units.len() || cells.iter().any(|c| c.len() != n_periods) {
                return Err(Error::Invalid(format!(
                    "variable '{name}' does not match the {} × {} panel shape",
                    units.len(),
                    n_periods
                )));
            }
            if cells.iter().flatten().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "variable '{name}' contains non-finite values"
                )));
            }
        }
        let ds = Self {
            units,
            start,
            n_periods,
            variables: variables
                .into_iter()
                .map(|(name, cells)| Variable { name, cells })
                .collect(),
        };
        if ds.n_obs() == 0 {
            return Err(Error::NoObservations);
        }
        ds.check_gap_free()?;
        Ok(ds)
    }

    fn check_gap_free(&self) -> Result<()> {
        for (ui, unit) in self.units.iter().enumerate() {
            let observed: Vec<usize> = (0..self.n_periods)
                .filter(|&t| self.variables.iter().any(|v| v.cells[ui][t].is_some()))
                .collect();
            for w in observed.windows(2) {
                if w[1] != w[0] + 1 {
                    return Err(Error::MonthlyGap {
                        unit: unit.clone(),
                        from: self.period(w[0]),
                        to: self.period(w[1]),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.n_periods as i64 - 1)
    }

    pub fn period(&self, t: usize) -> YearMonth {
        self.start.add_months(t as i64)
    }

    pub fn periods(&self) -> Vec<YearMonth> {
        (0..self.n_periods).map(|t| self.period(t)).collect()
    }

    pub fn period_index(&self, month: YearMonth) -> Option<usize> {
        let d = self.start.months_until(month);
        (d >= 0 && (d as usize) < self.n_periods).then_some(d as usize)
    }

    pub fn variable_names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v.name == name)
    }

    pub fn unit_index(&self, unit: &str) -> Option<usize> {
        self.units.iter().position(|u| u == unit)
    }

    fn var(&self, name: &str) -> Result<&Variable> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// The full period-aligned column for one unit.
    pub fn series(&self, unit: usize, variable: &str) -> Result<&[Option<f64>]> {
        let v = self.var(variable)?;
        v.cells
            .get(unit)
            .map(|c| c.as_slice())
            .ok_or_else(|| Error::UnknownUnit(format!("#{unit}")))
    }

    /// Observed values of one unit's series, in time order, with their period
    /// index. Errors if the observed months are not contiguous.
    pub fn observed(&self, unit: usize, variable: &str) -> Result<(usize, Vec<f64>)> {
        let s = self.series(unit, variable)?;
        let first = s.iter().position(Option::is_some);
        let Some(first) = first else {
            return Ok((0, Vec::new()));
        };
        let last = s.iter().rposition(Option::is_some).unwrap_or(first);
        let mut out = Vec::with_capacity(last - first + 1);
        for (t, c) in s.iter().enumerate().take(last + 1).skip(first) {
            match c {
                Some(v) => out.push(*v),
                None => {
                    return Err(Error::in_unit(
                        &self.units[unit],
                        Error::Invalid(format!("'{variable}' is missing at {}", self.period(t))),
                    ))
                }
            }
        }
        Ok((first, out))
    }

    /// Months where all `variables` are observed for one unit, as
    /// `(first period index, rows = months × columns = variables)`.
    /// `None` when the variables never overlap.
    pub fn joint_block(
        &self,
        unit: usize,
        variables: &[impl AsRef<str>],
    ) -> Result<Option<(usize, nalgebra::DMatrix<f64>)>> {
        let mut first = 0usize;
        let mut last = usize::MAX;
        let mut cols = Vec::with_capacity(variables.len());
        for v in variables {
            let (f, obs) = self.observed(unit, v.as_ref())?;
            if obs.is_empty() {
                return Ok(None);
            }
            first = first.max(f);
            last = last.min(f + obs.len() - 1);
            cols.push((f, obs));
        }
        if cols.is_empty() || last < first {
            return Ok(None);
        }
        let len = last - first + 1;
        let block = nalgebra::DMatrix::from_fn(len, cols.len(), |t, j| {
            let (f, obs) = &cols[j];
            obs[first + t - f]
        });
        Ok(Some((first, block)))
    }

    pub fn n_obs(&self) -> usize {
        self.variables
            .iter()
            .map(|v| v.cells.iter().flatten().filter(|c| c.is_some()).count())
            .sum()
    }

    /// True when every unit and variable carries the same number of
    /// observations.
    pub fn is_balanced(&self) -> bool {
        let mut counts = self
            .variables
            .iter()
            .flat_map(|v| v.cells.iter().map(|c| c.iter().filter(|x| x.is_some()).count()));
        match counts.next() {
            None => true,
            Some(first) => counts.all(|c| c == first),
        }
    }

    /// Returns a copy with one more variable.
    pub fn with_variable(&self, name: &str, cells: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if self.has_variable(name) {
            return Err(Error::DuplicateVariable(name.to_string()));
        }
        let mut vars: Vec<(String, Vec<Vec<Option<f64>>>)> = self
            .variables
            .iter()
            .map(|v| (v.name.clone(), v.cells.clone()))
            .collect();
        vars.push((name.to_string(), cells));
        Self::from_cells(self.units.clone(), self.start, self.n_periods, vars)
    }

    /// Keeps only the listed variables, in the order given.
    pub fn select_variables(&self, names: &[impl AsRef<str>]) -> Result<Self> {
        let vars = names
            .iter()
            .map(|n| {
                let v = self.var(n.as_ref())?;
                Ok((v.name.clone(), v.cells.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_cells(self.units.clone(), self.start, self.n_periods, vars)
    }

    /// Keeps the listed units, in the order given.
    pub fn select_units(&self, units: &[impl AsRef<str>]) -> Result<Self> {
        let idx = units
            .iter()
            .map(|u| {
                self.unit_index(u.as_ref())
                    .ok_or_else(|| Error::UnknownUnit(u.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let vars = self
            .variables
            .iter()
            .map(|v| (v.name.clone(), idx.iter().map(|&i| v.cells[i].clone()).collect()))
            .collect();
        Self::from_cells(
            idx.iter().map(|&i| self.units[i].clone()).collect(),
            self.start,
            self.n_periods,
            vars,
        )
    }

    /// Restricts to the contiguous period window `[from, from + len)`.
    pub fn slice_periods(&self, from: usize, len: usize) -> Result<Self> {
        if from + len > self.n_periods || len == 0 {
            return Err(Error::Invalid("period window out of range".into()));
        }
        let vars = self
            .variables
            .iter()
            .map(|v| {
                (
                    v.name.clone(),
                    v.cells.iter().map(|c| c[from..from + len].to_vec()).collect(),
                )
            })
            .collect();
        Self::from_cells(self.units.clone(), self.period(from), len, vars)
    }

    pub fn read_csv<R: Read>(reader: R, schema: &ColumnMapping, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: 1,
                message: format!("missing column '{name}'"),
            })
        };
        let (cu, cd, cv, cx) = (
            col(&schema.unit)?,
            col(&schema.date)?,
            col(&schema.variable)?,
            col(&schema.value)?,
        );

        let mut units: Vec<String> = Vec::new();
        let mut unit_ix: HashMap<String, usize> = HashMap::new();
        let mut var_names: Vec<String> = Vec::new();
        let mut var_ix: HashMap<String, usize> = HashMap::new();
        let mut cells: BTreeMap<(usize, YearMonth, usize), f64> = BTreeMap::new();
        let mut warned_day = false;

        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let perr = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line,
                message,
            };
            let field = |i: usize| rec.get(i).unwrap_or("");
            let unit = field(cu);
            let variable = field(cv);
            if unit.is_empty() || variable.is_empty() {
                return Err(perr("empty unit or variable".into()));
            }
            let parsed = YearMonth::parse_date(field(cd)).map_err(perr)?;
            if parsed.had_day && !warned_day {
                warn!(
                    "{}: day-of-month ignored, dates normalized to year-month",
                    origin.display()
                );
                warned_day = true;
            }
            let raw = field(cx);
            let value: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| perr(format!("unparseable value '{raw}'")))?;
            let u = *unit_ix.entry(unit.to_string()).or_insert_with(|| {
                units.push(unit.to_string());
                units.len() - 1
            });
            let v = *var_ix.entry(variable.to_string()).or_insert_with(|| {
                var_names.push(variable.to_string());
                var_names.len() - 1
            });
            if cells.insert((u, parsed.month, v), value).is_some() {
                return Err(Error::DuplicateObservation {
                    unit: unit.to_string(),
                    date: parsed.month,
                    variable: variable.to_string(),
                });
            }
        }
        if cells.is_empty() {
            return Err(Error::NoObservations);
        }
        let start = cells.keys().map(|k| k.1).min().unwrap();
        let end = cells.keys().map(|k| k.1).max().unwrap();
        let n_periods = start.months_until(end) as usize + 1;
        let mut arrays = vec![vec![vec![None; n_periods]; units.len()]; var_names.len()];
        for (&(u, m, v), &x) in &cells {
            arrays[v][u][start.months_until(m) as usize] = Some(x);
        }
        Self::from_cells(units, start, n_periods, var_names.into_iter().zip(arrays).collect())
    }

    /// Writes long-format CSV rows ordered by unit, variable, month.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["unit", "date", "variable", "value"])?;
        for (ui, unit) in self.units.iter().enumerate() {
            for v in &self.variables {
                for (t, c) in v.cells[ui].iter().enumerate() {
                    if let Some(x) = c {
                        w.write_record([
                            unit.as_str(),
                            &self.period(t).to_string(),
                            &v.name,
                            &x.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a long-format panel CSV (`unit,date,variable,value` by default).
pub fn load_panel_csv(path: impl AsRef<Path>, schema: &ColumnMapping) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    PanelDataset::read_csv(file, schema, path)
}

pub fn write_panel_csv(ds: &PanelDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    ds.write_csv(std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Log,
    FirstDifference,
    PerUnitDemean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub applied_to: String,
    pub output_name: String,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, applied_to: &str, output_name: &str) -> Self {
        Self {
            kind,
            applied_to: applied_to.to_string(),
            output_name: output_name.to_string(),
        }
    }
}

/// Appends `spec.output_name` computed from `spec.applied_to`.
pub fn apply_transform(ds: &PanelDataset, spec: &TransformSpec) -> Result<PanelDataset> {
    let src = ds.var(&spec.applied_to)?;
    let cells: Vec<Vec<Option<f64>>> = match spec.kind {
        TransformKind::Log => src
            .cells
            .iter()
            .enumerate()
            .map(|(ui, col)| {
                col.iter()
                    .enumerate()
                    .map(|(t, c)| match c {
                        None => Ok(None),
                        Some(x) if *x > 0.0 => Ok(Some(x.ln())),
                        Some(x) => Err(Error::NonPositiveLog {
                            unit: ds.units[ui].clone(),
                            date: ds.period(t),
                            value: *x,
                        }),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?,
        TransformKind::FirstDifference => src
            .cells
            .iter()
            .map(|col| {
                (0..col.len())
                    .map(|t| match (t.checked_sub(1).and_then(|s| col[s]), col[t]) {
                        (Some(prev), Some(cur)) => Some(cur - prev),
                        _ => None,
                    })
                    .collect()
            })
            .collect(),
        TransformKind::PerUnitDemean => src
            .cells
            .iter()
            .map(|col| {
                let obs: Vec<f64> = col.iter().flatten().copied().collect();
                let m = obs.iter().sum::<f64>() / obs.len().max(1) as f64;
                col.iter().map(|c| c.map(|x| x - m)).collect()
            })
            .collect(),
    };
    ds.with_variable(&spec.output_name, cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalancePolicy {
    DropIncompletePeriods,
    DropIncompleteUnits,
}

/// What balancing removed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DropReport {
    pub dropped_units: Vec<String>,
    pub dropped_periods: Vec<YearMonth>,
    /// Observed cells discarded.
    pub dropped_cells: usize,
}

impl DropReport {
    pub fn is_empty(&self) -> bool {
        self.dropped_units.is_empty() && self.dropped_periods.is_empty() && self.dropped_cells == 0
    }
}

/// Makes the panel balanced under `policy`.
pub fn balance(ds: &PanelDataset, policy: BalancePolicy) -> Result<(PanelDataset, DropReport)> {
    let complete = |u: usize, t: usize| ds.variables.iter().all(|v| v.cells[u][t].is_some());
    let (keep_units, from, to): (Vec<usize>, usize, usize) = match policy {
        BalancePolicy::DropIncompletePeriods => {
            let keep: Vec<usize> = (0..ds.n_periods)
                .filter(|&t| (0..ds.n_units()).all(|u| complete(u, t)))
                .collect();
            if keep.len() < 2 {
                return Err(Error::Balance(format!(
                    "only {} period(s) are complete for every unit; at least 2 required",
                    keep.len()
                )));
            }
            if let Some(w) = keep.windows(2).find(|w| w[1] != w[0] + 1) {
                return Err(Error::Balance(format!(
                    "dropping incomplete periods would open a gap between {} and {}; \
                     consider drop_incomplete_units",
                    ds.period(w[0]),
                    ds.period(w[1])
                )));
            }
            ((0..ds.n_units()).collect(), keep[0], *keep.last().unwrap())
        }
        BalancePolicy::DropIncompleteUnits => {
            let any_complete = |t: usize| (0..ds.n_units()).any(|u| complete(u, t));
            let Some(from) = (0..ds.n_periods).find(|&t| any_complete(t)) else {
                return Err(Error::Balance("no unit has a complete period".into()));
            };
            let to = (0..ds.n_periods).rev().find(|&t| any_complete(t)).unwrap();
            let keep: Vec<usize> = (0..ds.n_units())
                .filter(|&u| (from..=to).all(|t| complete(u, t)))
                .collect();
            if keep.is_empty() {
                return Err(Error::Balance(format!(
                    "no unit is complete over {}..{}",
                    ds.period(from),
                    ds.period(to)
                )));
            }
            if to - from + 1 < 2 {
                return Err(Error::Balance(
                    "fewer than 2 periods would remain after balancing".into(),
                ));
            }
            (keep, from, to)
        }
    };

    let mut report = DropReport::default();
    for u in 0..ds.n_units() {
        if !keep_units.contains(&u) {
            report.dropped_units.push(ds.units[u].clone());
        }
    }
    for t in 0..ds.n_periods {
        if t < from || t > to {
            report.dropped_periods.push(ds.period(t));
        }
    }
    let vars = ds
        .variables
        .iter()
        .map(|v| {
            (
                v.name.clone(),
                keep_units
                    .iter()
                    .map(|&u| v.cells[u][from..=to].to_vec())
                    .collect::<Vec<_>>(),
            )
        })
        .collect::<Vec<_>>();
    let out = PanelDataset::from_cells(
        keep_units.iter().map(|&u| ds.units[u].clone()).collect(),
        ds.period(from),
        to - from + 1,
        vars,
    )?;
    report.dropped_cells = ds.n_obs() - out.n_obs();
    debug_assert!(out.is_balanced());
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn read(s: &str) -> Result<PanelDataset> {
        PanelDataset::read_csv(s.as_bytes(), &ColumnMapping::default(), Path::new("<mem>"))
    }

    fn one_var(units: &[&str], values: Vec<Vec<Option<f64>>>) -> PanelDataset {
        let n = values[0].len();
        PanelDataset::from_cells(
            units.iter().map(|s| s.to_string()).collect(),
            ym("2010-01"),
            n,
            vec![("x".into(), values)],
        )
        .unwrap()
    }

    #[test]
    fn loads_minimal_file() {
        let ds = read("unit,date,variable,value\nHR,2010-01,irs,1.5\nHR,2010-02,irs,1.25\n").unwrap();
        assert_eq!(ds.n_units(), 1);
        assert_eq!(ds.n_periods(), 2);
        assert_eq!(ds.n_obs(), 2);
        assert_eq!(ds.series(0, "irs").unwrap(), &[Some(1.5), Some(1.25)]);
    }

    #[test]
    fn empty_file_has_no_observations() {
        let err = read("unit,date,variable,value\n").unwrap_err();
        assert_eq!(err.to_string(), "no observations");
    }

    #[test]
    fn duplicate_triple_is_named() {
        let err = read("unit,date,variable,value\nHR,2010-01,irs,1\nHR,2010-01,irs,2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("HR") && msg.contains("2010-01") && msg.contains("irs"), "{msg}");
    }

    #[test]
    fn monthly_gap_is_listed() {
        let err = read("unit,date,variable,value\nHR,2010-01,irs,1\nHR,2010-03,irs,2\n").unwrap_err();
        match err {
            Error::MonthlyGap { unit, from, to } => {
                assert_eq!(unit, "HR");
                assert_eq!(from, ym("2010-01"));
                assert_eq!(to, ym("2010-03"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unparseable_value_is_rejected() {
        let err = read("unit,date,variable,value\nHR,2010-01,irs,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(read("unit,date,variable,value\nHR,2010-01,irs,\n").is_err());
        assert!(read("unit,date,variable,value\nHR,2010-01,irs,NaN\n").is_err());
    }

    #[test]
    fn day_of_month_is_ignored() {
        let ds = read("unit,date,variable,value\nHR,2010-01-31,irs,1\nHR,2010-02-28,irs,2\n").unwrap();
        assert_eq!(ds.start(), ym("2010-01"));
        assert_eq!(ds.n_periods(), 2);
    }

    #[test]
    fn six_unit_165_month_panel_shape() {
        let mut s = String::from("unit,date,variable,value\n");
        let units = ["HR", "SI", "MK", "RS", "BA", "ME"];
        let vars = ["irs", "err", "ip", "cpi"];
        for u in units {
            for m in YearMonth::range_inclusive(ym("2010-01"), ym("2023-09")) {
                for v in vars {
                    s.push_str(&format!("{u},{m},{v},1.0\n"));
                }
            }
        }
        let ds = read(&s).unwrap();
        assert_eq!(ds.n_units(), 6);
        assert_eq!(ds.n_periods(), 165);
        assert!(ds.is_balanced());
    }

    #[test]
    fn first_difference_drops_first_month() {
        let ds = one_var(&["a"], vec![vec![Some(100.0), Some(110.0), Some(121.0)]]);
        let out = apply_transform(
            &ds,
            &TransformSpec::new(TransformKind::FirstDifference, "x", "dx"),
        )
        .unwrap();
        assert_eq!(out.series(0, "dx").unwrap(), &[None, Some(10.0), Some(11.0)]);
        // input untouched
        assert_eq!(ds.variable_names(), vec!["x"]);
    }

    #[test]
    fn demean_constant_is_zero() {
        let ds = one_var(&["a", "b"], vec![vec![Some(3.0); 4], vec![Some(-7.5); 4]]);
        let out = apply_transform(&ds, &TransformSpec::new(TransformKind::PerUnitDemean, "x", "dm"))
            .unwrap();
        for u in 0..2 {
            assert!(out.series(u, "dm").unwrap().iter().all(|c| *c == Some(0.0)));
        }
    }

    #[test]
    fn log_of_powers_of_e() {
        let e = std::f64::consts::E;
        let ds = one_var(&["a"], vec![vec![Some(1.0), Some(e), Some(e * e)]]);
        let out = apply_transform(&ds, &TransformSpec::new(TransformKind::Log, "x", "lx")).unwrap();
        let got: Vec<f64> = out.series(0, "lx").unwrap().iter().map(|c| c.unwrap()).collect();
        for (g, w) in got.iter().zip([0.0, 1.0, 2.0]) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn log_of_nonpositive_cites_cell() {
        let ds = one_var(&["HR"], vec![vec![Some(1.0), Some(0.0)]]);
        let err = apply_transform(&ds, &TransformSpec::new(TransformKind::Log, "x", "lx")).unwrap_err();
        match err {
            Error::NonPositiveLog { unit, date, .. } => {
                assert_eq!(unit, "HR");
                assert_eq!(date, ym("2010-02"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn balance_identity_on_balanced_data() {
        let ds = one_var(&["a", "b"], vec![vec![Some(1.0); 3], vec![Some(2.0); 3]]);
        for policy in [BalancePolicy::DropIncompletePeriods, BalancePolicy::DropIncompleteUnits] {
            let (out, report) = balance(&ds, policy).unwrap();
            assert_eq!(out, ds);
            assert!(report.is_empty());
        }
    }

    #[test]
    fn balance_drops_final_month() {
        let ds = one_var(
            &["a", "b"],
            vec![vec![Some(1.0), Some(2.0), Some(3.0)], vec![Some(1.0), Some(2.0), None]],
        );
        let (out, report) = balance(&ds, BalancePolicy::DropIncompletePeriods).unwrap();
        assert_eq!(out.n_periods(), 2);
        assert_eq!(out.n_units(), 2);
        assert!(out.is_balanced());
        assert_eq!(report.dropped_periods, vec![ym("2010-03")]);
        assert_eq!(report.dropped_cells, 1);
    }

    #[test]
    fn balance_drops_incomplete_unit() {
        let ds = one_var(
            &["a", "b"],
            vec![vec![Some(1.0), Some(2.0), Some(3.0)], vec![None, Some(2.0), Some(3.0)]],
        );
        let (out, report) = balance(&ds, BalancePolicy::DropIncompleteUnits).unwrap();
        assert_eq!(out.units(), &["a".to_string()]);
        assert_eq!(out.n_periods(), 3);
        assert_eq!(report.dropped_units, vec!["b".to_string()]);
        assert_eq!(report.dropped_cells, 2);
    }

    #[test]
    fn balance_disjoint_units_fails() {
        let ds = one_var(
            &["a", "b"],
            vec![
                vec![Some(1.0), Some(2.0), None, None],
                vec![None, None, Some(1.0), Some(2.0)],
            ],
        );
        assert!(matches!(
            balance(&ds, BalancePolicy::DropIncompletePeriods),
            Err(Error::Balance(_))
        ));
    }

    #[test]
    fn csv_round_trip_exact() {
        let text = "unit,date,variable,value\nHR,2010-01,irs,0.1\nHR,2010-02,irs,0.30000000000000004\nSI,2010-02,err,-12345.678\n";
        let ds = read(text).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = read(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, ds);
    }

    proptest! {
        #[test]
        fn write_then_load_reproduces_dataset(
            values in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 5), 1..4)
        ) {
            let cells: Vec<Vec<Option<f64>>> =
                values.iter().map(|r| r.iter().map(|v| Some(*v)).collect()).collect();
            let units: Vec<String> = (0..cells.len()).map(|i| format!("u{i}")).collect();
            let ds = PanelDataset::from_cells(units, ym("2015-06"), 5, vec![("v".into(), cells)]).unwrap();
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).unwrap();
            let back = read(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn difference_then_cumsum_restores_levels(
            levels in prop::collection::vec(-1e3f64..1e3, 2..40)
        ) {
            let ds = one_var(&["a"], vec![levels.iter().map(|v| Some(*v)).collect()]);
            let d = apply_transform(&ds, &TransformSpec::new(TransformKind::FirstDifference, "x", "dx")).unwrap();
            let diffs = d.series(0, "dx").unwrap();
            let mut acc = levels[0];
            for t in 1..levels.len() {
                acc += diffs[t].unwrap();
                prop_assert!((acc - levels[t]).abs() <= 1e-12 * (1.0 + levels[t].abs().max(acc.abs())) * t as f64);
            }
        }
    }
}
