//! Calendar months.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A calendar month. Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u8,
}

/// Outcome of parsing a date cell: the month, plus whether a day-of-month was
/// present and discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedDate {
    pub month: YearMonth,
    pub had_day: bool,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    /// Months since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: (ordinal.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn pred(self) -> Self {
        self.add_months(-1)
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Number of months from `self` to `other` (negative if `other` is earlier).
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }

    /// Parses `YYYY-MM`, also accepting `YYYY-MM-DD` (the day is dropped).
    pub fn parse_date(s: &str) -> Result<ParsedDate, String> {
        let s = s.trim();
        let mut parts = s.split('-');
        let (Some(y), Some(m)) = (parts.next(), parts.next()) else {
            return Err(format!("unparseable date '{s}', expected YYYY-MM"));
        };
        let day = parts.next();
        if parts.next().is_some() || y.len() != 4 || m.len() != 2 {
            return Err(format!("unparseable date '{s}', expected YYYY-MM"));
        }
        let year: i32 = y
            .parse()
            .map_err(|_| format!("unparseable year in '{s}'"))?;
        let month: u8 = m
            .parse()
            .map_err(|_| format!("unparseable month in '{s}'"))?;
        if let Some(d) = day {
            let d: u8 = d.parse().map_err(|_| format!("unparseable day in '{s}'"))?;
            if !(1..=31).contains(&d) {
                return Err(format!("day out of range in '{s}'"));
            }
        }
        let month = YearMonth::new(year, month).ok_or_else(|| format!("month out of range in '{s}'"))?;
        Ok(ParsedDate {
            month,
            had_day: day.is_some(),
        })
    }

    /// Inclusive month range.
    pub fn range_inclusive(from: YearMonth, to: YearMonth) -> impl Iterator<Item = YearMonth> {
        (from.ordinal()..=to.ordinal()).map(YearMonth::from_ordinal)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_date(s).map(|p| p.month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let m: YearMonth = "2010-01".parse().unwrap();
        assert_eq!(m.to_string(), "2010-01");
        let p = YearMonth::parse_date("2023-09-30").unwrap();
        assert!(p.had_day);
        assert_eq!(p.month, YearMonth::new(2023, 9).unwrap());
        assert!("2010-13".parse::<YearMonth>().is_err());
        assert!("201001".parse::<YearMonth>().is_err());
        assert!("2010-1".parse::<YearMonth>().is_err());
    }

    #[test]
    fn ordinal_arithmetic() {
        let jan = YearMonth::new(2010, 1).unwrap();
        let sep = YearMonth::new(2023, 9).unwrap();
        // January 2010 to September 2023 inclusive.
        assert_eq!(jan.months_until(sep) + 1, 165);
        assert_eq!(jan.pred(), YearMonth::new(2009, 12).unwrap());
        assert_eq!(YearMonth::new(2009, 12).unwrap().succ(), jan);
        assert_eq!(YearMonth::range_inclusive(jan, sep).count(), 165);
    }
}
