//! Calendar months and event dates at the two granularities the pipeline uses.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// A calendar month. All windowing arithmetic runs on this type.
///
/// Internally a flat month index (`year * 12 + month0`), so ordinary integer
/// comparison and subtraction give calendar ordering and month distances.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Month(i32);

impl Month {
    /// `month` is 1-based (1 = January). Panics outside 1..=12.
    pub fn new(year: i32, month: u32) -> Month {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        Month(year * 12 + month as i32 - 1)
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    /// 1-based month within the year.
    pub fn month_of_year(self) -> u32 {
        self.0.rem_euclid(12) as u32 + 1
    }

    /// This month shifted by `months` (negative shifts go back in time).
    pub fn plus(self, months: i32) -> Month {
        Month(self.0 + months)
    }

    /// Signed number of months from `self` to `later`.
    pub fn until(self, later: Month) -> i32 {
        later.0 - self.0
    }

    /// Three-letter English name of the month within the year ("Jan".."Dec").
    pub fn name(self) -> &'static str {
        MONTH_NAMES[(self.month_of_year() - 1) as usize]
    }
}

pub(crate) const MONTH_NAMES: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

pub(crate) const WEEKDAY_NAMES: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

/// Short name for a weekday ("Mon".."Sun").
pub fn weekday_name(day: Weekday) -> &'static str {
    WEEKDAY_NAMES[day.num_days_from_monday() as usize]
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month_of_year())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseMonthError(String);

impl fmt::Display for ParseMonthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid month {:?}, expected YYYY-MM", self.0)
    }
}

impl std::error::Error for ParseMonthError {}

impl FromStr for Month {
    type Err = ParseMonthError;

    fn from_str(s: &str) -> Result<Month, ParseMonthError> {
        let err = || ParseMonthError(s.to_string());
        let (y, m) = s.split_once('-').ok_or_else(err)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(err());
        }
        let year: i32 = y.parse().map_err(|_| err())?;
        let month: u32 = m.parse().map_err(|_| err())?;
        if !(1..=12).contains(&month) {
            return Err(err());
        }
        Ok(Month::new(year, month))
    }
}

impl Serialize for Month {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Month, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Inclusive span of months.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct MonthSpan {
    pub first: Month,
    pub last: Month,
}

impl MonthSpan {
    pub fn new(first: Month, last: Month) -> MonthSpan {
        assert!(first <= last, "empty month span");
        MonthSpan { first, last }
    }

    pub fn contains(&self, m: Month) -> bool {
        self.first <= m && m <= self.last
    }

    pub fn len(&self) -> u32 {
        self.first.until(self.last) as u32 + 1
    }

    pub fn is_empty(&self) -> bool {
        false // spans are non-empty by construction
    }

    pub fn iter(&self) -> impl Iterator<Item = Month> {
        let (first, last) = (self.first, self.last);
        (0..=first.until(last)).map(move |k| first.plus(k))
    }
}

impl fmt::Display for MonthSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.first, self.last)
    }
}

/// A date cell: full day when the source provides one, otherwise month precision.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DateValue {
    Day(NaiveDate),
    Month(Month),
}

impl DateValue {
    pub fn month(&self) -> Month {
        match self {
            DateValue::Day(d) => Month::new(d.year(), d.month()),
            DateValue::Month(m) => *m,
        }
    }

    /// Weekday, when the value carries day precision.
    pub fn weekday(&self) -> Option<Weekday> {
        match self {
            DateValue::Day(d) => Some(d.weekday()),
            DateValue::Month(_) => None,
        }
    }

    /// Parses `YYYY-MM-DD` or `YYYY-MM`.
    pub fn parse(s: &str) -> Option<DateValue> {
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Some(DateValue::Day(d));
        }
        s.parse::<Month>().ok().map(DateValue::Month)
    }
}

impl fmt::Display for DateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DateValue::Day(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            DateValue::Month(m) => write!(f, "{m}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_crosses_year_boundaries() {
        let m = Month::new(2014, 1);
        assert_eq!(m.plus(-1), Month::new(2013, 12));
        assert_eq!(m.plus(12), Month::new(2015, 1));
        assert_eq!(m.plus(-1).until(m.plus(12)), 13);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["2014-01", "1999-12", "2020-06"] {
            let m: Month = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert!("2014-13".parse::<Month>().is_err());
        assert!("2014-00".parse::<Month>().is_err());
        assert!("14-01".parse::<Month>().is_err());
        assert!("2014".parse::<Month>().is_err());
    }

    #[test]
    fn span_iteration() {
        let span = MonthSpan::new(Month::new(2013, 11), Month::new(2014, 2));
        let months: Vec<String> = span.iter().map(|m| m.to_string()).collect();
        assert_eq!(months, ["2013-11", "2013-12", "2014-01", "2014-02"]);
        assert_eq!(span.len(), 4);
        assert!(span.contains(Month::new(2014, 1)));
        assert!(!span.contains(Month::new(2014, 3)));
    }

    #[test]
    fn date_values() {
        let d = DateValue::parse("2014-03-07").unwrap();
        assert_eq!(d.month(), Month::new(2014, 3));
        assert_eq!(d.weekday().map(weekday_name), Some("Fri"));
        assert_eq!(d.to_string(), "2014-03-07");

        let m = DateValue::parse("2014-03").unwrap();
        assert_eq!(m.month(), Month::new(2014, 3));
        assert_eq!(m.weekday(), None);
        assert_eq!(m.to_string(), "2014-03");

        assert_eq!(DateValue::parse("not a date"), None);
    }

    #[test]
    fn month_serde_uses_string_form() {
        let m = Month::new(2014, 4);
        assert_eq!(serde_json::to_string(&m).unwrap(), "\"2014-04\"");
        let back: Month = serde_json::from_str("\"2014-04\"").unwrap();
        assert_eq!(back, m);
    }
}
