use std::collections::HashMap;

use chrono::NaiveDate;

use crate::{FriError, Result};

/// An ordered set of trading days with O(1) date-to-index lookup.
///
/// Day indices run 0..=T where T+1 is the number of trading days.
#[derive(Debug, Clone, PartialEq)]
pub struct TradingCalendar {
    days: Vec<NaiveDate>,
    index: HashMap<NaiveDate, usize>,
}

impl TradingCalendar {
    /// Builds a calendar from strictly increasing dates.
    pub fn new(days: Vec<NaiveDate>) -> Result<Self> {
        if days.is_empty() {
            return Err(FriError::InvalidParameter {
                name: "calendar",
                msg: "must contain at least one trading day".into(),
            });
        }
        for w in days.windows(2) {
            if w[0] >= w[1] {
                return Err(FriError::InvalidParameter {
                    name: "calendar",
                    msg: format!("dates not strictly increasing at {} -> {}", w[0], w[1]),
                });
            }
        }
        let index = days.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        Ok(Self { days, index })
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Date of day index `t`. Panics if `t` is out of range.
    pub fn date_of(&self, t: usize) -> NaiveDate {
        self.days[t]
    }

    /// Index of an exact trading date.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.index.get(&date).copied()
    }

    /// Index of the first trading day on or after `date`, if any.
    pub fn next_on_or_after(&self, date: NaiveDate) -> Option<usize> {
        let i = self.days.partition_point(|d| *d < date);
        (i < self.days.len()).then_some(i)
    }

    /// Calendar covering days 1..=T, used for return series aligned one
    /// day after their price inputs.
    pub fn drop_first(&self) -> Result<Self> {
        Self::new(self.days[1..].to_vec())
    }

    /// True when `other` is this calendar minus its first day.
    pub fn aligns_with_returns_of(&self, other: &TradingCalendar) -> bool {
        self.days.len() == other.days.len() + 1 && self.days[1..] == other.days[..]
    }
}
