//! Price and news ingestion, calendar alignment, and log returns.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::TradingCalendar;
use crate::{FriError, Result};

/// Aligned per-ticker daily value series over a shared trading calendar.
///
/// Holds either price levels or log returns; `values[k]` is the series of
/// ticker `tickers[k]` with one entry per calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    calendar: TradingCalendar,
    tickers: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<Vec<f64>>,
}

impl Panel {
    /// Builds a panel; tickers must be sorted, unique, and non-empty, and
    /// every series must match the calendar length.
    pub fn new(
        calendar: TradingCalendar,
        tickers: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if tickers.is_empty() {
            return Err(FriError::EmptyUniverse);
        }
        if tickers.len() != values.len() {
            return Err(FriError::InvalidParameter {
                name: "values",
                msg: format!(
                    "{} tickers but {} series",
                    tickers.len(),
                    values.len()
                ),
            });
        }
        for pair in tickers.windows(2) {
            if pair[0] >= pair[1] {
                return Err(FriError::InvalidParameter {
                    name: "tickers",
                    msg: format!("not sorted/unique at {:?} -> {:?}", pair[0], pair[1]),
                });
            }
        }
        if tickers.iter().any(|t| t.is_empty()) {
            return Err(FriError::InvalidParameter {
                name: "tickers",
                msg: "empty ticker symbol".into(),
            });
        }
        for (t, col) in tickers.iter().zip(&values) {
            if col.len() != calendar.len() {
                return Err(FriError::InvalidParameter {
                    name: "values",
                    msg: format!(
                        "ticker {t} has {} values for {} days",
                        col.len(),
                        calendar.len()
                    ),
                });
            }
        }
        let index = tickers
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self {
            calendar,
            tickers,
            index,
            values,
        })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_days(&self) -> usize {
        self.calendar.len()
    }

    pub fn ticker_index(&self, ticker: &str) -> Option<usize> {
        self.index.get(ticker).copied()
    }

    /// Value series of the ticker at position `k`.
    pub fn series(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn series_of(&self, ticker: &str) -> Result<&[f64]> {
        let k = self
            .ticker_index(ticker)
            .ok_or_else(|| FriError::UnknownTicker(ticker.to_string()))?;
        Ok(&self.values[k])
    }
}

/// A dated news item with the universe tickers it mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsRecord {
    pub date: NaiveDate,
    pub id: String,
    pub tickers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headline: Option<String>,
}

/// What `load_prices` kept and dropped.
#[derive(Debug, Clone, Serialize)]
pub struct PriceLoad {
    #[serde(skip)]
    pub panel: Panel,
    /// Tickers removed for not covering every trading day, with how many
    /// days each was missing.
    pub dropped_tickers: Vec<(String, usize)>,
}

/// What `load_news` kept, remapped, and dropped.
#[derive(Debug, Clone)]
pub struct NewsLoad {
    pub records: Vec<NewsRecord>,
    /// Records dated after the last trading day, which cannot map forward.
    pub dropped_after_end: usize,
    /// Records whose date was moved to the next trading day.
    pub remapped_dates: usize,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> FriError {
    FriError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads a long-format price CSV (`date,ticker,adj_close`).
///
/// The trading calendar is the union of all dates seen; tickers that do
/// not cover every day of that calendar are dropped and reported.
pub fn load_prices(path: &Path) -> Result<PriceLoad> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| parse_err(path, 1, e.to_string()))?;
        let expect = ["date", "ticker", "adj_close"];
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(parse_err(
                path,
                1,
                format!("expected header {expect:?}, got {headers:?}"),
            ));
        }
    }

    let mut rows: HashMap<String, BTreeMap<NaiveDate, f64>> = HashMap::new();
    let mut dates: BTreeSet<NaiveDate> = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or_default();
            parse_err(path, line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        if record.len() != 3 {
            return Err(parse_err(path, line, format!("expected 3 fields, got {}", record.len())));
        }
        let date: NaiveDate = record[0]
            .parse()
            .map_err(|e| parse_err(path, line, format!("bad date {:?}: {e}", &record[0])))?;
        let ticker = record[1].trim();
        if ticker.is_empty() {
            return Err(parse_err(path, line, "empty ticker"));
        }
        let price: f64 = record[2]
            .parse()
            .map_err(|e| parse_err(path, line, format!("bad price {:?}: {e}", &record[2])))?;
        if !price.is_finite() {
            return Err(parse_err(path, line, format!("non-finite price {price}")));
        }
        dates.insert(date);
        if rows
            .entry(ticker.to_string())
            .or_default()
            .insert(date, price)
            .is_some()
        {
            return Err(FriError::DuplicateRow {
                ticker: ticker.to_string(),
                date: date.to_string(),
            });
        }
    }

    let calendar = TradingCalendar::new(dates.into_iter().collect()).map_err(|_| {
        parse_err(path, 0, "no data rows")
    })?;
    let n_days = calendar.len();

    let mut kept: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dropped: Vec<(String, usize)> = Vec::new();
    let mut names: Vec<String> = rows.keys().cloned().collect();
    names.sort();
    for name in names {
        let by_date = &rows[&name];
        if by_date.len() == n_days {
            kept.push((name, by_date.values().copied().collect()));
        } else {
            dropped.push((name, n_days - by_date.len()));
        }
    }
    if kept.is_empty() {
        return Err(FriError::EmptyUniverse);
    }
    let (tickers, values): (Vec<_>, Vec<_>) = kept.into_iter().unzip();
    Ok(PriceLoad {
        panel: Panel::new(calendar, tickers, values)?,
        dropped_tickers: dropped,
    })
}

/// Writes a panel of price levels as long-format CSV, rows ordered by
/// date then ticker.
pub fn write_prices(panel: &Panel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "date,ticker,adj_close")?;
    for (t, date) in panel.calendar().days().iter().enumerate() {
        for (k, ticker) in panel.tickers().iter().enumerate() {
            writeln!(w, "{date},{ticker},{}", panel.series(k)[t])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Daily log returns: r_t = ln(p_t / p_{t-1}).
///
/// The first calendar day is dropped, so the output panel has one fewer
/// day than the input and its calendar starts at the input's second day.
pub fn compute_log_returns(prices: &Panel) -> Result<Panel> {
    if prices.n_days() < 2 {
        return Err(FriError::InvalidParameter {
            name: "prices",
            msg: "need at least 2 days to compute returns".into(),
        });
    }
    let mut cols = Vec::with_capacity(prices.n_tickers());
    for (k, ticker) in prices.tickers().iter().enumerate() {
        let p = prices.series(k);
        for (t, &v) in p.iter().enumerate() {
            if v <= 0.0 {
                return Err(FriError::NonPositivePrice {
                    ticker: ticker.clone(),
                    date: prices.calendar().date_of(t).to_string(),
                    price: v,
                });
            }
        }
        cols.push(p.windows(2).map(|w| (w[1] / w[0]).ln()).collect());
    }
    Panel::new(
        prices.calendar().drop_first()?,
        prices.tickers().to_vec(),
        cols,
    )
}

/// Loads news JSONL, keeping only universe tickers per record, mapping
/// non-trading dates forward to the next trading day, and dropping
/// records dated after the last trading day.
pub fn load_news(
    path: &Path,
    universe: &[String],
    calendar: &TradingCalendar,
) -> Result<NewsLoad> {
    let known: HashSet<&str> = universe.iter().map(String::as_str).collect();
    let file = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut dropped_after_end = 0usize;
    let mut remapped_dates = 0usize;
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: NewsRecord = serde_json::from_str(&line)
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        let Some(day) = calendar.next_on_or_after(raw.date) else {
            dropped_after_end += 1;
            continue;
        };
        let date = calendar.date_of(day);
        if date != raw.date {
            remapped_dates += 1;
        }
        let mut tickers: Vec<String> = raw
            .tickers
            .into_iter()
            .filter(|t| known.contains(t.as_str()))
            .collect();
        tickers.sort();
        tickers.dedup();
        records.push(NewsRecord {
            date,
            id: raw.id,
            tickers,
            headline: raw.headline,
        });
    }
    Ok(NewsLoad {
        records,
        dropped_after_end,
        remapped_dates,
    })
}

/// Writes news records as JSONL in the given order.
pub fn write_news(records: &[NewsRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        let line = serde_json::to_string(r).expect("news record serializes");
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fmt::Write as _;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        std::io::Write::write_all(&mut f, content.as_bytes()).unwrap();
        f
    }

    fn complete_csv() -> &'static str {
        "date,ticker,adj_close\n\
         2022-01-03,AAA,100.0\n\
         2022-01-04,AAA,110.0\n\
         2022-01-05,AAA,121.0\n\
         2022-01-03,BBB,50.0\n\
         2022-01-04,BBB,50.0\n\
         2022-01-05,BBB,25.0\n"
    }

    #[test]
    fn load_complete_panel() {
        let f = write_tmp(complete_csv());
        let load = load_prices(f.path()).unwrap();
        assert_eq!(load.panel.n_days(), 3);
        assert_eq!(load.panel.tickers(), ["AAA", "BBB"]);
        assert!(load.dropped_tickers.is_empty());
        assert_eq!(load.panel.series_of("BBB").unwrap(), &[50.0, 50.0, 25.0]);
    }

    #[test]
    fn incomplete_ticker_dropped_and_reported() {
        let csv = "date,ticker,adj_close\n\
                   2022-01-03,AAA,100\n\
                   2022-01-04,AAA,110\n\
                   2022-01-03,BBB,50\n";
        let f = write_tmp(csv);
        let load = load_prices(f.path()).unwrap();
        assert_eq!(load.panel.tickers(), ["AAA"]);
        assert_eq!(load.dropped_tickers, vec![("BBB".to_string(), 1)]);
    }

    #[test]
    fn duplicate_row_is_an_error() {
        let csv = "date,ticker,adj_close\n\
                   2022-01-03,AAA,100\n\
                   2022-01-03,AAA,101\n";
        let f = write_tmp(csv);
        match load_prices(f.path()) {
            Err(FriError::DuplicateRow { ticker, date }) => {
                assert_eq!(ticker, "AAA");
                assert_eq!(date, "2022-01-03");
            }
            other => panic!("expected DuplicateRow, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_line_number() {
        let csv = "date,ticker,adj_close\n\
                   2022-01-03,AAA,100\n\
                   not-a-date,AAA,100\n";
        let f = write_tmp(csv);
        match load_prices(f.path()) {
            Err(FriError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn all_tickers_incomplete_is_empty_universe() {
        let csv = "date,ticker,adj_close\n\
                   2022-01-03,AAA,100\n\
                   2022-01-04,BBB,50\n";
        let f = write_tmp(csv);
        assert!(matches!(load_prices(f.path()), Err(FriError::EmptyUniverse)));
    }

    #[test]
    fn log_returns_known_values() {
        let f = write_tmp(complete_csv());
        let prices = load_prices(f.path()).unwrap().panel;
        let returns = compute_log_returns(&prices).unwrap();
        assert_eq!(returns.n_days(), 2);
        assert_eq!(returns.calendar().date_of(0), d("2022-01-04"));
        let a = returns.series_of("AAA").unwrap();
        // ln(110/100) = ln(1.1); frozen to full precision.
        assert!((a[0] - 0.09531017980432486).abs() < 1e-15);
        assert!((a[1] - 0.09531017980432486).abs() < 1e-15);
        let b = returns.series_of("BBB").unwrap();
        assert_eq!(b[0], 0.0);
        assert!((b[1] - (-0.6931471805599453)).abs() < 1e-15);
    }

    #[test]
    fn non_positive_price_names_ticker_and_date() {
        let csv = "date,ticker,adj_close\n\
                   2022-01-03,AAA,100\n\
                   2022-01-04,AAA,-1\n";
        let f = write_tmp(csv);
        let prices = load_prices(f.path()).unwrap().panel;
        match compute_log_returns(&prices) {
            Err(FriError::NonPositivePrice { ticker, date, .. }) => {
                assert_eq!(ticker, "AAA");
                assert_eq!(date, "2022-01-04");
            }
            other => panic!("expected NonPositivePrice, got {other:?}"),
        }
    }

    fn cal3() -> TradingCalendar {
        TradingCalendar::new(vec![d("2022-01-03"), d("2022-01-04"), d("2022-01-10")]).unwrap()
    }

    #[test]
    fn news_filters_unknown_tickers_and_remaps_weekend() {
        let jsonl = concat!(
            r#"{"date":"2022-01-03","id":"n1","tickers":["AAA","ZZZ"],"headline":"x"}"#,
            "\n",
            r#"{"date":"2022-01-08","id":"n2","tickers":["AAA","BBB"]}"#,
            "\n",
            r#"{"date":"2022-02-01","id":"n3","tickers":["AAA"]}"#,
            "\n",
            r#"{"date":"2022-01-04","id":"n4","tickers":[]}"#,
            "\n",
        );
        let f = write_tmp(jsonl);
        let universe = vec!["AAA".to_string(), "BBB".to_string()];
        let load = load_news(f.path(), &universe, &cal3()).unwrap();
        assert_eq!(load.records.len(), 3);
        assert_eq!(load.dropped_after_end, 1);
        assert_eq!(load.remapped_dates, 1);
        assert_eq!(load.records[0].tickers, ["AAA"]);
        // Saturday 2022-01-08 maps to Monday 2022-01-10.
        assert_eq!(load.records[1].date, d("2022-01-10"));
        assert_eq!(load.records[1].tickers, ["AAA", "BBB"]);
        // Empty ticker list is retained.
        assert!(load.records[2].tickers.is_empty());
    }

    #[test]
    fn news_parse_error_carries_line_number() {
        let f = write_tmp("{\"date\":\"2022-01-03\",\"id\":\"a\",\"tickers\":[]}\nnot json\n");
        match load_news(f.path(), &[], &cal3()) {
            Err(FriError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn prices_roundtrip() {
        let f = write_tmp(complete_csv());
        let first = load_prices(f.path()).unwrap().panel;
        let out = tempfile::NamedTempFile::new().unwrap();
        write_prices(&first, out.path()).unwrap();
        let second = load_prices(out.path()).unwrap().panel;
        assert_eq!(first, second);
    }

    #[test]
    fn news_roundtrip_is_idempotent() {
        let jsonl = concat!(
            r#"{"date":"2022-01-08","id":"n1","tickers":["BBB","AAA","AAA"]}"#,
            "\n",
            r#"{"date":"2022-01-03","id":"n2","tickers":["AAA"],"headline":"h"}"#,
            "\n",
        );
        let f = write_tmp(jsonl);
        let universe = vec!["AAA".to_string(), "BBB".to_string()];
        let first = load_news(f.path(), &universe, &cal3()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_news(&first.records, out.path()).unwrap();
        let second = load_news(out.path(), &universe, &cal3()).unwrap();
        assert_eq!(first.records, second.records);
        assert_eq!(second.remapped_dates, 0);
    }

    proptest! {
        /// Price panels survive a write/load cycle exactly, and returns
        /// telescope: sum of log returns = ln(p_T / p_0) to 1e-12.
        #[test]
        fn roundtrip_and_telescoping(
            prices in proptest::collection::vec(1.0f64..1000.0, 2..40),
        ) {
            let days: Vec<NaiveDate> = (0..prices.len() as i64)
                .map(|i| d("2022-01-03") + chrono::Days::new(i as u64))
                .collect();
            let cal = TradingCalendar::new(days).unwrap();
            let panel = Panel::new(cal, vec!["AAA".into()], vec![prices.clone()]).unwrap();

            let mut csv = String::from("date,ticker,adj_close\n");
            for (t, day) in panel.calendar().days().iter().enumerate() {
                writeln!(csv, "{day},AAA,{}", panel.series(0)[t]).unwrap();
            }
            let f = write_tmp(&csv);
            let loaded = load_prices(f.path()).unwrap().panel;
            prop_assert_eq!(&loaded, &panel);

            let returns = compute_log_returns(&panel).unwrap();
            prop_assert_eq!(returns.n_days(), panel.n_days() - 1);
            let sum: f64 = returns.series(0).iter().sum();
            let expect = (prices[prices.len() - 1] / prices[0]).ln();
            prop_assert!((sum - expect).abs() < 1e-12);
        }
    }
}
