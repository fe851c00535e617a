//! Report rows, comparison rows and their CSV and text renderings.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{diff_metric, var_ratio, Estimate, EstimateError};
use crate::domain::{Outcome, ViolenceType, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Every collected respondent, treated as a simple random sample.
    Original,
    /// Weighted respondents' strata and clusters with unit weights.
    Unweighted,
    Weighted,
}

impl DesignKind {
    pub const ALL: [DesignKind; 3] = [Self::Original, Self::Unweighted, Self::Weighted];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Original => "original",
            Self::Unweighted => "unweighted",
            Self::Weighted => "weighted",
        }
    }
}

impl std::str::FromStr for DesignKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Self::Original),
            "unweighted" => Ok(Self::Unweighted),
            "weighted" => Ok(Self::Weighted),
            other => Err(format!("unknown design `{other}`")),
        }
    }
}

/// One report cell; `prev`, `se` and the interval are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub year: u32,
    pub city: String,
    pub outcome: Outcome,
    pub design: DesignKind,
    pub n: usize,
    pub prev: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl PrevalenceRow {
    pub fn from_estimate(year: u32, city: &str, outcome: Outcome, design: DesignKind, e: &Estimate) -> Self {
        Self {
            year,
            city: city.to_string(),
            outcome,
            design,
            n: e.n,
            prev: 100.0 * e.prev,
            se: 100.0 * e.se,
            ci_low: 100.0 * e.ci_low,
            ci_high: 100.0 * e.ci_high,
        }
    }
}

pub const REPORT_HEADER: [&str; 10] =
    ["year", "city", "type", "window", "design", "n", "prev", "se", "ci_low", "ci_high"];
pub const COMPARISON_HEADER: [&str; 6] = ["year", "city", "type", "window", "diff_pct", "var_ratio"];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_report<W: Write>(rows: &[PrevalenceRow], writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(REPORT_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.year.to_string(),
            r.city.clone(),
            r.outcome.vtype.as_str().to_string(),
            r.outcome.window.as_str().to_string(),
            r.design.as_str().to_string(),
            r.n.to_string(),
            num(r.prev),
            num(r.se),
            num(r.ci_low),
            num(r.ci_high),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_report<R: Read>(reader: R) -> Result<Vec<PrevalenceRow>, EstimateError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let perr = |line: u64, message: String| EstimateError::Parse { line, message };
    let headers = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != REPORT_HEADER {
        return Err(perr(1, format!("expected header {}", REPORT_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |k: usize| -> Result<f64, EstimateError> {
            rec[k].parse::<f64>().map_err(|e| perr(line, format!("`{}`: {e}", REPORT_HEADER[k])))
        };
        out.push(PrevalenceRow {
            year: rec[0].parse().map_err(|e| perr(line, format!("`year`: {e}")))?,
            city: rec[1].to_string(),
            outcome: Outcome::new(
                rec[2].parse::<ViolenceType>().map_err(|e| perr(line, e))?,
                rec[3].parse::<Window>().map_err(|e| perr(line, e))?,
            ),
            design: rec[4].parse().map_err(|e| perr(line, e))?,
            n: rec[5].parse().map_err(|e| perr(line, format!("`n`: {e}")))?,
            prev: f(6)?,
            se: f(7)?,
            ci_low: f(8)?,
            ci_high: f(9)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub year: u32,
    pub city: String,
    pub outcome: Outcome,
    pub diff_pct: Option<f64>,
    pub var_ratio: Option<f64>,
}

type CellKey = (u32, String, Outcome);

/// Pairs weighted and unweighted rows of the same cell.
pub fn compare(rows: &[PrevalenceRow]) -> Vec<ComparisonRow> {
    let mut cells: BTreeMap<CellKey, (Option<&PrevalenceRow>, Option<&PrevalenceRow>)> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let key = (r.year, r.city.clone(), r.outcome);
        if !cells.contains_key(&key) {
            order.push(key.clone());
        }
        let slot = cells.entry(key).or_default();
        match r.design {
            DesignKind::Weighted => slot.0 = Some(r),
            DesignKind::Unweighted => slot.1 = Some(r),
            DesignKind::Original => {}
        }
    }
    order
        .into_iter()
        .filter_map(|key| {
            let (w, u) = cells[&key];
            let (w, u) = (w?, u?);
            Some(ComparisonRow {
                year: key.0,
                city: key.1,
                outcome: key.2,
                diff_pct: diff_metric(w.prev, u.prev),
                var_ratio: var_ratio(w.se * w.se, u.se * u.se),
            })
        })
        .collect()
}

pub fn write_comparison<W: Write>(rows: &[ComparisonRow], writer: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COMPARISON_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.year.to_string(),
            r.city.clone(),
            r.outcome.vtype.as_str().to_string(),
            r.outcome.window.as_str().to_string(),
            r.diff_pct.map(num).unwrap_or_default(),
            r.var_ratio.map(num).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Comparison rows grouped by figure panel `a`..`f` (type by window).
pub fn figure_panels(rows: &[ComparisonRow]) -> BTreeMap<char, Vec<ComparisonRow>> {
    let mut out: BTreeMap<char, Vec<ComparisonRow>> = Outcome::grid().iter().map(|o| (o.panel(), Vec::new())).collect();
    for r in rows {
        out.entry(r.outcome.panel()).or_default().push(r.clone());
    }
    out
}

/// Text table for one year and outcome: per city, `n`, `Prev` and `CI` under
/// each design, two decimals.
pub fn render_table(rows: &[PrevalenceRow], year: u32, outcome: Outcome) -> String {
    let mut cities: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.year == year && r.outcome == outcome) {
        if !cities.contains(&r.city.as_str()) {
            cities.push(&r.city);
        }
    }
    let cell = |city: &str, d: DesignKind| {
        rows.iter().find(|r| r.year == year && r.outcome == outcome && r.city == city && r.design == d)
    };
    let mut lines = vec![
        format!("{year} {outcome}"),
        format!(
            "{:<16}{:>7}{:>8}{:>16}{:>7}{:>8}{:>16}{:>7}{:>8}{:>16}",
            "City", "n", "Prev", "CI", "n", "Prev", "CI", "n", "Prev", "CI"
        ),
        format!("{:<16}{:^31}{:^31}{:^31}", "", "Original", "Unweighted", "Weighted"),
    ];
    for city in cities {
        let mut line = format!("{city:<16}");
        for d in DesignKind::ALL {
            match cell(city, d) {
                Some(r) => line.push_str(&format!(
                    "{:>7}{:>8.2}{:>16}",
                    r.n,
                    r.prev,
                    format!("{:.2} - {:.2}", r.ci_low, r.ci_high)
                )),
                None => line.push_str(&format!("{:>7}{:>8}{:>16}", "", "", "")),
            }
        }
        lines.push(line.trim_end().to_string());
    }
    lines.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(design: DesignKind, prev: f64, se: f64) -> PrevalenceRow {
        PrevalenceRow {
            year: 2016,
            city: "Recife".into(),
            outcome: Outcome::new(ViolenceType::Sexual, Window::Last12Months),
            design,
            n: 100,
            prev,
            se,
            ci_low: prev - 1.0,
            ci_high: prev + 1.0,
        }
    }

    #[test]
    fn report_round_trip() {
        let rows = vec![row(DesignKind::Weighted, 0.89, 0.3), row(DesignKind::Unweighted, 1.84, 0.5)];
        let mut buf = Vec::new();
        write_report(&rows, &mut buf).unwrap();
        assert_eq!(read_report(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn comparison_pairs_designs() {
        let rows = vec![
            row(DesignKind::Original, 2.0, 0.4),
            row(DesignKind::Weighted, 0.89, 0.3),
            row(DesignKind::Unweighted, 1.84, 0.5),
        ];
        let c = compare(&rows);
        assert_eq!(c.len(), 1);
        assert!((c[0].diff_pct.unwrap() + 51.63).abs() < 0.01);
        assert!((c[0].var_ratio.unwrap() - 0.36).abs() < 1e-12);
        let panels = figure_panels(&c);
        assert_eq!(panels.len(), 6);
        assert_eq!(panels[&'f'].len(), 1);
    }

    #[test]
    fn table_has_three_designs() {
        let rows = vec![row(DesignKind::Weighted, 0.89, 0.3), row(DesignKind::Unweighted, 1.84, 0.5)];
        let t = render_table(&rows, 2016, rows[0].outcome);
        assert!(t.contains("Original") && t.contains("Weighted"));
        assert!(t.contains("0.89") && t.contains("0.84 - 2.84"));
    }
}
