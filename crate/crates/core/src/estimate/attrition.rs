//! Panel attrition bookkeeping: wave-1 interviews, attrition outside and
//! inside the household, pairs, out-of-household refreshments, wave-2 total.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttritionRow {
    pub city: String,
    /// Wave-1 interviews (a).
    pub wave1: u64,
    /// Attrition outside the wave-1 household (b).
    pub att_out: u64,
    /// Attrition inside the household, each coupled with a substitute (c).
    pub att_in: u64,
    /// Refreshments from other households (f).
    pub ref_out: u64,
}

impl AttritionRow {
    pub fn new(city: &str, wave1: u64, att_out: u64, att_in: u64, ref_out: u64) -> Self {
        Self { city: city.to_string(), wave1, att_out, att_in, ref_out }
    }

    /// d = b + c.
    pub fn attrition(&self) -> u64 {
        self.att_out + self.att_in
    }

    /// e = a - d, women interviewed in both waves.
    pub fn pairs(&self) -> u64 {
        self.wave1 - self.attrition()
    }

    /// g = f + c + e.
    pub fn wave2(&self) -> u64 {
        self.ref_out + self.att_in + self.pairs()
    }

    pub fn rate(&self) -> f64 {
        self.attrition() as f64 / self.wave1 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttritionTotals {
    pub wave1: u64,
    pub att_out: u64,
    pub att_in: u64,
    pub attrition: u64,
    pub pairs: u64,
    pub ref_out: u64,
    pub wave2: u64,
}

impl AttritionTotals {
    pub fn of(rows: &[AttritionRow]) -> Self {
        let sum = |f: &dyn Fn(&AttritionRow) -> u64| rows.iter().map(f).sum();
        Self {
            wave1: sum(&|r| r.wave1),
            att_out: sum(&|r| r.att_out),
            att_in: sum(&|r| r.att_in),
            attrition: sum(&|r| r.attrition()),
            pairs: sum(&|r| r.pairs()),
            ref_out: sum(&|r| r.ref_out),
            wave2: sum(&|r| r.wave2()),
        }
    }
}

/// Overall attrition rate, total attrition over total wave-1 interviews.
pub fn attrition_rate(rows: &[AttritionRow]) -> f64 {
    let t = AttritionTotals::of(rows);
    t.attrition as f64 / t.wave1 as f64
}

/// City rows of the published 2016-2017 panel accounting (a, b, c, f).
pub fn table2_rows() -> Vec<AttritionRow> {
    vec![
        AttritionRow::new("Aracaju", 986, 506, 88, 521),
        AttritionRow::new("Fortaleza", 1172, 473, 31, 534),
        AttritionRow::new("J Pessoa", 1072, 599, 73, 522),
        AttritionRow::new("Maceio", 943, 469, 36, 599),
        AttritionRow::new("Natal", 1052, 582, 106, 621),
        AttritionRow::new("Recife", 1245, 301, 332, 268),
        AttritionRow::new("Salvador", 1104, 506, 53, 589),
        AttritionRow::new("S Luis", 1082, 504, 112, 519),
        AttritionRow::new("Teresina", 962, 428, 103, 422),
    ]
}
