//! Shared vocabulary: violence types, recall windows and respondent covariates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolenceType {
    Emotional,
    Physical,
    Sexual,
}

impl ViolenceType {
    pub const ALL: [ViolenceType; 3] = [Self::Emotional, Self::Physical, Self::Sexual];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Emotional => "emotional",
            Self::Physical => "physical",
            Self::Sexual => "sexual",
        }
    }

    /// Default number of scale items per recall window.
    pub fn default_items(self) -> usize {
        match self {
            Self::Emotional => 4,
            Self::Physical => 8,
            Self::Sexual => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Lifetime,
    #[serde(rename = "12m")]
    Last12Months,
}

impl Window {
    pub const ALL: [Window; 2] = [Self::Lifetime, Self::Last12Months];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lifetime => "lifetime",
            Self::Last12Months => "12m",
        }
    }
}

/// A (type, window) pair; six of them make up the reporting grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Outcome {
    pub vtype: ViolenceType,
    pub window: Window,
}

impl Outcome {
    pub const fn new(vtype: ViolenceType, window: Window) -> Self {
        Self { vtype, window }
    }

    /// The six outcomes in panel order: (a) emotional lifetime ... (f) sexual 12m.
    pub fn grid() -> [Outcome; 6] {
        let mut out = [Outcome::new(ViolenceType::Emotional, Window::Lifetime); 6];
        let mut k = 0;
        for vtype in ViolenceType::ALL {
            for window in Window::ALL {
                out[k] = Outcome::new(vtype, window);
                k += 1;
            }
        }
        out
    }

    pub fn index(self) -> usize {
        let t = match self.vtype {
            ViolenceType::Emotional => 0,
            ViolenceType::Physical => 1,
            ViolenceType::Sexual => 2,
        };
        let w = match self.window {
            Window::Lifetime => 0,
            Window::Last12Months => 1,
        };
        2 * t + w
    }

    /// Figure panel letter, `a` through `f`.
    pub fn panel(self) -> char {
        (b'a' + self.index() as u8) as char
    }

    /// Column prefix used for item columns, e.g. `physical_12m`.
    pub fn column_prefix(self) -> String {
        format!("{}_{}", self.vtype.as_str(), self.window.as_str())
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.vtype.as_str(), self.window.as_str())
    }
}

impl FromStr for ViolenceType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "emotional" => Ok(Self::Emotional),
            "physical" => Ok(Self::Physical),
            "sexual" => Ok(Self::Sexual),
            other => Err(format!("unknown violence type `{other}`")),
        }
    }
}

impl FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lifetime" => Ok(Self::Lifetime),
            "12m" | "last_12_months" | "last12months" => Ok(Self::Last12Months),
            other => Err(format!("unknown window `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    /// 15 to 29.
    Young,
    /// 30 and over.
    Adult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Race {
    White,
    NonWhite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Education {
    /// Includes no schooling.
    Elementary,
    HighSchool,
    Undergraduate,
}

impl AgeGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Young => "young",
            Self::Adult => "adult",
        }
    }
}

impl Race {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::White => "white",
            Self::NonWhite => "non_white",
        }
    }
}

impl Education {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Elementary => "elementary",
            Self::HighSchool => "high_school",
            Self::Undergraduate => "undergraduate",
        }
    }

    pub fn level(self) -> u8 {
        match self {
            Self::Elementary => 0,
            Self::HighSchool => 1,
            Self::Undergraduate => 2,
        }
    }
}

impl FromStr for AgeGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "young" => Ok(Self::Young),
            "adult" => Ok(Self::Adult),
            other => Err(format!("unknown age group `{other}`")),
        }
    }
}

impl FromStr for Race {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "white" => Ok(Self::White),
            "non_white" | "nonwhite" | "non-white" => Ok(Self::NonWhite),
            other => Err(format!("unknown race `{other}`")),
        }
    }
}

impl FromStr for Education {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "elementary" => Ok(Self::Elementary),
            "high_school" | "highschool" => Ok(Self::HighSchool),
            "undergraduate" => Ok(Self::Undergraduate),
            other => Err(format!("unknown education level `{other}`")),
        }
    }
}

/// Respondent characteristics used by raking, the section-response logit and
/// the synthetic outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Covariates {
    pub cohab: bool,
    pub know_victim: bool,
    pub children: bool,
    pub age_group: AgeGroup,
    pub race: Race,
    pub education: Education,
}

impl Covariates {
    /// Label of this respondent for a raking margin variable.
    pub fn margin_label(&self, variable: &str) -> Option<&'static str> {
        match variable {
            "age" | "age_group" => Some(self.age_group.as_str()),
            "race" => Some(self.race.as_str()),
            "education" => Some(self.education.as_str()),
            _ => None,
        }
    }

    /// `[cohab, know_victim, children]` as 0/1.
    pub fn response_row(&self) -> [f64; 3] {
        [f64::from(u8::from(self.cohab)), f64::from(u8::from(self.know_victim)), f64::from(u8::from(self.children))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_matches_panels() {
        let grid = Outcome::grid();
        assert_eq!(grid[0], Outcome::new(ViolenceType::Emotional, Window::Lifetime));
        assert_eq!(grid[5], Outcome::new(ViolenceType::Sexual, Window::Last12Months));
        for (k, o) in grid.iter().enumerate() {
            assert_eq!(o.index(), k);
        }
        assert_eq!(grid[5].panel(), 'f');
    }

    #[test]
    fn labels_parse_back() {
        for e in [Education::Elementary, Education::HighSchool, Education::Undergraduate] {
            assert_eq!(e.as_str().parse::<Education>().unwrap(), e);
        }
        assert_eq!("non_white".parse::<Race>().unwrap(), Race::NonWhite);
        assert_eq!("12m".parse::<Window>().unwrap(), Window::Last12Months);
    }
}
