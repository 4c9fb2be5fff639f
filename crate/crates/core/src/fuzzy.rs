//! POST beep classification.
//!
//! A beep duration (seconds) is fuzzified against five trapezoidal membership
//! functions. The strongest linguistic value selects one of six single
//! antecedent rules; an unending train of beeps maps to `Infinite` regardless
//! of duration.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Degrees closer than this are treated as a tie.
const TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("beep duration must be a non-negative number of seconds, got {0}")]
    NegativeDuration(f64),
    #[error("{0} has no crisp duration")]
    NotDefuzzifiable(LinguisticValue),
    #[error("invalid membership breakpoints: {0}")]
    InvalidBreakpoints(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinguisticValue {
    #[serde(rename = "very short")]
    VeryShort,
    #[serde(rename = "short")]
    Short,
    #[serde(rename = "long")]
    Long,
    #[serde(rename = "very long")]
    VeryLong,
    #[serde(rename = "continuous")]
    Continuous,
    #[serde(rename = "infinite")]
    Infinite,
}

impl LinguisticValue {
    pub const ALL: [LinguisticValue; 6] = [
        Self::VeryShort,
        Self::Short,
        Self::Long,
        Self::VeryLong,
        Self::Continuous,
        Self::Infinite,
    ];

    /// Values with a duration membership function, shortest first.
    pub const DURATION: [LinguisticValue; 5] = [
        Self::VeryShort,
        Self::Short,
        Self::Long,
        Self::VeryLong,
        Self::Continuous,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::VeryShort => "very short",
            Self::Short => "short",
            Self::Long => "long",
            Self::VeryLong => "very long",
            Self::Continuous => "continuous",
            Self::Infinite => "infinite",
        }
    }

    /// The action of the fuzzy rule whose antecedent is this value.
    pub fn message(self) -> &'static str {
        match self {
            Self::VeryShort => "normal POST, system is OK",
            Self::Short => "POST error",
            Self::Long => "system board problem",
            Self::VeryLong => "3270 keyboard card",
            Self::Continuous => "power supply, system board, or keyboard problem",
            Self::Infinite => "power supply or system board problem or keyboard",
        }
    }
}

impl fmt::Display for LinguisticValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Rises on `a..b`, is 1 on `b..=c`, falls on `c..d`. `c` and `d` may be
/// infinite for a right-unbounded plateau.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Trapezoid {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn degree(&self, x: f64) -> f64 {
        if x >= self.b && x <= self.c {
            1.0
        } else if x <= self.a || x >= self.d {
            0.0
        } else if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else {
            (self.d - x) / (self.d - self.c)
        }
    }

    /// Midpoint of the plateau; a right-unbounded plateau has none.
    fn plateau_midpoint(&self) -> Option<f64> {
        self.c.is_finite().then(|| (self.b + self.c) / 2.0)
    }
}

/// Breakpoints as they appear in configuration files. `continuous` has only
/// its rising edge; its plateau extends to infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyBreakpoints {
    pub very_short: [f64; 4],
    pub short: [f64; 4],
    pub long: [f64; 4],
    pub very_long: [f64; 4],
    pub continuous: [f64; 2],
}

impl Default for FuzzyBreakpoints {
    fn default() -> Self {
        Self {
            very_short: [0.0, 0.0, 0.2, 0.5],
            short: [0.2, 0.5, 0.9, 1.2],
            long: [0.9, 1.2, 2.0, 2.5],
            very_long: [2.0, 2.5, 4.0, 4.5],
            continuous: [4.0, 4.5],
        }
    }
}

/// Boundary of the crisp domain; the defuzzified value of `Continuous`.
pub const CONTINUOUS_CRISP_SECONDS: f64 = 5.0;

/// The five duration membership functions.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFunction {
    shapes: [Trapezoid; 5],
}

impl Default for MembershipFunction {
    fn default() -> Self {
        Self::from_breakpoints(&FuzzyBreakpoints::default()).expect("default breakpoints are valid")
    }
}

impl MembershipFunction {
    /// Validates breakpoints: each trapezoid is ordered, the shortest value
    /// covers 0 s, neighbours overlap (no uncovered gap), and a plateau ends
    /// before the next value starts rising.
    pub fn from_breakpoints(bp: &FuzzyBreakpoints) -> Result<Self, FuzzyError> {
        let t = |p: [f64; 4]| Trapezoid::new(p[0], p[1], p[2], p[3]);
        let shapes = [
            t(bp.very_short),
            t(bp.short),
            t(bp.long),
            t(bp.very_long),
            Trapezoid::new(
                bp.continuous[0],
                bp.continuous[1],
                f64::INFINITY,
                f64::INFINITY,
            ),
        ];
        let invalid = |msg: String| Err(FuzzyError::InvalidBreakpoints(msg));
        for (value, s) in LinguisticValue::DURATION.iter().zip(&shapes) {
            if [s.a, s.b].iter().any(|v| !v.is_finite() || *v < 0.0) || s.c.is_nan() || s.d.is_nan()
            {
                return invalid(format!(
                    "{value}: breakpoints must be finite and non-negative"
                ));
            }
            if !(s.a <= s.b && s.b <= s.c && s.c <= s.d) {
                return invalid(format!("{value}: expected a <= b <= c <= d"));
            }
        }
        if shapes[0].degree(0.0) <= 0.0 {
            return invalid("very short must have positive membership at 0 s".into());
        }
        for (pair, names) in shapes.windows(2).zip(LinguisticValue::DURATION.windows(2)) {
            let (prev, next) = (pair[0], pair[1]);
            if next.a >= prev.d {
                return invalid(format!("gap between {} and {}", names[0], names[1]));
            }
            if prev.c > next.a {
                return invalid(format!(
                    "{} starts rising inside the plateau of {}",
                    names[1], names[0]
                ));
            }
        }
        Ok(Self { shapes })
    }

    pub fn trapezoid(&self, value: LinguisticValue) -> Option<&Trapezoid> {
        LinguisticValue::DURATION
            .iter()
            .position(|v| *v == value)
            .map(|i| &self.shapes[i])
    }

    fn degrees(&self, seconds: f64) -> impl Iterator<Item = (LinguisticValue, f64)> + '_ {
        LinguisticValue::DURATION
            .into_iter()
            .zip(self.shapes.iter().map(move |s| s.degree(seconds)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeepPattern {
    pub duration_seconds: f64,
    #[serde(default)]
    pub repeating_without_end: bool,
}

impl BeepPattern {
    pub fn new(duration_seconds: f64, repeating_without_end: bool) -> Self {
        Self {
            duration_seconds,
            repeating_without_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostDiagnosis {
    pub linguistic: LinguisticValue,
    pub message: &'static str,
}

/// Beep classifier over a fixed set of membership functions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FuzzyEngine {
    membership: MembershipFunction,
}

fn check_duration(seconds: f64) -> Result<f64, FuzzyError> {
    if seconds >= 0.0 {
        Ok(seconds)
    } else {
        Err(FuzzyError::NegativeDuration(seconds))
    }
}

impl FuzzyEngine {
    pub fn new(membership: MembershipFunction) -> Self {
        Self { membership }
    }

    pub fn membership(&self) -> &MembershipFunction {
        &self.membership
    }

    /// Degree of each duration value at `seconds`. `Infinite` is not included.
    pub fn fuzzify(&self, seconds: f64) -> Result<BTreeMap<LinguisticValue, f64>, FuzzyError> {
        let seconds = check_duration(seconds)?;
        Ok(self.membership.degrees(seconds).collect())
    }

    /// Strongest value; ties go to the longer value.
    pub fn classify(&self, pattern: &BeepPattern) -> Result<LinguisticValue, FuzzyError> {
        let seconds = check_duration(pattern.duration_seconds)?;
        if pattern.repeating_without_end {
            return Ok(LinguisticValue::Infinite);
        }
        let mut best = (LinguisticValue::VeryShort, f64::NEG_INFINITY);
        for (value, degree) in self.membership.degrees(seconds) {
            if degree >= best.1 - TIE_EPSILON {
                best = (value, degree.max(best.1));
            }
        }
        Ok(best.0)
    }

    pub fn diagnose_beep(&self, pattern: &BeepPattern) -> Result<PostDiagnosis, FuzzyError> {
        let linguistic = self.classify(pattern)?;
        Ok(PostDiagnosis {
            linguistic,
            message: linguistic.message(),
        })
    }

    /// Plateau midpoint in seconds; `Continuous` maps to the 5 s domain
    /// boundary, `Infinite` has no crisp value.
    pub fn defuzzify(&self, value: LinguisticValue) -> Result<f64, FuzzyError> {
        match value {
            LinguisticValue::Infinite => Err(FuzzyError::NotDefuzzifiable(value)),
            LinguisticValue::Continuous => {
                let shape = self.membership.trapezoid(value).expect("duration value");
                Ok(CONTINUOUS_CRISP_SECONDS.max(shape.b))
            }
            _ => Ok(self
                .membership
                .trapezoid(value)
                .and_then(Trapezoid::plateau_midpoint)
                .expect("bounded plateau")),
        }
    }
}
