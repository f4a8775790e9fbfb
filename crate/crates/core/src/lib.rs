//! Identified sets for treatment-effect parameters in randomized experiments
//! with noncompliance.
//!
//! Three assumption menus are supported: random assignment with exclusion and
//! monotonicity ([`bounds_a1`]), random assignment with exclusion
//! ([`bounds_a2`]), and random assignment with monotonicity ([`bounds_a3`]).
//! [`robust`] picks the weakest menu the data do not refute, and
//! [`inference`] provides trimming estimators with confidence intervals.

pub mod bounds_a1;
pub mod bounds_a2;
pub mod bounds_a3;
pub mod data;
pub mod empirics;
pub mod error;
pub mod gamma;
pub mod inference;
pub mod par;
pub mod robust;
pub mod simulator;
pub mod validity;

pub use data::{cell_stats, load_csv, CellStats, ColumnMap, Observation, Sample};
pub use error::{Error, Result};
pub use gamma::{Compliance, Entry, GammaSet, MaybeEmptyInterval, Menu, OutcomeRange, Param};

use empirics::BinRule;

/// Knobs shared by the bound engines.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Logical outcome range; the sample range when absent.
    pub outcome_range: Option<OutcomeRange>,
    pub bins: BinRule,
    /// Interior points of the defier-share grid.
    pub grid_points: usize,
    pub level: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            outcome_range: None,
            bins: BinRule::FreedmanDiaconis,
            grid_points: 101,
            level: 0.95,
        }
    }
}

impl Settings {
    pub fn range_for(&self, sample: &Sample) -> OutcomeRange {
        self.outcome_range.unwrap_or_else(|| {
            let (lo, hi) = sample.outcome_range();
            OutcomeRange { lo, hi }
        })
    }
}
