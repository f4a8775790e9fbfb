//! Testable implications that decide which assumption menus survive.

use serde::Serialize;

use crate::bounds_a1::{first_stage_sign, FirstStage};
use crate::bounds_a3::trimmed_mean_bounds;
use crate::data::{cell_stats, Sample};
use crate::empirics::{binned_density, BinRule, BinnedDensity, Grid};
use crate::error::{Error, Result};
use crate::gamma::MaybeEmptyInterval;

/// Tolerance for deciding that a slack or overlap statistic is zero.
pub const TAU_TEST: f64 = 1e-9;

/// The four cell densities `f(y, d | z)` on one common grid.
#[derive(Debug, Clone)]
pub struct CellDensities {
    pub grid: Grid,
    dens: [[BinnedDensity; 2]; 2],
}

impl CellDensities {
    pub fn new(sample: &Sample, grid: Grid) -> Result<Self> {
        sample.require_arms()?;
        let f = |d, z| binned_density(sample, d, z, &grid);
        let dens = [[f(0, 0)?, f(0, 1)?], [f(1, 0)?, f(1, 1)?]];
        Ok(Self { grid, dens })
    }

    pub fn for_sample(sample: &Sample, rule: BinRule) -> Result<Self> {
        Self::new(sample, Grid::for_sample(sample, rule)?)
    }

    pub fn density(&self, d: u8, z: u8) -> &BinnedDensity {
        &self.dens[d as usize][z as usize]
    }

    /// `int (f(y, s | 1 - s) - f(y, s | s))^+` for `s = 0, 1`.
    pub fn slacks(&self) -> Slacks {
        let pos = |s: u8| {
            let (a, b) = (self.density(s, 1 - s), self.density(s, s));
            (0..a.counts.len())
                .map(|i| (a.mass(i) - b.mass(i)).max(0.0))
                .sum::<f64>()
        };
        Slacks {
            slack_d0: pos(0),
            slack_d1: pos(1),
        }
    }

    /// `max_d int max_z f(y, d | z) - 1`.
    pub fn overlap_statistic(&self) -> f64 {
        (0..2u8)
            .map(|d| {
                let (a, b) = (self.density(d, 0), self.density(d, 1));
                (0..a.counts.len())
                    .map(|i| a.mass(i).max(b.mass(i)))
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
            - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slacks {
    pub slack_d0: f64,
    pub slack_d1: f64,
}

impl Slacks {
    pub fn max(&self) -> f64 {
        self.slack_d0.max(self.slack_d1)
    }

    /// Both inequalities hold up to `tol`.
    pub fn hold(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

pub fn late_inequality_slack(sample: &Sample, rule: BinRule) -> Result<Slacks> {
    Ok(CellDensities::for_sample(sample, rule)?.slacks())
}

pub fn overlap_statistic(sample: &Sample, rule: BinRule) -> Result<f64> {
    Ok(CellDensities::for_sample(sample, rule)?.overlap_statistic())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErCheck {
    pub mu_10a: Option<f64>,
    pub id_set_mu_11a: Option<MaybeEmptyInterval>,
    pub mu_01n: Option<f64>,
    pub id_set_mu_00n: Option<MaybeEmptyInterval>,
    pub reject_er: bool,
    /// The check ran on `(Y, D, 1 - Z)` because the first stage was negative.
    pub relabeled: bool,
}

/// Exclusion check under random assignment and monotonicity: the identified
/// untreated-instrument means must fall inside the bounds of their partners.
pub fn er_check_a3(sample: &Sample) -> Result<ErCheck> {
    let stats = cell_stats(sample)?;
    let (work, relabeled) = match first_stage_sign(stats.first_stage()) {
        FirstStage::Positive => (None, false),
        FirstStage::Negative => (Some(sample.relabeled()), true),
        FirstStage::Zero => return Err(Error::DegenerateFirstStage),
    };
    let m = trimmed_mean_bounds(work.as_ref().unwrap_or(sample))?;
    let outside = |p: Option<f64>, iv: Option<MaybeEmptyInterval>| match (p, iv) {
        (Some(p), Some(iv)) => !iv.contains(p),
        _ => false,
    };
    let reject_er = outside(m.mu_10a, m.mu_11a) || outside(m.mu_01n, m.mu_00n);
    Ok(ErCheck {
        mu_10a: m.mu_10a,
        id_set_mu_11a: m.mu_11a,
        mu_01n: m.mu_01n,
        id_set_mu_00n: m.mu_00n,
        reject_er,
        relabeled,
    })
}
