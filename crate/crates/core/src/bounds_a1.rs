//! Identified set under random assignment, exclusion and monotonicity.

use serde::Serialize;

use crate::data::{cell_stats, CellStats, Sample};
use crate::error::Result;
use crate::gamma::{Compliance, Entry, GammaSet, Link, Menu, OutcomeRange, Param};
use crate::validity::{CellDensities, TAU_TEST};
use crate::Settings;

/// Tolerance on the first-stage point estimate.
pub const TAU_FS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FirstStage {
    Positive,
    Negative,
    Zero,
}

pub fn first_stage_sign(value: f64) -> FirstStage {
    if value > TAU_FS {
        FirstStage::Positive
    } else if value < -TAU_FS {
        FirstStage::Negative
    } else {
        FirstStage::Zero
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeProbabilities {
    pub p_a: f64,
    pub p_c: f64,
    pub p_df: f64,
    pub p_n: f64,
}

impl TypeProbabilities {
    pub fn sum(&self) -> f64 {
        self.p_a + self.p_c + self.p_df + self.p_n
    }

    pub fn get(&self, t: Compliance) -> f64 {
        match t {
            Compliance::Always => self.p_a,
            Compliance::Complier => self.p_c,
            Compliance::Defier => self.p_df,
            Compliance::Never => self.p_n,
        }
    }

    /// Nonnegative and summing to one within `1e-12`.
    pub fn is_valid(&self) -> bool {
        [self.p_a, self.p_c, self.p_df, self.p_n]
            .iter()
            .all(|p| (-1e-12..=1.0 + 1e-12).contains(p))
            && (self.sum() - 1.0).abs() <= 1e-12
    }
}

/// Type shares implied by monotonicity, in the original instrument labels.
/// A negative first stage is read as defiers-only.
pub fn type_probabilities_a1(sample: &Sample) -> Result<TypeProbabilities> {
    let st = cell_stats(sample)?;
    Ok(shares_from_stats(&st))
}

pub(crate) fn shares_from_stats(st: &CellStats) -> TypeProbabilities {
    let fs = st.first_stage();
    match first_stage_sign(fs) {
        FirstStage::Positive => TypeProbabilities {
            p_a: st.treated_share(0),
            p_c: fs,
            p_df: 0.0,
            p_n: st.untreated_share(1),
        },
        FirstStage::Negative => TypeProbabilities {
            p_a: st.treated_share(1),
            p_c: 0.0,
            p_df: -fs,
            p_n: st.untreated_share(0),
        },
        FirstStage::Zero => {
            let d = st.treated_overall();
            TypeProbabilities {
                p_a: d,
                p_c: 0.0,
                p_df: 0.0,
                p_n: 1.0 - d,
            }
        }
    }
}

pub fn identified_set_a1(sample: &Sample, settings: &Settings) -> Result<GammaSet> {
    let st = cell_stats(sample)?;
    let range = settings.range_for(sample);
    match first_stage_sign(st.first_stage()) {
        FirstStage::Positive => {
            let slacks = CellDensities::for_sample(sample, settings.bins)?.slacks();
            if !slacks.hold(TAU_TEST) {
                return Ok(GammaSet::empty(Menu::A1, "positive first stage"));
            }
            Ok(positive_case(&st, range, "positive first stage"))
        }
        FirstStage::Negative => {
            let flipped = sample.relabeled();
            let slacks = CellDensities::for_sample(&flipped, settings.bins)?.slacks();
            if !slacks.hold(TAU_TEST) {
                return Ok(GammaSet::empty(Menu::A1, "negative first stage"));
            }
            let st = cell_stats(&flipped)?;
            Ok(positive_case(&st, range, "").flipped("negative first stage"))
        }
        FirstStage::Zero => {
            let slacks = CellDensities::for_sample(sample, settings.bins)?.slacks();
            if slacks.max() > 0.0 {
                return Ok(GammaSet::empty(Menu::A1, "zero first stage"));
            }
            Ok(zero_case(&st, range))
        }
    }
}

fn shifted_range(mean: Option<f64>, range: OutcomeRange, treated: bool) -> Entry {
    match mean {
        // treated: mean - Y0 ; untreated: Y1 - mean
        Some(m) if treated => Entry::interval(m - range.hi, m - range.lo),
        Some(m) => Entry::interval(range.lo - m, range.hi - m),
        None => range.difference_range(),
    }
}

fn equal_across_instrument(g: &mut GammaSet, t: Compliance, e: Entry) {
    g.set(Param::Theta(0, t), e);
    g.set(Param::Theta(1, t), e);
    g.links
        .push(Link::equal(Param::Theta(0, t), Param::Theta(1, t)));
}

fn positive_case(st: &CellStats, range: OutcomeRange, tag: &str) -> GammaSet {
    let mut g = GammaSet::new(Menu::A1, tag);
    let p = shares_from_stats(st);
    let wald = st.itt() / st.first_stage();
    equal_across_instrument(
        &mut g,
        Compliance::Always,
        shifted_range(st.mean[1][0], range, true),
    );
    equal_across_instrument(&mut g, Compliance::Complier, Entry::point(wald));
    equal_across_instrument(&mut g, Compliance::Defier, range.difference_range());
    equal_across_instrument(
        &mut g,
        Compliance::Never,
        shifted_range(st.mean[0][1], range, false),
    );
    for t in Compliance::ALL {
        g.set(Param::Share(t), Entry::point(p.get(t)));
    }
    g
}

fn zero_case(st: &CellStats, range: OutcomeRange) -> GammaSet {
    let mut g = GammaSet::new(Menu::A1, "zero first stage");
    let p = shares_from_stats(st);
    equal_across_instrument(
        &mut g,
        Compliance::Always,
        shifted_range(st.mean[1][0], range, true),
    );
    equal_across_instrument(&mut g, Compliance::Complier, range.difference_range());
    equal_across_instrument(&mut g, Compliance::Defier, range.difference_range());
    equal_across_instrument(
        &mut g,
        Compliance::Never,
        shifted_range(st.mean[0][0], range, false),
    );
    for t in Compliance::ALL {
        g.set(Param::Share(t), Entry::point(p.get(t)));
    }
    g
}
