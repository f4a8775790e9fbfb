//! Identified objects under random assignment and monotonicity when the
//! exclusion restriction may fail: always-taker and never-taker mean bounds,
//! direct-effect bounds, the ITT decomposition and the full identified set.

use serde::Serialize;

use crate::bounds_a1::{first_stage_sign, shares_from_stats, FirstStage, TypeProbabilities};
use crate::data::{cell_stats, CellStats, Sample};
use crate::empirics::{cell_ecdf, trimmed_mean_sorted, SteppedCdf, Tail};
use crate::error::{Error, Result};
use crate::gamma::{
    Compliance, Entry, GammaSet, Link, MaybeEmptyInterval, Menu, OutcomeRange, Param,
};
use crate::Settings;

fn positive_stats(sample: &Sample) -> Result<CellStats> {
    let st = cell_stats(sample)?;
    match first_stage_sign(st.first_stage()) {
        FirstStage::Positive => Ok(st),
        _ => Err(Error::NonPositiveFirstStage),
    }
}

/// Envelope cdfs for the always-takers in cell `(1, 1)` and the never-takers
/// in cell `(0, 0)`, plus the identified cdfs of the other two cells.
#[derive(Debug, Clone)]
pub struct A3DistBounds {
    pub probs: TypeProbabilities,
    pub f11a_lb: SteppedCdf,
    pub f11a_ub: SteppedCdf,
    pub f00n_lb: SteppedCdf,
    pub f00n_ub: SteppedCdf,
    pub f10a: SteppedCdf,
    pub f01n: SteppedCdf,
    /// `P(Y <= y, D = 1 | Z = 1)` and `P(Y <= y, D = 0 | Z = 0)`.
    pub sub11: SteppedCdf,
    pub sub00: SteppedCdf,
}

impl A3DistBounds {
    /// `F_11c = (P(Y<=y, D=1 | Z=1) - p_a F_11a) / p_c`.
    pub fn complier_treated(&self, f11a: &SteppedCdf) -> Result<SteppedCdf> {
        mix_out(&self.sub11, f11a, self.probs.p_a, self.probs.p_c)
    }

    pub fn complier_untreated(&self, f00n: &SteppedCdf) -> Result<SteppedCdf> {
        mix_out(&self.sub00, f00n, self.probs.p_n, self.probs.p_c)
    }
}

fn mix_out(sub: &SteppedCdf, part: &SteppedCdf, w: f64, rest: f64) -> Result<SteppedCdf> {
    SteppedCdf::from_fn(sub.grid().to_vec(), |y| {
        ((sub.eval(y) - w * part.eval(y)) / rest).clamp(0.0, 1.0)
    })
}

pub fn a3_dist_bounds(sample: &Sample) -> Result<A3DistBounds> {
    let st = positive_stats(sample)?;
    let p = shares_from_stats(&st);
    if p.p_a <= 0.0 {
        return Err(Error::EmptyCell { d: 1, z: 0 });
    }
    if p.p_n <= 0.0 {
        return Err(Error::EmptyCell { d: 0, z: 1 });
    }
    let sub =
        |d: u8, z: u8| SteppedCdf::from_sorted(sample.cell_outcomes(d, z), 1.0, sample.arm_size(z));
    let (sub11, sub00) = (sub(1, 1)?, sub(0, 0)?);
    let env = |s: &SteppedCdf, share: f64, lower: bool| {
        SteppedCdf::from_fn(s.grid().to_vec(), |y| {
            let v = s.eval(y);
            if lower {
                ((v - p.p_c) / share).clamp(0.0, 1.0)
            } else {
                (v / share).min(1.0)
            }
        })
    };
    Ok(A3DistBounds {
        probs: p,
        f11a_lb: env(&sub11, p.p_a, true)?,
        f11a_ub: env(&sub11, p.p_a, false)?,
        f00n_lb: env(&sub00, p.p_n, true)?,
        f00n_ub: env(&sub00, p.p_n, false)?,
        f10a: cell_ecdf(sample, 1, 0)?,
        f01n: cell_ecdf(sample, 0, 1)?,
        sub11,
        sub00,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrimmedMeanBounds {
    pub probs: TypeProbabilities,
    /// Always-taker share of cell `(1, 1)`.
    pub alpha: f64,
    /// Never-taker share of cell `(0, 0)`.
    pub gamma: f64,
    pub mu_10a: Option<f64>,
    pub mu_11a: Option<MaybeEmptyInterval>,
    pub mu_01n: Option<f64>,
    pub mu_00n: Option<MaybeEmptyInterval>,
    pub mu_11c: MaybeEmptyInterval,
    pub mu_00c: MaybeEmptyInterval,
}

pub fn trimmed_mean_bounds(sample: &Sample) -> Result<TrimmedMeanBounds> {
    let st = positive_stats(sample)?;
    Ok(means_from(sample, &st))
}

fn means_from(sample: &Sample, st: &CellStats) -> TrimmedMeanBounds {
    let p = shares_from_stats(st);
    let alpha = p.p_a / st.treated_share(1);
    let gamma = p.p_n / st.untreated_share(0);
    let bounds = |d: u8, z: u8, share: f64| {
        let v = sample.cell_outcomes(d, z);
        (share > 0.0 && !v.is_empty()).then(|| {
            MaybeEmptyInterval::new(
                trimmed_mean_sorted(v, share, Tail::Lower),
                trimmed_mean_sorted(v, share, Tail::Upper),
            )
        })
    };
    let mu_11a = bounds(1, 1, alpha);
    let mu_00n = bounds(0, 0, gamma);
    // complier means fall as the type mean rises
    let mix = |joint: f64, w: f64, iv: Option<MaybeEmptyInterval>| match iv.and_then(|i| i.bounds())
    {
        Some((lo, hi)) => {
            MaybeEmptyInterval::new((joint - w * hi) / p.p_c, (joint - w * lo) / p.p_c)
        }
        None => MaybeEmptyInterval::point(joint / p.p_c),
    };
    TrimmedMeanBounds {
        probs: p,
        alpha,
        gamma,
        mu_10a: st.mean[1][0],
        mu_11a,
        mu_01n: st.mean[0][1],
        mu_00n,
        mu_11c: mix(st.joint_mean[1][1], p.p_a, mu_11a),
        mu_00c: mix(st.joint_mean[0][0], p.p_n, mu_00n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A3Report {
    pub probs: TypeProbabilities,
    pub mu_10a: Option<f64>,
    pub mu_01n: Option<f64>,
    pub mu_11a_bounds: MaybeEmptyInterval,
    pub mu_00n_bounds: MaybeEmptyInterval,
    pub delta_1a_bounds: MaybeEmptyInterval,
    pub delta_0n_bounds: MaybeEmptyInterval,
    /// Bounds on `delta_1c + theta_0c`.
    pub total_c_bounds: MaybeEmptyInterval,
    pub itt: f64,
}

pub fn direct_effect_bounds(sample: &Sample, range: OutcomeRange) -> Result<A3Report> {
    let st = positive_stats(sample)?;
    Ok(report_from(&st, &means_from(sample, &st), range))
}

fn report_from(st: &CellStats, m: &TrimmedMeanBounds, range: OutcomeRange) -> A3Report {
    let full_mean = MaybeEmptyInterval::new(range.lo, range.hi);
    let full_diff = MaybeEmptyInterval::new(range.lo - range.hi, range.hi - range.lo);
    let mu_11a = m.mu_11a.unwrap_or(full_mean);
    let mu_00n = m.mu_00n.unwrap_or(full_mean);
    let delta_1a = match m.mu_10a {
        Some(c) if m.mu_11a.is_some() => mu_11a.shift(-c),
        _ => full_diff,
    };
    let delta_0n = match m.mu_01n {
        Some(c) if m.mu_00n.is_some() => mu_00n.reflect(c),
        _ => full_diff,
    };
    let total_c = match (m.mu_11c.bounds(), m.mu_00c.bounds()) {
        (Some((a, b)), Some((c, d))) => MaybeEmptyInterval::new(a - d, b - c),
        _ => MaybeEmptyInterval::Empty,
    };
    A3Report {
        probs: m.probs,
        mu_10a: m.mu_10a,
        mu_01n: m.mu_01n,
        mu_11a_bounds: mu_11a,
        mu_00n_bounds: mu_00n,
        delta_1a_bounds: delta_1a,
        delta_0n_bounds: delta_0n,
        total_c_bounds: total_c,
        itt: st.itt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IttDecomposition {
    pub lhs: f64,
    pub rhs: f64,
    /// Both supplied means lie inside their bounds.
    pub in_bounds: bool,
}

/// Evaluates `p_a delta_1a + p_n delta_0n + p_c (mu_11c - mu_00c)` at the
/// supplied type means and compares it with the ITT.
pub fn itt_decomposition(sample: &Sample, mu_11a: f64, mu_00n: f64) -> Result<IttDecomposition> {
    let st = positive_stats(sample)?;
    let m = means_from(sample, &st);
    let p = m.probs;
    let mu_11c = (st.joint_mean[1][1] - p.p_a * mu_11a) / p.p_c;
    let mu_00c = (st.joint_mean[0][0] - p.p_n * mu_00n) / p.p_c;
    let a = m.mu_10a.map_or(0.0, |c| p.p_a * (mu_11a - c));
    let n = m.mu_01n.map_or(0.0, |c| p.p_n * (c - mu_00n));
    let inside = |iv: Option<MaybeEmptyInterval>, x: f64| iv.is_none_or(|i| i.contains(x));
    Ok(IttDecomposition {
        lhs: st.itt(),
        rhs: a + n + p.p_c * (mu_11c - mu_00c),
        in_bounds: inside(m.mu_11a, mu_11a) && inside(m.mu_00n, mu_00n),
    })
}

fn treated_minus_range(mu: Option<MaybeEmptyInterval>, range: OutcomeRange) -> Entry {
    match mu.and_then(|i| i.bounds()) {
        Some((lo, hi)) => Entry::interval(lo - range.hi, hi - range.lo),
        None => range.difference_range(),
    }
}

fn range_minus_untreated(mu: Option<MaybeEmptyInterval>, range: OutcomeRange) -> Entry {
    match mu.and_then(|i| i.bounds()) {
        Some((lo, hi)) => Entry::interval(range.lo - hi, range.hi - lo),
        None => range.difference_range(),
    }
}

fn positive_case(sample: &Sample, st: &CellStats, range: OutcomeRange, tag: &str) -> GammaSet {
    let m = means_from(sample, st);
    let r = report_from(st, &m, range);
    let full = range.difference_range();
    let mut g = GammaSet::new(Menu::A3, tag);
    let point = |v: Option<f64>| v.map(MaybeEmptyInterval::point);
    use Compliance::*;
    g.set(
        Param::Theta(0, Always),
        treated_minus_range(point(m.mu_10a), range),
    );
    g.set(
        Param::Theta(1, Always),
        treated_minus_range(m.mu_11a, range),
    );
    g.set(
        Param::Theta(0, Never),
        range_minus_untreated(m.mu_00n, range),
    );
    g.set(
        Param::Theta(1, Never),
        range_minus_untreated(point(m.mu_01n), range),
    );
    g.set(
        Param::Theta(0, Complier),
        range_minus_untreated(Some(m.mu_00c), range),
    );
    g.set(
        Param::Theta(1, Complier),
        treated_minus_range(Some(m.mu_11c), range),
    );
    g.set(Param::Theta(0, Defier), full);
    g.set(Param::Theta(1, Defier), full);

    let identified = |present: bool, iv: MaybeEmptyInterval| {
        if present {
            Entry::from_interval(iv)
        } else {
            full
        }
    };
    g.set(
        Param::Delta(1, Always),
        identified(m.mu_10a.is_some() && m.mu_11a.is_some(), r.delta_1a_bounds),
    );
    g.set(
        Param::Delta(0, Never),
        identified(m.mu_01n.is_some() && m.mu_00n.is_some(), r.delta_0n_bounds),
    );
    g.set(Param::Delta(0, Always), full);
    g.set(Param::Delta(1, Never), full);
    g.set(Param::Delta(0, Defier), full);
    g.set(Param::Delta(1, Defier), full);
    g.set(
        Param::Delta(1, Complier),
        treated_minus_range(Some(m.mu_11c), range),
    );
    g.set(
        Param::Delta(0, Complier),
        range_minus_untreated(Some(m.mu_00c), range),
    );

    let total = Entry::from_interval(r.total_c_bounds);
    g.links.push(Link::sum(
        Param::Delta(1, Complier),
        Param::Theta(0, Complier),
        total,
    ));
    g.links.push(Link::sum(
        Param::Delta(0, Complier),
        Param::Theta(1, Complier),
        total,
    ));

    for t in Compliance::ALL {
        g.set(Param::Share(t), Entry::point(m.probs.get(t)));
    }
    g
}

fn zero_case(st: &CellStats, range: OutcomeRange) -> GammaSet {
    use Compliance::*;
    let full = range.difference_range();
    let mut g = GammaSet::new(Menu::A3, "zero first stage");
    let point = |v: Option<f64>| v.map(MaybeEmptyInterval::point);
    g.set(
        Param::Theta(0, Always),
        treated_minus_range(point(st.mean[1][0]), range),
    );
    g.set(
        Param::Theta(1, Always),
        treated_minus_range(point(st.mean[1][1]), range),
    );
    g.set(
        Param::Theta(0, Never),
        range_minus_untreated(point(st.mean[0][0]), range),
    );
    g.set(
        Param::Theta(1, Never),
        range_minus_untreated(point(st.mean[0][1]), range),
    );
    for z in 0..2 {
        g.set(Param::Theta(z, Complier), full);
        g.set(Param::Theta(z, Defier), full);
    }
    let diff = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => Entry::point(a - b),
        _ => full,
    };
    g.set(Param::Delta(1, Always), diff(st.mean[1][1], st.mean[1][0]));
    g.set(Param::Delta(0, Never), diff(st.mean[0][1], st.mean[0][0]));
    for (d, t) in [
        (0, Always),
        (1, Never),
        (0, Complier),
        (1, Complier),
        (0, Defier),
        (1, Defier),
    ] {
        g.set(Param::Delta(d, t), full);
    }
    let p = shares_from_stats(st);
    for t in Compliance::ALL {
        g.set(Param::Share(t), Entry::point(p.get(t)));
    }
    g
}

/// The identified set under random assignment and monotonicity. Never empty.
pub fn identified_set_a3(sample: &Sample, settings: &Settings) -> Result<GammaSet> {
    let st = cell_stats(sample)?;
    let range = settings.range_for(sample);
    Ok(match first_stage_sign(st.first_stage()) {
        FirstStage::Positive => positive_case(sample, &st, range, "positive first stage"),
        FirstStage::Negative => {
            let flipped = sample.relabeled();
            let fst = cell_stats(&flipped)?;
            positive_case(&flipped, &fst, range, "").flipped("negative first stage")
        }
        FirstStage::Zero => zero_case(&st, range),
    })
}
