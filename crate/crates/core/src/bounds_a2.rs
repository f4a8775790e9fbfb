//! Identified objects under random assignment and exclusion without
//! monotonicity: the defier share, type-specific cdf and mean bounds, and
//! LATE bounds for compliers and defiers as functions of the defier share.

use serde::Serialize;

use crate::bounds_a1::{identified_set_a1, TypeProbabilities};
use crate::data::{cell_stats, CellStats, OutcomeKind, Sample};
use crate::empirics::{trimmed_mean_sorted, BinRule, SteppedCdf, Tail};
use crate::error::{Error, Result};
use crate::gamma::{
    Compliance, Entry, GammaSet, Link, MaybeEmptyInterval, Menu, OutcomeRange, Param,
};
use crate::par;
use crate::validity::{CellDensities, Slacks, TAU_TEST};
use crate::Settings;

/// Slices whose derived always- or never-taker share falls below this are skipped.
pub const EPS_P: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerSource {
    /// The floor at zero binds.
    Floor,
    /// The slack of the inequality for treatment status `d` binds.
    Slack { d: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfBound {
    pub interval: MaybeEmptyInterval,
    pub lower_source: LowerSource,
    pub overlap_ok: bool,
    pub slacks: Slacks,
    pub overlap_statistic: f64,
    /// `min{E[D | Z=0], E[1-D | Z=1]}`.
    pub upper: f64,
}

fn assemble_pdf(slacks: Slacks, overlap: f64, st: &CellStats) -> PdfBound {
    let (lower, lower_source) = if slacks.max() <= 0.0 {
        (0.0, LowerSource::Floor)
    } else if slacks.slack_d1 >= slacks.slack_d0 {
        (slacks.slack_d1, LowerSource::Slack { d: 1 })
    } else {
        (slacks.slack_d0, LowerSource::Slack { d: 0 })
    };
    let upper = st.treated_share(0).min(st.untreated_share(1));
    let overlap_ok = overlap <= TAU_TEST;
    let interval = if overlap_ok {
        MaybeEmptyInterval::new(lower, upper)
    } else {
        MaybeEmptyInterval::Empty
    };
    PdfBound {
        interval,
        lower_source,
        overlap_ok,
        slacks,
        overlap_statistic: overlap,
        upper,
    }
}

pub fn pdf_bounds(sample: &Sample, rule: BinRule) -> Result<PdfBound> {
    let st = cell_stats(sample)?;
    let dens = CellDensities::for_sample(sample, rule)?;
    Ok(assemble_pdf(dens.slacks(), dens.overlap_statistic(), &st))
}

/// Type shares implied by a defier share under exclusion.
pub fn shares_at(st: &CellStats, p_df: f64) -> TypeProbabilities {
    TypeProbabilities {
        p_a: st.treated_share(0) - p_df,
        p_c: st.first_stage() + p_df,
        p_df,
        p_n: st.untreated_share(1) - p_df,
    }
}

/// Sorted union of the outcomes in the two instrument arms of one treatment
/// status, with cumulative counts per arm.
#[derive(Debug, Clone)]
struct MergedCells {
    grid: Vec<f64>,
    cum: [Vec<u32>; 2],
    arm: [f64; 2],
}

impl MergedCells {
    fn new(sample: &Sample, d: u8) -> Self {
        let (a, b) = (sample.cell_outcomes(d, 0), sample.cell_outcomes(d, 1));
        let mut grid = Vec::with_capacity(a.len() + b.len());
        let mut cum = [
            Vec::with_capacity(a.len() + b.len()),
            Vec::with_capacity(a.len() + b.len()),
        ];
        let (mut i, mut j) = (0usize, 0usize);
        while i < a.len() || j < b.len() {
            let y = match (a.get(i), b.get(j)) {
                (Some(&x), Some(&w)) => x.min(w),
                (Some(&x), None) => x,
                (None, Some(&w)) => w,
                (None, None) => unreachable!(),
            };
            while i < a.len() && a[i] == y {
                i += 1;
            }
            while j < b.len() && b[j] == y {
                j += 1;
            }
            grid.push(y);
            cum[0].push(i as u32);
            cum[1].push(j as u32);
        }
        Self {
            grid,
            cum,
            arm: [sample.arm_size(0) as f64, sample.arm_size(1) as f64],
        }
    }

    fn sub_cdf(&self, z: usize, k: usize) -> f64 {
        self.cum[z][k] as f64 / self.arm[z]
    }
}

/// Envelope bounds for the cdf of one latent type inside the two arms of a
/// treatment status. `other[z]` is the share of the type mixed into arm `z`.
#[derive(Debug, Clone, Copy)]
struct EnvelopeSpec {
    share: f64,
    other: [f64; 2],
}

impl EnvelopeSpec {
    fn lower_piece(&self, p: f64, z: usize) -> f64 {
        ((p - self.other[z]) / self.share).max(0.0)
    }

    fn upper_piece(&self, p: f64) -> f64 {
        (p / self.share).min(1.0)
    }

    fn lower(&self, p0: f64, p1: f64) -> f64 {
        self.lower_piece(p0, 0)
            .max(self.lower_piece(p1, 1))
            .min(1.0)
    }

    fn upper(&self, p0: f64, p1: f64) -> f64 {
        self.upper_piece(p0).min(self.upper_piece(p1)).max(0.0)
    }

    /// Means of the upper and lower envelope, i.e. the lower and upper mean bound.
    fn mean_bounds(&self, cells: &MergedCells) -> MaybeEmptyInterval {
        let (mut prev_lb, mut prev_ub) = (0.0, 0.0);
        let (mut mean_lb, mut mean_ub) = (0.0, 0.0);
        for k in 0..cells.grid.len() {
            let (p0, p1) = (cells.sub_cdf(0, k), cells.sub_cdf(1, k));
            let (lb, ub) = (self.lower(p0, p1), self.upper(p0, p1));
            let y = cells.grid[k];
            mean_lb += y * (lb - prev_lb);
            mean_ub += y * (ub - prev_ub);
            prev_lb = lb;
            prev_ub = ub;
        }
        MaybeEmptyInterval::new(mean_ub, mean_lb)
    }
}

/// Cached pieces of a sample reused across the defier-share grid.
#[derive(Debug, Clone)]
pub struct A2Context<'a> {
    sample: &'a Sample,
    pub stats: CellStats,
    pub pdf: PdfBound,
    pub range: OutcomeRange,
    treated: MergedCells,
    untreated: MergedCells,
}

impl<'a> A2Context<'a> {
    pub fn new(sample: &'a Sample, settings: &Settings) -> Result<Self> {
        let stats = cell_stats(sample)?;
        let dens = CellDensities::for_sample(sample, settings.bins)?;
        let pdf = assemble_pdf(dens.slacks(), dens.overlap_statistic(), &stats);
        let (treated, untreated) = par::join(
            || MergedCells::new(sample, 1),
            || MergedCells::new(sample, 0),
        );
        Ok(Self {
            sample,
            stats,
            pdf,
            range: settings.range_for(sample),
            treated,
            untreated,
        })
    }

    pub fn sample(&self) -> &Sample {
        self.sample
    }

    fn specs(&self, p: &TypeProbabilities) -> (EnvelopeSpec, EnvelopeSpec) {
        (
            EnvelopeSpec {
                share: p.p_a,
                other: [p.p_df, p.p_c],
            },
            EnvelopeSpec {
                share: p.p_n,
                other: [p.p_c, p.p_df],
            },
        )
    }

    fn check_interior(&self, p_df: f64) -> Result<TypeProbabilities> {
        let (lo, hi) = self
            .pdf
            .interval
            .bounds()
            .ok_or(Error::EmptyIdentifiedSet)?;
        let p = shares_at(&self.stats, p_df);
        let positive = p.p_a > EPS_P && p.p_n > EPS_P && p.p_c > EPS_P && p_df > EPS_P;
        if !(p_df > lo && p_df < hi) || !positive {
            return Err(Error::PdfNotInterior(p_df));
        }
        Ok(p)
    }
}

/// Envelope cdfs at one defier share, on the union grid of each treatment status.
#[derive(Debug, Clone)]
pub struct DistBounds {
    pub probs: TypeProbabilities,
    pub f1a_lb: SteppedCdf,
    pub f1a_ub: SteppedCdf,
    pub f0n_lb: SteppedCdf,
    pub f0n_ub: SteppedCdf,
    /// Per-arm lower curves `[z=0, z=1]` for the treated always-taker cdf.
    pub f1a_lb_arm: [SteppedCdf; 2],
    pub f1a_ub_arm: [SteppedCdf; 2],
    pub f0n_lb_arm: [SteppedCdf; 2],
    pub f0n_ub_arm: [SteppedCdf; 2],
    /// `P(Y <= y, D = 1 | Z = z)` on the treated grid.
    pub treated_sub: [SteppedCdf; 2],
    pub untreated_sub: [SteppedCdf; 2],
}

impl DistBounds {
    /// `F_1c = (P(Y<=y, D=1 | Z=1) - p_a F_1a) / p_c`.
    pub fn complier_treated(&self, f1a: &SteppedCdf) -> Result<SteppedCdf> {
        mix_out(&self.treated_sub[1], f1a, self.probs.p_a, self.probs.p_c)
    }

    pub fn defier_treated(&self, f1a: &SteppedCdf) -> Result<SteppedCdf> {
        mix_out(&self.treated_sub[0], f1a, self.probs.p_a, self.probs.p_df)
    }

    pub fn complier_untreated(&self, f0n: &SteppedCdf) -> Result<SteppedCdf> {
        mix_out(&self.untreated_sub[0], f0n, self.probs.p_n, self.probs.p_c)
    }

    pub fn defier_untreated(&self, f0n: &SteppedCdf) -> Result<SteppedCdf> {
        mix_out(&self.untreated_sub[1], f0n, self.probs.p_n, self.probs.p_df)
    }

    /// Checks a candidate `F_1a` (`d = 1`) or `F_0n` (`d = 0`) against the
    /// bounds on every increment `F(y') - F(y)`, not just pointwise. Pairs
    /// range over the data grid, the candidate's grid and both infinities.
    pub fn admits_increments(&self, d: u8, candidate: &SteppedCdf, tol: f64) -> bool {
        let p = &self.probs;
        let (subs, share, other) = if d == 1 {
            (&self.treated_sub, p.p_a, [p.p_df, p.p_c])
        } else {
            (&self.untreated_sub, p.p_n, [p.p_c, p.p_df])
        };
        let mut points: Vec<f64> = subs[0]
            .grid()
            .iter()
            .chain(candidate.grid())
            .copied()
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        points.insert(0, f64::NEG_INFINITY);
        points.push(f64::INFINITY);
        let at =
            |f: &SteppedCdf, y: f64, top: f64| if y == f64::INFINITY { top } else { f.eval(y) };
        let cap = |x: f64| if x <= 1.0 { x } else { 1.0 };
        for (i, &lo) in points.iter().enumerate() {
            for &hi in &points[i + 1..] {
                let step = at(candidate, hi, 1.0) - at(candidate, lo, 1.0);
                let (mut floor, mut ceil) = (0.0f64, 1.0f64);
                for z in 0..2 {
                    let top = subs[z].final_value();
                    let mass = at(&subs[z], hi, top) - at(&subs[z], lo, top);
                    floor = floor.max((mass - other[z]).max(0.0) / share);
                    ceil = ceil.min(cap(mass / share));
                }
                if step < floor - tol || step > ceil + tol {
                    return false;
                }
            }
        }
        true
    }
}

fn mix_out(sub: &SteppedCdf, part: &SteppedCdf, w: f64, rest: f64) -> Result<SteppedCdf> {
    let grid = sub.grid().to_vec();
    let values = grid
        .iter()
        .map(|&y| ((sub.eval(y) - w * part.eval(y)) / rest).clamp(0.0, 1.0))
        .collect();
    SteppedCdf::new(grid, values)
}

pub fn dist_bounds_at(ctx: &A2Context<'_>, p_df: f64) -> Result<DistBounds> {
    let probs = ctx.check_interior(p_df)?;
    let (s1, s0) = ctx.specs(&probs);
    let build = |cells: &MergedCells, f: &dyn Fn(f64, f64) -> f64| {
        let values = (0..cells.grid.len())
            .map(|k| f(cells.sub_cdf(0, k), cells.sub_cdf(1, k)))
            .collect();
        SteppedCdf::new(cells.grid.clone(), values)
    };
    let t = &ctx.treated;
    let u = &ctx.untreated;
    Ok(DistBounds {
        probs,
        f1a_lb: build(t, &|a, b| s1.lower(a, b))?,
        f1a_ub: build(t, &|a, b| s1.upper(a, b))?,
        f0n_lb: build(u, &|a, b| s0.lower(a, b))?,
        f0n_ub: build(u, &|a, b| s0.upper(a, b))?,
        f1a_lb_arm: [
            build(t, &|a, _| s1.lower_piece(a, 0))?,
            build(t, &|_, b| s1.lower_piece(b, 1))?,
        ],
        f1a_ub_arm: [
            build(t, &|a, _| s1.upper_piece(a))?,
            build(t, &|_, b| s1.upper_piece(b))?,
        ],
        f0n_lb_arm: [
            build(u, &|a, _| s0.lower_piece(a, 0))?,
            build(u, &|_, b| s0.lower_piece(b, 1))?,
        ],
        f0n_ub_arm: [
            build(u, &|a, _| s0.upper_piece(a))?,
            build(u, &|_, b| s0.upper_piece(b))?,
        ],
        treated_sub: [build(t, &|a, _| a)?, build(t, &|_, b| b)?],
        untreated_sub: [build(u, &|a, _| a)?, build(u, &|_, b| b)?],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeanMethod {
    /// Integrate the envelope cdfs.
    SharpEnvelope,
    /// Max/min of the per-arm trimmed means.
    OuterClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanBounds {
    pub mu_1a: MaybeEmptyInterval,
    pub mu_0n: MaybeEmptyInterval,
}

fn mean_bounds_unchecked(
    ctx: &A2Context<'_>,
    p: &TypeProbabilities,
    method: MeanMethod,
) -> MeanBounds {
    match method {
        MeanMethod::SharpEnvelope => {
            let (s1, s0) = ctx.specs(p);
            let (mu_1a, mu_0n) = par::join(
                || s1.mean_bounds(&ctx.treated),
                || s0.mean_bounds(&ctx.untreated),
            );
            MeanBounds { mu_1a, mu_0n }
        }
        MeanMethod::OuterClosedForm => {
            let s = ctx.sample;
            let st = &ctx.stats;
            let outer = |d: u8, share: f64, mass: [f64; 2]| {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for z in 0..2u8 {
                    let v = s.cell_outcomes(d, z);
                    let q = share / mass[z as usize];
                    lo = lo.max(trimmed_mean_sorted(v, q, Tail::Lower));
                    hi = hi.min(trimmed_mean_sorted(v, q, Tail::Upper));
                }
                MaybeEmptyInterval::new(lo, hi)
            };
            MeanBounds {
                mu_1a: outer(1, p.p_a, [st.treated_share(0), st.treated_share(1)]),
                mu_0n: outer(0, p.p_n, [st.untreated_share(0), st.untreated_share(1)]),
            }
        }
    }
}

pub fn mean_bounds_at(ctx: &A2Context<'_>, p_df: f64, method: MeanMethod) -> Result<MeanBounds> {
    let p = ctx.check_interior(p_df)?;
    Ok(mean_bounds_unchecked(ctx, &p, method))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceCase {
    Interior,
    /// Smallest admissible positive defier share.
    LowerEndpoint,
    /// No always-takers remain.
    NoAlwaysTakers,
    /// No never-takers remain.
    NoNeverTakers,
    /// Only compliers and defiers remain.
    OnlySwitchers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A2Slice {
    pub p_df: f64,
    pub p_a: f64,
    pub p_c: f64,
    pub p_n: f64,
    pub case: SliceCase,
    /// Outcome range when no always-takers remain.
    pub mu_1a: MaybeEmptyInterval,
    pub mu_0n: MaybeEmptyInterval,
    pub theta_c: MaybeEmptyInterval,
    pub theta_df: MaybeEmptyInterval,
}

fn corners(f: impl Fn(f64, f64) -> f64, a: (f64, f64), b: (f64, f64)) -> MaybeEmptyInterval {
    let vals = [f(a.0, b.0), f(a.0, b.1), f(a.1, b.0), f(a.1, b.1)];
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    MaybeEmptyInterval::new(lo, hi)
}

fn slice_from_means(
    ctx: &A2Context<'_>,
    p: &TypeProbabilities,
    means: MeanBounds,
    case: SliceCase,
) -> A2Slice {
    let st = &ctx.stats;
    let r = (ctx.range.lo, ctx.range.hi);
    let mu_1a = if p.p_a <= EPS_P {
        MaybeEmptyInterval::new(r.0, r.1)
    } else {
        means.mu_1a
    };
    let mu_0n = if p.p_n <= EPS_P {
        MaybeEmptyInterval::new(r.0, r.1)
    } else {
        means.mu_0n
    };
    let (ey1, ey0) = (st.joint_mean[1], st.joint_mean[0]);
    let (ed1, eu0) = (st.treated_share(1), st.untreated_share(0));
    let (ed0, eu1) = (st.treated_share(0), st.untreated_share(1));
    let (pa, pn) = (p.p_a.max(0.0), p.p_n.max(0.0));
    // treated means are decreasing in mu_1a, untreated in mu_0n
    let mu1c = |m: f64| (ey1[1] - pa * m) / (ed1 - pa);
    let mu1df = |m: f64| (ey1[0] - pa * m) / (ed0 - pa);
    let mu0c = |m: f64| (ey0[0] - pn * m) / (eu0 - pn);
    let mu0df = |m: f64| (ey0[1] - pn * m) / (eu1 - pn);
    let (theta_c, theta_df) = match (mu_1a.bounds(), mu_0n.bounds()) {
        (Some(a), Some(b)) => (
            corners(|x, y| mu1c(x) - mu0c(y), a, b),
            corners(|x, y| mu1df(x) - mu0df(y), a, b),
        ),
        _ => (MaybeEmptyInterval::Empty, MaybeEmptyInterval::Empty),
    };
    A2Slice {
        p_df: p.p_df,
        p_a: p.p_a,
        p_c: p.p_c,
        p_n: p.p_n,
        case,
        mu_1a,
        mu_0n,
        theta_c,
        theta_df,
    }
}

/// LATE bounds for compliers and defiers at an interior defier share.
pub fn late_bounds_at(ctx: &A2Context<'_>, p_df: f64) -> Result<A2Slice> {
    if !ctx.pdf.overlap_ok {
        return Err(Error::EmptyIdentifiedSet);
    }
    let p = ctx.check_interior(p_df)?;
    let means = mean_bounds_unchecked(ctx, &p, MeanMethod::SharpEnvelope);
    Ok(slice_from_means(ctx, &p, means, SliceCase::Interior))
}

fn slice_set(slice: &A2Slice, range: OutcomeRange) -> GammaSet {
    let tag = match slice.case {
        SliceCase::Interior => "interior defier share",
        SliceCase::LowerEndpoint => "lower endpoint",
        SliceCase::NoAlwaysTakers => "upper endpoint, no always-takers",
        SliceCase::NoNeverTakers => "upper endpoint, no never-takers",
        SliceCase::OnlySwitchers => "upper endpoint, compliers and defiers only",
    };
    if slice.theta_c.is_empty() || slice.theta_df.is_empty() {
        return GammaSet::empty(Menu::A2, tag);
    }
    let mut g = GammaSet::new(Menu::A2, tag);
    let theta_a = if slice.p_a <= EPS_P {
        range.difference_range()
    } else {
        let (lo, hi) = slice.mu_1a.bounds().unwrap_or((range.lo, range.hi));
        Entry::interval(lo - range.hi, hi - range.lo)
    };
    let theta_n = if slice.p_n <= EPS_P {
        range.difference_range()
    } else {
        let (lo, hi) = slice.mu_0n.bounds().unwrap_or((range.lo, range.hi));
        Entry::interval(range.lo - hi, range.hi - lo)
    };
    let per_type = [
        (Compliance::Always, theta_a),
        (Compliance::Complier, Entry::from_interval(slice.theta_c)),
        (Compliance::Defier, Entry::from_interval(slice.theta_df)),
        (Compliance::Never, theta_n),
    ];
    for (t, e) in per_type {
        g.set(Param::Theta(0, t), e);
        g.set(Param::Theta(1, t), e);
        g.links
            .push(Link::equal(Param::Theta(0, t), Param::Theta(1, t)));
    }
    g.set(
        Param::Share(Compliance::Always),
        Entry::point(slice.p_a.max(0.0)),
    );
    g.set(Param::Share(Compliance::Complier), Entry::point(slice.p_c));
    g.set(Param::Share(Compliance::Defier), Entry::point(slice.p_df));
    g.set(
        Param::Share(Compliance::Never),
        Entry::point(slice.p_n.max(0.0)),
    );
    g
}

#[derive(Debug, Clone, Serialize)]
pub struct A2SliceSet {
    pub p_df: f64,
    pub set: GammaSet,
    /// Absent for the zero-defier slice, which reuses the monotone set.
    pub slice: Option<A2Slice>,
}

#[derive(Debug, Clone, Serialize)]
pub struct A2Result {
    pub pdf: PdfBound,
    pub slices: Vec<A2SliceSet>,
    /// Interior grid points dropped because a derived share vanished.
    pub skipped: Vec<f64>,
    /// Per-component interval hull over the slices.
    pub summary: GammaSet,
    pub disconnected: Vec<String>,
}

/// Evenly spaced interior points of `[lo, hi]`.
pub fn pdf_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|k| lo + (hi - lo) * k as f64 / (points + 1) as f64)
        .collect()
}

pub fn identified_set_a2(sample: &Sample, settings: &Settings) -> Result<A2Result> {
    let ctx = A2Context::new(sample, settings)?;
    identified_set_a2_with(&ctx, settings)
}

pub fn identified_set_a2_with(ctx: &A2Context<'_>, settings: &Settings) -> Result<A2Result> {
    let pdf = ctx.pdf;
    let Some((lo, hi)) = pdf.interval.bounds() else {
        return Ok(A2Result {
            pdf,
            slices: Vec::new(),
            skipped: Vec::new(),
            summary: GammaSet::empty(Menu::A2, "testable implication fails"),
            disconnected: Vec::new(),
        });
    };
    let st = &ctx.stats;
    let mut slices = Vec::new();
    let mut skipped = Vec::new();

    // lower endpoint
    if lo <= 0.0 {
        let mut set = identified_set_a1(ctx.sample, settings)?;
        set.menu = Menu::A2;
        set.case_tag = "zero defier share".into();
        slices.push(A2SliceSet {
            p_df: 0.0,
            set,
            slice: None,
        });
    } else if lo < hi {
        let p = shares_at(st, lo);
        if p.p_a > EPS_P && p.p_n > EPS_P {
            let means = mean_bounds_unchecked(ctx, &p, MeanMethod::SharpEnvelope);
            let slice = slice_from_means(ctx, &p, means, SliceCase::LowerEndpoint);
            slices.push(A2SliceSet {
                p_df: lo,
                set: slice_set(&slice, ctx.range),
                slice: Some(slice),
            });
        } else {
            skipped.push(lo);
        }
    }

    // interior
    let grid = if hi > lo {
        pdf_grid(lo, hi, settings.grid_points)
    } else {
        Vec::new()
    };
    let interior = par::map_slice(&grid, |&q| {
        let p = shares_at(st, q);
        if p.p_a <= EPS_P || p.p_n <= EPS_P || p.p_c <= EPS_P || q <= EPS_P {
            return Err(q);
        }
        let means = mean_bounds_unchecked(ctx, &p, MeanMethod::SharpEnvelope);
        Ok(slice_from_means(ctx, &p, means, SliceCase::Interior))
    });
    for r in interior {
        match r {
            Ok(slice) => slices.push(A2SliceSet {
                p_df: slice.p_df,
                set: slice_set(&slice, ctx.range),
                slice: Some(slice),
            }),
            Err(q) => skipped.push(q),
        }
    }

    // upper endpoint
    if hi > 0.0 {
        let p = shares_at(st, hi);
        let (ed0, eu1) = (st.treated_share(0), st.untreated_share(1));
        let case = if ed0 == eu1 {
            SliceCase::OnlySwitchers
        } else if ed0 < eu1 {
            SliceCase::NoAlwaysTakers
        } else {
            SliceCase::NoNeverTakers
        };
        let p = TypeProbabilities {
            p_a: if ed0 <= eu1 { 0.0 } else { p.p_a },
            p_n: if eu1 <= ed0 { 0.0 } else { p.p_n },
            ..p
        };
        let means = mean_bounds_unchecked(ctx, &p, MeanMethod::SharpEnvelope);
        let slice = slice_from_means(ctx, &p, means, case);
        slices.push(A2SliceSet {
            p_df: hi,
            set: slice_set(&slice, ctx.range),
            slice: Some(slice),
        });
    }

    let (summary, disconnected) = union_of(
        slices.iter().map(|s| &s.set),
        Menu::A2,
        "union over defier shares",
    );
    Ok(A2Result {
        pdf,
        slices,
        skipped,
        summary,
        disconnected,
    })
}

/// Per-component hull of nonempty sets, with the components whose union has a gap.
pub fn union_of<'a>(
    sets: impl Iterator<Item = &'a GammaSet>,
    menu: Menu,
    tag: &str,
) -> (GammaSet, Vec<String>) {
    let mut acc: Option<GammaSet> = None;
    let mut gaps = std::collections::BTreeSet::new();
    for s in sets.filter(|s| !s.is_empty()) {
        match acc.as_mut() {
            None => {
                let mut first = s.clone();
                first.menu = menu;
                first.case_tag = tag.into();
                acc = Some(first);
            }
            Some(a) => {
                for p in Param::all() {
                    let (h, gap) = a.get(p).hull(&s.get(p));
                    if gap {
                        gaps.insert(p);
                    }
                    a.set(p, h);
                }
                a.links.retain(|l| s.links.contains(l));
            }
        }
    }
    match acc {
        Some(g) => (g, gaps.into_iter().map(|p| p.to_string()).collect()),
        None => (GammaSet::empty(menu, tag), Vec::new()),
    }
}

/// Joint frequencies `P(Y = y, D = d | Z = z)` for a binary outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryBounds {
    /// Indexed `[y][d][z]`.
    pub freq: [[[f64; 2]; 2]; 2],
    pub pdf_bound: PdfBound,
    treated: [f64; 2],
    untreated: [f64; 2],
}

impl BinaryBounds {
    /// Closed-form mean bounds at a defier share.
    pub fn mean_bounds_at(&self, p_df: f64) -> MeanBounds {
        let q = &self.freq;
        let p_a = self.treated[0] - p_df;
        let p_n = self.untreated[1] - p_df;
        let p_c = self.treated[1] - self.treated[0] + p_df;
        let mu_1a = MaybeEmptyInterval::new(
            ((q[1][1][1] - p_c) / p_a)
                .max((q[1][1][0] - p_df) / p_a)
                .max(0.0),
            (q[1][1][1] / p_a).min(q[1][1][0] / p_a).min(1.0),
        );
        let mu_0n = MaybeEmptyInterval::new(
            ((q[1][0][0] - p_c) / p_n)
                .max((q[1][0][1] - p_df) / p_n)
                .max(0.0),
            (q[1][0][0] / p_n).min(q[1][0][1] / p_n).min(1.0),
        );
        MeanBounds { mu_1a, mu_0n }
    }
}

pub fn binary_bounds(sample: &Sample) -> Result<BinaryBounds> {
    let st = cell_stats(sample)?;
    let binary = match sample.kind() {
        OutcomeKind::Discrete(s) => s.iter().all(|&v| v == 0.0 || v == 1.0),
        OutcomeKind::Continuous => false,
    };
    if !binary {
        return Err(Error::NotBinaryOutcome);
    }
    let mut counts = [[[0usize; 2]; 2]; 2];
    for o in sample.observations() {
        counts[o.y as usize][o.d as usize][o.z as usize] += 1;
    }
    let mut freq = [[[0.0; 2]; 2]; 2];
    for (y, fy) in freq.iter_mut().enumerate() {
        for (d, fd) in fy.iter_mut().enumerate() {
            for (z, f) in fd.iter_mut().enumerate() {
                *f = counts[y][d][z] as f64 / sample.arm_size(z as u8) as f64;
            }
        }
    }
    let slack = |s: usize| {
        let (o, t) = (1 - s, s);
        (freq[0][s][o] - freq[0][s][t])
            .max(freq[1][s][o] - freq[1][s][t])
            .max(st.prob[s][o] - st.prob[s][t])
            .max(0.0)
    };
    let slacks = Slacks {
        slack_d0: slack(0),
        slack_d1: slack(1),
    };
    let overlap = (0..2)
        .map(|d| freq[0][d][0].max(freq[0][d][1]) + freq[1][d][0].max(freq[1][d][1]))
        .fold(f64::NEG_INFINITY, f64::max)
        - 1.0;
    Ok(BinaryBounds {
        freq,
        pdf_bound: assemble_pdf(slacks, overlap, &st),
        treated: [st.treated_share(0), st.treated_share(1)],
        untreated: [st.untreated_share(0), st.untreated_share(1)],
    })
}

/// Type distributions that reproduce the data with no defiers, built when
/// both monotonicity inequalities hold.
#[derive(Debug, Clone)]
pub struct MixtureConstruction {
    pub probs: TypeProbabilities,
    /// `(treatment, type) -> cdf` of the potential outcome.
    pub cdfs: Vec<((u8, Compliance), SteppedCdf)>,
}

impl MixtureConstruction {
    pub fn cdf(&self, d: u8, t: Compliance) -> Option<&SteppedCdf> {
        self.cdfs.iter().find(|(k, _)| *k == (d, t)).map(|(_, c)| c)
    }

    /// Model-implied `P(Y <= y, D = d | Z = z)`.
    pub fn mixture(&self, y: f64, d: u8, z: u8) -> f64 {
        let types: &[Compliance] = match (d, z) {
            (1, 1) => &[Compliance::Complier, Compliance::Always],
            (1, _) => &[Compliance::Defier, Compliance::Always],
            (0, 1) => &[Compliance::Defier, Compliance::Never],
            _ => &[Compliance::Complier, Compliance::Never],
        };
        types
            .iter()
            .map(|&t| {
                let w = self.probs.get(t);
                if w == 0.0 {
                    0.0
                } else {
                    w * self.cdf(d, t).map_or(0.0, |c| c.eval(y))
                }
            })
            .sum()
    }
}

pub fn mixture_oracle_without_defiers(
    sample: &Sample,
    rule: BinRule,
) -> Result<MixtureConstruction> {
    let st = cell_stats(sample)?;
    let slacks = CellDensities::for_sample(sample, rule)?.slacks();
    let fs = st.first_stage();
    if !slacks.hold(TAU_TEST) || fs < -crate::bounds_a1::TAU_FS {
        return Err(Error::Inapplicable("monotonicity inequalities do not hold"));
    }
    let support = sample.support();
    let sub = |d: u8, z: u8| {
        let v = sample.cell_outcomes(d, z);
        let m = sample.arm_size(z) as f64;
        move |y: f64| v.partition_point(|&x| x <= y) as f64 / m
    };
    let from_fn = |f: &dyn Fn(f64) -> f64| {
        SteppedCdf::from_fn(support.clone(), |y| f(y).clamp(0.0, 1.0))
            .map_err(|_| Error::Inapplicable("constructed cdf is not monotone"))
    };
    let cell_cdf = |d: u8, z: u8| -> Result<Option<SteppedCdf>> {
        let n = sample.cell(d, z).len();
        if n == 0 {
            return Ok(None);
        }
        let f = sub(d, z);
        let m = sample.arm_size(z) as f64;
        from_fn(&|y| f(y) * m / n as f64).map(Some)
    };
    let mut cdfs = Vec::new();
    let probs;
    if fs > crate::bounds_a1::TAU_FS {
        probs = TypeProbabilities {
            p_a: st.treated_share(0),
            p_c: fs,
            p_df: 0.0,
            p_n: st.untreated_share(1),
        };
        let (p11, p10, p00, p01) = (sub(1, 1), sub(1, 0), sub(0, 0), sub(0, 1));
        cdfs.push((
            (1, Compliance::Complier),
            from_fn(&|y| (p11(y) - p10(y)) / fs)?,
        ));
        cdfs.push((
            (0, Compliance::Complier),
            from_fn(&|y| (p00(y) - p01(y)) / fs)?,
        ));
        if let Some(c) = cell_cdf(1, 0)? {
            cdfs.push(((1, Compliance::Always), c.clone()));
            cdfs.push(((0, Compliance::Always), c));
        }
        if let Some(c) = cell_cdf(0, 1)? {
            cdfs.push(((0, Compliance::Never), c.clone()));
            cdfs.push(((1, Compliance::Never), c));
        }
    } else {
        let d = st.treated_overall();
        probs = TypeProbabilities {
            p_a: d,
            p_c: 0.0,
            p_df: 0.0,
            p_n: 1.0 - d,
        };
        let pooled = |dd: u8| -> Result<Option<SteppedCdf>> {
            let mut v: Vec<f64> = sample
                .observations()
                .iter()
                .filter(|o| o.d == dd)
                .map(|o| o.y)
                .collect();
            if v.is_empty() {
                return Ok(None);
            }
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            from_fn(&|y| v.partition_point(|&x| x <= y) as f64 / n).map(Some)
        };
        if let Some(c) = pooled(1)? {
            cdfs.push(((1, Compliance::Always), c.clone()));
            cdfs.push(((0, Compliance::Always), c));
        }
        if let Some(c) = pooled(0)? {
            cdfs.push(((0, Compliance::Never), c.clone()));
            cdfs.push(((1, Compliance::Never), c));
        }
    }
    Ok(MixtureConstruction { probs, cdfs })
}
