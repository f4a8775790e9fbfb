//! Trimming estimators of the bounds under random assignment and
//! monotonicity, plug-in asymptotic variances, and Imbens-Manski intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds_a1::{first_stage_sign, shares_from_stats, FirstStage};
use crate::data::{cell_stats, CellStats, Sample};
use crate::empirics::quantile_sorted;
use crate::error::{Error, Result};
use crate::gamma::MaybeEmptyInterval;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Sorted outcomes with `Y <= F^{-1}(q)`; empty for `q <= 0`.
fn at_or_below(v: &[f64], q: f64) -> Result<&[f64]> {
    if q <= 0.0 {
        return Ok(&v[..0]);
    }
    let t = quantile_sorted(v, q.min(1.0))?;
    Ok(&v[..v.partition_point(|&x| x <= t)])
}

/// Sorted outcomes with `Y > F^{-1}(q)`; everything for `q <= 0`. When ties
/// at the quantile leave nothing strictly above it, the tied block is used.
fn above(v: &[f64], q: f64) -> Result<&[f64]> {
    if q <= 0.0 {
        return Ok(v);
    }
    let t = quantile_sorted(v, q.min(1.0))?;
    let k = v.partition_point(|&x| x <= t);
    if k == v.len() {
        return Ok(&v[v.partition_point(|&x| x < t)..]);
    }
    Ok(&v[k..])
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance (denominator `n`).
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn tail_mean(v: &[f64], what: &'static str) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyTrimmedCell(what));
    }
    Ok(mean(v))
}

/// Cells, shares and sample moments shared by the estimators.
struct Design<'a> {
    c11: &'a [f64],
    c10: &'a [f64],
    c01: &'a [f64],
    c00: &'a [f64],
    st: CellStats,
    alpha: f64,
    gamma: f64,
    p_a: f64,
    p_n: f64,
    p_c: f64,
    n: usize,
}

impl<'a> Design<'a> {
    fn new(sample: &'a Sample) -> Result<Self> {
        let st = cell_stats(sample)?;
        if first_stage_sign(st.first_stage()) != FirstStage::Positive {
            return Err(Error::NonPositiveFirstStage);
        }
        for (d, z) in [(1u8, 1u8), (1, 0), (0, 0), (0, 1)] {
            if sample.cell(d, z).is_empty() {
                return Err(Error::EmptyCell { d, z });
            }
        }
        let p = shares_from_stats(&st);
        Ok(Self {
            c11: sample.cell_outcomes(1, 1),
            c10: sample.cell_outcomes(1, 0),
            c01: sample.cell_outcomes(0, 1),
            c00: sample.cell_outcomes(0, 0),
            alpha: p.p_a / st.treated_share(1),
            gamma: p.p_n / st.untreated_share(0),
            p_a: p.p_a,
            p_n: p.p_n,
            p_c: p.p_c,
            n: sample.len(),
            st,
        })
    }

    /// Share of the whole sample in cell `(d, z)`.
    fn joint(&self, d: usize, z: usize) -> f64 {
        self.st.count[d][z] as f64 / self.n as f64
    }

    fn ez(&self) -> f64 {
        self.st.arm_size[1] as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrimmingEstimates {
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub p_a: f64,
    pub p_c: f64,
    pub p_n: f64,
    /// `(LB_1, UB_1)`.
    pub delta_1a: (f64, f64),
    /// `(LB_2, UB_2)`.
    pub delta_0n: (f64, f64),
    /// `(LB_3, UB_3)` for `delta_1c + theta_0c`.
    pub total_c: (f64, f64),
}

pub fn trimming_estimators(sample: &Sample) -> Result<TrimmingEstimates> {
    estimates(&Design::new(sample)?)
}

fn estimates(g: &Design<'_>) -> Result<TrimmingEstimates> {
    let (a, c) = (g.alpha, g.gamma);
    let m10 = mean(g.c10);
    let m01 = mean(g.c01);
    let lb1 = tail_mean(at_or_below(g.c11, a)?, "treated lower tail")? - m10;
    let ub1 = tail_mean(above(g.c11, 1.0 - a)?, "treated upper tail")? - m10;
    let lb2 = m01 - tail_mean(above(g.c00, 1.0 - c)?, "untreated upper tail")?;
    let ub2 = m01 - tail_mean(at_or_below(g.c00, c)?, "untreated lower tail")?;
    let lb3 = tail_mean(
        at_or_below(g.c11, 1.0 - a)?,
        "treated complement lower tail",
    )? - tail_mean(above(g.c00, c)?, "untreated complement upper tail")?;
    let ub3 = tail_mean(above(g.c11, a)?, "treated complement upper tail")?
        - tail_mean(
            at_or_below(g.c00, 1.0 - c)?,
            "untreated complement lower tail",
        )?;
    Ok(TrimmingEstimates {
        n: g.n,
        alpha: a,
        gamma: c,
        p_a: g.p_a,
        p_c: g.p_c,
        p_n: g.p_n,
        delta_1a: (lb1, ub1),
        delta_0n: (lb2, ub2),
        total_c: (lb3, ub3),
    })
}

/// Plug-in variance components, all on the `sqrt(N)` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Variances {
    pub v_lb1: f64,
    pub v_ub1: f64,
    pub v_lb2: f64,
    pub v_ub2: f64,
    pub v_lb3: f64,
    pub v_ub3: f64,
    pub v_lb4: f64,
    pub v_ub4: f64,
    pub v_c1: f64,
    pub v_c2: f64,
    pub v_alpha1: f64,
    pub v_alpha2: f64,
    pub v_gamma1: f64,
    pub v_gamma2: f64,
    pub n: usize,
}

impl Variances {
    /// `(sigma_lb, sigma_ub)` for the three bound pairs.
    pub fn sigmas(&self) -> [(f64, f64); 3] {
        [
            (
                (self.v_lb1 + self.v_c1).sqrt(),
                (self.v_ub1 + self.v_c1).sqrt(),
            ),
            (
                (self.v_lb2 + self.v_c2).sqrt(),
                (self.v_ub2 + self.v_c2).sqrt(),
            ),
            (
                (self.v_lb3 + self.v_lb4).sqrt(),
                (self.v_ub3 + self.v_ub4).sqrt(),
            ),
        ]
    }

    /// Standard errors `sigma / sqrt(N)`.
    pub fn standard_errors(&self) -> [(f64, f64); 3] {
        let r = (self.n as f64).sqrt();
        self.sigmas().map(|(a, b)| (a / r, b / r))
    }
}

/// Variance of a trimmed mean whose boundary is the quantile `q` and whose
/// nominal share of the cell is `share`.
fn tail_variance(
    tail: &[f64],
    q: f64,
    share: f64,
    cell_prob: f64,
    v_share: f64,
    what: &'static str,
) -> Result<f64> {
    if tail.len() < 2 {
        return Err(Error::EmptyTrimmedCell(what));
    }
    let gap = q - mean(tail);
    let denom = cell_prob * share;
    Ok(
        variance(tail) / denom
            + gap * gap * (1.0 - share) / denom
            + (gap / share).powi(2) * v_share,
    )
}

pub fn asymptotic_variances(sample: &Sample) -> Result<Variances> {
    variances(&Design::new(sample)?)
}

fn variances(g: &Design<'_>) -> Result<Variances> {
    let (a, c, ez) = (g.alpha, g.gamma, g.ez());
    let share_var = |s: f64, p: f64, here: f64, there: f64| {
        s * s * ((1.0 - p / s) / (here * p / s) + (1.0 - p) / (there * p))
    };
    let v_alpha1 = share_var(a, g.p_a, ez, 1.0 - ez);
    let v_alpha2 = share_var(1.0 - a, g.p_a, ez, 1.0 - ez);
    let v_gamma1 = share_var(c, g.p_n, 1.0 - ez, ez);
    let v_gamma2 = share_var(1.0 - c, g.p_n, 1.0 - ez, ez);
    let (e11, e00) = (g.joint(1, 1), g.joint(0, 0));
    let q = |v: &[f64], p: f64| quantile_sorted(v, p);

    let v_lb1 = tail_variance(
        at_or_below(g.c11, a)?,
        q(g.c11, a)?,
        a,
        e11,
        v_alpha1,
        "treated lower tail",
    )?;
    let v_ub1 = tail_variance(
        above(g.c11, 1.0 - a)?,
        q(g.c11, 1.0 - a)?,
        a,
        e11,
        v_alpha1,
        "treated upper tail",
    )?;
    let v_lb2 = tail_variance(
        above(g.c00, 1.0 - c)?,
        q(g.c00, 1.0 - c)?,
        c,
        e00,
        v_gamma1,
        "untreated upper tail",
    )?;
    let v_ub2 = tail_variance(
        at_or_below(g.c00, c)?,
        q(g.c00, c)?,
        c,
        e00,
        v_gamma1,
        "untreated lower tail",
    )?;
    let v_lb3 = tail_variance(
        at_or_below(g.c11, 1.0 - a)?,
        q(g.c11, 1.0 - a)?,
        1.0 - a,
        e11,
        v_alpha2,
        "treated complement lower tail",
    )?;
    let v_ub3 = tail_variance(
        above(g.c11, a)?,
        q(g.c11, a)?,
        1.0 - a,
        e11,
        v_alpha2,
        "treated complement upper tail",
    )?;
    let v_lb4 = tail_variance(
        above(g.c00, c)?,
        q(g.c00, c)?,
        1.0 - c,
        e00,
        v_gamma2,
        "untreated complement upper tail",
    )?;
    let v_ub4 = tail_variance(
        at_or_below(g.c00, 1.0 - c)?,
        q(g.c00, 1.0 - c)?,
        1.0 - c,
        e00,
        v_gamma2,
        "untreated complement lower tail",
    )?;
    Ok(Variances {
        v_lb1,
        v_ub1,
        v_lb2,
        v_ub2,
        v_lb3,
        v_ub3,
        v_lb4,
        v_ub4,
        v_c1: variance(g.c10) / g.joint(1, 0),
        v_c2: variance(g.c01) / g.joint(0, 1),
        v_alpha1,
        v_alpha2,
        v_gamma1,
        v_gamma2,
        n: g.n,
    })
}

/// Imbens-Manski interval for a partially identified scalar. `sigma_lb` and
/// `sigma_ub` are on the `sqrt(n)` scale. Returns the interval and the
/// critical value.
pub fn imbens_manski_ci(
    lb: f64,
    ub: f64,
    sigma_lb: f64,
    sigma_ub: f64,
    n: usize,
    level: f64,
) -> Result<(MaybeEmptyInterval, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::BadLevel(level));
    }
    if sigma_lb < 0.0 || sigma_ub < 0.0 || sigma_lb.is_nan() || sigma_ub.is_nan() {
        return Err(Error::NegativeSe);
    }
    if lb > ub {
        return Err(Error::InvalidConfig(format!(
            "lower bound {lb} exceeds upper bound {ub}"
        )));
    }
    let phi = std_normal();
    let root_n = (n as f64).sqrt();
    let s = sigma_lb.max(sigma_ub);
    let c_bar = if s == 0.0 {
        phi.inverse_cdf(level)
    } else {
        let spread = root_n * (ub - lb) / s;
        let f = |c: f64| phi.cdf(c + spread) - phi.cdf(-c) - level;
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let ci = MaybeEmptyInterval::new(
        lb - c_bar * sigma_lb / root_n,
        ub + c_bar * sigma_ub / root_n,
    );
    Ok((ci, c_bar))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub lb: f64,
    pub ub: f64,
    pub se_lb: f64,
    pub se_ub: f64,
    pub n: usize,
    pub ci: MaybeEmptyInterval,
    pub c_bar: f64,
}

impl BoundEstimate {
    pub fn new(lb: f64, ub: f64, sigma: (f64, f64), n: usize, level: f64) -> Result<Self> {
        let (ci, c_bar) = imbens_manski_ci(lb, ub, sigma.0, sigma.1, n, level)?;
        let r = (n as f64).sqrt();
        Ok(Self {
            lb,
            ub,
            se_lb: sigma.0 / r,
            se_ub: sigma.1 / r,
            n,
            ci,
            c_bar,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A3Inference {
    pub estimates: TrimmingEstimates,
    pub variances: Variances,
    pub delta_1a: BoundEstimate,
    pub delta_0n: BoundEstimate,
    pub total_c: BoundEstimate,
    pub level: f64,
    /// Sample analogs substituted for population quantities.
    pub substitutions: Vec<String>,
}

/// Estimates, variances and intervals for the three bound pairs.
pub fn a3_confidence_intervals(sample: &Sample, level: f64) -> Result<A3Inference> {
    let g = Design::new(sample)?;
    let est = estimates(&g)?;
    let var = variances(&g)?;
    let [s1, s2, s3] = var.sigmas();
    let substitutions = vec![
        format!("E[Z] -> {:.6}", g.ez()),
        format!("p_a -> {:.6}", g.p_a),
        format!("p_n -> {:.6}", g.p_n),
        format!("alpha -> {:.6}", g.alpha),
        format!("gamma -> {:.6}", g.gamma),
        "quantiles and tail moments -> empirical cell analogs".into(),
    ];
    Ok(A3Inference {
        delta_1a: BoundEstimate::new(est.delta_1a.0, est.delta_1a.1, s1, g.n, level)?,
        delta_0n: BoundEstimate::new(est.delta_0n.0, est.delta_0n.1, s2, g.n, level)?,
        total_c: BoundEstimate::new(est.total_c.0, est.total_c.1, s3, g.n, level)?,
        estimates: est,
        variances: var,
        level,
        substitutions,
    })
}
