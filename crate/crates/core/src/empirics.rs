//! Empirical building blocks: step cdfs, quantiles, trimmed means and binned densities.

use serde::Serialize;

use crate::data::{OutcomeKind, Sample};
use crate::error::{Error, Result};

const STEP_TOL: f64 = 1e-9;

/// Right-continuous step function on a finite grid.
///
/// Evaluates to 0 left of the first grid point and to `values[i]` on
/// `[grid[i], grid[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteppedCdf {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl SteppedCdf {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidCdf("grid and values differ in length"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidCdf(
                "grid must be finite and strictly increasing",
            ));
        }
        if values
            .iter()
            .any(|&v| !(-STEP_TOL..=1.0 + STEP_TOL).contains(&v))
        {
            return Err(Error::InvalidCdf("values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] < w[0] - STEP_TOL) {
            return Err(Error::InvalidCdf("values must be nondecreasing"));
        }
        Ok(Self { grid, values })
    }

    /// Builds the step function by evaluating `f` at every grid point.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&y| f(y)).collect();
        Self::new(grid, values)
    }

    /// Empirical cdf of sorted data scaled to `mass` (1 for a proper ecdf).
    pub fn from_sorted(sorted: &[f64], mass: f64, denom: usize) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let y = sorted[i];
            while i < sorted.len() && sorted[i] == y {
                i += 1;
            }
            grid.push(y);
            values.push(mass * i as f64 / denom as f64);
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, y: f64) -> f64 {
        let k = self.grid.partition_point(|&g| g <= y);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Empirical cdf of `Y` within cell `(d, z)`.
pub fn cell_ecdf(sample: &Sample, d: u8, z: u8) -> Result<SteppedCdf> {
    let v = sample.cell_outcomes(d, z);
    if v.is_empty() {
        return Err(Error::EmptyCell { d, z });
    }
    SteppedCdf::from_sorted(v, 1.0, v.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnvelopeKind {
    PointwiseMin,
    PointwiseMax,
}

pub fn cdf_envelope(a: &SteppedCdf, b: &SteppedCdf, kind: EnvelopeKind) -> SteppedCdf {
    let mut grid: Vec<f64> = a.grid.iter().chain(b.grid.iter()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = grid
        .iter()
        .map(|&y| {
            let (fa, fb) = (a.eval(y), b.eval(y));
            match kind {
                EnvelopeKind::PointwiseMin => fa.min(fb),
                EnvelopeKind::PointwiseMax => fa.max(fb),
            }
        })
        .collect();
    SteppedCdf { grid, values }
}

/// Mean of the distribution whose cdf is `f`.
pub fn mean_of_cdf(f: &SteppedCdf) -> Result<f64> {
    let last = f.final_value();
    if (last - 1.0).abs() > STEP_TOL {
        return Err(Error::NotAFullCdf(last));
    }
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (g, v) in f.grid.iter().zip(&f.values) {
        acc += g * (v - prev);
        prev = *v;
    }
    Ok(acc)
}

/// `min{y in cell : ECDF(y) >= q}`.
pub fn conditional_quantile(sample: &Sample, d: u8, z: u8, q: f64) -> Result<f64> {
    let v = sample.cell_outcomes(d, z);
    if v.is_empty() {
        return Err(Error::EmptyCell { d, z });
    }
    quantile_sorted(v, q)
}

pub fn quantile_sorted(v: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::QuantileOutOfRange(q));
    }
    let m = v.len();
    let k = ((q * m as f64) - 1e-9).ceil().clamp(1.0, m as f64) as usize;
    Ok(v[k - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tail {
    Lower,
    Upper,
}

/// Mean of the `share` fraction of the cell in the given tail; the boundary
/// observation is weighted fractionally so the trimmed mass is exact.
pub fn trimmed_mean(sample: &Sample, d: u8, z: u8, share: f64, tail: Tail) -> Result<f64> {
    let v = sample.cell_outcomes(d, z);
    if v.is_empty() {
        return Err(Error::EmptyCell { d, z });
    }
    Ok(trimmed_mean_sorted(v, share, tail))
}

pub fn trimmed_mean_sorted(v: &[f64], share: f64, tail: Tail) -> f64 {
    let m = v.len();
    let mass = (share.clamp(0.0, 1.0) * m as f64).min(m as f64);
    let mut whole = mass.floor() as usize;
    let mut frac = mass - whole as f64;
    if frac > 1.0 - 1e-9 {
        whole += 1;
        frac = 0.0;
    } else if frac < 1e-9 {
        frac = 0.0;
    }
    let whole = whole.min(m);
    if whole == 0 && frac == 0.0 {
        // vanishing share: the limit is the extreme value
        return match tail {
            Tail::Lower => v[0],
            Tail::Upper => v[m - 1],
        };
    }
    let (sum, boundary) = match tail {
        Tail::Lower => (v[..whole].iter().sum::<f64>(), v.get(whole)),
        Tail::Upper => (
            v[m - whole..].iter().sum::<f64>(),
            (m - whole).checked_sub(1).map(|i| &v[i]),
        ),
    };
    let extra = boundary.map_or(0.0, |b| frac * b);
    (sum + extra) / (whole as f64 + frac)
}

/// Rule for the common continuous grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BinRule {
    #[default]
    FreedmanDiaconis,
    Count(usize),
}

/// Common grid over which the four cell densities are compared.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", content = "points", rename_all = "snake_case")]
pub enum Grid {
    /// Support atoms (counting measure).
    Atoms(Vec<f64>),
    /// Bin edges; bins are `[e_i, e_{i+1})` with the last one closed.
    Bins(Vec<f64>),
}

impl Grid {
    pub fn for_sample(sample: &Sample, rule: BinRule) -> Result<Self> {
        match sample.kind() {
            OutcomeKind::Discrete(support) => Ok(Grid::Atoms(support.clone())),
            OutcomeKind::Continuous => {
                let pooled = sample.pooled_sorted();
                if pooled.is_empty() {
                    return Err(Error::BadBinEdges);
                }
                let k = match rule {
                    BinRule::FreedmanDiaconis => freedman_diaconis_bins(&pooled),
                    BinRule::Count(k) if k > 0 => k,
                    BinRule::Count(_) => return Err(Error::BadBinEdges),
                };
                Ok(Grid::Bins(equal_width_edges(
                    pooled[0],
                    pooled[pooled.len() - 1],
                    k,
                )))
            }
        }
    }

    pub fn cells(&self) -> usize {
        match self {
            Grid::Atoms(a) => a.len(),
            Grid::Bins(e) => e.len().saturating_sub(1),
        }
    }

    fn locate(&self, y: f64) -> Option<usize> {
        match self {
            Grid::Atoms(a) => a.binary_search_by(|p| p.total_cmp(&y)).ok(),
            Grid::Bins(e) => {
                let n = e.len();
                if n < 2 || y < e[0] || y > e[n - 1] {
                    return None;
                }
                let k = e.partition_point(|&x| x <= y);
                Some((k - 1).min(n - 2))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let pts = match self {
            Grid::Atoms(a) => a,
            Grid::Bins(e) if e.len() < 2 => return Err(Error::BadBinEdges),
            Grid::Bins(e) => e,
        };
        if pts.windows(2).any(|w| w[0] >= w[1]) || pts.iter().any(|p| !p.is_finite()) {
            return Err(Error::BadBinEdges);
        }
        Ok(())
    }
}

/// Freedman–Diaconis bin count; falls back to `sqrt(n)` when the IQR is zero.
pub fn freedman_diaconis_bins(sorted: &[f64]) -> usize {
    let n = sorted.len();
    let range = sorted[n - 1] - sorted[0];
    if n < 2 || range <= 0.0 {
        return 1;
    }
    let iqr = percentile(sorted, 0.75) - percentile(sorted, 0.25);
    if iqr <= 0.0 {
        return ((n as f64).sqrt().ceil() as usize).max(1);
    }
    let h = 2.0 * iqr / (n as f64).cbrt();
    ((range / h).ceil() as usize).max(1)
}

/// Linear-interpolation percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn equal_width_edges(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    let w = (hi - lo) / k as f64;
    let mut edges: Vec<f64> = (0..k).map(|i| lo + w * i as f64).collect();
    edges.push(hi);
    edges
}

/// Discrete representation of `f(y, d | z)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedDensity {
    pub counts: Vec<usize>,
    pub arm_size: usize,
}

impl BinnedDensity {
    pub fn mass(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.arm_size as f64
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.mass(i)).collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum::<usize>() as f64 / self.arm_size as f64
    }
}

pub fn binned_density(sample: &Sample, d: u8, z: u8, grid: &Grid) -> Result<BinnedDensity> {
    let m = sample.arm_size(z);
    if m == 0 {
        return Err(Error::EmptyInstrumentArm(z));
    }
    grid.validate()?;
    let mut counts = vec![0usize; grid.cells()];
    for &y in sample.cell_outcomes(d, z) {
        let i = grid.locate(y).ok_or(Error::BadBinEdges)?;
        counts[i] += 1;
    }
    Ok(BinnedDensity {
        counts,
        arm_size: m,
    })
}
