//! Observations, samples and the per-cell moments every bound is built from.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub y: f64,
    pub d: u8,
    pub z: u8,
}

impl Observation {
    pub fn new(y: f64, d: u8, z: u8) -> Self {
        Self { y, d, z }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "support", rename_all = "snake_case")]
pub enum OutcomeKind {
    /// Sorted unique support.
    Discrete(Vec<f64>),
    Continuous,
}

impl OutcomeKind {
    pub fn is_discrete(&self) -> bool {
        matches!(self, OutcomeKind::Discrete(_))
    }
}

/// User choice for how the outcome is treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum KindOverride {
    #[default]
    Auto,
    Discrete,
    Continuous,
}

/// Largest number of distinct outcome values still treated as discrete.
pub fn discreteness_threshold(n: usize) -> usize {
    50usize.max((n as f64).sqrt().floor() as usize)
}

/// An immutable sample of `(y, d, z)` triples with the four `(d, z)` cells cached.
#[derive(Debug, Clone)]
pub struct Sample {
    obs: Vec<Observation>,
    cells: [[Vec<usize>; 2]; 2],
    sorted: [[Vec<f64>; 2]; 2],
    arm_sizes: [usize; 2],
    kind: OutcomeKind,
}

impl Sample {
    /// Validates and indexes the observations. Row numbers in errors are 1-based.
    pub fn new(mut obs: Vec<Observation>) -> Result<Self> {
        for (i, o) in obs.iter_mut().enumerate() {
            // -0.0 and 0.0 must land on the same atom
            o.y += 0.0;
            if !o.y.is_finite() {
                return Err(Error::NonFiniteOutcome { row: i + 1 });
            }
            if o.d > 1 {
                return Err(Error::NonBinaryTreatment { row: i + 1 });
            }
            if o.z > 1 {
                return Err(Error::NonBinaryInstrument { row: i + 1 });
            }
        }
        Ok(Self::build(obs, KindOverride::Auto))
    }

    fn build(obs: Vec<Observation>, kind: KindOverride) -> Self {
        let mut cells: [[Vec<usize>; 2]; 2] = Default::default();
        for (i, o) in obs.iter().enumerate() {
            cells[o.d as usize][o.z as usize].push(i);
        }
        let mut sorted: [[Vec<f64>; 2]; 2] = Default::default();
        for d in 0..2 {
            for z in 0..2 {
                let mut v: Vec<f64> = cells[d][z].iter().map(|&i| obs[i].y).collect();
                v.sort_by(f64::total_cmp);
                sorted[d][z] = v;
            }
        }
        let arm_sizes = [
            cells[0][0].len() + cells[1][0].len(),
            cells[0][1].len() + cells[1][1].len(),
        ];
        let mut sample = Self {
            obs,
            cells,
            sorted,
            arm_sizes,
            kind: OutcomeKind::Continuous,
        };
        sample.kind = sample.classify(kind);
        sample
    }

    fn classify(&self, choice: KindOverride) -> OutcomeKind {
        let support = || {
            let mut v: Vec<f64> = self.obs.iter().map(|o| o.y).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        match choice {
            KindOverride::Continuous => OutcomeKind::Continuous,
            KindOverride::Discrete => OutcomeKind::Discrete(support()),
            KindOverride::Auto => {
                let s = support();
                if s.len() <= discreteness_threshold(self.obs.len()) {
                    OutcomeKind::Discrete(s)
                } else {
                    OutcomeKind::Continuous
                }
            }
        }
    }

    pub fn with_kind(mut self, choice: KindOverride) -> Self {
        self.kind = self.classify(choice);
        self
    }

    /// The same data with the instrument flipped, `z -> 1 - z`.
    pub fn relabeled(&self) -> Self {
        let obs = self
            .obs
            .iter()
            .map(|o| Observation::new(o.y, o.d, 1 - o.z))
            .collect();
        let mut s = Self::build(obs, KindOverride::Continuous);
        s.kind = self.kind.clone();
        s
    }

    pub fn observations(&self) -> &[Observation] {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn kind(&self) -> &OutcomeKind {
        &self.kind
    }

    /// Row indices of cell `(d, z)` in input order.
    pub fn cell(&self, d: u8, z: u8) -> &[usize] {
        &self.cells[d as usize][z as usize]
    }

    /// Outcomes of cell `(d, z)`, sorted ascending.
    pub fn cell_outcomes(&self, d: u8, z: u8) -> &[f64] {
        &self.sorted[d as usize][z as usize]
    }

    pub fn arm_size(&self, z: u8) -> usize {
        self.arm_sizes[z as usize]
    }

    pub fn require_arms(&self) -> Result<()> {
        for z in 0..2u8 {
            if self.arm_sizes[z as usize] == 0 {
                return Err(Error::EmptyInstrumentArm(z));
            }
        }
        Ok(())
    }

    /// Smallest and largest observed outcome.
    pub fn outcome_range(&self) -> (f64, f64) {
        self.obs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
                (lo.min(o.y), hi.max(o.y))
            })
    }

    /// Pooled outcomes sorted ascending.
    pub fn pooled_sorted(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.obs.iter().map(|o| o.y).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Sorted unique pooled outcome values.
    pub fn support(&self) -> Vec<f64> {
        match &self.kind {
            OutcomeKind::Discrete(s) => s.clone(),
            OutcomeKind::Continuous => {
                let mut v = self.pooled_sorted();
                v.dedup();
                v
            }
        }
    }
}

/// Column names used when reading a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub y: String,
    pub d: String,
    pub z: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            y: "y".into(),
            d: "d".into(),
            z: "z".into(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<Sample> {
    let file = std::fs::File::open(path)?;
    read_csv(file, columns)
}

pub fn read_csv<R: Read>(reader: R, columns: &ColumnMap) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (iy, id, iz) = (find(&columns.y)?, find(&columns.d)?, find(&columns.z)?);

    let mut obs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let y = rec
            .get(iy)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or(Error::NonFiniteOutcome { row })?;
        let d = parse_binary(rec.get(id)).ok_or(Error::NonBinaryTreatment { row })?;
        let z = parse_binary(rec.get(iz)).ok_or(Error::NonBinaryInstrument { row })?;
        obs.push(Observation::new(y, d, z));
    }
    Sample::new(obs)
}

fn parse_binary(field: Option<&str>) -> Option<u8> {
    let v: f64 = field?.trim().parse().ok()?;
    if v == 0.0 {
        Some(0)
    } else if v == 1.0 {
        Some(1)
    } else {
        None
    }
}

/// Sample analogs of the conditional moments, indexed `[d][z]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    /// `P(D = d | Z = z)`.
    pub prob: [[f64; 2]; 2],
    /// `E[Y 1{D = d} | Z = z]`.
    pub joint_mean: [[f64; 2]; 2],
    /// `E[Y | D = d, Z = z]`, absent for empty cells.
    pub mean: [[Option<f64>; 2]; 2],
    pub count: [[usize; 2]; 2],
    pub arm_size: [usize; 2],
}

impl CellStats {
    /// `E[D | Z = z]`.
    pub fn treated_share(&self, z: u8) -> f64 {
        self.prob[1][z as usize]
    }

    pub fn untreated_share(&self, z: u8) -> f64 {
        self.prob[0][z as usize]
    }

    /// `E[Y | Z = z]`.
    pub fn arm_mean(&self, z: u8) -> f64 {
        self.joint_mean[0][z as usize] + self.joint_mean[1][z as usize]
    }

    /// `E[D | Z = 1] - E[D | Z = 0]`.
    pub fn first_stage(&self) -> f64 {
        self.prob[1][1] - self.prob[1][0]
    }

    pub fn itt(&self) -> f64 {
        self.arm_mean(1) - self.arm_mean(0)
    }

    pub fn cell_mean(&self, d: u8, z: u8) -> Result<f64> {
        self.mean[d as usize][z as usize].ok_or(Error::EmptyCell { d, z })
    }

    /// Pooled `E[D]`.
    pub fn treated_overall(&self) -> f64 {
        let n = (self.arm_size[0] + self.arm_size[1]) as f64;
        (self.count[1][0] + self.count[1][1]) as f64 / n
    }

    /// Pooled `E[Y | D = d]`.
    pub fn pooled_mean(&self, d: u8) -> Option<f64> {
        let d = d as usize;
        let c = self.count[d][0] + self.count[d][1];
        if c == 0 {
            return None;
        }
        let total = self.joint_mean[d][0] * self.arm_size[0] as f64
            + self.joint_mean[d][1] * self.arm_size[1] as f64;
        Some(total / c as f64)
    }
}

#[allow(clippy::needless_range_loop)]
pub fn cell_stats(sample: &Sample) -> Result<CellStats> {
    sample.require_arms()?;
    let mut sums = [[0.0f64; 2]; 2];
    for o in sample.observations() {
        sums[o.d as usize][o.z as usize] += o.y;
    }
    let mut stats = CellStats {
        prob: [[0.0; 2]; 2],
        joint_mean: [[0.0; 2]; 2],
        mean: [[None; 2]; 2],
        count: [[0; 2]; 2],
        arm_size: [sample.arm_size(0), sample.arm_size(1)],
    };
    for d in 0..2 {
        for z in 0..2 {
            let c = sample.cell(d as u8, z as u8).len();
            let m = stats.arm_size[z] as f64;
            stats.count[d][z] = c;
            stats.prob[d][z] = c as f64 / m;
            stats.joint_mean[d][z] = sums[d][z] / m;
            if c > 0 {
                stats.mean[d][z] = Some(sums[d][z] / c as f64);
            }
        }
    }
    Ok(stats)
}

/// Empirical `P(Y <= y, D = d | Z = z)`.
pub fn subdistribution(sample: &Sample, y: f64, d: u8, z: u8) -> Result<f64> {
    let m = sample.arm_size(z);
    if m == 0 {
        return Err(Error::EmptyInstrumentArm(z));
    }
    let cell = sample.cell_outcomes(d, z);
    let k = cell.partition_point(|&v| v <= y);
    Ok(k as f64 / m as f64)
}
