//! Double-hurdle data-generating process with retained latent variables.
//!
//! Take-up requires clearing two latent thresholds shifted by the instrument:
//! `D = 1{V1 <= 2Z, V2 > Z}`, `Z = 1{eps > 0}`, `Y = beta D + U` with
//! `beta = beta_scale * Phi(2 V1 + V2)` and `U = u_scale (V1 + V2)`.

use std::io::Write;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds_a1::TypeProbabilities;
use crate::data::{Observation, Sample};
use crate::error::{Error, Result};
use crate::gamma::Compliance;
use crate::par;

/// Rows drawn from one RNG stream.
pub const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DgpConfig {
    /// Correlation of each latent cost with the instrument shock.
    pub rho: f64,
    pub n: usize,
    pub seed: u64,
    pub beta_scale: f64,
    pub u_scale: f64,
}

impl DgpConfig {
    pub fn new(rho: f64, n: usize, seed: u64) -> Self {
        Self {
            rho,
            n,
            seed,
            beta_scale: 5.0,
            u_scale: 0.5,
        }
    }

    /// Identity when `rho = 0`; otherwise unit variances, 0.5 between the
    /// two costs and `rho` between each cost and the instrument shock.
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        if self.rho == 0.0 {
            return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        }
        let r = self.rho;
        [[1.0, 0.5, r], [0.5, 1.0, r], [r, r, 1.0]]
    }

    /// Lower Cholesky factor; semi-definite matrices get zero pivots.
    pub fn cholesky(&self) -> Result<[[f64; 3]; 3]> {
        if !self.rho.is_finite() {
            return Err(Error::NonPsdCovariance(self.rho));
        }
        let s = self.covariance();
        let mut l = [[0.0; 3]; 3];
        for j in 0..3 {
            let pivot = s[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
            if pivot < -1e-12 {
                return Err(Error::NonPsdCovariance(self.rho));
            }
            l[j][j] = pivot.max(0.0).sqrt();
            for i in j + 1..3 {
                let v = s[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                l[i][j] = if l[j][j] > 0.0 {
                    v / l[j][j]
                } else if v.abs() > 1e-12 {
                    return Err(Error::NonPsdCovariance(self.rho));
                } else {
                    0.0
                };
            }
        }
        Ok(l)
    }
}

/// Latent draws for every simulated unit, stored column-wise.
#[derive(Debug, Clone, Default)]
pub struct Latents {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub eps: Vec<f64>,
    pub d0: Vec<u8>,
    pub d1: Vec<u8>,
    pub types: Vec<Compliance>,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
}

impl Latents {
    fn with_capacity(n: usize) -> Self {
        Self {
            v1: Vec::with_capacity(n),
            v2: Vec::with_capacity(n),
            eps: Vec::with_capacity(n),
            d0: Vec::with_capacity(n),
            d1: Vec::with_capacity(n),
            types: Vec::with_capacity(n),
            y1: Vec::with_capacity(n),
            y0: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    fn append(&mut self, mut other: Latents) {
        self.v1.append(&mut other.v1);
        self.v2.append(&mut other.v2);
        self.eps.append(&mut other.eps);
        self.d0.append(&mut other.d0);
        self.d1.append(&mut other.d1);
        self.types.append(&mut other.types);
        self.y1.append(&mut other.y1);
        self.y0.append(&mut other.y0);
    }

    pub fn record(&self, i: usize, observation: Observation) -> SimulatedRecord {
        SimulatedRecord {
            observation,
            v1: self.v1[i],
            v2: self.v2[i],
            eps: self.eps[i],
            d0: self.d0[i],
            d1: self.d1[i],
            t: self.types[i],
            y1: self.y1[i],
            y0: self.y0[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulatedRecord {
    pub observation: Observation,
    pub v1: f64,
    pub v2: f64,
    pub eps: f64,
    pub d0: u8,
    pub d1: u8,
    pub t: Compliance,
    pub y1: f64,
    pub y0: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub sample: Sample,
    pub latents: Latents,
}

impl SimOutput {
    pub fn record(&self, i: usize) -> SimulatedRecord {
        self.latents.record(i, self.sample.observations()[i])
    }
}

pub fn type_of(d0: u8, d1: u8) -> Compliance {
    match (d0, d1) {
        (1, 1) => Compliance::Always,
        (0, 1) => Compliance::Complier,
        (1, 0) => Compliance::Defier,
        _ => Compliance::Never,
    }
}

/// Maps a raw 64-bit draw to the open unit interval.
fn unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn draw_chunk(
    cfg: &DgpConfig,
    l: &[[f64; 3]; 3],
    phi: &Normal,
    chunk: usize,
) -> (Vec<Observation>, Latents) {
    let start = chunk * CHUNK;
    let len = CHUNK.min(cfg.n - start);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chunk as u64);
    let mut obs = Vec::with_capacity(len);
    let mut lat = Latents::with_capacity(len);
    for _ in 0..len {
        let g = [0, 1, 2].map(|_| phi.inverse_cdf(unit_open(rng.next_u64())));
        let x: [f64; 3] = std::array::from_fn(|i| (0..=i).map(|k| l[i][k] * g[k]).sum());
        let (v1, v2, eps) = (x[0], x[1], x[2]);
        let z = (eps > 0.0) as u8;
        let d0 = (v1 <= 0.0 && v2 > 0.0) as u8;
        let d1 = (v1 <= 2.0 && v2 > 1.0) as u8;
        let d = if z == 1 { d1 } else { d0 };
        let beta = cfg.beta_scale * phi.cdf(2.0 * v1 + v2);
        let u = cfg.u_scale * (v1 + v2);
        let (y1, y0) = (beta + u, u);
        obs.push(Observation::new(if d == 1 { y1 } else { y0 }, d, z));
        lat.v1.push(v1);
        lat.v2.push(v2);
        lat.eps.push(eps);
        lat.d0.push(d0);
        lat.d1.push(d1);
        lat.types.push(type_of(d0, d1));
        lat.y1.push(y1);
        lat.y0.push(y0);
    }
    (obs, lat)
}

/// Draws `n` units. Each chunk of [`CHUNK`] rows uses its own counter stream,
/// so output does not depend on the number of threads.
pub fn simulate(cfg: &DgpConfig) -> Result<SimOutput> {
    let l = cfg.cholesky()?;
    if cfg.n == 0 {
        return Err(Error::InvalidConfig("sample size must be positive".into()));
    }
    let phi = Normal::new(0.0, 1.0).expect("unit normal");
    let chunks = cfg.n.div_ceil(CHUNK);
    let parts = par::map_indexed(chunks, |c| draw_chunk(cfg, &l, &phi, c));
    let mut obs = Vec::with_capacity(cfg.n);
    let mut lat = Latents::with_capacity(cfg.n);
    for (o, t) in parts {
        obs.extend(o);
        lat.append(t);
    }
    Ok(SimOutput {
        sample: Sample::new(obs)?,
        latents: lat,
    })
}

/// Closed-form type shares for the independent design.
pub fn analytic_truth(cfg: &DgpConfig) -> Result<TypeProbabilities> {
    if cfg.rho != 0.0 {
        return Err(Error::NotAnalytic);
    }
    let phi = Normal::new(0.0, 1.0).expect("unit normal");
    let (f0, f1, f2) = (phi.cdf(0.0), phi.cdf(1.0), phi.cdf(2.0));
    let p_a = f0 * (1.0 - f1);
    let p_df = f0 * (f1 - f0);
    let p_c = f2 * (1.0 - f1) - p_a;
    Ok(TypeProbabilities {
        p_a,
        p_c,
        p_df,
        p_n: 1.0 - p_a - p_c - p_df,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McTruth {
    pub late_c: f64,
    pub late_df: f64,
    pub late_a: Option<f64>,
    pub late_n: Option<f64>,
    pub ate: f64,
    pub shares: TypeProbabilities,
}

pub fn mc_truth(lat: &Latents) -> Result<McTruth> {
    if lat.is_empty() {
        return Err(Error::EmptyType("all"));
    }
    let mut sum = [0.0f64; 4];
    let mut count = [0usize; 4];
    let mut total = 0.0;
    for i in 0..lat.len() {
        let k = lat.types[i] as usize;
        let effect = lat.y1[i] - lat.y0[i];
        sum[k] += effect;
        count[k] += 1;
        total += effect;
    }
    let n = lat.len() as f64;
    let late =
        |t: Compliance| (count[t as usize] > 0).then(|| sum[t as usize] / count[t as usize] as f64);
    let share = |t: Compliance| count[t as usize] as f64 / n;
    Ok(McTruth {
        late_c: late(Compliance::Complier).ok_or(Error::EmptyType("complier"))?,
        late_df: late(Compliance::Defier).ok_or(Error::EmptyType("defier"))?,
        late_a: late(Compliance::Always),
        late_n: late(Compliance::Never),
        ate: total / n,
        shares: TypeProbabilities {
            p_a: share(Compliance::Always),
            p_c: share(Compliance::Complier),
            p_df: share(Compliance::Defier),
            p_n: share(Compliance::Never),
        },
    })
}

/// Writes `y,d,z` rows in sample order.
pub fn write_sample_csv(sample: &Sample, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "d", "z"])?;
    for o in sample.observations() {
        w.write_record([o.y.to_string(), o.d.to_string(), o.z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the latent sidecar `D0,D1,T,Y1,Y0`, row-aligned with the sample.
pub fn write_latents_csv(lat: &Latents, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["D0", "D1", "T", "Y1", "Y0"])?;
    for i in 0..lat.len() {
        w.write_record([
            lat.d0[i].to_string(),
            lat.d1[i].to_string(),
            lat.types[i].tag().to_string(),
            lat.y1[i].to_string(),
            lat.y0[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save(output: &SimOutput, data: &Path, latents: Option<&Path>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(data)?);
    write_sample_csv(&output.sample, file)?;
    if let Some(p) = latents {
        let file = std::io::BufWriter::new(std::fs::File::create(p)?);
        write_latents_csv(&output.latents, file)?;
    }
    Ok(())
}
