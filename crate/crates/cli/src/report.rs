use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use ivbounds::bounds_a1::{identified_set_a1, type_probabilities_a1, TypeProbabilities};
use ivbounds::bounds_a2::{identified_set_a2, A2Result};
use ivbounds::bounds_a3::{direct_effect_bounds, identified_set_a3, A3Report};
use ivbounds::empirics::Grid;
use ivbounds::inference::{a3_confidence_intervals, A3Inference};
use ivbounds::robust::{robust_bound, Diagnostics};
use ivbounds::validity::{er_check_a3, CellDensities, ErCheck, Slacks};
use ivbounds::{cell_stats, CellStats, GammaSet, Menu, Sample, Settings};

use crate::CliResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Meaning of each numeric section, keyed by its JSON path.
fn anchors() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("cell_stats.prob", "P(D=d | Z=z), indexed [d][z]"),
        ("cell_stats.joint_mean", "E[Y 1{D=d} | Z=z]"),
        ("cell_stats.mean", "E[Y | D=d, Z=z]"),
        (
            "monotone_shares",
            "type shares under exclusion and monotonicity",
        ),
        (
            "validity.slacks",
            "positive-part integral of f(y,s|1-s) - f(y,s|s)",
        ),
        ("validity.overlap_statistic", "max_d int max_z f(y,d|z) - 1"),
        (
            "validity.er_check",
            "always/never-taker means against their trimming bounds",
        ),
        (
            "sets.a1",
            "identified set, assignment + exclusion + monotonicity",
        ),
        (
            "sets.a2",
            "identified set, assignment + exclusion, union over defier shares",
        ),
        ("sets.a3", "identified set, assignment + monotonicity"),
        ("a3_effects", "trimming bounds on direct effects"),
        ("robust", "union over the weakest unrefuted menus"),
        (
            "inference",
            "trimming estimators with Imbens-Manski intervals",
        ),
    ])
}

#[derive(Debug, Serialize)]
pub struct Input {
    pub path: String,
    pub n: usize,
    pub outcome_kind: &'static str,
    pub grid: GridSummary,
}

#[derive(Debug, Serialize)]
pub struct GridSummary {
    pub kind: &'static str,
    pub cells: usize,
}

fn input(sample: &Sample, settings: &Settings, path: &Path) -> CliResult<Input> {
    let grid = Grid::for_sample(sample, settings.bins)?;
    Ok(Input {
        path: path.display().to_string(),
        n: sample.len(),
        outcome_kind: if sample.kind().is_discrete() {
            "discrete"
        } else {
            "continuous"
        },
        grid: GridSummary {
            kind: match grid {
                Grid::Atoms(_) => "atoms",
                Grid::Bins(_) => "bins",
            },
            cells: grid.cells(),
        },
    })
}

#[derive(Debug, Serialize)]
pub struct Validity {
    pub slacks: Slacks,
    pub overlap_statistic: f64,
    pub first_stage: f64,
    /// `None` when the first stage is zero.
    pub er_check: Option<ErCheck>,
}

fn validity_of(sample: &Sample, settings: &Settings) -> CliResult<Validity> {
    let dens = CellDensities::for_sample(sample, settings.bins)?;
    let st = cell_stats(sample)?;
    Ok(Validity {
        slacks: dens.slacks(),
        overlap_statistic: dens.overlap_statistic(),
        first_stage: st.first_stage(),
        er_check: er_check_a3(sample).ok(),
    })
}

#[derive(Debug, Serialize)]
pub struct Sets {
    pub a1: GammaSet,
    pub a2: A2Summary,
    pub a3: GammaSet,
}

#[derive(Debug, Serialize)]
pub struct A2Summary {
    pub pdf: ivbounds::bounds_a2::PdfBound,
    pub summary: GammaSet,
    pub disconnected: Vec<String>,
    pub slices: usize,
    pub skipped: Vec<f64>,
}

impl From<A2Result> for A2Summary {
    fn from(r: A2Result) -> Self {
        Self {
            pdf: r.pdf,
            slices: r.slices.len(),
            summary: r.summary,
            disconnected: r.disconnected,
            skipped: r.skipped,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Robust {
    pub active_menus: Vec<Menu>,
    pub result: GammaSet,
    pub disconnected: Vec<String>,
    pub diagnostics: Diagnostics,
}

/// Failure of an optional section, reported inline.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Section<T> {
    Ok(T),
    Unavailable { unavailable: String },
}

impl<T> From<ivbounds::Result<T>> for Section<T> {
    fn from(r: ivbounds::Result<T>) -> Self {
        match r {
            Ok(v) => Section::Ok(v),
            Err(e) => Section::Unavailable {
                unavailable: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub schema_version: u32,
    pub anchors: BTreeMap<&'static str, &'static str>,
    pub input: Input,
    pub cell_stats: CellStats,
    pub monotone_shares: TypeProbabilities,
    pub validity: Validity,
    pub sets: Sets,
    pub a3_effects: Section<A3Report>,
    pub robust: Robust,
    pub inference: Section<A3Inference>,
}

pub fn analyze(sample: &Sample, settings: &Settings, path: &Path) -> CliResult<AnalyzeReport> {
    let rb = robust_bound(sample, settings)?;
    let a2 = match rb.a2.clone() {
        Some(a2) => a2,
        None => identified_set_a2(sample, settings)?,
    };
    let a3 = match rb.a3.clone() {
        Some(a3) => a3,
        None => identified_set_a3(sample, settings)?,
    };
    Ok(AnalyzeReport {
        schema_version: SCHEMA_VERSION,
        anchors: anchors(),
        input: input(sample, settings, path)?,
        cell_stats: cell_stats(sample)?,
        monotone_shares: type_probabilities_a1(sample)?,
        validity: validity_of(sample, settings)?,
        sets: Sets {
            a1: identified_set_a1(sample, settings)?,
            a2: a2.into(),
            a3,
        },
        a3_effects: direct_effect_bounds(sample, settings.range_for(sample)).into(),
        robust: Robust {
            active_menus: rb.active_menus,
            result: rb.result,
            disconnected: rb.disconnected,
            diagnostics: rb.diagnostics,
        },
        inference: a3_confidence_intervals(sample, settings.level).into(),
    })
}

#[derive(Debug, Serialize)]
pub struct ValidityReport {
    pub schema_version: u32,
    pub input: Input,
    pub validity: Validity,
    pub a1_empty: bool,
    pub pdf: ivbounds::bounds_a2::PdfBound,
}

pub fn validity(sample: &Sample, settings: &Settings, path: &Path) -> CliResult<ValidityReport> {
    Ok(ValidityReport {
        schema_version: SCHEMA_VERSION,
        input: input(sample, settings, path)?,
        validity: validity_of(sample, settings)?,
        a1_empty: identified_set_a1(sample, settings)?.is_empty(),
        pdf: ivbounds::bounds_a2::pdf_bounds(sample, settings.bins)?,
    })
}

#[derive(Debug, Serialize)]
pub struct IntervalReport {
    pub schema_version: u32,
    pub input: Input,
    pub inference: A3Inference,
}

pub fn intervals(sample: &Sample, settings: &Settings, path: &Path) -> CliResult<IntervalReport> {
    Ok(IntervalReport {
        schema_version: SCHEMA_VERSION,
        input: input(sample, settings, path)?,
        inference: a3_confidence_intervals(sample, settings.level)?,
    })
}
