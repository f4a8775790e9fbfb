//! Bound that stays valid when some assumptions fail: the union of the
//! identified sets of the weakest menus the data do not refute.

use serde::Serialize;

use crate::bounds_a1::{first_stage_sign, identified_set_a1, FirstStage};
use crate::bounds_a2::{identified_set_a2, union_of, A2Result};
use crate::bounds_a3::identified_set_a3;
use crate::data::{cell_stats, Sample};
use crate::error::Result;
use crate::gamma::{GammaSet, Menu};
use crate::par;
use crate::validity::{CellDensities, Slacks, TAU_TEST};
use crate::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub slacks: Slacks,
    pub overlap_statistic: f64,
    pub first_stage: f64,
    pub first_stage_sign: FirstStage,
    pub tau_test: f64,
    pub a1_empty: bool,
    /// Absent when the monotone menu survived and the others were not needed.
    pub a2_empty: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustBound {
    pub result: GammaSet,
    pub active_menus: Vec<Menu>,
    /// Components whose union across active sets has a gap.
    pub disconnected: Vec<String>,
    pub diagnostics: Diagnostics,
    pub a1: GammaSet,
    pub a2: Option<A2Result>,
    pub a3: Option<GammaSet>,
}

pub fn robust_bound(sample: &Sample, settings: &Settings) -> Result<RobustBound> {
    let st = cell_stats(sample)?;
    let dens = CellDensities::for_sample(sample, settings.bins)?;
    let fs = st.first_stage();
    let mut diagnostics = Diagnostics {
        slacks: dens.slacks(),
        overlap_statistic: dens.overlap_statistic(),
        first_stage: fs,
        first_stage_sign: first_stage_sign(fs),
        tau_test: TAU_TEST,
        a1_empty: true,
        a2_empty: None,
    };
    let a1 = identified_set_a1(sample, settings)?;
    if !a1.is_empty() {
        diagnostics.a1_empty = false;
        return Ok(RobustBound {
            result: a1.clone(),
            active_menus: vec![Menu::A1],
            disconnected: Vec::new(),
            diagnostics,
            a1,
            a2: None,
            a3: None,
        });
    }
    let (a2, a3) = par::join(
        || identified_set_a2(sample, settings),
        || identified_set_a3(sample, settings),
    );
    let (a2, a3) = (a2?, a3?);
    let a2_empty = a2.summary.is_empty();
    diagnostics.a2_empty = Some(a2_empty);
    let (result, active_menus, disconnected) = if a2_empty {
        (a3.clone(), vec![Menu::A3], Vec::new())
    } else {
        let (mut u, mut gaps) = union_of(
            [&a2.summary, &a3].into_iter(),
            Menu::A2,
            "union of A2 and A3",
        );
        u.links.clear();
        for g in &a2.disconnected {
            if !gaps.contains(g) {
                gaps.push(g.clone());
            }
        }
        (u, vec![Menu::A2, Menu::A3], gaps)
    };
    Ok(RobustBound {
        result,
        active_menus,
        disconnected,
        diagnostics,
        a1,
        a2: Some(a2),
        a3: Some(a3),
    })
}
