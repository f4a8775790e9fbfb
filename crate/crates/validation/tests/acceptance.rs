//! Acceptance criteria 1-10. Runs as a plain binary so every verdict line is
//! printed. Pass criterion numbers as arguments to run a subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::ExitCode;

use common::{er_true, random_design, sample, share, sub, Row};
use ivbounds::bounds_a1::identified_set_a1;
use ivbounds::bounds_a2::{
    binary_bounds, dist_bounds_at, identified_set_a2_with, mean_bounds_at,
    mixture_oracle_without_defiers, pdf_bounds, A2Context, MeanMethod, SliceCase,
};
use ivbounds::bounds_a3::{direct_effect_bounds, itt_decomposition, trimmed_mean_bounds};
use ivbounds::empirics::BinRule;
use ivbounds::inference::{a3_confidence_intervals, imbens_manski_ci, trimming_estimators};
use ivbounds::robust::robust_bound;
use ivbounds::simulator::{analytic_truth, mc_truth, simulate, DgpConfig, McTruth};
use ivbounds::{cell_stats, load_csv, par, ColumnMap, Menu, OutcomeRange, Sample, Settings};
use proptest::test_runner::{Config, TestRunner};

const SEED: u64 = 20240607;
const N_LARGE: usize = 10_000_000;

const TOL_SHARE: f64 = 5e-4;
const TOL_LATE: f64 = 0.01;
const TOL_FIRST_STAGE: f64 = 1e-3;
const TOL_WALD: f64 = 0.05;
const MC_SE_MULTIPLE: f64 = 4.0;
// the library normal cdf is good to about 1e-11
const TOL_CLOSED_FORM: f64 = 1e-10;
const TOL_PDF: f64 = 5e-3;
const TOL_CARD_SHARE: f64 = 5e-4;
const TOL_CARD_BOUND: f64 = 5e-3;
const TOL_CARD_CI: f64 = 1e-2;
const TOL_CARD_OVERLAP: f64 = 1e-2;
const TOL_ITT: f64 = 1e-10;
const TOL_TRIM: f64 = 1e-12;
const TOL_MIXTURE: f64 = 1e-12;
const TOL_CBAR: f64 = 1e-4;
const MIN_COVERAGE: f64 = 0.90;

// standard normal quantiles, 97.5% and 95%
const Z_TWO_SIDED: f64 = 1.959963984540054;
const Z_ONE_SIDED: f64 = 1.6448536269514722;
// standard normal cdf at 1 and 2
const PHI_1: f64 = 0.8413447460685429;
const PHI_2: f64 = 0.9772498680518208;

struct Line {
    ok: bool,
    text: String,
}

#[derive(Default)]
struct Report {
    lines: Vec<Line>,
    skipped: Option<String>,
}

impl Report {
    fn near(&mut self, name: &str, observed: f64, expected: f64, tol: f64) {
        let ok = (observed - expected).abs() <= tol;
        self.lines.push(Line {
            ok,
            text: format!(
                "{name}: {observed:.6} vs {expected:.6} +/- {tol:.1e} (|diff| {:.1e})",
                (observed - expected).abs()
            ),
        });
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.lines.push(Line {
            ok,
            text: format!("{name}: {detail}"),
        });
    }

    fn pass(&self) -> bool {
        !self.lines.is_empty() && self.lines.iter().all(|l| l.ok)
    }
}

/// Large samples shared by the first three criteria.
struct Large {
    sample: Sample,
    truth: McTruth,
}

fn large() -> Large {
    let sim = simulate(&DgpConfig::new(0.0, N_LARGE, SEED)).expect("simulation");
    let truth = mc_truth(&sim.latents).expect("truth");
    Large {
        sample: sim.sample,
        truth,
    }
}

fn criterion_1(l: &Large) -> Report {
    let mut r = Report::default();
    let s = l.truth.shares;
    r.near("p_df", s.p_df, 0.170836, TOL_SHARE);
    r.near("p_a", s.p_a, 0.079284, TOL_SHARE);
    r.near("p_c", s.p_c, 0.075601, TOL_SHARE);
    r.near("p_n", s.p_n, 0.674279, TOL_SHARE);
    r.near("LATE_c", l.truth.late_c, 4.925344, TOL_LATE);
    r.near("LATE_df", l.truth.late_df, 1.231659, TOL_LATE);
    let st = cell_stats(&l.sample).unwrap();
    // the design lowers take-up when Z = 1, so the reversal is reported
    r.near(
        "E[D|Z=0] - E[D|Z=1]",
        -st.first_stage(),
        0.0956,
        TOL_FIRST_STAGE,
    );
    r.near(
        "IV estimand",
        st.itt() / st.first_stage(),
        -1.6874,
        TOL_WALD,
    );
    r
}

fn criterion_2(l: &Large) -> Report {
    let mut r = Report::default();
    let a = analytic_truth(&DgpConfig::new(0.0, N_LARGE, SEED)).unwrap();
    // types are rectangles in (V1, V2): always {V1<=0, V2>1},
    // complier {0<V1<=2, V2>1}, defier {V1<=0, 0<V2<=1}
    let phi_0 = 0.5;
    let oracle = [
        ("p_a", a.p_a, phi_0 * (1.0 - PHI_1), l.truth.shares.p_a),
        (
            "p_c",
            a.p_c,
            (PHI_2 - phi_0) * (1.0 - PHI_1),
            l.truth.shares.p_c,
        ),
        ("p_df", a.p_df, phi_0 * (PHI_1 - phi_0), l.truth.shares.p_df),
        (
            "p_n",
            a.p_n,
            1.0 - PHI_2 * (1.0 - PHI_1) - phi_0 * (PHI_1 - phi_0),
            l.truth.shares.p_n,
        ),
    ];
    let n = N_LARGE as f64;
    for (name, closed, independent, simulated) in oracle {
        r.near(
            &format!("{name} closed form"),
            closed,
            independent,
            TOL_CLOSED_FORM,
        );
        let se = (independent * (1.0 - independent) / n).sqrt();
        r.near(
            &format!("{name} simulated"),
            simulated,
            independent,
            MC_SE_MULTIPLE * se,
        );
    }
    r
}

fn criterion_3(l: &Large) -> Report {
    let mut r = Report::default();
    let settings = Settings::default();
    let ctx = A2Context::new(&l.sample, &settings).unwrap();
    let res = identified_set_a2_with(&ctx, &settings).unwrap();
    let slices: Vec<_> = res.slices.iter().filter_map(|s| s.slice).collect();
    let interior: Vec<_> = slices
        .iter()
        .filter(|s| s.case == SliceCase::Interior)
        .collect();
    let min_lo = |f: &dyn Fn(&ivbounds::bounds_a2::A2Slice) -> Option<f64>| {
        interior
            .iter()
            .map(|s| f(s).unwrap_or(f64::NEG_INFINITY))
            .fold(f64::INFINITY, f64::min)
    };
    let min_c = min_lo(&|s| s.theta_c.lo());
    let min_df = min_lo(&|s| s.theta_df.lo());
    r.check(
        "interior slices",
        !interior.is_empty(),
        format!(
            "{} evaluated, {} skipped",
            interior.len(),
            res.skipped.len()
        ),
    );
    r.check(
        "min interior theta_c lower bound > 0",
        min_c > 0.0,
        format!("{min_c:.6}"),
    );
    r.check(
        "min interior theta_df lower bound > 0",
        min_df > 0.0,
        format!("{min_df:.6}"),
    );
    let step = slices
        .windows(2)
        .map(|w| w[1].p_df - w[0].p_df)
        .fold(0.0, f64::max);
    let t = &l.truth;
    let covering: Vec<_> = slices
        .iter()
        .filter(|s| (s.p_df - t.shares.p_df).abs() <= step)
        .filter(|s| s.theta_c.contains(t.late_c) && s.theta_df.contains(t.late_df))
        .collect();
    let detail =
        match covering.first() {
            Some(s) => {
                format!(
            "true p_df {:.5}, slice p_df {:.5}: theta_c {:?} ∋ {:.4}, theta_df {:?} ∋ {:.4}",
            t.shares.p_df, s.p_df, s.theta_c.bounds(), t.late_c, s.theta_df.bounds(), t.late_df
        )
            }
            None => format!(
                "no slice within {step:.5} of p_df {:.5} covers the truth",
                t.shares.p_df
            ),
        };
    r.check(
        "true LATEs inside bands at true p_df",
        !covering.is_empty(),
        detail,
    );
    r
}

fn criterion_4() -> Report {
    let mut r = Report::default();
    let sim = simulate(&DgpConfig::new(0.33, N_LARGE, SEED)).unwrap();
    let truth = mc_truth(&sim.latents).unwrap();
    drop(sim.latents);
    let pdf = pdf_bounds(&sim.sample, BinRule::default()).unwrap();
    r.near(
        "p_df lower endpoint",
        pdf.slacks.max().max(0.0),
        0.165,
        TOL_PDF,
    );
    r.near("p_df upper endpoint", pdf.upper, 0.167, TOL_PDF);
    r.check(
        "overlap statistic > 0",
        pdf.overlap_statistic > 0.0,
        format!("{:.6}", pdf.overlap_statistic),
    );
    r.check(
        "set reported empty",
        pdf.interval.is_empty(),
        format!("{:?}", pdf.interval),
    );
    r.check("true p_df", true, format!("{:.6}", truth.shares.p_df));
    r
}

fn criterion_5() -> Report {
    let mut r = Report::default();
    let Some(path) = std::env::var_os("IVBOUNDS_CARD_CSV") else {
        r.skipped = Some("IVBOUNDS_CARD_CSV not set".into());
        return r;
    };
    let cols = ColumnMap {
        y: "lwage".into(),
        d: "college".into(),
        z: "nearc4".into(),
    };
    let sample = load_csv(&path, &cols).unwrap();
    let settings = Settings::default();
    let inf = a3_confidence_intervals(&sample, 0.95).unwrap();
    let e = &inf.estimates;
    r.near("p_a", e.p_a, 0.2247, TOL_CARD_SHARE);
    r.near("p_c", e.p_c, 0.0685, TOL_CARD_SHARE);
    r.near("p_n", e.p_n, 0.7068, TOL_CARD_SHARE);
    let bounds = [
        (
            "delta_1a",
            &inf.delta_1a,
            [-0.0831, 0.2639],
            [-0.1595, 0.3414],
        ),
        (
            "delta_0n",
            &inf.delta_0n,
            [0.0813, 0.2308],
            [0.0415, 0.2707],
        ),
        (
            "delta_1c + theta_0c",
            &inf.total_c,
            [-0.9655, 1.6753],
            [-1.0372, 1.7490],
        ),
    ];
    for (name, b, est, ci) in bounds {
        r.near(&format!("{name} lower"), b.lb, est[0], TOL_CARD_BOUND);
        r.near(&format!("{name} upper"), b.ub, est[1], TOL_CARD_BOUND);
        let (lo, hi) = b.ci.bounds().unwrap_or((f64::NAN, f64::NAN));
        r.near(&format!("{name} CI lower"), lo, ci[0], TOL_CARD_CI);
        r.near(&format!("{name} CI upper"), hi, ci[1], TOL_CARD_CI);
    }
    let rb = robust_bound(&sample, &settings).unwrap();
    r.near(
        "overlap statistic",
        rb.diagnostics.overlap_statistic,
        0.036,
        TOL_CARD_OVERLAP,
    );
    let a1 = identified_set_a1(&sample, &settings).unwrap();
    r.check("A1 set empty", a1.is_empty(), format!("{}", a1.is_empty()));
    let a2_empty = rb.a2.as_ref().is_none_or(|a| a.summary.is_empty());
    r.check("A2 set empty", a2_empty, format!("{a2_empty}"));
    r.check(
        "active menus = {A3}",
        rb.active_menus == [Menu::A3],
        format!("{:?}", rb.active_menus),
    );
    r
}

/// Worst ITT residual over corner and midpoint type means.
fn itt_residual(s: &Sample) -> f64 {
    let m = trimmed_mean_bounds(s).unwrap();
    let picks = |iv: Option<ivbounds::MaybeEmptyInterval>| match iv.and_then(|i| i.bounds()) {
        Some((lo, hi)) => vec![lo, 0.5 * (lo + hi), hi],
        None => vec![0.0, 1.0],
    };
    let mut worst = 0.0f64;
    for a in picks(m.mu_11a) {
        for n in picks(m.mu_00n) {
            let d = itt_decomposition(s, a, n).unwrap();
            worst = worst.max((d.lhs - d.rhs).abs());
        }
    }
    worst
}

fn positive_first_stage(s: Sample) -> Option<Sample> {
    let fs = cell_stats(&s).ok()?.first_stage();
    if fs > 0.0 {
        Some(s)
    } else if fs < 0.0 {
        Some(s.relabeled())
    } else {
        None
    }
}

fn criterion_6() -> Report {
    let mut r = Report::default();
    let mut worst = 0.0f64;
    let mut used = 0;
    let mut seed = 0u64;
    while used < 100 {
        seed += 1;
        let n = 20 + (seed as usize * 7) % 41;
        if let Some(s) = positive_first_stage(sample(&random_design(seed, n))) {
            worst = worst.max(itt_residual(&s));
            used += 1;
        }
    }
    r.check(
        "100 random samples",
        worst < TOL_ITT,
        format!("max |lhs - rhs| = {worst:e}"),
    );
    let sim = simulate(&DgpConfig::new(0.0, 200_000, SEED))
        .unwrap()
        .sample;
    let sim = positive_first_stage(sim).unwrap();
    let w = itt_residual(&sim);
    r.check(
        "simulated n=200000",
        w < TOL_ITT,
        format!("max |lhs - rhs| = {w:e}"),
    );
    if let Some(path) = std::env::var_os("IVBOUNDS_CARD_CSV") {
        let cols = ColumnMap {
            y: "lwage".into(),
            d: "college".into(),
            z: "nearc4".into(),
        };
        let card = positive_first_stage(load_csv(path, &cols).unwrap()).unwrap();
        let w = itt_residual(&card);
        r.check(
            "schooling data",
            w < TOL_ITT,
            format!("max |lhs - rhs| = {w:e}"),
        );
    }
    r
}

/// Hand samples with eight rows per arm, so every share is dyadic.
fn dyadic_samples() -> Vec<Vec<Row>> {
    let arm = |z: u8, treated: &[f64], untreated: &[f64]| -> Vec<Row> {
        treated
            .iter()
            .map(|&y| (y, 1, z))
            .chain(untreated.iter().map(|&y| (y, 0, z)))
            .collect()
    };
    let join = |a: Vec<Row>, b: Vec<Row>| a.into_iter().chain(b).collect::<Vec<_>>();
    vec![
        join(
            arm(0, &[0., 1., 1.], &[0., 0., 1., 1., 0.]),
            arm(1, &[0., 1., 1., 1.], &[0., 0., 1., 0.]),
        ),
        join(
            arm(0, &[1., 1.], &[0., 0., 0., 1., 1., 0.]),
            arm(1, &[0., 1., 1., 1.], &[0., 0., 1., 0.]),
        ),
        join(
            arm(0, &[0., 0., 1., 1.], &[0., 1., 1., 1.]),
            arm(1, &[0., 1., 1., 1.], &[0., 0., 1., 1.]),
        ),
    ]
}

fn integer_samples() -> Vec<Vec<Row>> {
    let arm = |z: u8, treated: &[f64], untreated: &[f64]| -> Vec<Row> {
        treated
            .iter()
            .map(|&y| (y, 1, z))
            .chain(untreated.iter().map(|&y| (y, 0, z)))
            .collect()
    };
    let join = |a: Vec<Row>, b: Vec<Row>| a.into_iter().chain(b).collect::<Vec<_>>();
    vec![
        join(
            arm(0, &[2., 3., 4.], &[1., 1., 2., 3., 4.]),
            arm(1, &[1., 2., 3., 4.], &[1., 2., 3., 4.]),
        ),
        join(
            arm(0, &[2., 3.], &[1., 1., 2., 3., 4., 4.]),
            arm(1, &[1., 2., 3., 4.], &[1., 2., 4., 4.]),
        ),
        join(
            arm(0, &[1., 3., 5.], &[2., 2., 4., 5., 5.]),
            arm(1, &[1., 3., 3., 5.], &[2., 4., 5., 5.]),
        ),
    ]
}

fn is_power_of_two_fraction(x: f64) -> bool {
    x > 0.0 && (1.0 / x).fract() == 0.0 && ((1.0 / x) as u64).is_power_of_two()
}

fn criterion_7() -> Report {
    let mut r = Report::default();
    let settings = Settings::default();

    // (a) binary closed form against the general path
    let mut compared = 0;
    let mut identical = true;
    for rows in dyadic_samples() {
        let s = sample(&rows);
        let bin = binary_bounds(&s).unwrap();
        identical &= bin.pdf_bound == pdf_bounds(&s, BinRule::default()).unwrap();
        let ctx = A2Context::new(&s, &settings).unwrap();
        for k in 1..16 {
            let p_df = k as f64 / 16.0;
            let (Ok(general), true) = (
                mean_bounds_at(&ctx, p_df, MeanMethod::SharpEnvelope),
                is_power_of_two_fraction(share(&rows, 1, 0) - p_df)
                    && is_power_of_two_fraction(share(&rows, 0, 1) - p_df),
            ) else {
                continue;
            };
            identical &= general == bin.mean_bounds_at(p_df);
            compared += 1;
        }
    }
    r.check(
        "(a) binary closed form == general path",
        identical && compared > 0,
        format!("{compared} defier shares, bit-for-bit"),
    );

    // (b) indicator trimming estimators against the closed-form bounds
    let mut worst = 0.0f64;
    let mut count = 0;
    for seed in 0..40u64 {
        let mut g = common::rng(1000 + seed);
        let c11 = 4 + (seed % 5) as usize;
        let c10 = 1 + (seed % 3) as usize;
        let mut rows = Vec::new();
        for z in 0..2u8 {
            let treated = if z == 1 { c11 } else { c10 };
            for i in 0..10 {
                rows.push((common::normal(&mut g), (i < treated) as u8, z));
            }
        }
        let s = sample(&rows);
        let range = OutcomeRange {
            lo: -10.0,
            hi: 10.0,
        };
        let (Ok(t), Ok(c)) = (trimming_estimators(&s), direct_effect_bounds(&s, range)) else {
            continue;
        };
        let pairs = [
            (t.delta_1a, c.delta_1a_bounds),
            (t.delta_0n, c.delta_0n_bounds),
            (t.total_c, c.total_c_bounds),
        ];
        for (est, iv) in pairs {
            let (lo, hi) = iv.bounds().unwrap_or((f64::NAN, f64::NAN));
            worst = worst.max((est.0 - lo).abs()).max((est.1 - hi).abs());
        }
        count += 1;
    }
    r.check(
        "(b) trimming estimators == closed-form bounds",
        count > 0 && worst < TOL_TRIM,
        format!("{count} tie-free samples, max gap {worst:e}"),
    );

    // (c) envelope cdfs against the indicator formulas
    let mut atoms = 0;
    let mut worst = 0.0f64;
    for rows in dyadic_samples().into_iter().chain(integer_samples()) {
        let s = sample(&rows);
        let ctx = A2Context::new(&s, &settings).unwrap();
        let (ed0, eu1) = (share(&rows, 1, 0), share(&rows, 0, 1));
        let first = share(&rows, 1, 1) - ed0;
        for k in 1..16 {
            let p_df = k as f64 / 16.0;
            let Ok(db) = dist_bounds_at(&ctx, p_df) else {
                continue;
            };
            let (p_a, p_c, p_n) = (ed0 - p_df, first + p_df, eu1 - p_df);
            let f1c = db.complier_treated(&db.f1a_lb).unwrap();
            for &(y, _, _) in &rows {
                let (p10, p11) = (sub(&rows, y, 1, 0), sub(&rows, y, 1, 1));
                let (p00, p01) = (sub(&rows, y, 0, 0), sub(&rows, y, 0, 1));
                let a_lb = ((p10 - p_df) / p_a).max((p11 - p_c) / p_a).clamp(0.0, 1.0);
                let expected = [
                    (db.f1a_lb.eval(y), a_lb),
                    (
                        db.f1a_ub.eval(y),
                        (p10 / p_a).min(p11 / p_a).clamp(0.0, 1.0),
                    ),
                    (
                        db.f0n_lb.eval(y),
                        ((p00 - p_c) / p_n).max((p01 - p_df) / p_n).clamp(0.0, 1.0),
                    ),
                    (
                        db.f0n_ub.eval(y),
                        (p00 / p_n).min(p01 / p_n).clamp(0.0, 1.0),
                    ),
                    (f1c.eval(y), ((p11 - p_a * a_lb) / p_c).clamp(0.0, 1.0)),
                ];
                for (got, want) in expected {
                    worst = worst.max((got - want).abs());
                }
                atoms += 1;
            }
        }
    }
    r.check(
        "(c) envelopes == indicator formulas",
        atoms > 0 && worst <= 1e-15,
        format!("{atoms} atom evaluations, max gap {worst:e}"),
    );

    // (d) case 1.1 construction reproduces the data
    let mut built = 0;
    let mut worst = 0.0f64;
    for rows in dyadic_samples().into_iter().chain(integer_samples()) {
        let s = sample(&rows);
        let Ok(c) = mixture_oracle_without_defiers(&s, BinRule::default()) else {
            continue;
        };
        for &(y, _, _) in &rows {
            for d in 0..2u8 {
                for z in 0..2u8 {
                    worst = worst.max((c.mixture(y, d, z) - sub(&rows, y, d, z)).abs());
                }
            }
        }
        built += 1;
    }
    r.check(
        "(d) no-defier mixture reconstruction",
        built > 0 && worst < TOL_MIXTURE,
        format!("{built} constructions, max error {worst:e}"),
    );
    r
}

fn criterion_8() -> Report {
    let mut r = Report::default();
    let (_, c0) = imbens_manski_ci(0.3, 0.3, 1.0, 1.0, 400, 0.95).unwrap();
    r.near("c_bar, zero width", c0, Z_TWO_SIDED, TOL_CBAR);
    let (_, c_small) = imbens_manski_ci(0.3, 0.3 + 1e-12, 1.0, 1.0, 400, 0.95).unwrap();
    r.near("c_bar, width/sigma -> 0", c_small, Z_TWO_SIDED, TOL_CBAR);
    let (_, c_large) = imbens_manski_ci(0.0, 100.0, 1.0, 1.0, 400, 0.95).unwrap();
    r.near("c_bar, width/sigma -> inf", c_large, Z_ONE_SIDED, TOL_CBAR);
    let mut g = common::rng(8);
    let mut bad = 0;
    for _ in 0..10_000 {
        let lb = 4.0 * common::normal(&mut g);
        let ub = lb + common::uniform(&mut g).powi(3) * 5.0;
        let s_lb = common::uniform(&mut g) * 3.0;
        let s_ub = if common::uniform(&mut g) < 0.1 {
            0.0
        } else {
            common::uniform(&mut g) * 3.0
        };
        let n = 2 + (common::uniform(&mut g) * 10_000.0) as usize;
        let level = 0.5 + 0.49 * common::uniform(&mut g);
        let (ci, _) = imbens_manski_ci(lb, ub, s_lb, s_ub, n, level).unwrap();
        if !ci.bounds().is_some_and(|(lo, hi)| lo <= lb && hi >= ub) {
            bad += 1;
        }
    }
    r.check(
        "CI contains the bound estimate",
        bad == 0,
        format!("{bad} of 10000 draws violate"),
    );
    r
}

fn criterion_9() -> Report {
    let mut r = Report::default();
    let settings = Settings {
        grid_points: 21,
        ..Settings::default()
    };
    let mut runner = TestRunner::new(Config {
        cases: 64,
        failure_persistence: None,
        ..Config::default()
    });
    let mut branches = [0usize; 3];
    let outcome = runner.run(&(0u64..u64::MAX, 40usize..240), |(seed, n)| {
        let s = sample(&random_design(seed, n));
        let rb = robust_bound(&s, &settings).unwrap();
        let a1_empty = identified_set_a1(&s, &settings).unwrap().is_empty();
        let a2_empty = rb.a2.as_ref().is_some_and(|a| a.summary.is_empty());
        let fired = [
            !a1_empty && rb.active_menus == [Menu::A1],
            a1_empty && !a2_empty && rb.active_menus == [Menu::A2, Menu::A3],
            a1_empty && a2_empty && rb.active_menus == [Menu::A3],
        ];
        proptest::prop_assert_eq!(
            fired.iter().filter(|&&f| f).count(),
            1,
            "menus {:?}",
            rb.active_menus
        );
        proptest::prop_assert!(!rb.result.is_empty());
        let base = format!("{:?}", rb.result);
        let again = format!("{:?}", robust_bound(&s, &settings).unwrap().result);
        let one = par::with_threads(1, || {
            format!("{:?}", robust_bound(&s, &settings).unwrap().result)
        });
        let four = par::with_threads(4, || {
            format!("{:?}", robust_bound(&s, &settings).unwrap().result)
        });
        proptest::prop_assert_eq!(&base, &again);
        proptest::prop_assert_eq!(&base, &one);
        proptest::prop_assert_eq!(&base, &four);
        Ok(())
    });
    match outcome {
        Ok(()) => {
            for seed in 0..64u64 {
                let s = sample(&random_design(seed, 40 + (seed as usize % 200)));
                let rb = robust_bound(&s, &settings).unwrap();
                let k = match rb.active_menus.as_slice() {
                    [Menu::A1] => 0,
                    [Menu::A2, Menu::A3] => 1,
                    _ => 2,
                };
                branches[k] += 1;
            }
            r.check(
                "64 random designs",
                true,
                format!(
                    "one branch, nonempty, deterministic; branch mix A1/A2+A3/A3 = {branches:?}"
                ),
            );
        }
        Err(e) => r.check("64 random designs", false, e.to_string()),
    }
    r
}

fn criterion_10() -> Report {
    let mut r = Report::default();
    let reps = 500;
    let covered = par::map_indexed(reps, |i| {
        let s = sample(&er_true(5000, 10_000 + i as u64));
        let inf = a3_confidence_intervals(&s, 0.95).unwrap();
        inf.delta_0n.ci.contains(0.0)
    });
    let rate = covered.iter().filter(|&&c| c).count() as f64 / reps as f64;
    r.check(
        "coverage of delta_0n = 0",
        rate >= MIN_COVERAGE,
        format!("{rate:.3} over {reps} replications (need >= {MIN_COVERAGE})"),
    );
    r
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let titles = [
        "type shares, LATEs, first stage and IV estimand (rho = 0, n = 1e7)",
        "closed-form type shares against simulation",
        "LATE bands over the defier-share grid",
        "defier-share bounds with correlated costs (rho = 0.33)",
        "schooling data: shares, trimming bounds, intervals, menus",
        "ITT decomposition identity",
        "oracle equivalence suite",
        "Imbens-Manski critical-value limits",
        "branch logic of the robust bound",
        "coverage of Imbens-Manski intervals",
    ];
    let mut reports: Vec<(usize, Report)> = Vec::new();
    if run(1) || run(2) || run(3) {
        let l = large();
        for (k, f) in [
            (1, criterion_1 as fn(&Large) -> Report),
            (2, criterion_2),
            (3, criterion_3),
        ] {
            if run(k) {
                reports.push((k, f(&l)));
                print_report(k, titles[k - 1], &reports.last().unwrap().1);
            }
        }
    }
    let rest: [(usize, fn() -> Report); 7] = [
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    for (k, f) in rest {
        if run(k) {
            reports.push((k, f()));
            print_report(k, titles[k - 1], &reports.last().unwrap().1);
        }
    }
    let failed: Vec<usize> = reports
        .iter()
        .filter(|(_, r)| r.skipped.is_none() && !r.pass())
        .map(|(k, _)| *k)
        .collect();
    let skipped = reports.iter().filter(|(_, r)| r.skipped.is_some()).count();
    println!(
        "\nacceptance: {} passed, {} failed {:?}, {} skipped",
        reports.len() - failed.len() - skipped,
        failed.len(),
        failed,
        skipped
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn print_report(k: usize, title: &str, r: &Report) {
    let verdict = match (&r.skipped, r.pass()) {
        (Some(_), _) => "SKIP",
        (None, true) => "PASS",
        (None, false) => "FAIL",
    };
    println!("{verdict} criterion {k}: {title}");
    if let Some(why) = &r.skipped {
        println!("    {why}");
    }
    for l in &r.lines {
        println!("    [{}] {}", if l.ok { "ok" } else { "FAIL" }, l.text);
    }
}
