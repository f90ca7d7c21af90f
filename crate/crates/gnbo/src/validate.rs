//! Property sweeps validating the closed-form acquisition against its Monte
//! Carlo oracles: the orthant equivalence, the positive-part lemma, the
//! lower bound on the auxiliary improvement, and the stationarity-event
//! bound. The CLI `validate` subcommand and the acceptance suite both run
//! these.

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::acquisition::{
    ei_s_bar, event_bound_check, mc_ei_g, mc_ei_s, mc_ei_s_orthant, EventSpec, Incumbent,
};
use crate::gradient::PosteriorGradient;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Random posterior-gradient configuration: per-coordinate mean and incumbent
/// gradient from N(0, 2^2), variances from U(0.1, 4).
fn random_config(d: usize, rng: &mut ChaCha8Rng) -> (PosteriorGradient, Array1<f64>) {
    let mean = Array1::from_shape_fn(d, |_| {
        let z: f64 = StandardNormal.sample(rng);
        2.0 * z
    });
    let var = Array1::from_shape_fn(d, |_| 0.1 + 3.9 * rng.random::<f64>());
    let grad_plus = Array1::from_shape_fn(d, |_| {
        let z: f64 = StandardNormal.sample(rng);
        2.0 * z
    });
    (PosteriorGradient { mean, var_diag: var }, grad_plus)
}

/// Closed form vs the orthant Monte Carlo oracle over random configurations
/// with d in 1..=10, plus the two analytic anchor cases.
pub fn closed_form_sweep(cases: usize, mc_n: usize, seed: u64, min_pass: usize) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pass = 0usize;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let d = 1 + case % 10;
        let (pg, gp) = random_config(d, &mut rng);
        let closed = ei_s_bar(&pg, &gp).expect("positive variances");
        let (mc, se) = mc_ei_s_orthant(&pg, &gp, mc_n, seed ^ (case as u64) << 1);
        let z = if se > 0.0 { (closed - mc).abs() / se } else { f64::INFINITY * 0.0 };
        if (closed - mc).abs() <= 3.0 * se || closed == mc {
            pass += 1;
        }
        worst = worst.max(z);
    }
    let mut checks = vec![Check::new(
        "ei_s_bar_vs_orthant_mc",
        pass >= min_pass,
        format!("{pass}/{cases} within 3 MC standard errors (worst z = {worst:.2})"),
    )];

    // analytic anchors: d=1 -> 1/2, d=3 -> 3 (1/2)^3
    let one = ei_s_bar(
        &PosteriorGradient { mean: Array1::zeros(1), var_diag: Array1::ones(1) },
        &Array1::zeros(1),
    )
    .unwrap();
    checks.push(Check::new(
        "analytic_d1",
        (one - 0.5).abs() <= 1e-3,
        format!("value {one} vs 0.5"),
    ));
    let three = ei_s_bar(
        &PosteriorGradient { mean: Array1::zeros(3), var_diag: Array1::ones(3) },
        &Array1::zeros(3),
    )
    .unwrap();
    checks.push(Check::new(
        "analytic_d3",
        (three - 0.375).abs() <= 1e-3,
        format!("value {three} vs 0.375"),
    ));
    Report { checks }
}

/// Positive Part Inequality, exact, over random pairs spanning all four sign
/// quadrants.
pub fn lemma_sweep(n: usize, seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    for i in 0..n {
        // force quadrant coverage: signs cycle through ++, +-, -+, --
        let sa = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let sb = if i % 2 == 0 { 1.0 } else { -1.0 };
        let a = sa * rng.random::<f64>() * 1e3;
        let b = sb * rng.random::<f64>() * 1e3;
        if (a - b).max(0.0) < a.max(0.0) - b.max(0.0) {
            violations += 1;
        }
    }
    Report {
        checks: vec![Check::new(
            "positive_part_inequality",
            violations == 0,
            format!("{violations} violations in {n} pairs"),
        )],
    }
}

/// Monte Carlo oracle for EI on the objective alone.
fn mc_ei_f(mu: f64, sigma: f64, best: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = (mu + sigma * z - best).max(0.0);
        sum += v;
        sumsq += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean * mean).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Lower bound `EI_g >= EI_f - alpha EI_s` via three Monte Carlo estimates
/// with a 4-combined-standard-error slack.
pub fn lower_bound_sweep(cases: usize, mc_n: usize, alpha: f64, seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holds = 0usize;
    let mut worst_margin = f64::INFINITY;
    for case in 0..cases {
        let d = 1 + case % 5;
        let (pg, gp) = random_config(d, &mut rng);
        let mu_f = 2.0 * {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        };
        let sigma_f = 0.1 + 1.9 * rng.random::<f64>();
        let f_plus = 2.0 * {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        };
        let inc = Incumbent::new(Array1::zeros(d), f_plus, gp.clone(), alpha);
        let base = seed ^ ((case as u64) << 2);
        let (g_est, g_se) = mc_ei_g((mu_f, sigma_f), &pg, &inc, alpha, mc_n, base);
        let (f_est, f_se) = mc_ei_f(mu_f, sigma_f, f_plus, mc_n, base ^ 1);
        let (s_est, s_se) = mc_ei_s(&pg, &gp, mc_n, base ^ 2);
        let combined =
            (g_se * g_se + f_se * f_se + alpha * alpha * s_se * s_se).sqrt();
        let margin = g_est - (f_est - alpha * s_est) + 4.0 * combined;
        if margin >= 0.0 {
            holds += 1;
        }
        worst_margin = worst_margin.min(margin);
    }
    Report {
        checks: vec![Check::new(
            "ei_g_lower_bound",
            holds == cases,
            format!("{holds}/{cases} hold (worst slack-adjusted margin {worst_margin:.3e})"),
        )],
    }
}

/// Stationarity-event bound `EI_g >= alpha (1-c) delta P(E)` across a grid of
/// margins and tolerated fractions.
pub fn event_bound_sweep(cases: usize, mc_n: usize, alpha: f64, seed: u64) -> Report {
    let deltas = [0.1, 1.0];
    let cs = [0.25, 0.5, 0.75];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holds = 0usize;
    for case in 0..cases {
        let d = 1 + case % 5;
        let (pg, gp) = random_config(d, &mut rng);
        let mu_f = 2.0 * {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        };
        let sigma_f = 0.1 + 1.9 * rng.random::<f64>();
        let f_plus = 2.0 * {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        };
        let inc = Incumbent::new(Array1::zeros(d), f_plus, gp, alpha);
        let spec = EventSpec { delta: deltas[case % 2], c: cs[case % 3] };
        let rep = event_bound_check(
            (mu_f, sigma_f),
            &pg,
            &inc,
            alpha,
            &spec,
            mc_n,
            seed ^ ((case as u64) << 3),
        );
        if rep.holds {
            holds += 1;
        }
    }
    Report {
        checks: vec![Check::new(
            "event_bound",
            holds == cases,
            format!("{holds}/{cases} hold"),
        )],
    }
}
