//! Certification suite: each check evaluates one property against an
//! independent route and reports pass/fail with its margin.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{eta0, mastercutoff_pair, verify_cutoff, CutoffKind, CutoffProfile};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::Result;
use crate::evolution::{evolve, step_fixed, EvolutionOptions, Outcome};
use crate::experiments::{fit_rate, fit_rate_samples, growth_floor, nr_scaling_probe};
use crate::field::Field;
use crate::grid::make_grid;
use crate::groundstate::{bubble_report, default_initial_guess, fourier_rearrange, solve_q, PetviashviliOptions};
use crate::harness::drift_maxima;
use crate::params::{make_params, Params};
use crate::spectral::newton_potential_oracle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{:>2}] {}: {}", self.id, self.name, self.detail)
    }
}

fn conclude(id: usize, name: &str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { id, name: name.into(), passed, detail },
        Err(e) => Check { id, name: name.into(), passed: false, detail: format!("error: {e}") },
    }
}

fn weighted_rel(grid: &crate::grid::RadialGrid, a: &[Complex64], b: &[Complex64]) -> f64 {
    let w = grid.weights();
    let num: f64 = a.iter().zip(b).zip(w).map(|((x, y), w)| w * (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().zip(w).map(|(y, w)| w * y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// Forward/inverse identity on bandlimited fields and the spectral inverse
/// Laplacian against Newton's theorem.
pub fn transform_correctness(seed: u64) -> Check {
    conclude(1, "transform correctness", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst_id: f64 = 0.0;
        for d in [2usize, 3, 5, 7].iter().cycle().take(50) {
            let grid = make_grid(*d, 20.0, 128)?;
            let plan = grid.plan();
            let a: Vec<Complex64> = (0..grid.len())
                .map(|k| {
                    if k < grid.len() / 2 {
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (-(k as f64) / 16.0).exp()
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let u = plan.from_coeffs(&a);
            let back = plan.inverse(&plan.forward(&u));
            worst_id = worst_id.max(weighted_rel(&grid, &back, &u));
        }
        let mut worst_newton: f64 = 0.0;
        for d in [3usize, 5, 7].iter().cycle().take(50) {
            let grid = make_grid(*d, 20.0, 512)?;
            let a = rng.gen_range(2.0..5.0);
            let c: [f64; 3] = [rng.gen_range(0.5..1.5), rng.gen_range(-1.0..1.0), rng.gen_range(-0.3..0.3)];
            let f = Field::from_real_fn(grid.clone(), |r| {
                let x = r / a;
                (c[0] + c[1] * x * x + c[2] * x.powi(4)) * bump(x)
            });
            let spectral = grid.plan().free_space_invlap(f.values());
            let oracle = newton_potential_oracle(&f)?;
            worst_newton = worst_newton.max(weighted_rel(&grid, &spectral, &oracle));
        }
        Ok((
            worst_id <= 1e-10 && worst_newton <= 1e-6,
            format!("identity max rel {worst_id:.2e} (tol 1e-10), Newton max rel {worst_newton:.2e} (tol 1e-6)"),
        ))
    })())
}

pub fn ground_state_certification() -> Check {
    conclude(2, "ground-state certification", (|| {
        let mut worst = [0.0f64; 4];
        for (d, sigma) in [(2usize, 2.0), (3, 1.0), (3, 2.0), (4, 1.0), (5, 1.0)] {
            let params = make_params(d, sigma, 0.0)?;
            let grid = make_grid(d, 40.0, 256)?;
            let q = solve_q(&params, &default_initial_guess(grid), &PetviashviliOptions::default())?;
            let p = q.pohozaev;
            worst[0] = worst[0].max(q.residual);
            worst[1] = worst[1].max(p.potential_identity);
            worst[2] = worst[2].max(p.mass_identity);
            worst[3] = worst[3].max((p.k_norms - p.k_weinstein).abs() / p.k_norms);
        }
        Ok((
            worst[0] <= 1e-10 && worst[1] <= 1e-8 && worst[2] <= 1e-8 && worst[3] <= 1e-6,
            format!(
                "residual {:.2e}, identities {:.2e} / {:.2e}, K routes {:.2e}",
                worst[0], worst[1], worst[2], worst[3]
            ),
        ))
    })())
}

pub fn explicit_bubble() -> Check {
    conclude(3, "explicit bubble", (|| {
        let mut ok = true;
        let mut parts = Vec::new();
        for d in [5usize, 6, 8] {
            let grid = make_grid(d, 60.0, 512)?;
            let rep = bubble_report(d, grid)?;
            let df = d as f64;
            let closed = (df * (df - 4.0) * (df * df - 4.0)).powf((df - 4.0) / 8.0);
            let origin = (rep.value_at_origin - closed).abs() / closed;
            ok &= origin <= 1e-12 && rep.residual <= 1e-4 && rep.energy_identity <= 1e-4;
            parts.push(format!(
                "d={d}: W(0) err {origin:.1e}, residual {:.1e}, energy identity {:.1e}",
                rep.residual, rep.energy_identity
            ));
        }
        Ok((ok, parts.join("; ")))
    })())
}

pub fn rearrangement(seed: u64) -> Check {
    conclude(4, "Fourier rearrangement", (|| {
        let grid = make_grid(3, 20.0, 192)?;
        let plan = grid.plan();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut l2, mut hs, mut l4) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for _ in 0..100 {
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let k = rng.gen_range(0.5..3.0);
            let w = rng.gen_range(1.0..3.0);
            let u = Field::from_fn(grid.clone(), |r| {
                let e = (-r * r / (w * w)).exp();
                Complex64::new(c[0] + c[1] * (k * r).cos(), c[2] * r + c[3] * (k * r).sin()) * e
            });
            let v = fourier_rearrange(&u);
            let (a, b) = (plan.to_coeffs(u.values()), plan.to_coeffs(v.values()));
            let nu = plan.quadratic_form(&a, |_| 1.0).sqrt();
            let nv = plan.quadratic_form(&b, |_| 1.0).sqrt();
            l2 = l2.max((nu - nv).abs() / nu);
            for s in [0.5, 1.0, 2.0] {
                let su = plan.quadratic_form(&a, |p| p.powf(4.0 * s)).sqrt();
                let sv = plan.quadratic_form(&b, |p| p.powf(4.0 * s)).sqrt();
                hs = hs.max(sv - su);
            }
            l4 = l4.max(u.lp(4.0) - v.lp(4.0));
        }
        Ok((
            l2 <= 1e-10 && hs <= 1e-9 && l4 <= 1e-9,
            format!("L2 defect {l2:.2e}, max H^s increase {hs:.2e}, max L4 loss {l4:.2e}"),
        ))
    })())
}

pub fn cutoff_certification() -> Check {
    conclude(5, "cutoff certification", (|| {
        let mut min_margin = f64::INFINITY;
        let mut psi_err: f64 = 0.0;
        for kind in [CutoffKind::Generic, CutoffKind::AppendixB] {
            let end = CutoffProfile::new(kind)?.support_end();
            for scale in [1.0, 4.0, 16.0] {
                for d in [2usize, 3, 4, 5] {
                    let grid = make_grid(d, 1.5 * end * scale, 256)?;
                    let pair = mastercutoff_pair(scale, kind, &grid)?;
                    let rep = verify_cutoff(&pair)?;
                    min_margin = min_margin
                        .min(rep.min_hessian_margin)
                        .min(rep.min_slope_margin)
                        .min(rep.min_laplacian_margin)
                        .min(rep.min_phi);
                    let psi = pair.psi.as_ref().expect("mastercutoff pair carries psi");
                    for i in 0..pair.radii.len() {
                        let lhs = pair.phi[1][i];
                        let rhs = psi[2][i] * psi[1][i];
                        psi_err = psi_err.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
                    }
                }
            }
        }
        let mut eta = Vec::new();
        let mut eta_ok = true;
        let profile = CutoffProfile::new(CutoffKind::AppendixB)?;
        for d in [2usize, 3, 4] {
            let rep = eta0(&profile, d)?;
            eta_ok &= rep.eta0 > 0.0 && rep.min_slack > 0.0;
            eta.push(format!("d={d}: eta0 {:.3e} slack {:.3}", rep.eta0, rep.min_slack));
        }
        Ok((
            min_margin >= 0.0 && psi_err <= 1e-10 && eta_ok,
            format!("min margin {min_margin:.2e}, psi consistency {psi_err:.2e}, {}", eta.join(", ")),
        ))
    })())
}

pub fn conservation() -> Check {
    conclude(6, "conservation and soliton tracking", (|| {
        let mut worst: f64 = 0.0;
        for mu in [-1.0, 0.0, 1.0] {
            let params = make_params(3, 2.0, mu)?;
            let grid = make_grid(3, 30.0, 256)?;
            let pair = mastercutoff_pair(5.0, CutoffKind::Generic, &grid)?;
            let u0 = Field::from_real_fn(grid.clone(), |r| (-r * r / 4.0).exp());
            let opts = EvolutionOptions { horizon: 1.0, record_every: 0.1, ..Default::default() };
            let out = evolve(&u0, &params, &pair, &opts)?;
            if out.verdict.outcome != Outcome::BoundedOnHorizon {
                return Ok((false, format!("mu={mu}: {}", out.verdict.detail)));
            }
            let dm = drift_maxima(&out.records);
            worst = worst.max(dm.mass_rel).max(dm.energy_rel);
        }
        let params = make_params(3, 2.0, 0.0)?;
        let grid = make_grid(3, 40.0, 256)?;
        let q = solve_q(&params, &default_initial_guess(grid.clone()), &PetviashviliOptions::default())?;
        let pair = mastercutoff_pair(5.0, CutoffKind::Generic, &grid)?;
        let opts = EvolutionOptions { horizon: 1.0, record_every: 0.1, ..Default::default() };
        let out = evolve(&q.profile, &params, &pair, &opts)?;
        let phase = Complex64::from_polar(1.0, out.state.t);
        let expected = Field::new(grid, q.profile.values().iter().map(|v| v * phase).collect())?;
        let track = out.state.u.distance(&expected)? / q.profile.mass().sqrt();
        Ok((
            worst <= 1e-8 && track <= 1e-6,
            format!("max drift {worst:.2e} (tol 1e-8), soliton L2 error {track:.2e} (tol 1e-6)"),
        ))
    })())
}

/// Mass fraction leakage beyond which the free law is no longer compared.
pub const FREE_LEAKAGE: f64 = 1e-4;

pub fn free_flow_bivariance() -> Check {
    conclude(7, "free-flow bivariance law", (|| {
        let scale = 10.0;
        let params = make_params(3, 2.0, 0.0)?;
        let grid = make_grid(3, 60.0, 512)?;
        let pair = mastercutoff_pair(scale, CutoffKind::Generic, &grid)?;
        let u0 = Field::from_real_fn(grid.clone(), |r| (-r * r).exp());
        let opts = EvolutionOptions { horizon: 0.05, record_every: 0.0025, coupling: 0.0, ..Default::default() };
        let out = evolve(&u0, &params, &pair, &opts)?;
        let mut worst: f64 = 0.0;
        let mut compared = 0;
        for rec in &out.records {
            // the free flow is exact in one exponential step
            let u = if rec.t > 0.0 { step_fixed(&u0, &params, rec.t, 0.0)? } else { u0.clone() };
            let w = grid.weights();
            let total: f64 = u.values().iter().zip(w).map(|(v, w)| w * v.norm_sqr()).sum();
            let outside: f64 = u
                .values()
                .iter()
                .zip(w)
                .zip(grid.nodes())
                .filter(|(_, r)| **r > scale)
                .map(|((v, w), _)| w * v.norm_sqr())
                .sum();
            if outside / total > FREE_LEAKAGE {
                break;
            }
            let pred = diagnostics::free_bivariance_prediction(&u0, &pair, rec.t)?;
            let v = rec.v_r.expect("d = 3 records carry V_R");
            worst = worst.max((v - pred).abs() / pred);
            compared += 1;
        }
        Ok((
            compared >= 5 && worst <= 1e-3,
            format!("{compared} records inside R, max rel deviation {worst:.2e} (tol 1e-3)"),
        ))
    })())
}

pub fn virial_direction() -> Check {
    conclude(8, "virial law direction", (|| {
        let runs: [(usize, f64, f64, f64, f64); 5] = [
            (3, 2.0, -1.0, 1.0, 2.0),
            (3, 2.0, -0.5, 1.5, 1.0),
            (3, 2.0, 0.5, 1.2, 1.5),
            (3, 1.0, 1.0, 2.0, 1.0),
            (2, 2.0, -1.0, 1.0, 1.5),
        ];
        let mut violations = 0;
        let mut checked = 0;
        let mut min_gap = f64::INFINITY;
        for (d, sigma, mu, amp, width) in runs {
            let params = make_params(d, sigma, mu)?;
            let grid = make_grid(d, 30.0, 256)?;
            let pair = mastercutoff_pair(4.0, CutoffKind::Generic, &grid)?;
            let mut u = Field::from_fn(grid.clone(), |r| Complex64::from_polar(amp * (-(r / width).powi(2)).exp(), 0.1 * r * r));
            for _ in 0..=40 {
                let rate = diagnostics::virial_rate(&u, &pair, &params, 1.0)?;
                let rhs = diagnostics::virial_rhs(&u, &pair, &params, diagnostics::energy(&u, &params))?;
                let bound = rhs.bound();
                let gap = bound - rate;
                min_gap = min_gap.min(gap / (1.0 + bound.abs()));
                if gap < -1e-10 * (1.0 + bound.abs()) {
                    violations += 1;
                }
                checked += 1;
                u = step_fixed(&u, &params, 2.5e-3, 1.0)?;
            }
        }
        Ok((violations == 0, format!("{violations} violations over {checked} instants, min relative gap {min_gap:.2e}")))
    })())
}

/// Records and blowup time of the supercritical 1.2 Q run, kept for the rate check.
#[derive(Debug, Clone)]
pub struct BlowupRun {
    pub params: Params,
    pub records: Vec<DiagnosticsRecord>,
    pub t_blowup: f64,
}

pub fn blowup_options(horizon: f64) -> EvolutionOptions {
    EvolutionOptions {
        horizon,
        record_every: 0.05,
        error_tol: 1e-8,
        drift_tol: 1e-9,
        tail_tol: 1e-6,
        ..Default::default()
    }
}

pub fn blowup_dichotomy() -> (Check, Option<BlowupRun>) {
    let mut run = None;
    let check = conclude(9, "blowup dichotomy at lambda Q", (|| {
        let params = make_params(3, 2.0, 0.0)?;
        let coarse = make_grid(3, 40.0, 512)?;
        let q = solve_q(&params, &default_initial_guess(coarse.clone()), &PetviashviliOptions::default())?;
        let pair = mastercutoff_pair(5.0, CutoffKind::Generic, &coarse)?;
        let below = evolve(&q.profile.scaled(0.8), &params, &pair, &blowup_options(2.0))?;
        let ratio = drift_maxima(&below.records).lap_ratio;
        let bounded = below.verdict.outcome == Outcome::BoundedOnHorizon && ratio <= 2.0;

        let fine = make_grid(3, 40.0, 1024)?;
        let q = solve_q(&params, &default_initial_guess(fine.clone()), &PetviashviliOptions::default())?;
        let pair = mastercutoff_pair(5.0, CutoffKind::Generic, &fine)?;
        let above = evolve(&q.profile.scaled(1.2), &params, &pair, &blowup_options(10.0))?;
        let detected = above.verdict.outcome == Outcome::BlowupDetected;
        let t = above.verdict.t_estimate;
        if let (true, Some(t)) = (detected, t) {
            run = Some(BlowupRun { params, records: above.records.clone(), t_blowup: t });
        }
        Ok((
            bounded && detected,
            format!(
                "0.8Q: {:?}, sup |Delta u| ratio {ratio:.3}; 1.2Q: {:?}, T = {}, p = {}",
                below.verdict.outcome,
                above.verdict.outcome,
                t.map_or("none".into(), |t| format!("{t:.6}")),
                above.verdict.growth_exponent.map_or("none".into(), |p| format!("{p:.4}")),
            ),
        ))
    })());
    (check, run)
}

pub fn rate_consistency(run: Option<&BlowupRun>) -> Check {
    conclude(10, "rate-fit consistency", (|| {
        let mut manufactured: f64 = 0.0;
        let probe = make_params(4, 1.2, 0.0)?;
        for gamma in [0.25, 0.5, 1.0, 1.5] {
            let t: Vec<f64> = (0..200).map(|i| 1.0 - 0.5 * 0.97f64.powi(i)).collect();
            let y: Vec<f64> = t.iter().map(|s| (1.0 - s).powf(-gamma)).collect();
            let fit = fit_rate_samples(&t, &y, 1.0, &probe)?;
            manufactured = manufactured.max((fit.slope - (2.0 - gamma)).abs() / (2.0 - gamma));
        }
        let Some(run) = run else {
            return Ok((false, format!("no detected blowup run to fit; manufactured max rel error {manufactured:.2e}")));
        };
        let fit = fit_rate(&run.records, run.t_blowup, &run.params)?;
        let floor = 2.0 * fit.alpha / (1.0 + fit.alpha);
        Ok((
            manufactured <= 0.01 && fit.consistent(0.1),
            format!(
                "slope {:.4} vs floor {floor:.4} - 0.1 over {} records (beta {:.4}, alpha {:.4}, hypotheses {}); manufactured max rel error {manufactured:.2e}",
                fit.slope,
                fit.points,
                fit.beta_measured,
                fit.alpha,
                if fit.hypotheses_met { "met" } else { "not met" },
            ),
        ))
    })())
}

pub fn nr_scaling() -> Check {
    conclude(11, "N_R scaling", (|| {
        let mut ok = true;
        let mut parts = Vec::new();
        let ladder = [0.8, 0.9, 1.0, 1.0 / 0.9, 1.25];
        for (d, sigma) in [(3usize, 2.0), (5, 0.8)] {
            let params = make_params(d, sigma, 0.0)?;
            let grid = make_grid(d, 60.0, 384)?;
            let u = Field::from_fn(grid.clone(), |r| Complex64::from_polar(1.5 * (-r * r / 4.0).exp(), 0.2 * r * r));
            let scales: Vec<f64> = ladder.iter().map(|l| 2.0 * l).collect();
            let p = nr_scaling_probe(&params, &u, CutoffKind::Generic, &ladder, &scales)?;
            let real = Field::from_real_fn(grid.clone(), |r| 1.5 * (-r * r / 4.0).exp());
            let pair = mastercutoff_pair(2.0, CutoffKind::Generic, &grid)?;
            let nr_real = diagnostics::commutator_nr(&real, &pair, &params)?;
            ok &= p.relation_defect.abs() <= 0.1 && nr_real == 0.0;
            parts.push(format!(
                "d={d}: a {:.3}, b {:.3}, -a+2b-delta {:.2e}, real N_R {nr_real:e}",
                p.a_emp, p.b_emp, p.relation_defect
            ));
        }
        Ok((ok, parts.join("; ")))
    })())
}

pub fn mass_critical_blowup() -> Check {
    conclude(12, "mass-critical blowup", (|| {
        let grid = make_grid(2, 10.0, 768)?;
        let pair = mastercutoff_pair(5.0, CutoffKind::Generic, &grid)?;
        let u0 = Field::from_real_fn(grid.clone(), |r| 4.0 * (-r * r).exp());
        let mut parts = Vec::new();
        let mut ok = true;
        for mu in [1.0, 0.0] {
            let params = make_params(2, 2.0, mu)?;
            let e0 = diagnostics::energy(&u0, &params);
            let out = evolve(&u0, &params, &pair, &blowup_options(5.0))?;
            let detected = out.verdict.outcome == Outcome::BlowupDetected;
            if mu > 0.0 {
                ok &= e0 < 0.0 && detected;
                parts.push(format!("mu=1: E0 {e0:.2}, {:?}, T {:?}", out.verdict.outcome, out.verdict.t_estimate));
            } else if detected {
                ok &= e0 < 0.0;
                parts.push(format!("mu=0: E0 {e0:.2}, detected at T {:?}", out.verdict.t_estimate));
            } else {
                let floor = growth_floor(&out.records)?;
                ok &= e0 < 0.0 && floor.c > 0.0;
                parts.push(format!("mu=0: E0 {e0:.2}, growth floor c {:.3e} from t0 {:.3}", floor.c, floor.t0));
            }
        }
        Ok((ok, parts.join("; ")))
    })())
}

/// The checks that need no long evolutions.
pub fn quick_suite(seed: u64) -> Vec<Check> {
    vec![
        transform_correctness(seed),
        ground_state_certification(),
        explicit_bubble(),
        rearrangement(seed),
        cutoff_certification(),
        free_flow_bivariance(),
        virial_direction(),
        nr_scaling(),
    ]
}

/// All checks in order.
pub fn full_suite(seed: u64) -> Vec<Check> {
    let mut out = vec![
        transform_correctness(seed),
        ground_state_certification(),
        explicit_bubble(),
        rearrangement(seed),
        cutoff_certification(),
        conservation(),
        free_flow_bivariance(),
        virial_direction(),
    ];
    let (dichotomy, run) = blowup_dichotomy();
    out.push(dichotomy);
    out.push(rate_consistency(run.as_ref()));
    out.push(nr_scaling());
    out.push(mass_critical_blowup());
    out
}
