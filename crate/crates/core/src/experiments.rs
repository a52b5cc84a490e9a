//! Blowup criteria evaluated on initial data, rate fits near the blowup
//! time, the N_R scaling probe and growth-floor fits.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{mastercutoff_pair, CutoffKind};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::evolution::linear_fit;
use crate::field::Field;
use crate::groundstate::{BubbleReport, GroundState};
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "T1_1")]
    Supercritical,
    #[serde(rename = "T1_3")]
    MassCritical,
    #[serde(rename = "T1_4")]
    EnergyCritical,
}

impl Theorem {
    pub fn label(&self) -> &'static str {
        match self {
            Theorem::Supercritical => "T1_1",
            Theorem::MassCritical => "T1_3",
            Theorem::EnergyCritical => "T1_4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub theorem: Theorem,
    pub branch: String,
    pub satisfied: bool,
    /// Some product inequality holds with equality.
    pub boundary: bool,
    pub quantities: BTreeMap<String, f64>,
    pub kappa_used: Option<f64>,
    /// What the theorem predicts when satisfied.
    pub expected: String,
}

/// Relative tolerance under which two threshold quantities count as equal.
pub const BOUNDARY_TOL: f64 = 1e-9;

fn strictly_less(a: f64, b: f64) -> (bool, bool) {
    let tie = (a - b).abs() <= BOUNDARY_TOL * a.abs().max(b.abs());
    (a < b && !tie, tie)
}

struct DataQuantities {
    mass: f64,
    energy: f64,
    lap: f64,
}

fn data_quantities(u0: &Field, params: &Params) -> DataQuantities {
    let nrm = u0.norms();
    let energy = diagnostics::energy_from_norms(&nrm, diagnostics::potential_term(u0, params), params);
    DataQuantities { mass: nrm.l2 * nrm.l2, energy, lap: nrm.lap_l2 }
}

fn check_dim(u0: &Field, params: &Params) -> Result<()> {
    if u0.grid().dim() != params.d {
        return Err(Error::GridMismatch(format!("field in d = {} vs params d = {}", u0.grid().dim(), params.d)));
    }
    Ok(())
}

/// Branch (i) for mu != 0: E < 0 if mu > 0, E < -kappa mu^2 M if mu < 0.
fn mu_branch(
    theorem: Theorem,
    q: &DataQuantities,
    params: &Params,
    kappa: Option<f64>,
    mut quantities: BTreeMap<String, f64>,
) -> Result<CriterionVerdict> {
    let mu = params.mu;
    let (branch, threshold, kappa_used) = if mu > 0.0 {
        ("i:mu_positive", 0.0, None)
    } else {
        let k = kappa.ok_or_else(|| Error::MissingInput("kappa is required when mu < 0".into()))?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParams(format!("kappa must be positive, got {k}")));
        }
        ("i:mu_negative", -k * mu * mu * q.mass, Some(k))
    };
    quantities.insert("energy_threshold".into(), threshold);
    Ok(CriterionVerdict {
        theorem,
        branch: branch.into(),
        satisfied: q.energy < threshold,
        boundary: q.energy == threshold,
        quantities,
        kappa_used,
        expected: "finite_time_blowup".into(),
    })
}

pub fn criterion_supercritical(
    u0: &Field,
    params: &Params,
    q: Option<&GroundState>,
    kappa: Option<f64>,
) -> Result<CriterionVerdict> {
    check_dim(u0, params)?;
    let s_c = params.s_c;
    if !(s_c > 0.0 && s_c < 2.0) {
        return Err(Error::InvalidParams(format!("needs 0 < s_c < 2, got {s_c}")));
    }
    if params.sigma > 4.0 {
        return Err(Error::InvalidParams(format!("needs sigma <= 4, got {}", params.sigma)));
    }
    let data = data_quantities(u0, params);
    let mut quantities = BTreeMap::new();
    quantities.insert("energy".into(), data.energy);
    quantities.insert("mass".into(), data.mass);
    quantities.insert("lap_l2".into(), data.lap);
    if params.mu != 0.0 {
        return mu_branch(Theorem::Supercritical, &data, params, kappa, quantities);
    }
    if data.energy < 0.0 {
        return Ok(CriterionVerdict {
            theorem: Theorem::Supercritical,
            branch: "ii:negative_energy".into(),
            satisfied: true,
            boundary: false,
            quantities,
            kappa_used: None,
            expected: "finite_time_blowup".into(),
        });
    }
    let q = q.ok_or_else(|| Error::MissingInput("ground state needed for the threshold products".into()))?;
    let energy_product = data.energy.powf(s_c) * data.mass.powf(2.0 - s_c);
    let norm_product = data.lap.powf(s_c) * data.mass.sqrt().powf(2.0 - s_c);
    let q_energy_product = q.pohozaev.lambda;
    let q_norm_product = q.pohozaev.k_norms;
    let (energy_below, energy_tie) = strictly_less(energy_product, q_energy_product);
    let (norm_below, norm_tie) = strictly_less(norm_product, q_norm_product);
    let norm_above = !norm_below && !norm_tie;
    quantities.insert("energy_mass_product".into(), energy_product);
    quantities.insert("energy_mass_product_q".into(), q_energy_product);
    quantities.insert("norm_product".into(), norm_product);
    quantities.insert("norm_product_q".into(), q_norm_product);
    let boundary = energy_tie || norm_tie;
    let satisfied = energy_below && norm_above;
    let global_side = energy_below && norm_below;
    quantities.insert("global_existence_side".into(), if global_side { 1.0 } else { 0.0 });
    let branch = if boundary {
        "ii:boundary"
    } else if satisfied {
        "ii:threshold"
    } else if global_side {
        "ii:global_existence"
    } else {
        "ii:not_applicable"
    };
    Ok(CriterionVerdict {
        theorem: Theorem::Supercritical,
        branch: branch.into(),
        satisfied,
        boundary,
        quantities,
        kappa_used: None,
        expected: if satisfied {
            "finite_time_blowup".into()
        } else if global_side {
            "global_existence".into()
        } else {
            "undetermined".into()
        },
    })
}

pub fn criterion_masscritical(u0: &Field, params: &Params) -> Result<CriterionVerdict> {
    check_dim(u0, params)?;
    if params.s_c != 0.0 {
        return Err(Error::InvalidParams(format!("needs s_c = 0, got {}", params.s_c)));
    }
    if params.mu < 0.0 {
        return Err(Error::NotApplicable("the mass-critical criterion does not cover mu < 0".into()));
    }
    let data = data_quantities(u0, params);
    let mut quantities = BTreeMap::new();
    quantities.insert("energy".into(), data.energy);
    quantities.insert("mass".into(), data.mass);
    quantities.insert("lap_l2".into(), data.lap);
    let (branch, expected) = if params.mu > 0.0 {
        ("i:mu_positive", "finite_time_blowup")
    } else {
        ("ii:mu_zero", "finite_time_blowup_or_t2_growth")
    };
    Ok(CriterionVerdict {
        theorem: Theorem::MassCritical,
        branch: branch.into(),
        satisfied: data.energy < 0.0,
        boundary: data.energy == 0.0,
        quantities,
        kappa_used: None,
        expected: expected.into(),
    })
}

pub fn criterion_energycritical(
    u0: &Field,
    params: &Params,
    w: &BubbleReport,
    kappa: Option<f64>,
) -> Result<CriterionVerdict> {
    check_dim(u0, params)?;
    if params.d < 5 || params.s_c != 2.0 {
        return Err(Error::InvalidParams("needs d >= 5 and s_c = 2".into()));
    }
    let data = data_quantities(u0, params);
    let mut quantities = BTreeMap::new();
    quantities.insert("energy".into(), data.energy);
    quantities.insert("mass".into(), data.mass);
    quantities.insert("lap_l2".into(), data.lap);
    if params.mu != 0.0 {
        return mu_branch(Theorem::EnergyCritical, &data, params, kappa, quantities);
    }
    if data.energy < 0.0 {
        return Ok(CriterionVerdict {
            theorem: Theorem::EnergyCritical,
            branch: "ii:negative_energy".into(),
            satisfied: true,
            boundary: false,
            quantities,
            kappa_used: None,
            expected: "finite_time_blowup".into(),
        });
    }
    let w_lap = w.lap_sq.sqrt();
    quantities.insert("energy_w".into(), w.energy);
    quantities.insert("lap_l2_w".into(), w_lap);
    let (energy_below, energy_tie) = strictly_less(data.energy, w.energy);
    let (lap_below, lap_tie) = strictly_less(data.lap, w_lap);
    let boundary = energy_tie || lap_tie;
    let satisfied = energy_below && !lap_below && !lap_tie;
    let global_side = energy_below && lap_below;
    let branch = if boundary {
        "ii:boundary"
    } else if satisfied {
        "ii:threshold"
    } else if global_side {
        "ii:global_existence"
    } else {
        "ii:not_applicable"
    };
    Ok(CriterionVerdict {
        theorem: Theorem::EnergyCritical,
        branch: branch.into(),
        satisfied,
        boundary,
        quantities,
        kappa_used: None,
        expected: if satisfied {
            "finite_time_blowup".into()
        } else if global_side {
            "global_existence".into()
        } else {
            "undetermined".into()
        },
    })
}

/// alpha = (4 - sigma) / (sigma (d - 1)).
pub fn rate_alpha(params: &Params) -> f64 {
    params.alpha()
}

/// Whether (d, sigma) lies in the range where the rate bound is stated:
/// d >= 3, 0 < s_c < 2 and sigma < min(3/d + 1/2, 6/d).
pub fn rate_hypotheses_met(params: &Params) -> bool {
    let d = params.d as f64;
    params.d >= 3 && params.s_c > 0.0 && params.s_c < 2.0 && params.sigma < (3.0 / d + 0.5).min(6.0 / d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub t_blowup: f64,
    /// Fitted slope of log g against log(T - t).
    pub slope: f64,
    /// beta = s / (2 - s).
    pub beta_measured: f64,
    pub c_fit: f64,
    pub alpha: f64,
    /// Range of T - t used.
    pub window: (f64, f64),
    pub points: usize,
    pub r2: f64,
    pub hypotheses_met: bool,
}

impl RateFit {
    /// s >= 2 alpha / (1 + alpha) - tol.
    pub fn consistent(&self, tol: f64) -> bool {
        self.slope >= 2.0 * self.alpha / (1.0 + self.alpha) - tol
    }
}

/// Minimum number of records in the rate-fit window.
pub const RATE_MIN_POINTS: usize = 30;

/// g(t_i) = int_{t_i}^T (T - tau) y(tau) dtau for y = |Delta u|^2 given at
/// the record times, using power-law interpolation in T - tau between
/// records and the last interval's power law on [t_last, T).
pub fn rate_functional(t: &[f64], y: &[f64], big_t: f64) -> Result<Vec<f64>> {
    let n = t.len();
    if n < 2 || y.len() != n {
        return Err(Error::Fit("rate functional needs at least two samples".into()));
    }
    if t.iter().any(|s| *s >= big_t) {
        return Err(Error::Fit("samples must precede the blowup time".into()));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("|Delta u|^2 must be positive".into()));
    }
    let x: Vec<f64> = t.iter().map(|s| big_t - s).collect();
    // int_{x1}^{x0} x * A x^{-q} dx with y0 = A x0^{-q}, y1 = A x1^{-q}
    let piece = |x0: f64, y0: f64, x1: f64, y1: f64| -> f64 {
        let q = if (x0 / x1).ln().abs() > 0.0 { -(y0 / y1).ln() / (x0 / x1).ln() } else { 0.0 };
        let e = 2.0 - q;
        let a = y0 * x0.powf(q);
        if e.abs() < 1e-12 {
            a * (x0 / x1).ln()
        } else {
            a * (x0.powf(e) - x1.powf(e)) / e
        }
    };
    let q_last = -(y[n - 1] / y[n - 2]).ln() / (x[n - 1] / x[n - 2]).ln();
    if q_last >= 2.0 {
        return Err(Error::Fit(format!("terminal growth exponent {q_last:.3} makes g infinite")));
    }
    let tail = y[n - 1] * x[n - 1] * x[n - 1] / (2.0 - q_last);
    let mut g = vec![0.0; n];
    g[n - 1] = tail;
    for i in (0..n - 1).rev() {
        g[i] = g[i + 1] + piece(x[i], y[i], x[i + 1], y[i + 1]);
    }
    Ok(g)
}

/// Fits log g against log(T - t) over the final decade of T - t.
pub fn fit_rate(records: &[DiagnosticsRecord], big_t: f64, params: &Params) -> Result<RateFit> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let y: Vec<f64> = records.iter().map(|r| r.lap_l2 * r.lap_l2).collect();
    fit_rate_samples(&t, &y, big_t, params)
}

pub fn fit_rate_samples(t: &[f64], y: &[f64], big_t: f64, params: &Params) -> Result<RateFit> {
    let g = rate_functional(t, y, big_t)?;
    let x_min = big_t - t[t.len() - 1];
    let idx: Vec<usize> = (0..t.len()).filter(|&i| big_t - t[i] <= 10.0 * x_min).collect();
    if idx.len() < RATE_MIN_POINTS {
        return Err(Error::Fit(format!("{} records in the final decade, need {RATE_MIN_POINTS}", idx.len())));
    }
    if idx.windows(2).any(|w| g[w[1]] > g[w[0]]) {
        return Err(Error::Fit("g is not monotone on the fit window".into()));
    }
    let lx: Vec<f64> = idx.iter().map(|&i| (big_t - t[i]).ln()).collect();
    let lg: Vec<f64> = idx.iter().map(|&i| g[i].ln()).collect();
    let (slope, icpt, ss) = linear_fit(&lx, &lg);
    let mean = lg.iter().sum::<f64>() / lg.len() as f64;
    let tot: f64 = lg.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(RateFit {
        t_blowup: big_t,
        slope,
        beta_measured: slope / (2.0 - slope),
        c_fit: icpt.exp(),
        alpha: rate_alpha(params),
        window: (x_min, big_t - t[idx[0]]),
        points: idx.len(),
        r2: if tot > 0.0 { 1.0 - ss / tot } else { 0.0 },
        hypotheses_met: rate_hypotheses_met(params),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbe {
    pub a_emp: f64,
    pub b_emp: f64,
    pub delta: f64,
    /// -a + 2 b - delta.
    pub relation_defect: f64,
    pub samples: usize,
    pub r2: f64,
}

/// Mass-preserving rescaling lambda^{d/2} u(lambda x), evaluated through the
/// band-limited interpolant of u on the same grid.
pub fn rescale(u: &Field, lambda: f64) -> Result<Field> {
    let grid = u.grid().clone();
    let plan = grid.plan();
    let a = plan.to_coeffs(u.values());
    let amp = lambda.powf(grid.dim() as f64 / 2.0);
    let values: Vec<Complex64> = grid
        .nodes()
        .iter()
        .map(|&r| if lambda * r < grid.rmax() { plan.evaluate(&a, lambda * r) * amp } else { Complex64::new(0.0, 0.0) })
        .collect();
    Field::new(grid, values)
}

/// Regresses log |N_R[u_lambda]| on log R and log |Delta u_lambda| over the
/// product of the two ladders.
pub fn nr_scaling_probe(
    params: &Params,
    base: &Field,
    kind: CutoffKind,
    lambdas: &[f64],
    scales: &[f64],
) -> Result<ScalingProbe> {
    if params.d < 3 {
        return Err(Error::NotApplicable("N_R needs d >= 3".into()));
    }
    let distinct = |v: &[f64]| v.iter().any(|x| (x - v[0]).abs() > 1e-12 * v[0].abs());
    if lambdas.is_empty() || scales.is_empty() || !distinct(lambdas) || !distinct(scales) {
        return Err(Error::Fit("scaling probe needs at least two distinct lambdas and scales".into()));
    }
    let pairs: Vec<_> = scales
        .iter()
        .map(|&r| mastercutoff_pair(r, kind, base.grid()))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<[f64; 3]> = Vec::new();
    for &lam in lambdas {
        let u = rescale(base, lam)?;
        let lap = u.norms().lap_l2;
        for (pair, &r) in pairs.iter().zip(scales) {
            let n = diagnostics::commutator_nr(&u, pair, params)?;
            if n == 0.0 {
                return Err(Error::Fit("N_R vanishes; the probe needs data with a nontrivial phase".into()));
            }
            rows.push([r.ln(), lap.ln(), n.abs().ln()]);
        }
    }
    let (coef, r2) = least_squares_2(&rows)?;
    let delta = params.delta;
    Ok(ScalingProbe {
        a_emp: coef[1],
        b_emp: coef[2],
        delta,
        relation_defect: -coef[1] + 2.0 * coef[2] - delta,
        samples: rows.len(),
        r2,
    })
}

/// Least squares z = c0 + c1 x + c2 y; returns coefficients and R^2.
fn least_squares_2(rows: &[[f64; 3]]) -> Result<([f64; 3], f64)> {
    let n = rows.len() as f64;
    let mean = |k: usize| rows.iter().map(|r| r[k]).sum::<f64>() / n;
    let (mx, my, mz) = (mean(0), mean(1), mean(2));
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz, mut szz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for r in rows {
        let (x, y, z) = (r[0] - mx, r[1] - my, r[2] - mz);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxz += x * z;
        syz += y * z;
        szz += z * z;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() <= 1e-12 * (sxx * syy).max(1e-300) {
        return Err(Error::Fit("degenerate regression design".into()));
    }
    let c1 = (syy * sxz - sxy * syz) / det;
    let c2 = (sxx * syz - sxy * sxz) / det;
    let c0 = mz - c1 * mx - c2 * my;
    let ss_res: f64 = rows.iter().map(|r| (r[2] - c0 - c1 * r[0] - c2 * r[1]).powi(2)).sum();
    Ok(([c0, c1, c2], if szz > 0.0 { 1.0 - ss_res / szz } else { 1.0 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFloor {
    pub t0: f64,
    /// min over t >= t0 of |Delta u(t)| / t^2.
    pub c: f64,
    /// Fitted exponent of |Delta u| against t over t >= t0.
    pub exponent: f64,
}

/// Fits the floor |Delta u(t)| >= c t^2 on the second half of the records.
pub fn growth_floor(records: &[DiagnosticsRecord]) -> Result<GrowthFloor> {
    let last = records.last().ok_or_else(|| Error::MissingInput("no records".into()))?.t;
    let t0 = 0.5 * last;
    let tail: Vec<&DiagnosticsRecord> = records.iter().filter(|r| r.t >= t0 && r.t > 0.0).collect();
    if tail.len() < 4 {
        return Err(Error::Fit("growth floor needs at least 4 records after t0".into()));
    }
    let c = tail.iter().map(|r| r.lap_l2 / (r.t * r.t)).fold(f64::INFINITY, f64::min);
    let lx: Vec<f64> = tail.iter().map(|r| r.t.ln()).collect();
    let ly: Vec<f64> = tail.iter().map(|r| r.lap_l2.ln()).collect();
    let (exponent, _, _) = linear_fit(&lx, &ly);
    Ok(GrowthFloor { t0, c, exponent })
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub config_id: String,
    pub result: std::result::Result<crate::harness::RunArtifacts, String>,
}

/// Runs every configuration in parallel. Failures are kept per entry and the
/// output order follows the input order.
pub fn sweep(configs: &[crate::harness::RunConfig]) -> Vec<SweepEntry> {
    use rayon::prelude::*;
    configs
        .par_iter()
        .map(|cfg| SweepEntry {
            config_id: cfg.id.clone(),
            result: crate::harness::run_config(cfg).map_err(|e| e.to_string()),
        })
        .collect()
}

pub const VERDICT_COLUMNS: [&str; 8] =
    ["config_id", "theorem", "branch", "satisfied", "outcome", "T_estimate", "beta_measured", "alpha"];

/// The verdict table: one row per entry, failed runs with outcome "error".
pub fn verdict_table(entries: &[SweepEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(VERDICT_COLUMNS)?;
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in entries {
        match &e.result {
            Ok(art) => {
                let s = &art.summary;
                let (theorem, branch, satisfied) = match &s.criterion {
                    Some(c) => (c.theorem.label().to_string(), c.branch.clone(), c.satisfied.to_string()),
                    None => (String::new(), String::new(), String::new()),
                };
                let outcome = serde_json::to_value(s.verdict.outcome)?.as_str().unwrap_or_default().to_string();
                w.write_record([
                    e.config_id.clone(),
                    theorem,
                    branch,
                    satisfied,
                    outcome,
                    num(s.verdict.t_estimate),
                    num(s.rate_fit.as_ref().map(|f| f.beta_measured)),
                    s.params.alpha().to_string(),
                ])?;
            }
            Err(_) => {
                w.write_record([e.config_id.as_str(), "", "", "", "error", "", "", ""])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Schema(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::groundstate::{default_initial_guess, solve_q, PetviashviliOptions};
    use crate::params::make_params;

    fn ground(d: usize, sigma: f64) -> GroundState {
        let params = make_params(d, sigma, 0.0).unwrap();
        let grid = make_grid(d, 40.0, 256).unwrap();
        solve_q(&params, &default_initial_guess(grid), &PetviashviliOptions::default()).unwrap()
    }

    #[test]
    fn lambda_q_dichotomy() {
        let q = ground(3, 2.0);
        let params = q.params;
        let up = criterion_supercritical(&q.profile.scaled(1.2), &params, Some(&q), None).unwrap();
        assert!(up.satisfied, "{up:?}");
        let down = criterion_supercritical(&q.profile.scaled(0.8), &params, Some(&q), None).unwrap();
        assert!(!down.satisfied && down.branch == "ii:global_existence", "{down:?}");
        let at = criterion_supercritical(&q.profile, &params, Some(&q), None).unwrap();
        assert!(!at.satisfied && at.boundary && at.branch == "ii:boundary", "{at:?}");
    }

    #[test]
    fn kappa_required_for_negative_mu() {
        let q = ground(3, 2.0);
        let params = make_params(3, 2.0, -1.0).unwrap();
        let r = criterion_supercritical(&q.profile, &params, Some(&q), None);
        assert!(matches!(r, Err(Error::MissingInput(_))));
        let v = criterion_supercritical(&q.profile.scaled(1.5), &params, None, Some(0.1)).unwrap();
        assert_eq!(v.kappa_used, Some(0.1));
    }

    #[test]
    fn mass_critical_criterion() {
        let params = make_params(2, 2.0, 1.0).unwrap();
        let grid = make_grid(2, 30.0, 192).unwrap();
        let g = |a: f64| Field::from_real_fn(grid.clone(), move |r| a * (-r * r / 2.0).exp());
        assert!(criterion_masscritical(&g(3.0), &params).unwrap().satisfied);
        assert!(!criterion_masscritical(&g(0.5), &params).unwrap().satisfied);
        assert!(!criterion_masscritical(&Field::zeros(grid.clone()), &params).unwrap().satisfied);
        let neg = make_params(2, 2.0, -1.0).unwrap();
        assert!(criterion_masscritical(&g(3.0), &neg).is_err());
    }

    #[test]
    fn manufactured_rate() {
        let params = make_params(4, 1.2, 0.0).unwrap();
        assert!((rate_alpha(&params) - 0.7778).abs() < 1e-4);
        for gamma in [0.25, 0.5, 1.0, 1.5] {
            let big_t = 1.0;
            // geometric clustering toward T
            let t: Vec<f64> = (0..200).map(|i| big_t - 0.5 * 0.97f64.powi(i)).collect();
            let y: Vec<f64> = t.iter().map(|s| (big_t - s).powf(-gamma)).collect();
            let fit = fit_rate_samples(&t, &y, big_t, &params).unwrap();
            assert!((fit.slope - (2.0 - gamma)).abs() < 0.01 * (2.0 - gamma), "{gamma}: {fit:?}");
            let g = rate_functional(&t, &y, big_t).unwrap();
            let exact = (big_t - t[10]).powf(2.0 - gamma) / (2.0 - gamma);
            assert!((g[10] - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn empty_sweep() {
        let entries = sweep(&[]);
        assert!(entries.is_empty());
        assert_eq!(verdict_table(&entries).unwrap().trim(), VERDICT_COLUMNS.join(","));
    }

    #[test]
    fn probe_rejects_single_scale() {
        let params = make_params(3, 2.0, 0.0).unwrap();
        let grid = make_grid(3, 30.0, 128).unwrap();
        let u = Field::from_fn(grid, |r| Complex64::from_polar((-r * r / 4.0).exp(), 0.3 * r * r));
        assert!(nr_scaling_probe(&params, &u, CutoffKind::Generic, &[1.0], &[2.0]).is_err());
    }

    #[test]
    fn scaling_relation() {
        for (d, sigma) in [(3usize, 2.0), (5, 0.8)] {
            let params = make_params(d, sigma, 0.0).unwrap();
            let grid = make_grid(d, 60.0, 384).unwrap();
            let u = Field::from_fn(grid, |r| Complex64::from_polar(1.5 * (-r * r / 4.0).exp(), 0.2 * r * r));
            let ladder = [0.8, 0.9, 1.0, 1.1111111111111112, 1.25];
            let scales: Vec<f64> = ladder.iter().map(|l| 2.0 * l).collect();
            let p = nr_scaling_probe(&params, &u, CutoffKind::Generic, &ladder, &scales).unwrap();
            assert!(p.relation_defect.abs() < 0.1, "d={d}: {p:?}");
        }
    }
}
