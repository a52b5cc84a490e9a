//! Exponential time differencing (ETDRK4) for the radial flow, with
//! adaptive steps, conservation monitoring and blowup detection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::CutoffPair;
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupOptions {
    /// Detection is attempted once |Delta u| exceeds this multiple of its initial value.
    pub amplification: f64,
    /// Fitted blowup times over shifted windows must agree to this relative tolerance.
    pub t_stability: f64,
    /// Minimum number of records in the fit window.
    pub window: usize,
    /// Minimum coefficient of determination of the log-log fit.
    pub min_r2: f64,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        BlowupOptions { amplification: 20.0, t_stability: 0.01, window: 8, min_r2: 0.995 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionOptions {
    pub horizon: f64,
    pub record_every: f64,
    pub dt_initial: f64,
    pub dt_max: f64,
    /// Steps below this are treated as resolution exhaustion.
    pub dt_min: f64,
    /// Relative tolerance of the embedded local error estimate.
    pub error_tol: f64,
    /// Relative tolerance on the change of mass and energy in one step.
    pub drift_tol: f64,
    /// Records are also written when |Delta u| grew by this factor since the last one.
    pub growth_record: f64,
    /// Largest admissible fraction of |Delta u|^2 carried by the top quarter of the band.
    pub tail_tol: f64,
    /// Coefficient of the nonlinearity: 1 for the focusing flow, 0 for the free flow.
    pub coupling: f64,
    pub max_steps: usize,
    pub blowup: BlowupOptions,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        EvolutionOptions {
            horizon: 1.0,
            record_every: 0.05,
            dt_initial: 1e-3,
            dt_max: 0.02,
            dt_min: 1e-12,
            error_tol: 1e-10,
            drift_tol: 1e-11,
            growth_record: 1.02,
            tail_tol: 1e-8,
            coupling: 1.0,
            max_steps: 2_000_000,
            blowup: BlowupOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Drift {
    pub mass_rel: f64,
    pub energy_rel: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    pub u: Field,
    pub dt: f64,
    pub step_count: usize,
    pub rejected: usize,
    pub drift: Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    BlowupDetected,
    BoundedOnHorizon,
    ResolutionExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupVerdict {
    pub outcome: Outcome,
    pub t_estimate: Option<f64>,
    pub growth_exponent: Option<f64>,
    pub detail: String,
}

impl BlowupVerdict {
    fn plain(outcome: Outcome, detail: impl Into<String>) -> BlowupVerdict {
        BlowupVerdict { outcome, t_estimate: None, growth_exponent: None, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub verdict: BlowupVerdict,
    pub state: EvolutionState,
}

/// phi_1, phi_2, phi_3 at z.
pub fn phi_functions(z: Complex64) -> [Complex64; 3] {
    if z.norm() < 1.0 {
        // phi_k(z) = sum_m z^m / (m + k)!
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0 / factorial(k + 1), 0.0);
            let mut sum = term;
            for m in 1..30 {
                term *= z / (m + k + 1) as f64;
                sum += term;
                if term.norm() < 1e-18 {
                    break;
                }
            }
            *slot = sum;
        }
        out
    } else {
        let p0 = z.exp();
        let p1 = (p0 - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p1, p2, p3]
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, i| a * i as f64)
}

/// ETDRK4 coefficients for one step size.
struct Coefficients {
    h: f64,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
    g1: Vec<Complex64>,
}

impl Coefficients {
    fn new(lin: &[Complex64], h: f64) -> Coefficients {
        let n = lin.len();
        let mut c = Coefficients {
            h,
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
            g1: Vec::with_capacity(n),
        };
        for &l in lin {
            let z = l * h;
            let [p1, p2, p3] = phi_functions(z);
            let [q1, _, _] = phi_functions(z * 0.5);
            c.e.push(z.exp());
            c.e2.push((z * 0.5).exp());
            c.q.push(q1 * (0.5 * h));
            c.f1.push((p1 - p2 * 3.0 + p3 * 4.0) * h);
            c.f2.push((p2 - p3 * 2.0) * h);
            c.f3.push((-p2 + p3 * 4.0) * h);
            c.g1.push(p1 * h);
        }
        c
    }
}

/// The flow in coefficient space: a_t = L a + N(a).
struct Flow<'a> {
    u: &'a Field,
    lin: Vec<Complex64>,
    sigma: f64,
    coupling: f64,
}

impl Flow<'_> {
    fn nodal(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.u.grid().plan().from_coeffs(a)
    }

    fn nonlinear(&self, nodal: &[Complex64]) -> Vec<Complex64> {
        let i = Complex64::new(0.0, self.coupling);
        let nl: Vec<Complex64> = nodal.iter().map(|v| i * v * v.norm().powf(2.0 * self.sigma)).collect();
        self.u.grid().plan().to_coeffs(&nl)
    }

    /// One ETDRK4 step; returns the new coefficients and the difference to
    /// the embedded exponential midpoint step.
    fn step(&self, a: &[Complex64], na: &[Complex64], c: &Coefficients) -> (Vec<Complex64>, f64) {
        let n = a.len();
        let mut sa = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            sa[k] = c.e2[k] * a[k] + c.q[k] * na[k];
        }
        let nb = self.nonlinear(&self.nodal(&sa));
        let mut sb = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            sb[k] = c.e2[k] * a[k] + c.q[k] * nb[k];
        }
        let nc = self.nonlinear(&self.nodal(&sb));
        let mut sc = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            sc[k] = c.e2[k] * sa[k] + c.q[k] * (nc[k] * 2.0 - na[k]);
        }
        let nd = self.nonlinear(&self.nodal(&sc));
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        let mut diff = 0.0;
        let mut norm = 0.0;
        for k in 0..n {
            let base = c.e[k] * a[k];
            out[k] = base + c.f1[k] * na[k] + c.f2[k] * (nb[k] + nc[k]) * 2.0 + c.f3[k] * nd[k];
            let low = base + c.g1[k] * nb[k];
            diff += (out[k] - low).norm_sqr();
            norm += out[k].norm_sqr();
        }
        (out, (diff / norm.max(1e-300)).sqrt())
    }
}

struct Invariants {
    mass: f64,
    energy: f64,
    lap_sq: f64,
}

fn invariants(u: &Field, a: &[Complex64], nodal: &[Complex64], params: &Params, coupling: f64) -> Invariants {
    let plan = u.grid().plan();
    let mass = plan.quadratic_form(a, |_| 1.0);
    let grad = plan.quadratic_form(a, |p| p * p);
    let lap_sq = plan.quadratic_form(a, |p| p.powi(4));
    let p = params.power();
    let w = u.grid().weights();
    let pot: f64 = nodal.iter().zip(w).map(|(v, w)| w * v.norm().powf(p)).sum();
    Invariants { mass, energy: 0.5 * lap_sq + 0.5 * params.mu * grad - coupling * pot / p, lap_sq }
}

/// Fraction of |Delta u|^2 carried by the top quarter of the frequency band.
pub fn spectral_tail_fraction(u: &Field) -> f64 {
    let plan = u.grid().plan();
    let a = plan.to_coeffs(u.values());
    tail_fraction(&a, plan.rho())
}

fn tail_fraction(a: &[Complex64], rho: &[f64]) -> f64 {
    let n = a.len();
    let cut = 3 * n / 4;
    let mut total = 0.0;
    let mut tail = 0.0;
    for k in 0..n {
        let e = a[k].norm_sqr() * rho[k].powi(4);
        total += e;
        if k >= cut {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

fn linear_symbol(u: &Field, params: &Params) -> Vec<Complex64> {
    u.grid().plan().rho().iter().map(|p| Complex64::new(0.0, -(p.powi(4) + params.mu * p * p))).collect()
}

/// Advances u0 by exactly `h` with a single ETDRK4 step, without adaptivity.
pub fn step_fixed(u0: &Field, params: &Params, h: f64, coupling: f64) -> Result<Field> {
    let flow = Flow { u: u0, lin: linear_symbol(u0, params), sigma: params.sigma, coupling };
    let plan = u0.grid().plan();
    let a = plan.to_coeffs(u0.values());
    let na = flow.nonlinear(u0.values());
    let c = Coefficients::new(&flow.lin, h);
    let (out, _) = flow.step(&a, &na, &c);
    Field::new(u0.grid().clone(), plan.from_coeffs(&out))
}

/// Evolves u0 with diagnostics recorded against `pair`.
pub fn evolve(u0: &Field, params: &Params, pair: &CutoffPair, opts: &EvolutionOptions) -> Result<EvolutionOutput> {
    evolve_with(u0, params, pair, opts, |_| {})
}

/// As `evolve`, handing each record to `sink` as soon as it is produced.
pub fn evolve_with(
    u0: &Field,
    params: &Params,
    pair: &CutoffPair,
    opts: &EvolutionOptions,
    mut sink: impl FnMut(&DiagnosticsRecord),
) -> Result<EvolutionOutput> {
    if u0.grid().dim() != params.d {
        return Err(Error::GridMismatch(format!("grid dimension {} vs d = {}", u0.grid().dim(), params.d)));
    }
    if !(opts.horizon >= 0.0 && opts.record_every > 0.0 && opts.dt_initial > 0.0) {
        return Err(Error::Config("horizon, record_every and dt_initial must be positive".into()));
    }
    let plan = u0.grid().plan();
    let flow = Flow { u: u0, lin: linear_symbol(u0, params), sigma: params.sigma, coupling: opts.coupling };
    let mut a = plan.to_coeffs(u0.values());
    let mut nodal = u0.values().to_vec();
    let inv0 = invariants(u0, &a, &nodal, params, opts.coupling);
    let mut inv = Invariants { ..inv0 };
    let energy_scale = |i: &Invariants| inv0.energy.abs().max(0.5 * i.lap_sq).max(1e-300);
    let mass_scale = inv0.mass.max(1e-300);
    let mut records = Vec::new();
    let mut t = 0.0;
    let mut dt = opts.dt_initial.min(opts.dt_max);
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut clean = 0usize;
    let mut next_record = opts.record_every;
    let lap0 = inv0.lap_sq.sqrt();
    let mut last_lap = lap0;
    let mut coeffs: Option<Coefficients> = None;

    let make_record = |t: f64, dt: f64, a: &[Complex64], nodal: &[Complex64]| -> Result<DiagnosticsRecord> {
        let u = Field::new(u0.grid().clone(), nodal.to_vec())?;
        let _ = a;
        let mut rec = diagnostics::record(&u, pair, params, t, dt)?;
        rec.mass_drift = ((rec.mass - inv0.mass) / mass_scale).abs() > 1e-8;
        rec.energy_drift = ((rec.energy - inv0.energy) / inv0.energy.abs().max(1e-300)).abs() > 1e-8;
        Ok(rec)
    };
    let first = make_record(0.0, dt, &a, &nodal)?;
    sink(&first);
    records.push(first);

    let finish = |verdict: BlowupVerdict,
                  records: Vec<DiagnosticsRecord>,
                  t: f64,
                  dt: f64,
                  nodal: Vec<Complex64>,
                  steps: usize,
                  rejected: usize,
                  inv: &Invariants|
     -> Result<EvolutionOutput> {
        let u = Field::new(u0.grid().clone(), nodal)?;
        let drift = Drift {
            mass_rel: ((inv.mass - inv0.mass) / mass_scale).abs(),
            energy_rel: ((inv.energy - inv0.energy) / inv0.energy.abs().max(1e-300)).abs(),
        };
        Ok(EvolutionOutput {
            records,
            verdict,
            state: EvolutionState { t, u, dt, step_count: steps, rejected, drift },
        })
    };

    if inv0.mass == 0.0 {
        // the zero solution stays zero; record it on the horizon grid
        while next_record <= opts.horizon * (1.0 + 1e-12) {
            let rec = make_record(next_record, dt, &a, &nodal)?;
            sink(&rec);
            records.push(rec);
            next_record += opts.record_every;
        }
        return finish(
            BlowupVerdict::plain(Outcome::BoundedOnHorizon, "zero data"),
            records,
            opts.horizon,
            dt,
            nodal,
            0,
            0,
            &inv,
        );
    }

    let mut na = flow.nonlinear(&nodal);
    while t < opts.horizon * (1.0 - 1e-14) {
        if steps >= opts.max_steps {
            return Err(Error::Config(format!("step limit {} reached at t = {t}", opts.max_steps)));
        }
        let target = next_record.min(opts.horizon);
        let h = dt.min(target - t);
        let truncated = h < dt;
        let c = match &coeffs {
            Some(c) if c.h == h => c,
            _ => {
                coeffs = Some(Coefficients::new(&flow.lin, h));
                coeffs.as_ref().unwrap()
            }
        };
        let (next, err) = flow.step(&a, &na, c);
        if next.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            if dt / 2.0 < opts.dt_min {
                return Err(Error::NonFinite(format!("field at t = {t}")));
            }
            dt /= 2.0;
            rejected += 1;
            clean = 0;
            continue;
        }
        let next_nodal = flow.nodal(&next);
        let new_inv = invariants(u0, &next, &next_nodal, params, opts.coupling);
        let dm = ((new_inv.mass - inv.mass) / mass_scale).abs();
        let de = ((new_inv.energy - inv.energy) / energy_scale(&new_inv)).abs();
        if err > opts.error_tol || dm > opts.drift_tol || de > opts.drift_tol {
            if h / 2.0 < opts.dt_min {
                let rec = make_record(t, h, &a, &nodal)?;
                sink(&rec);
                records.push(rec);
                let verdict = BlowupVerdict::plain(
                    Outcome::ResolutionExhausted,
                    format!("step size underflow at t = {t:.6e} (dt = {h:.3e})"),
                );
                return finish(verdict, records, t, h, nodal, steps, rejected, &inv);
            }
            dt = h / 2.0;
            rejected += 1;
            clean = 0;
            continue;
        }
        t = if truncated || h == target - t { target } else { t + h };
        a = next;
        nodal = next_nodal;
        inv = new_inv;
        na = flow.nonlinear(&nodal);
        steps += 1;
        clean += 1;
        if clean >= 20 && !truncated {
            dt = (dt * 2.0).min(opts.dt_max);
            clean = 0;
        }
        let lap = inv.lap_sq.sqrt();
        let at_record = t >= next_record * (1.0 - 1e-14);
        let grown = lap > last_lap * opts.growth_record;
        if at_record || grown {
            let rec = make_record(t, h, &a, &nodal)?;
            sink(&rec);
            records.push(rec);
            last_lap = lap;
            if at_record {
                next_record += opts.record_every;
            }
            if lap > opts.blowup.amplification * lap0 {
                let verdict = detect_blowup_with(&records, &opts.blowup)?;
                if verdict.outcome == Outcome::BlowupDetected {
                    return finish(verdict, records, t, dt, nodal, steps, rejected, &inv);
                }
            }
        }
        let tail = tail_fraction(&a, plan.rho());
        if tail > opts.tail_tol {
            if records.last().map(|r| r.t) != Some(t) {
                let rec = make_record(t, h, &a, &nodal)?;
                sink(&rec);
                records.push(rec);
            }
            let verdict = BlowupVerdict::plain(
                Outcome::ResolutionExhausted,
                format!("spectral tail fraction {tail:.3e} at t = {t:.6e}, |Delta u| amplified {:.2}x", lap / lap0),
            );
            return finish(verdict, records, t, dt, nodal, steps, rejected, &inv);
        }
    }
    let verdict = BlowupVerdict::plain(Outcome::BoundedOnHorizon, format!("reached t = {t}"));
    finish(verdict, records, t, dt, nodal, steps, rejected, &inv)
}

/// Evolves backward in time: conjugate, evolve forward, conjugate.
pub fn evolve_backward(
    u: &Field,
    params: &Params,
    pair: &CutoffPair,
    opts: &EvolutionOptions,
) -> Result<EvolutionOutput> {
    let mut out = evolve(&u.conj(), params, pair, opts)?;
    out.state.u = out.state.u.conj();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub t_blowup: f64,
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares fit of log y = c - p log(T - t) over the points, with T
/// found by golden-section search beyond the last sample.
pub fn fit_power_law(t: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if t.len() < 4 || t.len() != y.len() {
        return Err(Error::Fit("power-law fit needs at least 4 points".into()));
    }
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("power-law fit needs positive values".into()));
    }
    let t_last = *t.last().unwrap();
    let span = t_last - t[0];
    if !(span > 0.0) {
        return Err(Error::Fit("degenerate time window".into()));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit_at = |big_t: f64| -> (f64, f64, f64) {
        let x: Vec<f64> = t.iter().map(|s| (big_t - s).ln()).collect();
        let (slope, icpt, ss) = linear_fit(&x, &ly);
        (slope, icpt, ss)
    };
    // search over s = log(T - t_last) in [log(1e-8 span), log(1e3 span)]
    let objective = |s: f64| fit_at(t_last + s.exp()).2;
    let (mut lo, mut hi) = ((1e-8 * span).ln(), (1e3 * span).ln());
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - gr * (hi - lo);
    let mut x2 = lo + gr * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = objective(x2);
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let big_t = t_last + s.exp();
    let (slope, icpt, ss) = fit_at(big_t);
    let mean = ly.iter().sum::<f64>() / ly.len() as f64;
    let tot: f64 = ly.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(PowerLawFit { t_blowup: big_t, exponent: -slope, intercept: icpt, r2: if tot > 0.0 { 1.0 - ss / tot } else { 0.0 } })
}

/// Ordinary least squares y = m x + b; returns (m, b, residual sum of squares).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let m = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let b = my - m * mx;
    let ss = x.iter().zip(y).map(|(a, c)| (c - m * a - b).powi(2)).sum();
    (m, b, ss)
}

pub fn detect_blowup(records: &[DiagnosticsRecord]) -> Result<BlowupVerdict> {
    detect_blowup_with(records, &BlowupOptions::default())
}

/// Decides from the record stream whether |Delta u| follows a power law
/// (T - t)^{-p} with a stable blowup time.
pub fn detect_blowup_with(records: &[DiagnosticsRecord], opts: &BlowupOptions) -> Result<BlowupVerdict> {
    if records.len() < opts.window.max(8) {
        return Err(Error::MissingInput(format!("{} records, need at least {}", records.len(), opts.window.max(8))));
    }
    let lap0 = records[0].lap_l2;
    let peak = records.iter().map(|r| r.lap_l2).fold(0.0, f64::max);
    if !(lap0 > 0.0) || peak < opts.amplification * lap0 {
        return Ok(BlowupVerdict::plain(Outcome::BoundedOnHorizon, format!("amplification {:.3}", peak / lap0.max(1e-300))));
    }
    // trailing window: records in the last decade of growth, at least `window` of them
    let last = records.last().unwrap().lap_l2;
    let n = records.len();
    let mut start = n - opts.window;
    while start > 0 && records[start - 1].lap_l2 > last / 10.0 {
        start -= 1;
    }
    let window = &records[start..];
    let monotone = window.windows(2).all(|w| w[1].lap_l2 > w[0].lap_l2 && w[1].t > w[0].t);
    if !monotone {
        return Ok(BlowupVerdict::plain(Outcome::BoundedOnHorizon, "growth not monotone on the trailing window"));
    }
    let fit_window = |w: &[DiagnosticsRecord]| -> Result<PowerLawFit> {
        let t: Vec<f64> = w.iter().map(|r| r.t).collect();
        let y: Vec<f64> = w.iter().map(|r| r.lap_l2).collect();
        fit_power_law(&t, &y)
    };
    let main = fit_window(window)?;
    let shift = (window.len() / 4).max(1);
    let earlier = fit_window(&window[..window.len() - shift])?;
    let later = fit_window(&window[shift..])?;
    let spread = [earlier.t_blowup, later.t_blowup]
        .iter()
        .map(|x| (x - main.t_blowup).abs() / main.t_blowup.abs())
        .fold(0.0, f64::max);
    let t_last = window.last().unwrap().t;
    let sane = main.exponent > 0.0 && main.r2 >= opts.min_r2 && main.t_blowup > t_last;
    if sane && spread <= opts.t_stability {
        Ok(BlowupVerdict {
            outcome: Outcome::BlowupDetected,
            t_estimate: Some(main.t_blowup),
            growth_exponent: Some(main.exponent),
            detail: format!("T spread {spread:.2e} over shifted windows, r2 {:.6}", main.r2),
        })
    } else {
        Ok(BlowupVerdict::plain(
            Outcome::BoundedOnHorizon,
            format!("power-law fit rejected: T spread {spread:.2e}, r2 {:.4}, p {:.3}", main.r2, main.exponent),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(t: &[f64], f: impl Fn(f64) -> f64) -> Vec<DiagnosticsRecord> {
        t.iter()
            .map(|&s| DiagnosticsRecord {
                t: s,
                mass: 1.0,
                energy: 0.0,
                grad_l2: 1.0,
                lap_l2: f(s),
                m_r: 0.0,
                v_r: None,
                n_r: None,
                dt: 1e-3,
                mass_drift: false,
                energy_drift: false,
            })
            .collect()
    }

    #[test]
    fn phi_functions_branches_agree() {
        for &z in &[Complex64::new(0.0, 0.999), Complex64::new(0.0, 1.001), Complex64::new(-0.6, 0.8)] {
            let a = phi_functions(z);
            // direct formulas
            let p1 = (z.exp() - 1.0) / z;
            let p2 = (z.exp() - 1.0 - z) / (z * z);
            let p3 = (z.exp() - 1.0 - z - z * z / 2.0) / (z * z * z);
            assert!((a[0] - p1).norm() < 1e-12);
            assert!((a[1] - p2).norm() < 1e-11);
            assert!((a[2] - p3).norm() < 1e-10);
        }
        let a = phi_functions(Complex64::new(0.0, 0.0));
        assert!((a[0].re - 1.0).abs() < 1e-16 && (a[1].re - 0.5).abs() < 1e-16);
    }

    #[test]
    fn synthetic_blowup_is_detected() {
        let t: Vec<f64> = (0..1000).map(|i| 0.999 * i as f64 / 999.0).collect();
        let recs = synthetic(&t, |s| (1.0 - s).powf(-0.5));
        let v = detect_blowup(&recs).unwrap();
        assert_eq!(v.outcome, Outcome::BlowupDetected, "{v:?}");
        assert!((v.t_estimate.unwrap() - 1.0).abs() < 0.01);
        assert!((v.growth_exponent.unwrap() - 0.5).abs() < 0.05);
    }

    #[test]
    fn bounded_records_are_not_blowup() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let v = detect_blowup(&synthetic(&t, |s| 2.0 - (-s).exp())).unwrap();
        assert_eq!(v.outcome, Outcome::BoundedOnHorizon);
    }

    #[test]
    fn spike_is_not_blowup() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let recs = synthetic(&t, |s| {
            let noise = 0.05 * ((s * 9173.0).sin());
            if (s - 1.5).abs() < 1e-9 {
                60.0
            } else {
                1.0 + noise
            }
        });
        let v = detect_blowup(&recs).unwrap();
        assert_eq!(v.outcome, Outcome::BoundedOnHorizon, "{v:?}");
    }

    #[test]
    fn too_few_records() {
        let recs = synthetic(&[0.0, 0.1, 0.2], |s| 1.0 + s);
        assert!(detect_blowup(&recs).is_err());
    }

    #[test]
    fn power_law_fit_recovers_parameters() {
        let t: Vec<f64> = (0..40).map(|i| 0.9 + 0.0975 * i as f64 / 39.0).collect();
        let y: Vec<f64> = t.iter().map(|s| 3.0 * (2.0 - s).powf(-0.375)).collect();
        let f = fit_power_law(&t, &y).unwrap();
        assert!((f.t_blowup - 2.0).abs() < 1e-4, "{f:?}");
        assert!((f.exponent - 0.375).abs() < 1e-4);
    }
}
