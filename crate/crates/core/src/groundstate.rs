//! Ground states of Delta^2 Q + Q = |Q|^{2 sigma} Q, the explicit
//! energy-critical bubble, the Weinstein functional and the Fourier
//! rearrangement.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::RadialGrid;
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PetviashviliOptions {
    pub max_iterations: usize,
    /// Stop once |S - 1| falls below this
    pub stabilizer_tol: f64,
    /// and the relative equation residual falls below this.
    pub residual_tol: f64,
    /// Rearrange every iterate in Fourier space.
    pub symmetrize: bool,
}

impl Default for PetviashviliOptions {
    fn default() -> Self {
        PetviashviliOptions { max_iterations: 10_000, stabilizer_tol: 1e-12, residual_tol: 1e-10, symmetrize: false }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub params: Params,
    pub profile: Field,
    /// |Q - (Delta^2 + 1)^{-1} |Q|^{2 sigma} Q| / |Q| in L^2, spectrally.
    pub residual: f64,
    pub pohozaev: PohozaevReport,
    /// Sharp Gagliardo-Nirenberg constant, the Weinstein value of Q.
    pub c_gn: f64,
    pub k_gn: f64,
    pub iterations: usize,
    pub stabilizer: f64,
}

fn nonlinearity(u: &[Complex64], sigma: f64) -> Vec<Complex64> {
    u.iter().map(|v| v * v.norm().powf(2.0 * sigma)).collect()
}

/// Default initial guess e^{-r^2}.
pub fn default_initial_guess(grid: Arc<RadialGrid>) -> Field {
    Field::from_real_fn(grid, |r| (-r * r).exp())
}

/// Petviashvili iteration Q <- S^gamma (Delta^2 + 1)^{-1} |Q|^{2 sigma} Q.
pub fn solve_q(params: &Params, init: &Field, opts: &PetviashviliOptions) -> Result<GroundState> {
    let grid = init.grid().clone();
    if grid.dim() != params.d {
        return Err(Error::GridMismatch(format!("grid dimension {} vs d = {}", grid.dim(), params.d)));
    }
    if params.s_c >= 2.0 {
        return Err(Error::InvalidParams("ground states need an energy-subcritical power".into()));
    }
    if init.values().iter().all(|v| v.norm() == 0.0) {
        return Err(Error::InvalidParams("initial guess vanishes identically".into()));
    }
    let plan = grid.plan();
    let sigma = params.sigma;
    let gamma = (2.0 * sigma + 1.0) / (2.0 * sigma);
    let mut q: Vec<Complex64> = init.values().iter().map(|v| Complex64::new(v.re, 0.0)).collect();
    let rho = plan.rho();
    let symbol: Vec<f64> = rho.iter().map(|p| p.powi(4) + 1.0).collect();
    let mut residual = f64::NAN;
    for it in 1..=opts.max_iterations {
        let a = plan.to_coeffs(&q);
        let b = plan.to_coeffs(&nonlinearity(&q, sigma));
        let num: f64 = a.iter().zip(&symbol).map(|(v, m)| v.norm_sqr() * m).sum();
        let den: f64 = a.iter().zip(&b).map(|(x, y)| (x.conj() * y).re).sum();
        if !(num.is_finite() && den.is_finite()) {
            return Err(Error::NonFinite("Petviashvili iterate".into()));
        }
        if den <= 0.0 || num < 1e-300 {
            return Err(Error::NoConvergence { iterations: it, residual });
        }
        let stabilizer = num / den;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for ((x, y), m) in a.iter().zip(&b).zip(&symbol) {
            diff += (x - y / m).norm_sqr();
            norm += x.norm_sqr();
        }
        residual = (diff / norm).sqrt();
        if (stabilizer - 1.0).abs() < opts.stabilizer_tol && residual < opts.residual_tol {
            let profile = Field::new(grid.clone(), q)?;
            let pohozaev = pohozaev_report(&profile, params)?;
            return Ok(GroundState {
                params: *params,
                profile,
                residual,
                c_gn: pohozaev.weinstein,
                k_gn: pohozaev.k_norms,
                pohozaev,
                iterations: it,
                stabilizer,
            });
        }
        let factor = stabilizer.powf(gamma);
        let next: Vec<Complex64> = b.iter().zip(&symbol).map(|(y, m)| y * (factor / m)).collect();
        q = plan.from_coeffs(&next).into_iter().map(|v| Complex64::new(v.re, 0.0)).collect();
        if opts.symmetrize {
            q = fourier_rearrange(&Field::from_parts(grid.clone(), q)).into_values();
            for v in q.iter_mut() {
                v.im = 0.0;
            }
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, residual })
}

/// Weinstein functional |u|_{2s+2}^{2s+2} / (|Delta u|^{d s/2} |u|^{2s+2-d s/2}).
pub fn weinstein(u: &Field, params: &Params) -> Result<f64> {
    let p = params.power();
    let nrm = u.norms();
    if nrm.l2 == 0.0 || nrm.lap_l2 == 0.0 {
        return Err(Error::InvalidParams("Weinstein functional of the zero field".into()));
    }
    let ds2 = params.d as f64 * params.sigma / 2.0;
    Ok(u.lp(p).powf(p) / (nrm.lap_l2.powf(ds2) * nrm.l2.powf(p - ds2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub mass: f64,
    pub lap_sq: f64,
    pub potential: f64,
    pub energy: f64,
    /// Relative defect of |Delta Q|^2 = d / (d + 2(2 - s_c)) |Q|_p^p.
    pub potential_identity: f64,
    /// Relative defect of |Delta Q|^2 = d / (2(2 - s_c)) |Q|^2.
    pub mass_identity: f64,
    pub weinstein: f64,
    /// |Delta Q|^{s_c} |Q|^{2 - s_c}.
    pub k_norms: f64,
    /// (4(sigma+1) / (d sigma C))^{1/sigma}, C the Weinstein value of Q.
    pub k_weinstein: f64,
    /// (s_c/d)^{-s_c/2} E^{s_c/2} M^{1 - s_c/2}, when 0 < s_c.
    pub k_energy: Option<f64>,
    /// E^{s_c} M^{2 - s_c}.
    pub lambda: f64,
}

pub fn pohozaev_report(q: &Field, params: &Params) -> Result<PohozaevReport> {
    let d = params.d as f64;
    let s_c = params.s_c;
    let nrm = q.norms();
    let p = params.power();
    let potential = q.lp(p).powf(p);
    let lap_sq = nrm.lap_l2 * nrm.lap_l2;
    let mass = nrm.l2 * nrm.l2;
    let energy = 0.5 * lap_sq - potential / p;
    let c = weinstein(q, params)?;
    let k_energy = if s_c > 0.0 && energy > 0.0 {
        Some((s_c / d).powf(-s_c / 2.0) * energy.powf(s_c / 2.0) * mass.powf(1.0 - s_c / 2.0))
    } else {
        None
    };
    Ok(PohozaevReport {
        mass,
        lap_sq,
        potential,
        energy,
        potential_identity: (lap_sq - d / (d + 2.0 * (2.0 - s_c)) * potential).abs() / lap_sq,
        mass_identity: (lap_sq - d / (2.0 * (2.0 - s_c)) * mass).abs() / lap_sq,
        weinstein: c,
        k_norms: nrm.lap_l2.powf(s_c) * nrm.l2.powf(2.0 - s_c),
        k_weinstein: (4.0 * (params.sigma + 1.0) / (d * params.sigma * c)).powf(1.0 / params.sigma),
        k_energy,
        lambda: energy.powf(s_c) * mass.powf(2.0 - s_c),
    })
}

/// Explicit energy-critical bubble ((d(d-4)(d^2-4))^{1/4} / (1 + r^2))^{(d-4)/2}.
pub fn bubble_profile(d: usize, r: f64) -> f64 {
    let df = d as f64;
    let k = (df * (df - 4.0) * (df * df - 4.0)).powf(0.25);
    (k / (1.0 + r * r)).powf((df - 4.0) / 2.0)
}

/// Delta of the bubble in closed form.
pub fn bubble_laplacian(d: usize, r: f64) -> f64 {
    let df = d as f64;
    let a = (df - 4.0) / 2.0;
    let k = (df * (df - 4.0) * (df * df - 4.0)).powf(0.25);
    -2.0 * a * k.powf(a) * (1.0 + r * r).powf(-a - 2.0) * (df + 2.0 * r * r)
}

pub fn explicit_w(d: usize, grid: Arc<RadialGrid>) -> Result<Field> {
    if d < 5 || grid.dim() != d {
        return Err(Error::InvalidParams(format!("bubble needs d >= 5 matching the grid, got d = {d}")));
    }
    Ok(Field::from_real_fn(grid, |r| bubble_profile(d, r)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleReport {
    pub d: usize,
    pub value_at_origin: f64,
    /// Weighted relative residual of Delta^2 W = W^{(d+4)/(d-4)} on the inner region.
    pub residual: f64,
    pub lap_sq: f64,
    pub potential: f64,
    pub energy: f64,
    /// |E[W] - (2/d) |Delta W|^2| / |E[W]|.
    pub energy_identity: f64,
}

/// C-infinity step from 1 at `start` down to 0 at `start + width`.
pub fn step_down(r: f64, start: f64, width: f64) -> f64 {
    let h = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    let t = (r - start) / width;
    let (a, b) = (h(t), h(1.0 - t));
    b / (a + b)
}

fn tail_integral(from: f64, d: usize, f: impl Fn(f64) -> f64) -> f64 {
    // int_from^infinity f(r) r^{d-1} dr with r = from / t
    let omega = crate::bessel::sphere_area(d);
    let panels = 200;
    let mut sum = 0.0;
    for i in 0..panels {
        let a = i as f64 / panels as f64;
        let b = (i + 1) as f64 / panels as f64;
        sum += crate::cutoffs::gauss16(a, b, |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let r = from / t;
            f(r) * r.powi(d as i32 - 1) * from / (t * t)
        });
    }
    omega * sum
}

/// Norms and residual of the bubble on a grid. The grid carries a windowed
/// copy of W for the spectral part; beyond a smooth partition the closed-form
/// far field is integrated directly.
pub fn bubble_report(d: usize, grid: Arc<RadialGrid>) -> Result<BubbleReport> {
    let w = explicit_w(d, grid.clone())?;
    let rmax = grid.rmax();
    let window: Vec<f64> = grid.nodes().iter().map(|&r| step_down(r, 0.5 * rmax, 0.3 * rmax)).collect();
    let windowed: Vec<Complex64> = w.values().iter().zip(&window).map(|(v, c)| v * c).collect();
    let plan = grid.plan();
    let lap = plan.apply_symbol(&windowed, crate::spectral::Symbol::Lap);
    let bilap = plan.apply_symbol(&windowed, crate::spectral::Symbol::Bilap);
    let (p0, p1) = (0.25 * rmax, 0.2 * rmax);
    let part: Vec<f64> = grid.nodes().iter().map(|&r| step_down(r, p0, p1)).collect();
    let expo = (d as f64 + 4.0) / (d as f64 - 4.0);
    let weights = grid.weights();
    let mut res_num = 0.0;
    let mut res_den = 0.0;
    let mut lap_inner = 0.0;
    let mut pot_inner = 0.0;
    let p = 2.0 * d as f64 / (d as f64 - 4.0);
    for j in 0..grid.len() {
        let wv = w.values()[j].re;
        let rhs = wv.powf(expo);
        res_num += weights[j] * part[j] * (bilap[j].re - rhs).powi(2);
        res_den += weights[j] * part[j] * rhs.powi(2);
        lap_inner += weights[j] * part[j] * lap[j].norm_sqr();
        pot_inner += weights[j] * part[j] * wv.powf(p);
    }
    let outer = |f: &dyn Fn(f64) -> f64| -> f64 {
        let near: f64 = {
            let omega = crate::bessel::sphere_area(d);
            let panels = 64;
            let (a0, b0) = (p0, p0 + p1);
            (0..panels)
                .map(|i| {
                    let a = a0 + (b0 - a0) * i as f64 / panels as f64;
                    let b = a0 + (b0 - a0) * (i + 1) as f64 / panels as f64;
                    crate::cutoffs::gauss16(a, b, |r| {
                        (1.0 - step_down(r, p0, p1)) * f(r) * r.powi(d as i32 - 1)
                    })
                })
                .sum::<f64>()
                * omega
        };
        near + tail_integral(p0 + p1, d, f)
    };
    let lap_sq = lap_inner + outer(&|r| bubble_laplacian(d, r).powi(2));
    let potential = pot_inner + outer(&|r| bubble_profile(d, r).powf(p));
    let energy = 0.5 * lap_sq - potential / p;
    Ok(BubbleReport {
        d,
        value_at_origin: bubble_profile(d, 0.0),
        residual: (res_num / res_den).sqrt(),
        lap_sq,
        potential,
        energy,
        energy_identity: (energy - 2.0 / d as f64 * lap_sq).abs() / energy.abs(),
    })
}

/// Mass of the bubble inside the ball of radius `radius`.
pub fn bubble_mass_within(d: usize, radius: f64) -> f64 {
    let omega = crate::bessel::sphere_area(d);
    let panels = 400;
    (0..panels)
        .map(|i| {
            let a = radius * i as f64 / panels as f64;
            let b = radius * (i + 1) as f64 / panels as f64;
            crate::cutoffs::gauss16(a, b, |r| bubble_profile(d, r).powi(2) * r.powi(d as i32 - 1))
        })
        .sum::<f64>()
        * omega
}

/// Fourier rearrangement: |u^| is rearranged into a radially decreasing
/// function of the frequency with the same distribution with respect to the
/// spectral measure, the phase is dropped, and the result is transformed back.
pub fn fourier_rearrange(u: &Field) -> Field {
    let grid = u.grid();
    let plan = grid.plan();
    let hat = plan.forward(u.values());
    let meas = grid.spectral_weights();
    let n = hat.len();
    let sq: Vec<f64> = hat.iter().map(|v| v.norm_sqr()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sq[b].partial_cmp(&sq[a]).unwrap().then(a.cmp(&b)));
    // mass of (f^#)^2 over each target cell, cells taken in increasing frequency
    let mut out = vec![0.0; n];
    let mut src = 0usize;
    let mut src_left = meas[order[0]];
    for k in 0..n {
        let mut need = meas[k];
        let mut acc = 0.0;
        while need > 0.0 && src < n {
            let take = need.min(src_left);
            acc += take * sq[order[src]];
            need -= take;
            src_left -= take;
            if src_left <= need * 1e-15 || src_left <= 0.0 {
                src += 1;
                if src < n {
                    src_left = meas[order[src]];
                }
                if need <= meas[k] * 1e-15 {
                    break;
                }
            }
        }
        out[k] = (acc / meas[k]).sqrt();
    }
    let hat_sharp: Vec<Complex64> = out.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Field::from_parts(grid.clone(), plan.inverse(&hat_sharp))
}

/// Radius where a decreasing real profile first drops below `level` times its
/// maximum; used to size grids.
pub fn decay_radius(u: &Field, level: f64) -> f64 {
    let vmax = u.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let nodes = u.grid().nodes();
    for (j, v) in u.values().iter().enumerate().rev() {
        if v.norm() > level * vmax {
            return nodes[j];
        }
    }
    0.0
}
