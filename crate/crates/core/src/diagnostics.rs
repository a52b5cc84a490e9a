//! Conserved quantities, localized virial and bivariance functionals, and
//! the right-hand sides of the virial inequalities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::CutoffPair;
use crate::error::{Error, Result};
use crate::field::{Field, Norms};
use crate::params::Params;
use crate::spectral::{lagrange_cumulative, Symbol};

fn check_pair(u: &Field, pair: &CutoffPair) -> Result<()> {
    let nodes = u.grid().nodes();
    if pair.radii.len() != nodes.len() || pair.d != u.grid().dim() || pair.radii.first() != nodes.first() {
        return Err(Error::GridMismatch("cutoff pair was not sampled on this grid".into()));
    }
    Ok(())
}

fn psi_slope(pair: &CutoffPair) -> Result<&[f64]> {
    pair.psi_slope().ok_or_else(|| Error::MissingInput("cutoff pair without psi".into()))
}

fn require_d3(u: &Field, what: &str) -> Result<()> {
    if u.grid().dim() < 3 {
        return Err(Error::NotApplicable(format!("{what} needs d >= 3")));
    }
    Ok(())
}

/// |u|^{2 sigma} u at the nodes.
pub fn power_nonlinearity(u: &[Complex64], sigma: f64) -> Vec<Complex64> {
    u.iter().map(|v| v * v.norm().powf(2.0 * sigma)).collect()
}

/// u_t = -i (Delta^2 u - mu Delta u - c |u|^{2 sigma} u), c = 1 for the
/// focusing flow and 0 for the free flow.
pub fn time_derivative(u: &Field, params: &Params, coupling: f64) -> Vec<Complex64> {
    let plan = u.grid().plan();
    let mu = params.mu;
    let lin = plan.apply_multiplier(u.values(), |p| p.powi(4) + mu * p * p);
    let nl = power_nonlinearity(u.values(), params.sigma);
    lin.iter().zip(&nl).map(|(l, n)| Complex64::new(0.0, -1.0) * (l - n * coupling)).collect()
}

pub fn potential_term(u: &Field, params: &Params) -> f64 {
    let p = params.power();
    u.lp(p).powf(p)
}

pub fn energy_from_norms(norms: &Norms, potential: f64, params: &Params) -> f64 {
    0.5 * norms.lap_l2.powi(2) + 0.5 * params.mu * norms.grad_l2.powi(2) - potential / params.power()
}

pub fn energy(u: &Field, params: &Params) -> f64 {
    energy_from_norms(&u.norms(), potential_term(u, params), params)
}

/// M_R[u] = 2 Im int conj(u) phi_R' u_r.
pub fn localized_virial(u: &Field, pair: &CutoffPair) -> Result<f64> {
    check_pair(u, pair)?;
    let ur = u.grid().plan().radial_derivative(u.values(), 1)?;
    let w = u.grid().weights();
    Ok(2.0
        * (0..ur.len())
            .map(|j| w[j] * pair.phi[1][j] * (u.values()[j].conj() * ur[j]).im)
            .sum::<f64>())
}

/// Gamma u = -i (2 phi' u_r + Delta phi u), so that M_R = <u, Gamma u>.
fn virial_generator(u: &Field, pair: &CutoffPair) -> Result<Vec<Complex64>> {
    let ur = u.grid().plan().radial_derivative(u.values(), 1)?;
    Ok((0..ur.len())
        .map(|j| Complex64::new(0.0, -1.0) * (ur[j] * (2.0 * pair.phi[1][j]) + u.values()[j] * pair.lap_phi[0][j]))
        .collect())
}

/// Instantaneous dM_R/dt = 2 Re <u_t, Gamma u> along the flow.
pub fn virial_rate(u: &Field, pair: &CutoffPair, params: &Params, coupling: f64) -> Result<f64> {
    check_pair(u, pair)?;
    let ut = time_derivative(u, params, coupling);
    let g = virial_generator(u, pair)?;
    let w = u.grid().weights();
    Ok(2.0 * (0..g.len()).map(|j| w[j] * (ut[j].conj() * g[j]).re).sum::<f64>())
}

/// The same rate from the integrated-by-parts expansion in terms of the
/// cutoff derivatives.
pub fn virial_rate_expanded(u: &Field, pair: &CutoffPair, params: &Params, coupling: f64) -> Result<f64> {
    check_pair(u, pair)?;
    let plan = u.grid().plan();
    let ur = plan.radial_derivative(u.values(), 1)?;
    let urr = plan.radial_derivative(u.values(), 2)?;
    let w = u.grid().weights();
    let nodes = u.grid().nodes();
    let d = u.grid().dim() as f64;
    let (mu, sigma) = (params.mu, params.sigma);
    let p = params.power();
    let mut total = 0.0;
    for j in 0..ur.len() {
        let r = nodes[j];
        let (a1, a2, a0) = (ur[j].norm_sqr(), urr[j].norm_sqr(), u.values()[j].norm_sqr());
        let hess = pair.phi[2][j];
        let term = 8.0 * (hess * a2 + (d - 1.0) * pair.phi[1][j] / (r * r * r) * a1)
            - 4.0 * pair.lap_phi[2][j] * a1
            - 2.0 * pair.bilap_phi[j] * a1
            + pair.trilap_phi[j] * a0
            + 4.0 * mu * hess * a1
            - mu * pair.bilap_phi[j] * a0
            - coupling * 2.0 * sigma / (sigma + 1.0) * pair.lap_phi[0][j] * a0.powf(p / 2.0);
        total += w[j] * term;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialRhs {
    /// 4 d sigma E[u0] - (2 d sigma - 8) |Delta u|^2 - (2 d sigma - 4) mu |grad u|^2.
    pub main: f64,
    /// -4 mu int (1 - phi_R'') |u_r|^2.
    pub x_mu: f64,
    pub error_budget: f64,
    /// -(2 sigma/(sigma+1)) int (Delta phi_R - d) |u|^{2 sigma + 2}, evaluated exactly.
    pub nonlinear_defect: f64,
}

impl VirialRhs {
    pub fn bound(&self) -> f64 {
        self.main + self.x_mu + self.error_budget
    }
}

pub fn virial_main(norms: &Norms, energy0: f64, params: &Params) -> f64 {
    let ds = params.d as f64 * params.sigma;
    4.0 * ds * energy0 - (2.0 * ds - 8.0) * norms.lap_l2.powi(2) - (2.0 * ds - 4.0) * params.mu * norms.grad_l2.powi(2)
}

/// Right-hand side of the localized virial inequality at the state u, with
/// the conserved energy taken from the data.
pub fn virial_rhs(u: &Field, pair: &CutoffPair, params: &Params, energy0: f64) -> Result<VirialRhs> {
    check_pair(u, pair)?;
    let norms = u.norms();
    let ur = u.grid().plan().radial_derivative(u.values(), 1)?;
    let w = u.grid().weights();
    let mut x_mu = 0.0;
    let mut nonlinear_defect = 0.0;
    let sigma = params.sigma;
    let p = params.power();
    for j in 0..ur.len() {
        x_mu += w[j] * pair.hess_margin[j] * ur[j].norm_sqr();
        nonlinear_defect += w[j] * pair.lap_defect[j] * u.values()[j].norm().powf(p);
    }
    let c = pair.virial_constants();
    let r = pair.scale;
    let (m, g) = (norms.l2.powi(2), norms.grad_l2);
    let dm1 = params.d as f64 - 1.0;
    let error_budget = (4.0 * c.hess_lap + 2.0 * c.bilap) * r.powi(-2) * g * g
        + c.trilap * r.powi(-4) * m
        + params.mu.abs() * c.bilap * r.powi(-2) * m
        + 2.0 * sigma / (sigma + 1.0)
            * c.lap_defect
            * 2f64.powf(2.0 * sigma)
            * m.powf(1.0 + sigma / 2.0)
            * r.powf(-sigma * dm1)
            * g.powf(sigma);
    Ok(VirialRhs {
        main: virial_main(&norms, energy0, params),
        x_mu: -4.0 * params.mu * x_mu,
        error_budget,
        nonlinear_defect: 2.0 * sigma / (sigma + 1.0) * nonlinear_defect,
    })
}

/// V_R[u] = | |nabla|^{-1} (nabla psi_R u) |^2.
pub fn riesz_bivariance(u: &Field, pair: &CutoffPair) -> Result<f64> {
    require_d3(u, "the Riesz bivariance")?;
    check_pair(u, pair)?;
    let s = psi_slope(pair)?;
    let g: Vec<Complex64> = u.values().iter().zip(s).map(|(v, s)| v * s).collect();
    Ok(u.grid().plan().vector_riesz_norm_sqr(&g))
}

/// Exact dV_R/dt = 2 Re <psi' u_t, (-Delta)^{-1} (psi' u)> along the flow.
pub fn bivariance_rate(u: &Field, pair: &CutoffPair, params: &Params, coupling: f64) -> Result<f64> {
    require_d3(u, "the Riesz bivariance")?;
    check_pair(u, pair)?;
    let s = psi_slope(pair)?;
    let g: Vec<Complex64> = u.values().iter().zip(s).map(|(v, s)| v * s).collect();
    let h = u.grid().plan().vector_invlap(&g);
    let ut = time_derivative(u, params, coupling);
    let w = u.grid().weights();
    Ok(2.0 * (0..h.len()).map(|j| w[j] * s[j] * (ut[j].conj() * h[j]).re).sum::<f64>())
}

/// N_R[u] = -2 Im int conj(u) psi_R' [(-Delta)^{-1} (psi_R' |u|^{2 sigma} u x/r)].
pub fn commutator_nr(u: &Field, pair: &CutoffPair, params: &Params) -> Result<f64> {
    require_d3(u, "N_R")?;
    check_pair(u, pair)?;
    let s = psi_slope(pair)?;
    let nl = power_nonlinearity(u.values(), params.sigma);
    let g: Vec<Complex64> = nl.iter().zip(s).map(|(v, s)| v * s).collect();
    let h = u.grid().plan().vector_invlap(&g);
    let w = u.grid().weights();
    Ok(-2.0 * (0..h.len()).map(|j| w[j] * s[j] * (u.values()[j].conj() * h[j]).im).sum::<f64>())
}

/// Profile of (-Delta)^{-1} applied to g x/r, from Gauss's law: writing
/// g x/r = nabla H with H(r) = -int_r^inf g, the result is the radial
/// derivative of the Newton potential of H.
pub fn vector_invlap_oracle(grid: &crate::grid::RadialGrid, g: &[Complex64]) -> Vec<Complex64> {
    let nodes = grid.nodes();
    let d = grid.dim();
    let cum = lagrange_cumulative(nodes, g, 0);
    let total = *cum.last().unwrap();
    let h: Vec<Complex64> = cum.iter().map(|c| c - total).collect();
    let enclosed = lagrange_cumulative(nodes, &h, d as i32 - 1);
    nodes.iter().zip(&enclosed).map(|(&r, e)| -e * r.powf(1.0 - d as f64)).collect()
}

/// V_R by quadrature in physical space, independent of the transforms.
pub fn riesz_bivariance_oracle(u: &Field, pair: &CutoffPair) -> Result<f64> {
    require_d3(u, "the Riesz bivariance")?;
    check_pair(u, pair)?;
    let s = psi_slope(pair)?;
    let g: Vec<Complex64> = u.values().iter().zip(s).map(|(v, s)| v * s).collect();
    let h = vector_invlap_oracle(u.grid(), &g);
    let w = u.grid().weights();
    Ok((0..h.len()).map(|j| w[j] * (g[j].conj() * h[j]).re).sum())
}

pub fn commutator_nr_oracle(u: &Field, pair: &CutoffPair, params: &Params) -> Result<f64> {
    require_d3(u, "N_R")?;
    check_pair(u, pair)?;
    let s = psi_slope(pair)?;
    let nl = power_nonlinearity(u.values(), params.sigma);
    let g: Vec<Complex64> = nl.iter().zip(s).map(|(v, s)| v * s).collect();
    let h = vector_invlap_oracle(u.grid(), &g);
    let w = u.grid().weights();
    Ok(-2.0 * (0..h.len()).map(|j| w[j] * s[j] * (u.values()[j].conj() * h[j]).im).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StraussMargin {
    /// min_r 2 |u|^{1/2} |grad u|^{1/2} - r^{(d-1)/2} |u(r)|.
    pub h1: f64,
    /// min_r 2 |u|^{3/4} |Delta u|^{1/4} - r^{(d-1)/2} |u(r)|.
    pub h2: f64,
}

pub fn strauss_margin(u: &Field) -> StraussMargin {
    let nrm = u.norms();
    let b1 = 2.0 * (nrm.l2 * nrm.grad_l2).sqrt();
    let b2 = 2.0 * nrm.l2.powf(0.75) * nrm.lap_l2.powf(0.25);
    let e = (u.grid().dim() as f64 - 1.0) / 2.0;
    let peak = u
        .grid()
        .nodes()
        .iter()
        .zip(u.values())
        .map(|(r, v)| r.powf(e) * v.norm())
        .fold(0.0, f64::max);
    StraussMargin { h1: b1 - peak, h2: b2 - peak }
}

/// V(0) + 4 M(0) t + 16 |Delta u0|^2 t^2.
pub fn free_bivariance_law(v0: f64, m0: f64, lap_sq: f64, t: f64) -> f64 {
    v0 + 4.0 * m0 * t + 16.0 * lap_sq * t * t
}

pub fn free_bivariance_prediction(u0: &Field, pair: &CutoffPair, t: f64) -> Result<f64> {
    let v0 = riesz_bivariance(u0, pair)?;
    let m0 = localized_virial(u0, pair)?;
    Ok(free_bivariance_law(v0, m0, u0.norms().lap_l2.powi(2), t))
}

/// One row of the record stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub grad_l2: f64,
    pub lap_l2: f64,
    pub m_r: f64,
    pub v_r: Option<f64>,
    pub n_r: Option<f64>,
    pub dt: f64,
    #[serde(skip)]
    pub mass_drift: bool,
    #[serde(skip)]
    pub energy_drift: bool,
}

/// Evaluates all diagnostics of u at time t. V_R and N_R are recorded for
/// d >= 3 only.
pub fn record(u: &Field, pair: &CutoffPair, params: &Params, t: f64, dt: f64) -> Result<DiagnosticsRecord> {
    let norms = u.norms();
    let energy = energy_from_norms(&norms, potential_term(u, params), params);
    let (v_r, n_r) = if u.grid().dim() >= 3 && pair.psi.is_some() {
        (Some(riesz_bivariance(u, pair)?), Some(commutator_nr(u, pair, params)?))
    } else {
        (None, None)
    };
    Ok(DiagnosticsRecord {
        t,
        mass: norms.l2.powi(2),
        energy,
        grad_l2: norms.grad_l2,
        lap_l2: norms.lap_l2,
        m_r: localized_virial(u, pair)?,
        v_r,
        n_r,
        dt,
        mass_drift: false,
        energy_drift: false,
    })
}

/// Centered finite-difference derivative of samples y(t) with a stencil of
/// `half` records on each side; one-sided at the ends.
pub fn centered_rates(t: &[f64], y: &[f64], half: usize) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n.saturating_sub(1));
            if hi == lo {
                0.0
            } else {
                (y[hi] - y[lo]) / (t[hi] - t[lo])
            }
        })
        .collect()
}

/// Spectral Laplacian of a field, used by callers that need Delta u itself.
pub fn laplacian(u: &Field) -> Vec<Complex64> {
    u.grid().plan().apply_symbol(u.values(), Symbol::Lap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoffs::{mastercutoff_pair, CutoffKind};
    use crate::grid::make_grid;
    use crate::params::make_params;

    fn packet(grid: &std::sync::Arc<crate::grid::RadialGrid>, k: f64, w: f64) -> Field {
        Field::from_fn(grid.clone(), |r| Complex64::from_polar((-r * r / (w * w)).exp(), k * r * r))
    }

    #[test]
    fn energy_of_zero_and_scaling() {
        let params = make_params(3, 2.0, 0.5).unwrap();
        let grid = make_grid(3, 20.0, 128).unwrap();
        assert_eq!(energy(&Field::zeros(grid.clone()), &params), 0.0);
        let u = packet(&grid, 0.0, 1.5);
        let nrm = u.norms();
        let pot = potential_term(&u, &params);
        let lam: f64 = 1.7;
        let expected = 0.5 * lam * lam * nrm.lap_l2.powi(2) + 0.25 * lam * lam * nrm.grad_l2.powi(2)
            - lam.powf(6.0) / 6.0 * pot;
        let got = energy(&u.scaled(lam), &params);
        assert!((got - expected).abs() < 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn virial_of_real_field_vanishes() {
        let grid = make_grid(3, 30.0, 192).unwrap();
        let pair = mastercutoff_pair(5.0, CutoffKind::Generic, &grid).unwrap();
        let params = make_params(3, 2.0, 0.0).unwrap();
        let u = packet(&grid, 0.0, 2.0);
        assert_eq!(localized_virial(&u, &pair).unwrap(), 0.0);
        assert!(commutator_nr(&u, &pair, &params).unwrap().abs() < 1e-14);
    }

    #[test]
    fn rate_routes_agree() {
        for (d, kind) in [(3usize, CutoffKind::Generic), (2, CutoffKind::AppendixB), (4, CutoffKind::Generic)] {
            let grid = make_grid(d, 40.0, 640).unwrap();
            let pair = mastercutoff_pair(2.0, kind, &grid).unwrap();
            let params = make_params(d, 1.5, 0.7).unwrap();
            let u = packet(&grid, 0.3, 3.0);
            let a = virial_rate(&u, &pair, &params, 1.0).unwrap();
            let b = virial_rate_expanded(&u, &pair, &params, 1.0).unwrap();
            // the expanded integrand is only piecewise smooth, so its quadrature converges algebraically
            assert!((a - b).abs() < 5e-4 * a.abs().max(1.0), "d={d}: {a} {b}");
        }
    }

    #[test]
    fn virial_bound_direction() {
        let grid = make_grid(3, 40.0, 320).unwrap();
        let params = make_params(3, 2.0, -0.5).unwrap();
        for &(k, w, scale) in &[(0.3, 3.0, 2.0), (-0.2, 1.0, 1.0), (0.0, 4.0, 3.0)] {
            let pair = mastercutoff_pair(scale, CutoffKind::Generic, &grid).unwrap();
            let u = packet(&grid, k, w).scaled(0.8);
            let e0 = energy(&u, &params);
            let rate = virial_rate(&u, &pair, &params, 1.0).unwrap();
            let rhs = virial_rhs(&u, &pair, &params, e0).unwrap();
            assert!(rate <= rhs.bound() + 1e-9, "{rate} {rhs:?}");
        }
    }

    #[test]
    fn mass_critical_main_term() {
        let params = make_params(2, 2.0, 0.3).unwrap();
        let norms = Norms { l2: 1.0, grad_l2: 1.3, lap_l2: 2.1 };
        let main = virial_main(&norms, 0.7, &params);
        assert_eq!(main, 16.0 * 0.7 - 4.0 * 0.3 * 1.3f64.powi(2));
    }

    #[test]
    fn nonlinear_defect_vanishes_inside() {
        let grid = make_grid(3, 30.0, 192).unwrap();
        let pair = mastercutoff_pair(8.0, CutoffKind::AppendixB, &grid).unwrap();
        let params = make_params(3, 2.0, 0.0).unwrap();
        let u = Field::from_real_fn(grid, |r| if r < 7.5 { (1.0 - (r / 7.5).powi(2)).powi(4) } else { 0.0 });
        let rhs = virial_rhs(&u, &pair, &params, energy(&u, &params)).unwrap();
        assert_eq!(rhs.nonlinear_defect, 0.0);
    }

    #[test]
    fn bivariance_routes_agree() {
        for kind in [CutoffKind::Generic, CutoffKind::AppendixB] {
            for d in [3usize, 5] {
                let grid = make_grid(d, 40.0, 320).unwrap();
                let pair = mastercutoff_pair(3.0, kind, &grid).unwrap();
                let params = make_params(d, 1.0, 0.0).unwrap();
                let u = packet(&grid, 0.2, 2.5);
                let v = riesz_bivariance(&u, &pair).unwrap();
                let vo = riesz_bivariance_oracle(&u, &pair).unwrap();
                assert!(v > 0.0 && (v - vo).abs() < 1e-5 * v, "{kind:?} d={d}: {v} {vo}");
                let n = commutator_nr(&u, &pair, &params).unwrap();
                let no = commutator_nr_oracle(&u, &pair, &params).unwrap();
                assert!((n - no).abs() < 1e-5 * n.abs().max(1e-3), "{kind:?} d={d}: {n} {no}");
            }
        }
    }

    #[test]
    fn low_dimension_rejected() {
        let grid = make_grid(2, 20.0, 64).unwrap();
        let pair = mastercutoff_pair(3.0, CutoffKind::Generic, &grid).unwrap();
        let u = packet(&grid, 0.1, 2.0);
        assert!(matches!(riesz_bivariance(&u, &pair), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn strauss_margin_of_zero() {
        let grid = make_grid(3, 20.0, 64).unwrap();
        let m = strauss_margin(&Field::zeros(grid));
        assert_eq!(m.h1, 0.0);
        assert_eq!(m.h2, 0.0);
    }

    #[test]
    fn free_law_at_zero() {
        let grid = make_grid(3, 40.0, 256).unwrap();
        let pair = mastercutoff_pair(10.0, CutoffKind::Generic, &grid).unwrap();
        let u = packet(&grid, 0.0, 1.0);
        let v0 = riesz_bivariance(&u, &pair).unwrap();
        assert_eq!(free_bivariance_prediction(&u, &pair, 0.0).unwrap(), v0);
        let lap = u.norms().lap_l2.powi(2);
        assert_eq!(free_bivariance_prediction(&u, &pair, 0.5).unwrap(), v0 + 16.0 * lap * 0.25);
    }
}
